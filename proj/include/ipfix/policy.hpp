#ifndef IPFIX_POLICY_HPP
#define IPFIX_POLICY_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ipfix/instance.hpp"

namespace ipfix {

// Architecture of the fixing policy. A variable's last `beta` iterate
// values are cut into `alpha()` overlapping windows of length `window`
// (one per stride step); each window becomes one attention node.
struct PolicyConfig {
  int beta = 100;    // trace length consumed per decision
  int window = 10;   // values per node
  int stride = 10;   // offset between consecutive windows
  int d_model = 128; // attention width
  int heads = 8;     // attention heads
  int layers = 2;    // attention blocks
  int d_ff = 512;    // feed-forward hidden width
  std::vector<int> mlp_dims = {256, 128, 16};  // head widths before the output
  bool use_attention = true;
  std::uint64_t seed = 0;  // weight initialisation seed

  int alpha() const { return (beta - window) / stride + 1; }
  int node_dim() const { return 2 * window; }  // window values + encoding
  int mlp_input_dim() const {
    return use_attention ? alpha() * d_model : alpha() * node_dim();
  }

  // Default geometry for a given trace length: window and stride at a
  // tenth of the trace, giving ten non-overlapping nodes.
  static PolicyConfig for_beta(int beta) {
    PolicyConfig cfg;
    cfg.beta = beta;
    cfg.window = std::max(1, beta / 10);
    cfg.stride = cfg.window;
    return cfg;
  }

  void validate() const {
    if (beta < 2) throw ValidationError("policy: beta must be at least 2");
    if (window < 1 || window > beta)
      throw ValidationError("policy: window must lie in [1, beta]");
    if (stride < 1) throw ValidationError("policy: stride must be positive");
    if ((beta - window) % stride != 0)
      throw ValidationError(
          "policy: windows must tile the trace ((beta - window) % stride == 0)");
    if (d_model < 1 || heads < 1 || layers < 0 || d_ff < 1)
      throw ValidationError("policy: dimensions must be positive");
    if (d_model % heads != 0)
      throw ValidationError("policy: d_model must be divisible by heads");
    if (mlp_dims.empty())
      throw ValidationError("policy: mlp_dims must not be empty");
    for (int d : mlp_dims)
      if (d < 1) throw ValidationError("policy: mlp_dims must be positive");
  }
};

// Sliding windows of one trace, one row per node.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> embed_windows(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& trace,
    const PolicyConfig& cfg) {
  if (trace.size() != cfg.beta)
    throw ValidationError("policy: trace length must equal beta");
  const int alpha = cfg.alpha();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(alpha, cfg.window);
  for (int k = 0; k < alpha; ++k)
    out.row(k) = trace.segment(k * cfg.stride, cfg.window).transpose();
  return out;
}

// Sinusoidal positional encoding for node positions 1..alpha:
//   pe(k, 2j)   = sin(k / 10000^( 2j / width))
//   pe(k, 2j+1) = cos(k / 10000^( 2j / width))
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> positional_encoding(
    int alpha, int width) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pe(alpha, width);
  for (int k = 0; k < alpha; ++k) {
    const double pos = static_cast<double>(k + 1);
    for (int c = 0; c < width; ++c) {
      const int pair = c / 2;
      const double angle =
          pos / std::pow(10000.0, (2.0 * pair) / static_cast<double>(width));
      pe(k, c) = static_cast<Scalar>((c % 2 == 0) ? std::sin(angle)
                                                  : std::cos(angle));
    }
  }
  return pe;
}

// Windows with their positional encodings appended column-wise: the
// alpha x (2 * window) node-feature matrix fed to the network.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> embed_with_positions(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& trace,
    const PolicyConfig& cfg) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat windows = embed_windows(trace, cfg);
  Mat pe = positional_encoding<Scalar>(cfg.alpha(), cfg.window);
  Mat out(cfg.alpha(), cfg.node_dim());
  out << windows, pe;
  return out;
}

// Training-free baseline policy: the score of a variable is the fraction
// of its trace spent above 1/2.
inline Eigen::VectorXd heuristic_policy(const Eigen::MatrixXd& windows) {
  Eigen::VectorXd out(windows.rows());
  for (Index v = 0; v < windows.rows(); ++v)
    out[v] = (windows.row(v).array() > 0.5).count() /
             static_cast<double>(windows.cols());
  return out;
}

}  // namespace ipfix

#endif  // IPFIX_POLICY_HPP
