#ifndef IPFIX_ATTENTION_NET_HPP
#define IPFIX_ATTENTION_NET_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ipfix/policy.hpp"
#include "ipfix/prng.hpp"

namespace ipfix {

template <typename Scalar>
using DynMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DynVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;  // running = m*running + (1-m)*batch

// Learnable state of the fixing policy. All tensors are matrices; row
// vectors (biases, batch-norm parameters) are stored 1 x k. Activations are
// laid out row-wise, so a linear layer computes X * W + b with
// W of shape (in x out).
//
// for_each_tensor visits every tensor in a fixed manifest order; weight
// initialisation, the optimiser, serialisation and gradient checks all
// iterate in that order, which keeps them aligned and reproducible.
template <typename Scalar>
struct PolicyWeights {
  using Mat = DynMat<Scalar>;

  struct BatchNorm {
    Mat gamma, beta;          // trained scale and shift, 1 x d
    Mat run_mean, run_var;    // inference statistics, 1 x d
  };

  struct Block {
    Mat Wq, Wk, Wv, Wo;       // attention projections, d x d
    BatchNorm bn1;
    Mat W1, b1, W2, b2;       // feed-forward pair
    BatchNorm bn2;
  };

  PolicyConfig config;
  bool inference_mode = true;
  Mat W_in, b_in;             // node projection into the attention width
  std::vector<Block> blocks;
  std::vector<Mat> mlp_W, mlp_b;  // hidden chain plus the 1-wide output

  template <typename F>
  void for_each_tensor(F&& f) {
    if (config.use_attention) {
      f("input.W", W_in);
      f("input.b", b_in);
      for (std::size_t l = 0; l < blocks.size(); ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        Block& blk = blocks[l];
        f(p + "attn.Wq", blk.Wq);
        f(p + "attn.Wk", blk.Wk);
        f(p + "attn.Wv", blk.Wv);
        f(p + "attn.Wo", blk.Wo);
        f(p + "bn1.gamma", blk.bn1.gamma);
        f(p + "bn1.beta", blk.bn1.beta);
        f(p + "bn1.run_mean", blk.bn1.run_mean);
        f(p + "bn1.run_var", blk.bn1.run_var);
        f(p + "ff.W1", blk.W1);
        f(p + "ff.b1", blk.b1);
        f(p + "ff.W2", blk.W2);
        f(p + "ff.b2", blk.b2);
        f(p + "bn2.gamma", blk.bn2.gamma);
        f(p + "bn2.beta", blk.bn2.beta);
        f(p + "bn2.run_mean", blk.bn2.run_mean);
        f(p + "bn2.run_var", blk.bn2.run_var);
      }
    }
    for (std::size_t k = 0; k < mlp_W.size(); ++k) {
      const std::string p = "mlp." + std::to_string(k) + ".";
      f(p + "W", mlp_W[k]);
      f(p + "b", mlp_b[k]);
    }
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<PolicyWeights*>(this)->for_each_tensor(
        [&f](const std::string& name, Mat& tensor) {
          f(name, static_cast<const Mat&>(tensor));
        });
  }

  // Allocate every tensor with the right shape, filled with zeros.
  static PolicyWeights zeros(const PolicyConfig& cfg) {
    cfg.validate();
    PolicyWeights w;
    w.config = cfg;
    if (cfg.use_attention) {
      w.W_in = Mat::Zero(cfg.node_dim(), cfg.d_model);
      w.b_in = Mat::Zero(1, cfg.d_model);
      w.blocks.resize(static_cast<std::size_t>(cfg.layers));
      for (Block& blk : w.blocks) {
        blk.Wq = Mat::Zero(cfg.d_model, cfg.d_model);
        blk.Wk = Mat::Zero(cfg.d_model, cfg.d_model);
        blk.Wv = Mat::Zero(cfg.d_model, cfg.d_model);
        blk.Wo = Mat::Zero(cfg.d_model, cfg.d_model);
        for (auto* bn : {&blk.bn1, &blk.bn2}) {
          bn->gamma = Mat::Zero(1, cfg.d_model);
          bn->beta = Mat::Zero(1, cfg.d_model);
          bn->run_mean = Mat::Zero(1, cfg.d_model);
          bn->run_var = Mat::Zero(1, cfg.d_model);
        }
        blk.W1 = Mat::Zero(cfg.d_model, cfg.d_ff);
        blk.b1 = Mat::Zero(1, cfg.d_ff);
        blk.W2 = Mat::Zero(cfg.d_ff, cfg.d_model);
        blk.b2 = Mat::Zero(1, cfg.d_model);
      }
    }
    int in_dim = cfg.mlp_input_dim();
    for (std::size_t k = 0; k <= cfg.mlp_dims.size(); ++k) {
      const int out_dim = k < cfg.mlp_dims.size() ? cfg.mlp_dims[k] : 1;
      w.mlp_W.push_back(Mat::Zero(in_dim, out_dim));
      w.mlp_b.push_back(Mat::Zero(1, out_dim));
      in_dim = out_dim;
    }
    return w;
  }

  // Fresh weights: linear tensors (weights and their biases) uniform in
  // +-1/sqrt(fan_in), batch-norm at identity. Values are drawn from
  // cfg.seed in manifest order, skipping the constant batch-norm tensors,
  // so initialisation is reproducible across platforms.
  static PolicyWeights init(const PolicyConfig& cfg) {
    PolicyWeights w = zeros(cfg);
    Rng rng(cfg.seed);
    auto fill = [&rng](Mat& tensor, double fan_in) {
      const double limit = 1.0 / std::sqrt(fan_in);
      for (Eigen::Index r = 0; r < tensor.rows(); ++r)
        for (Eigen::Index c = 0; c < tensor.cols(); ++c)
          tensor(r, c) = static_cast<Scalar>(rng.uniform(-limit, limit));
    };
    auto identity_bn = [](BatchNorm& bn) {
      bn.gamma.setOnes();
      bn.beta.setZero();
      bn.run_mean.setZero();
      bn.run_var.setOnes();
    };
    if (cfg.use_attention) {
      fill(w.W_in, cfg.node_dim());
      fill(w.b_in, cfg.node_dim());
      for (Block& blk : w.blocks) {
        fill(blk.Wq, cfg.d_model);
        fill(blk.Wk, cfg.d_model);
        fill(blk.Wv, cfg.d_model);
        fill(blk.Wo, cfg.d_model);
        identity_bn(blk.bn1);
        fill(blk.W1, cfg.d_model);
        fill(blk.b1, cfg.d_model);
        fill(blk.W2, cfg.d_ff);
        fill(blk.b2, cfg.d_ff);
        identity_bn(blk.bn2);
      }
    }
    for (std::size_t k = 0; k < w.mlp_W.size(); ++k) {
      fill(w.mlp_W[k], static_cast<double>(w.mlp_W[k].rows()));
      fill(w.mlp_b[k], static_cast<double>(w.mlp_W[k].rows()));
    }
    return w;
  }

  template <typename Other>
  PolicyWeights<Other> cast() const {
    PolicyWeights<Other> out = PolicyWeights<Other>::zeros(config);
    out.inference_mode = inference_mode;
    std::vector<DynMat<Other>*> dst;
    out.for_each_tensor([&dst](const std::string&, DynMat<Other>& t) {
      dst.push_back(&t);
    });
    std::size_t i = 0;
    for_each_tensor([&dst, &i](const std::string&, const Mat& t) {
      *dst[i++] = t.template cast<Other>();
    });
    return out;
  }
};

namespace detail {

template <typename Scalar>
struct BnCache {
  DynMat<Scalar> xhat;                 // rows x d
  DynMat<Scalar> invstd;               // 1 x d
  DynMat<Scalar> batch_mean, batch_var;  // 1 x d, training mode only
};

template <typename Scalar>
struct BlockCache {
  DynMat<Scalar> H_in;   // block input
  DynMat<Scalar> Q, K, V;
  DynMat<Scalar> P;      // softmax rows, (u * heads * alpha) x alpha
  DynMat<Scalar> Acat;   // concatenated head outputs
  DynMat<Scalar> R1;     // residual sum before bn1
  BnCache<Scalar> bn1;
  DynMat<Scalar> B1;     // bn1 output
  DynMat<Scalar> F1;     // feed-forward pre-activation
  DynMat<Scalar> F1r;    // after relu
  DynMat<Scalar> R2;     // residual sum before bn2
  BnCache<Scalar> bn2;
  DynMat<Scalar> B2;     // block output
};

// Batch norm over the row dimension. Returns the normalised output and
// fills the cache; in training mode the batch statistics are recorded so
// the caller can fold them into the running estimates.
template <typename Scalar>
DynMat<Scalar> batch_norm(const DynMat<Scalar>& x,
                          const typename PolicyWeights<Scalar>::BatchNorm& bn,
                          bool training, BnCache<Scalar>& cache) {
  const auto rows = static_cast<Scalar>(x.rows());
  DynMat<Scalar> mean, var;
  if (training) {
    mean = x.colwise().mean();
    DynMat<Scalar> centered = x.rowwise() - mean.row(0);
    var = centered.array().square().colwise().sum().matrix() / rows;
    cache.batch_mean = mean;
    cache.batch_var = var;
  } else {
    mean = bn.run_mean;
    var = bn.run_var;
  }
  cache.invstd = (var.array() + Scalar(kBnEps)).rsqrt().matrix();
  DynMat<Scalar> centred = x.rowwise() - mean.row(0);
  cache.xhat =
      (centred.array().rowwise() * cache.invstd.row(0).array()).matrix();
  return (cache.xhat.array().rowwise() * bn.gamma.row(0).array())
             .matrix()
             .rowwise() +
         bn.beta.row(0);
}

}  // namespace detail

// Everything the backward pass needs, captured during forward evaluation.
template <typename Scalar>
struct ForwardCache {
  bool training = false;
  Eigen::Index samples = 0;
  DynMat<Scalar> Z;  // embedded input, (u * alpha) x node_dim
  DynMat<Scalar> H0; // after input projection
  std::vector<detail::BlockCache<Scalar>> blocks;
  DynMat<Scalar> zbar;              // flattened features, u x mlp_input
  std::vector<DynMat<Scalar>> mlp_pre;   // pre-activations per mlp layer
  std::vector<DynMat<Scalar>> mlp_act;   // inputs per mlp layer
  DynVec<Scalar> logits;
  DynVec<Scalar> probs;
};

// Evaluate the policy on a batch of traces (one row per variable, beta
// columns). Pure with respect to the weights: in training mode the fresh
// batch-norm statistics land in the cache, not in `w`; commit them with
// apply_running_updates once the step is accepted.
template <typename Scalar>
DynVec<Scalar> policy_forward(const PolicyWeights<Scalar>& w,
                              const DynMat<Scalar>& traces, bool training,
                              ForwardCache<Scalar>* cache_out = nullptr) {
  using Mat = DynMat<Scalar>;
  const PolicyConfig& cfg = w.config;
  cfg.validate();
  if (traces.cols() != cfg.beta)
    throw ValidationError("policy_forward: traces must have beta columns");
  const Eigen::Index u = traces.rows();
  const int alpha = cfg.alpha();
  const Eigen::Index rows = u * alpha;

  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& cache = cache_out ? *cache_out : local;
  cache = ForwardCache<Scalar>();
  cache.training = training;
  cache.samples = u;

  // Node features: sliding windows with positional encodings appended.
  Mat pe = positional_encoding<Scalar>(alpha, cfg.window);
  cache.Z.resize(rows, cfg.node_dim());
  for (Eigen::Index s = 0; s < u; ++s)
    for (int k = 0; k < alpha; ++k) {
      cache.Z.block(s * alpha + k, 0, 1, cfg.window) =
          traces.block(s, k * cfg.stride, 1, cfg.window);
      cache.Z.block(s * alpha + k, cfg.window, 1, cfg.window) = pe.row(k);
    }

  Mat features;  // u x mlp_input_dim
  if (cfg.use_attention) {
    const int dh = cfg.d_model / cfg.heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    cache.H0 = (cache.Z * w.W_in).rowwise() + w.b_in.row(0);
    cache.blocks.resize(w.blocks.size());
    Mat H = cache.H0;
    for (std::size_t l = 0; l < w.blocks.size(); ++l) {
      const auto& blk = w.blocks[l];
      auto& bc = cache.blocks[l];
      bc.H_in = H;
      bc.Q.noalias() = H * blk.Wq;
      bc.K.noalias() = H * blk.Wk;
      bc.V.noalias() = H * blk.Wv;
      bc.P.resize(u * cfg.heads * alpha, alpha);
      bc.Acat.resize(rows, cfg.d_model);
      for (Eigen::Index s = 0; s < u; ++s) {
        for (int h = 0; h < cfg.heads; ++h) {
          auto Qs = bc.Q.block(s * alpha, h * dh, alpha, dh);
          auto Ks = bc.K.block(s * alpha, h * dh, alpha, dh);
          auto Vs = bc.V.block(s * alpha, h * dh, alpha, dh);
          Mat S = (Qs * Ks.transpose()) * scale;
          // Row-wise softmax, stabilised against overflow.
          for (int r = 0; r < alpha; ++r) {
            const Scalar mx = S.row(r).maxCoeff();
            S.row(r) = (S.row(r).array() - mx).exp();
            S.row(r) /= S.row(r).sum();
          }
          bc.P.block((s * cfg.heads + h) * alpha, 0, alpha, alpha) = S;
          bc.Acat.block(s * alpha, h * dh, alpha, dh).noalias() = S * Vs;
        }
      }
      bc.R1 = bc.H_in + bc.Acat * blk.Wo;
      bc.B1 = detail::batch_norm<Scalar>(bc.R1, blk.bn1, training, bc.bn1);
      bc.F1 = (bc.B1 * blk.W1).rowwise() + blk.b1.row(0);
      bc.F1r = bc.F1.cwiseMax(Scalar(0));
      bc.R2 = bc.B1 + ((bc.F1r * blk.W2).rowwise() + blk.b2.row(0));
      bc.B2 = detail::batch_norm<Scalar>(bc.R2, blk.bn2, training, bc.bn2);
      H = bc.B2;
    }
    features.resize(u, cfg.mlp_input_dim());
    for (Eigen::Index s = 0; s < u; ++s)
      for (int k = 0; k < alpha; ++k)
        features.block(s, k * cfg.d_model, 1, cfg.d_model) =
            H.row(s * alpha + k);
  } else {
    features.resize(u, cfg.mlp_input_dim());
    for (Eigen::Index s = 0; s < u; ++s)
      for (int k = 0; k < alpha; ++k)
        features.block(s, k * cfg.node_dim(), 1, cfg.node_dim()) =
            cache.Z.row(s * alpha + k);
  }
  cache.zbar = features;

  // Head: hidden layers with relu between them, then a linear output unit.
  Mat act = features;
  cache.mlp_act.clear();
  cache.mlp_pre.clear();
  const std::size_t n_mlp = w.mlp_W.size();
  for (std::size_t k = 0; k < n_mlp; ++k) {
    cache.mlp_act.push_back(act);
    Mat pre = (act * w.mlp_W[k]).rowwise() + w.mlp_b[k].row(0);
    cache.mlp_pre.push_back(pre);
    const bool relu_here = k + 2 < n_mlp;  // between hidden layers only
    act = relu_here ? pre.cwiseMax(Scalar(0)) : pre;
  }
  cache.logits = act.col(0);
  cache.probs =
      (Scalar(1) / (Scalar(1) + (-cache.logits.array()).exp())).matrix();
  return cache.probs;
}

// Fold the batch statistics recorded in `cache` into the running
// estimates: running = momentum * running + (1 - momentum) * batch.
template <typename Scalar>
void apply_running_updates(PolicyWeights<Scalar>& w,
                           const ForwardCache<Scalar>& cache) {
  if (!cache.training || !w.config.use_attention) return;
  const Scalar m = Scalar(kBnMomentum);
  for (std::size_t l = 0; l < w.blocks.size(); ++l) {
    auto& blk = w.blocks[l];
    const auto& bc = cache.blocks[l];
    blk.bn1.run_mean = m * blk.bn1.run_mean + (1 - m) * bc.bn1.batch_mean;
    blk.bn1.run_var = m * blk.bn1.run_var + (1 - m) * bc.bn1.batch_var;
    blk.bn2.run_mean = m * blk.bn2.run_mean + (1 - m) * bc.bn2.batch_mean;
    blk.bn2.run_var = m * blk.bn2.run_var + (1 - m) * bc.bn2.batch_var;
  }
}

namespace detail {

// Gradient of batch norm with respect to its input; also accumulates the
// parameter gradients. Training mode couples rows through the batch
// statistics; inference mode is an affine map.
template <typename Scalar>
DynMat<Scalar> batch_norm_backward(
    const DynMat<Scalar>& dout,
    const typename PolicyWeights<Scalar>::BatchNorm& bn,
    const BnCache<Scalar>& cache, bool training, DynMat<Scalar>& dgamma,
    DynMat<Scalar>& dbeta) {
  dgamma = (dout.array() * cache.xhat.array()).colwise().sum().matrix();
  dbeta = dout.colwise().sum();
  DynMat<Scalar> scale =
      (bn.gamma.row(0).array() * cache.invstd.row(0).array()).matrix();
  if (!training)
    return (dout.array().rowwise() * scale.row(0).array()).matrix();
  const auto rows = static_cast<Scalar>(dout.rows());
  DynMat<Scalar> mean_dout = dout.colwise().mean();
  DynMat<Scalar> mean_dx =
      (dout.array() * cache.xhat.array()).colwise().sum().matrix() / rows;
  DynMat<Scalar> inner =
      dout.rowwise() - mean_dout.row(0);
  inner -= (cache.xhat.array().rowwise() * mean_dx.row(0).array()).matrix();
  return (inner.array().rowwise() * scale.row(0).array()).matrix();
}

}  // namespace detail

// Gradients of a scalar loss with respect to every tensor, given the
// gradient of the loss with respect to the logits. Returns a weight
// structure holding d(loss)/d(tensor) in the matching slots (running
// statistics receive zero; they are not trained).
template <typename Scalar>
PolicyWeights<Scalar> policy_backward(const PolicyWeights<Scalar>& w,
                                      const ForwardCache<Scalar>& cache,
                                      const DynVec<Scalar>& dlogits) {
  using Mat = DynMat<Scalar>;
  const PolicyConfig& cfg = w.config;
  const Eigen::Index u = cache.samples;
  const int alpha = cfg.alpha();
  PolicyWeights<Scalar> g = PolicyWeights<Scalar>::zeros(cfg);

  // Head backward.
  const std::size_t n_mlp = w.mlp_W.size();
  Mat dact = dlogits;
  for (std::size_t k = n_mlp; k-- > 0;) {
    const bool relu_here = k + 2 < n_mlp;
    Mat dpre = dact;
    if (relu_here)
      dpre = (cache.mlp_pre[k].array() > Scalar(0))
                 .select(dact, Mat::Zero(dact.rows(), dact.cols()));
    g.mlp_W[k].noalias() = cache.mlp_act[k].transpose() * dpre;
    g.mlp_b[k] = dpre.colwise().sum();
    dact = dpre * w.mlp_W[k].transpose();
  }
  Mat dzbar = dact;  // u x mlp_input_dim

  if (!cfg.use_attention) return g;

  const int dh = cfg.d_model / cfg.heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  // Scatter the flattened feature gradient back to node rows.
  Mat dH(u * alpha, cfg.d_model);
  for (Eigen::Index s = 0; s < u; ++s)
    for (int k = 0; k < alpha; ++k)
      dH.row(s * alpha + k) = dzbar.block(s, k * cfg.d_model, 1, cfg.d_model);

  for (std::size_t l = w.blocks.size(); l-- > 0;) {
    const auto& blk = w.blocks[l];
    const auto& bc = cache.blocks[l];
    auto& gb = g.blocks[l];

    Mat dR2 = detail::batch_norm_backward<Scalar>(
        dH, blk.bn2, bc.bn2, cache.training, gb.bn2.gamma, gb.bn2.beta);
    Mat dB1 = dR2;  // residual branch
    // feed-forward branch
    gb.W2.noalias() = bc.F1r.transpose() * dR2;
    gb.b2 = dR2.colwise().sum();
    Mat dF1r = dR2 * blk.W2.transpose();
    Mat dF1 = (bc.F1.array() > Scalar(0))
                  .select(dF1r, Mat::Zero(dF1r.rows(), dF1r.cols()));
    gb.W1.noalias() = bc.B1.transpose() * dF1;
    gb.b1 = dF1.colwise().sum();
    dB1.noalias() += dF1 * blk.W1.transpose();

    Mat dR1 = detail::batch_norm_backward<Scalar>(
        dB1, blk.bn1, bc.bn1, cache.training, gb.bn1.gamma, gb.bn1.beta);
    Mat dH_in = dR1;  // residual branch
    gb.Wo.noalias() = bc.Acat.transpose() * dR1;
    Mat dAcat = dR1 * blk.Wo.transpose();

    Mat dQ = Mat::Zero(u * alpha, cfg.d_model);
    Mat dK = Mat::Zero(u * alpha, cfg.d_model);
    Mat dV = Mat::Zero(u * alpha, cfg.d_model);
    for (Eigen::Index s = 0; s < u; ++s) {
      for (int h = 0; h < cfg.heads; ++h) {
        auto P = bc.P.block((s * cfg.heads + h) * alpha, 0, alpha, alpha);
        auto Vs = bc.V.block(s * alpha, h * dh, alpha, dh);
        auto Qs = bc.Q.block(s * alpha, h * dh, alpha, dh);
        auto Ks = bc.K.block(s * alpha, h * dh, alpha, dh);
        auto dO = dAcat.block(s * alpha, h * dh, alpha, dh);
        dV.block(s * alpha, h * dh, alpha, dh).noalias() = P.transpose() * dO;
        Mat dP = dO * Vs.transpose();
        // softmax backward, row-wise
        Mat dS(alpha, alpha);
        for (int r = 0; r < alpha; ++r) {
          const Scalar dot = dP.row(r).dot(P.row(r));
          dS.row(r) =
              (P.row(r).array() * (dP.row(r).array() - dot)).matrix();
        }
        dQ.block(s * alpha, h * dh, alpha, dh).noalias() =
            (dS * Ks) * scale;
        dK.block(s * alpha, h * dh, alpha, dh).noalias() =
            (dS.transpose() * Qs) * scale;
      }
    }
    gb.Wq.noalias() = bc.H_in.transpose() * dQ;
    gb.Wk.noalias() = bc.H_in.transpose() * dK;
    gb.Wv.noalias() = bc.H_in.transpose() * dV;
    dH_in.noalias() += dQ * blk.Wq.transpose();
    dH_in.noalias() += dK * blk.Wk.transpose();
    dH_in.noalias() += dV * blk.Wv.transpose();
    dH = dH_in;
  }

  g.W_in.noalias() = cache.Z.transpose() * dH;
  g.b_in = dH.colwise().sum();
  return g;
}

}  // namespace ipfix

#endif  // IPFIX_ATTENTION_NET_HPP
