#ifndef IPFIX_TRAINING_HPP
#define IPFIX_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ipfix/admm.hpp"
#include "ipfix/attention_net.hpp"
#include "ipfix/instance.hpp"

namespace ipfix {

// One supervised example: the trace of a variable over one fixing round of
// an expert run, the variable's value in the rounded expert solution, the
// round-based weight, and where the sample came from.
struct Sample {
  Eigen::VectorXf trace;  // beta iterate values, oldest first
  std::uint8_t label = 0;
  float weight = 1.0f;
  std::uint32_t episode = 0;
  std::uint32_t round = 0;
  std::uint32_t variable = 0;
};

struct Dataset {
  int beta = 0;
  std::vector<Sample> samples;
};

// Later rounds carry less signal about the final solution, so round r is
// weighted 1 / (r + 1).
inline double sample_weight(int round) {
  return 1.0 / (static_cast<double>(round) + 1.0);
}

inline constexpr double kProbClamp = 1e-7;

// Weighted binary cross-entropy over a batch:
//   loss = -(1/M) sum_s w_s [a_s log p_s + (1 - a_s) log(1 - p_s)]
// with probabilities clamped to [1e-7, 1 - 1e-7] before the logs. M is the
// realized batch size. When dlogits is given it receives the exact
// gradient with respect to the pre-sigmoid logits; where the clamp binds
// the gradient is zero, matching the clamped loss surface.
template <typename Scalar>
Scalar wbce_loss(const DynVec<Scalar>& probs, const DynVec<Scalar>& labels,
                 const DynVec<Scalar>& weights,
                 DynVec<Scalar>* dlogits = nullptr) {
  const Eigen::Index m = probs.size();
  if (labels.size() != m || weights.size() != m)
    throw ValidationError("wbce_loss: size mismatch");
  if (m == 0) throw ValidationError("wbce_loss: empty batch");
  const Scalar lo = Scalar(kProbClamp);
  const Scalar hi = Scalar(1) - Scalar(kProbClamp);

  Scalar loss = 0;
  if (dlogits) dlogits->resize(m);
  for (Eigen::Index s = 0; s < m; ++s) {
    const Scalar p = probs[s];
    const Scalar pc = std::min(std::max(p, lo), hi);
    const Scalar a = labels[s];
    const Scalar w = weights[s];
    loss -= w * (a * std::log(pc) + (Scalar(1) - a) * std::log(Scalar(1) - pc));
    if (dlogits) {
      // d/dlogit of the clamped loss: (p - a) through sigmoid where the
      // clamp is inactive, zero where it saturates the loss.
      const bool clamped = p < lo || p > hi;
      (*dlogits)[s] = clamped ? Scalar(0) : w * (p - a) / Scalar(m);
    }
  }
  return loss / Scalar(m);
}

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 1e-4;
  int batch_size = 256;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int gamma = 10;  // fixing rounds observed per expert episode
  std::uint64_t seed = 0;  // shuffling seed

  void validate() const {
    if (epochs < 1) throw ValidationError("train: epochs must be positive");
    if (learning_rate <= 0.0)
      throw ValidationError("train: learning rate must be positive");
    if (batch_size < 1)
      throw ValidationError("train: batch size must be positive");
    if (gamma < 1) throw ValidationError("train: gamma must be positive");
  }
};

// Expert demonstrations: run the plain solver on each instance, record the
// first gamma * beta iterates, and label every variable with its value in
// the rounded final solution. Episodes that converge early contribute only
// their completed rounds. Episode e runs with solver seed params.seed + e.
inline Dataset collect_dataset(const std::vector<IpInstance>& instances,
                               const AdmmParams& params, int beta, int gamma) {
  if (beta < 2) throw ValidationError("collect: beta must be at least 2");
  if (gamma < 1) throw ValidationError("collect: gamma must be positive");
  if (static_cast<long>(gamma) * beta > params.max_iters)
    throw ValidationError(
        "collect: gamma * beta exceeds the solver iteration budget");

  Dataset data;
  data.beta = beta;
  const long horizon = static_cast<long>(gamma) * beta;
  for (std::size_t e = 0; e < instances.size(); ++e) {
    const IpInstance& inst = instances[e];
    AdmmParams ep = params;
    ep.seed = params.seed + e;

    Eigen::MatrixXf iterates(horizon, inst.n);
    Solution sol = solve(inst, ep, [&](long t, const Eigen::VectorXd& x) {
      if (t <= horizon) iterates.row(t - 1) = x.transpose().cast<float>();
    });

    const long rounds =
        std::min<long>(gamma, sol.iterations / beta);  // completed only
    for (long r = 0; r < rounds; ++r) {
      for (Index i = 0; i < inst.n; ++i) {
        Sample s;
        s.trace = iterates.block(r * beta, i, beta, 1);
        s.label = sol.x[i] >= 0.5 ? 1 : 0;
        s.weight = static_cast<float>(sample_weight(static_cast<int>(r)));
        s.episode = static_cast<std::uint32_t>(e);
        s.round = static_cast<std::uint32_t>(r);
        s.variable = static_cast<std::uint32_t>(i);
        data.samples.push_back(std::move(s));
      }
    }
  }
  return data;
}

namespace detail {

// One Adam step over every trainable tensor. Batch-norm running statistics
// are skipped; they are maintained by apply_running_updates instead.
template <typename Scalar>
void adam_step(PolicyWeights<Scalar>& w, const PolicyWeights<Scalar>& grads,
               PolicyWeights<Scalar>& m, PolicyWeights<Scalar>& v, long step,
               const TrainConfig& cfg) {
  std::vector<const DynMat<Scalar>*> gs;
  grads.for_each_tensor([&gs](const std::string&, const DynMat<Scalar>& t) {
    gs.push_back(&t);
  });
  std::vector<DynMat<Scalar>*> ms, vs;
  m.for_each_tensor(
      [&ms](const std::string&, DynMat<Scalar>& t) { ms.push_back(&t); });
  v.for_each_tensor(
      [&vs](const std::string&, DynMat<Scalar>& t) { vs.push_back(&t); });

  const Scalar b1 = Scalar(cfg.adam_beta1);
  const Scalar b2 = Scalar(cfg.adam_beta2);
  const Scalar correction1 =
      Scalar(1) - std::pow(b1, static_cast<Scalar>(step));
  const Scalar correction2 =
      Scalar(1) - std::pow(b2, static_cast<Scalar>(step));
  const Scalar lr = Scalar(cfg.learning_rate);
  const Scalar eps = Scalar(cfg.adam_eps);

  std::size_t i = 0;
  w.for_each_tensor([&](const std::string& name, DynMat<Scalar>& t) {
    const std::size_t k = i++;
    if (name.find("run_") != std::string::npos) return;
    DynMat<Scalar>& mk = *ms[k];
    DynMat<Scalar>& vk = *vs[k];
    const DynMat<Scalar>& gk = *gs[k];
    mk = b1 * mk + (Scalar(1) - b1) * gk;
    vk = (b2 * vk.array() + (Scalar(1) - b2) * gk.array().square()).matrix();
    t.array() -= lr * (mk.array() / correction1) /
                 ((vk.array() / correction2).sqrt() + eps);
  });
}

}  // namespace detail

struct TrainResult {
  PolicyWeights<float> weights;
  std::vector<double> epoch_losses;  // weighted mean loss per epoch
};

// Behaviour cloning: minimise the weighted cross-entropy between policy
// probabilities and expert labels with Adam over shuffled mini-batches.
// Aborts with a diagnostic if the loss stops being finite.
inline TrainResult train(const Dataset& data, const PolicyConfig& policy_cfg,
                         const TrainConfig& cfg) {
  cfg.validate();
  policy_cfg.validate();
  if (data.samples.empty())
    throw ValidationError("train: dataset is empty");
  if (data.beta != policy_cfg.beta)
    throw ValidationError("train: dataset beta does not match the policy");

  const std::size_t total = data.samples.size();
  TrainResult result;
  result.weights = PolicyWeights<float>::init(policy_cfg);
  result.weights.inference_mode = false;
  PolicyWeights<float> adam_m = PolicyWeights<float>::zeros(policy_cfg);
  PolicyWeights<float> adam_v = PolicyWeights<float>::zeros(policy_cfg);

  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  Rng shuffle_rng(cfg.seed);
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = total - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.below(i + 1);
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < total;
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count =
          std::min<std::size_t>(cfg.batch_size, total - start);
      DynMat<float> traces(count, policy_cfg.beta);
      DynVec<float> labels(count), weights(count);
      for (std::size_t k = 0; k < count; ++k) {
        const Sample& s = data.samples[order[start + k]];
        traces.row(static_cast<Eigen::Index>(k)) = s.trace.transpose();
        labels[static_cast<Eigen::Index>(k)] = static_cast<float>(s.label);
        weights[static_cast<Eigen::Index>(k)] = s.weight;
      }

      ForwardCache<float> cache;
      DynVec<float> probs =
          policy_forward<float>(result.weights, traces, true, &cache);
      DynVec<float> dlogits;
      const float loss = wbce_loss<float>(probs, labels, weights, &dlogits);
      if (!std::isfinite(loss))
        throw std::runtime_error(
            "train: loss diverged (non-finite) at step " +
            std::to_string(step + 1) + "; lower the learning rate");
      PolicyWeights<float> grads =
          policy_backward<float>(result.weights, cache, dlogits);
      apply_running_updates(result.weights, cache);
      ++step;
      detail::adam_step<float>(result.weights, grads, adam_m, adam_v, step,
                               cfg);
      loss_sum += static_cast<double>(loss) * static_cast<double>(count);
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(total));
  }

  result.weights.inference_mode = true;
  return result;
}

}  // namespace ipfix

#endif  // IPFIX_TRAINING_HPP
