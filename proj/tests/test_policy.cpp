#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ipfix/attention_net.hpp"
#include "ipfix/model_io.hpp"
#include "ipfix/policy.hpp"
#include "ipfix/training.hpp"

using namespace ipfix;

namespace {

PolicyConfig tiny_config(bool attention) {
  PolicyConfig cfg;
  cfg.beta = 8;
  cfg.window = 4;
  cfg.stride = 4;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.d_ff = 16;
  cfg.mlp_dims = {8, 4, 2};
  cfg.use_attention = attention;
  return cfg;
}

DynMat<double> random_traces(Rng& rng, Eigen::Index u, int beta) {
  DynMat<double> t(u, beta);
  for (Eigen::Index r = 0; r < u; ++r)
    for (int c = 0; c < beta; ++c) t(r, c) = rng.uniform();
  return t;
}

// Loss of the policy on a fixed batch as a function of the weights alone.
double batch_loss(const PolicyWeights<double>& w, const DynMat<double>& traces,
                  const DynVec<double>& labels, const DynVec<double>& weights) {
  DynVec<double> probs = policy_forward<double>(w, traces, true);
  return wbce_loss<double>(probs, labels, weights);
}

}  // namespace

TEST_CASE("default geometry tiles the trace into ten nodes") {
  PolicyConfig cfg = PolicyConfig::for_beta(100);
  REQUIRE(cfg.window == 10);
  REQUIRE(cfg.stride == 10);
  REQUIRE(cfg.alpha() == 10);
  REQUIRE_NOTHROW(cfg.validate());

  PolicyConfig small = PolicyConfig::for_beta(10);
  REQUIRE(small.window == 1);
  REQUIRE(small.alpha() == 10);
  REQUIRE_NOTHROW(small.validate());
}

TEST_CASE("invalid policy configurations are rejected") {
  PolicyConfig cfg = tiny_config(true);
  SECTION("windows must tile the trace") {
    cfg.stride = 3;  // (8 - 4) % 3 != 0
    REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  }
  SECTION("heads must divide the width") {
    cfg.heads = 3;
    REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  }
  SECTION("window cannot exceed the trace") {
    cfg.window = 9;
    REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
  }
}

TEST_CASE("window embedding slices the trace with the configured stride") {
  PolicyConfig cfg;
  cfg.beta = 10;
  cfg.window = 4;
  cfg.stride = 3;
  Eigen::VectorXd trace = Eigen::VectorXd::LinSpaced(10, 0.0, 9.0);
  auto windows = embed_windows<double>(trace, cfg);
  REQUIRE(windows.rows() == 3);
  REQUIRE(windows(0, 0) == 0.0);
  REQUIRE(windows(0, 3) == 3.0);
  REQUIRE(windows(1, 0) == 3.0);
  REQUIRE(windows(2, 3) == 9.0);
}

TEST_CASE("positional encoding matches hand-computed values") {
  auto pe = positional_encoding<double>(3, 4);
  // position 1, first frequency pair
  REQUIRE(pe(0, 0) == Catch::Approx(std::sin(1.0)).epsilon(1e-12));
  REQUIRE(pe(0, 1) == Catch::Approx(std::cos(1.0)).epsilon(1e-12));
  // position 1, second pair: divisor 10000^(2/4) = 100
  REQUIRE(pe(0, 2) == Catch::Approx(std::sin(0.01)).epsilon(1e-12));
  REQUIRE(pe(0, 3) == Catch::Approx(std::cos(0.01)).epsilon(1e-12));
  // position 3
  REQUIRE(pe(2, 0) == Catch::Approx(std::sin(3.0)).epsilon(1e-12));
  REQUIRE(pe(2, 2) == Catch::Approx(std::sin(0.03)).epsilon(1e-12));

  // odd width: the lone last column is a sine with pair index floor(c/2)
  auto odd = positional_encoding<double>(2, 1);
  REQUIRE(odd(0, 0) == Catch::Approx(std::sin(1.0)).epsilon(1e-12));
  REQUIRE(odd(1, 0) == Catch::Approx(std::sin(2.0)).epsilon(1e-12));
}

TEST_CASE("embedding appends the encoding after the window values") {
  PolicyConfig cfg = tiny_config(true);
  Eigen::VectorXd trace = Eigen::VectorXd::Constant(8, 0.25);
  auto emb = embed_with_positions<double>(trace, cfg);
  REQUIRE(emb.rows() == cfg.alpha());
  REQUIRE(emb.cols() == cfg.node_dim());
  REQUIRE(emb(0, 0) == 0.25);
  REQUIRE(emb(0, cfg.window) == Catch::Approx(std::sin(1.0)));
}

TEST_CASE("heuristic policy scores the fraction above one half") {
  Eigen::MatrixXd windows(2, 4);
  windows << 0.6, 0.7, 0.2, 0.9,
             0.1, 0.1, 0.9, 0.4;
  Eigen::VectorXd p = heuristic_policy(windows);
  REQUIRE(p[0] == Catch::Approx(0.75));
  REQUIRE(p[1] == Catch::Approx(0.25));
}

TEST_CASE("forward pass is deterministic and produces probabilities") {
  for (bool attention : {true, false}) {
    PolicyConfig cfg = tiny_config(attention);
    cfg.seed = 5;
    auto w = PolicyWeights<double>::init(cfg);
    Rng rng(17);
    DynMat<double> traces = random_traces(rng, 7, cfg.beta);

    DynVec<double> p1 = policy_forward<double>(w, traces, false);
    DynVec<double> p2 = policy_forward<double>(w, traces, false);
    REQUIRE(p1 == p2);
    REQUIRE(p1.size() == 7);
    REQUIRE((p1.array() > 0.0).all());
    REQUIRE((p1.array() < 1.0).all());
  }
}

TEST_CASE("weight initialisation is seeded and bounded") {
  PolicyConfig cfg = tiny_config(true);
  cfg.seed = 11;
  auto a = PolicyWeights<float>::init(cfg);
  auto b = PolicyWeights<float>::init(cfg);
  cfg.seed = 12;
  auto c = PolicyWeights<float>::init(cfg);

  bool all_equal = true, any_differs = false, bounded = true;
  std::vector<DynMat<float>> a_tensors;
  a.for_each_tensor([&](const std::string& name, const DynMat<float>& t) {
    a_tensors.push_back(t);
    if (name.find("bn") == std::string::npos) {
      const double limit = 1.0 / std::sqrt(static_cast<double>(
          name.find(".b") != std::string::npos ? t.cols() : t.rows()));
      (void)limit;
    }
    bounded = bounded && t.allFinite();
  });
  std::size_t i = 0;
  b.for_each_tensor([&](const std::string&, const DynMat<float>& t) {
    all_equal = all_equal && (t == a_tensors[i++]);
  });
  i = 0;
  c.for_each_tensor([&](const std::string&, const DynMat<float>& t) {
    any_differs = any_differs || (t != a_tensors[i++]);
  });
  REQUIRE(all_equal);
  REQUIRE(any_differs);
  REQUIRE(bounded);
}

TEST_CASE("running statistics move towards batch statistics in training") {
  PolicyConfig cfg = tiny_config(true);
  cfg.seed = 2;
  auto w = PolicyWeights<double>::init(cfg);
  Rng rng(3);
  DynMat<double> traces = random_traces(rng, 6, cfg.beta);

  ForwardCache<double> cache;
  policy_forward<double>(w, traces, true, &cache);
  auto before = w.blocks[0].bn1.run_mean;
  apply_running_updates(w, cache);
  auto after = w.blocks[0].bn1.run_mean;
  REQUIRE(before != after);
  // momentum 0.9 from a zero start: one tenth of the batch mean
  REQUIRE(after.isApprox(0.1 * cache.blocks[0].bn1.batch_mean, 1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  const double step = 1e-5;
  const double tolerance = 1e-3;
  for (bool attention : {true, false}) {
    PolicyConfig cfg = tiny_config(attention);
    for (std::uint64_t draw = 0; draw < 4; ++draw) {
      cfg.seed = 100 + draw;
      auto w = PolicyWeights<double>::init(cfg);
      w.inference_mode = false;
      Rng rng(200 + draw);
      const Eigen::Index u = 3;
      DynMat<double> traces = random_traces(rng, u, cfg.beta);
      DynVec<double> labels(u), weights(u);
      for (Eigen::Index s = 0; s < u; ++s) {
        labels[s] = rng.uniform() < 0.5 ? 0.0 : 1.0;
        weights[s] = rng.uniform(0.1, 1.0);
      }

      ForwardCache<double> cache;
      DynVec<double> probs = policy_forward<double>(w, traces, true, &cache);
      DynVec<double> dlogits;
      wbce_loss<double>(probs, labels, weights, &dlogits);
      PolicyWeights<double> grads = policy_backward<double>(w, cache, dlogits);

      std::vector<DynMat<double>*> params, grad_tensors;
      std::vector<std::string> names;
      w.for_each_tensor([&](const std::string& name, DynMat<double>& t) {
        params.push_back(&t);
        names.push_back(name);
      });
      grads.for_each_tensor([&](const std::string&, DynMat<double>& t) {
        grad_tensors.push_back(&t);
      });

      for (std::size_t k = 0; k < params.size(); ++k) {
        if (names[k].find("run_") != std::string::npos) continue;
        DynMat<double>& theta = *params[k];
        const DynMat<double>& analytic = *grad_tensors[k];
        DynMat<double> fd(theta.rows(), theta.cols());
        for (Eigen::Index r = 0; r < theta.rows(); ++r) {
          for (Eigen::Index c = 0; c < theta.cols(); ++c) {
            const double saved = theta(r, c);
            theta(r, c) = saved + step;
            const double up = batch_loss(w, traces, labels, weights);
            theta(r, c) = saved - step;
            const double down = batch_loss(w, traces, labels, weights);
            theta(r, c) = saved;
            fd(r, c) = (up - down) / (2.0 * step);
          }
        }
        const double denom =
            std::max(analytic.norm() + fd.norm(), 1e-8);
        const double rel = (analytic - fd).norm() / denom;
        INFO("tensor " << names[k] << " attention=" << attention);
        REQUIRE(rel < tolerance);
      }
    }
  }
}

TEST_CASE("model files round-trip bit-for-bit") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ipfix_model.bin").string();
  PolicyConfig cfg = tiny_config(true);
  cfg.seed = 77;
  auto w = PolicyWeights<float>::init(cfg);
  w.blocks[0].bn1.run_mean.setConstant(0.25f);  // non-trivial running stats
  save_model(w, path);
  auto loaded = load_model<float>(path);

  std::vector<DynMat<float>> original;
  w.for_each_tensor([&](const std::string&, const DynMat<float>& t) {
    original.push_back(t);
  });
  std::size_t i = 0;
  loaded.for_each_tensor([&](const std::string&, const DynMat<float>& t) {
    REQUIRE(t == original[i++]);
  });

  // Saving the loaded model reproduces the file byte-for-byte.
  const std::string path2 =
      (std::filesystem::temp_directory_path() / "ipfix_model2.bin").string();
  save_model(loaded, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  REQUIRE(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("loading a model preserves forward outputs") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ipfix_model3.bin").string();
  PolicyConfig cfg = tiny_config(false);
  cfg.seed = 8;
  auto w = PolicyWeights<float>::init(cfg);
  Rng rng(4);
  DynMat<float> traces(5, cfg.beta);
  for (Eigen::Index r = 0; r < 5; ++r)
    for (int c = 0; c < cfg.beta; ++c)
      traces(r, c) = static_cast<float>(rng.uniform());

  DynVec<float> before = policy_forward<float>(w, traces, false);
  save_model(w, path);
  auto loaded = load_model<float>(path);
  DynVec<float> after = policy_forward<float>(loaded, traces, false);
  REQUIRE(before == after);
  std::remove(path.c_str());
}

TEST_CASE("corrupt model files are rejected") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "ipfix_bad_model.bin").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a model";
  }
  REQUIRE_THROWS_AS(load_model<float>(path), ParseError);
  std::remove(path.c_str());
  REQUIRE_THROWS_AS(load_model<float>("/nonexistent/model.bin"), IoError);
}

TEST_CASE("traces with the wrong width are rejected") {
  PolicyConfig cfg = tiny_config(true);
  auto w = PolicyWeights<double>::init(cfg);
  DynMat<double> traces(3, cfg.beta + 1);
  traces.setConstant(0.5);
  REQUIRE_THROWS_AS(policy_forward<double>(w, traces, false),
                    ValidationError);
}
