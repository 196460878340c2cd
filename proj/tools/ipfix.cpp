// ipfix — command line front end for the integer-programming early-fixing
// toolkit. Subcommands:
//   generate   write random instance files (auctions, grid MRFs)
//   solve      run the ADMM solver, optionally with early fixing
//   collect    build a behavior-cloning dataset from expert runs
//   train      fit the fixing policy on a dataset
//   bench      compare solver modes over an instance set (CSV + JSON)
//   flipstats  flip-count histogram of plain solver runs
//
// Exit codes: 0 success, 2 validation/usage errors, 3 I/O errors.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipfix/bench.hpp"
#include "ipfix/dataset_io.hpp"
#include "ipfix/generators.hpp"
#include "ipfix/instance_io.hpp"
#include "ipfix/model_io.hpp"
#include "ipfix/solution_io.hpp"
#include "ipfix/training.hpp"

namespace fs = std::filesystem;
using ipfix::detail::fmt_double;

namespace {

// Values shared by every subcommand.
struct GlobalOpts {
  std::uint64_t seed = 1;
  bool seed_given = false;  // --seed passed explicitly
  int threads = 1;
  std::string out_dir = ".";
  bool fixed_clock = false;
};

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ipfix::IoError("cannot open: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ipfix::ParseError(path + ": " + e.what());
  }
}

// Joins fixed-name artifacts with --out-dir; paths given explicitly by the
// user (--out ...) are used verbatim.
fs::path artifact_path(const GlobalOpts& g, const std::string& name) {
  return fs::path(g.out_dir) / name;
}

void ensure_out_dir(const GlobalOpts& g) {
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (ec)
    throw ipfix::IoError("cannot create output directory '" + g.out_dir +
                         "': " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ipfix::IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw ipfix::IoError("write failed: " + path.string());
}

// ADMM parameter flags shared by solve/collect/bench/flipstats. Values from
// a --params JSON file are applied first, then any flag given on the command
// line overrides the corresponding field.
struct AdmmFlags {
  std::string params_file;
  double rho1 = 0, rho2 = 0, rho3 = 0, mu = 0, rho_max = 0, tol = 0, cg_tol = 0;
  long max_iters = 0, cg_max_iters = 0;
  CLI::Option *o_rho1 = nullptr, *o_rho2 = nullptr, *o_rho3 = nullptr,
              *o_mu = nullptr, *o_rho_max = nullptr, *o_tol = nullptr,
              *o_cg_tol = nullptr, *o_max_iters = nullptr,
              *o_cg_max_iters = nullptr;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--params", params_file,
                    "JSON file with solver parameters (flags override)");
    o_rho1 = cmd->add_option("--rho1", rho1, "initial box penalty");
    o_rho2 = cmd->add_option("--rho2", rho2, "initial sphere penalty");
    o_rho3 = cmd->add_option("--rho3", rho3, "initial constraint penalty");
    o_mu = cmd->add_option("--mu", mu, "penalty growth factor");
    o_rho_max = cmd->add_option("--rho-max", rho_max, "penalty ceiling");
    o_tol = cmd->add_option("--tol", tol, "convergence tolerance");
    o_max_iters = cmd->add_option("--max-iters", max_iters,
                                  "iteration budget of the plain solver");
    o_cg_tol = cmd->add_option("--cg-tol", cg_tol,
                               "conjugate-gradient relative tolerance");
    o_cg_max_iters = cmd->add_option("--cg-max-iters", cg_max_iters,
                                     "conjugate-gradient iteration cap");
  }

  ipfix::AdmmParams resolve(const GlobalOpts& g) const {
    ipfix::AdmmParams p;
    p.seed = g.seed;
    if (!params_file.empty()) {
      p = ipfix::admm_params_from_json(read_json_file(params_file), p);
      if (g.seed_given) p.seed = g.seed;  // explicit flag beats file
    }
    if (o_rho1->count()) p.rho1 = rho1;
    if (o_rho2->count()) p.rho2 = rho2;
    if (o_rho3->count()) p.rho3 = rho3;
    if (o_mu->count()) p.mu = mu;
    if (o_rho_max->count()) p.rho_max = rho_max;
    if (o_tol->count()) p.tol = tol;
    if (o_max_iters->count()) p.max_iters = max_iters;
    if (o_cg_tol->count()) p.cg_tol = cg_tol;
    if (o_cg_max_iters->count()) p.cg_max_iters = cg_max_iters;
    p.validate();
    return p;
  }
};

std::vector<std::pair<std::string, ipfix::IpInstance>> load_instances(
    const std::vector<std::string>& paths) {
  std::vector<std::pair<std::string, ipfix::IpInstance>> out;
  out.reserve(paths.size());
  for (const std::string& path : paths)
    out.emplace_back(fs::path(path).stem().string(),
                     ipfix::read_instance(path));
  return out;
}

// ---------------------------------------------------------------- generate
struct GenerateOpts {
  std::string kind = "auction";
  int count = 1;
  std::string prefix;
  ipfix::Index n = 500;
  ipfix::Index items = 100;
  double xi = 1.0;
  double density = 0.05;
  double price_scale = 1.0;
  ipfix::Index width = 20, height = 20;
  double unary = 1.0, coupling = 0.5;
};

int run_generate(const GlobalOpts& g, const GenerateOpts& o) {
  ensure_out_dir(g);
  const std::string prefix = o.prefix.empty() ? o.kind : o.prefix;
  for (int k = 0; k < o.count; ++k) {
    ipfix::IpInstance inst;
    if (o.kind == "auction") {
      ipfix::GeneratorConfig cfg;
      cfg.n = o.n;
      cfg.items = o.items;
      cfg.xi = o.xi;
      cfg.density = o.density;
      cfg.price_scale = o.price_scale;
      cfg.seed = g.seed + static_cast<std::uint64_t>(k);
      inst = ipfix::generate_auction(cfg);
    } else {
      inst = ipfix::generate_grid_mrf(o.width, o.height, o.unary, o.coupling,
                                      g.seed + static_cast<std::uint64_t>(k));
    }
    const fs::path path =
        artifact_path(g, prefix + "_" + std::to_string(k) + ".json");
    ipfix::write_instance(inst, path.string());
    std::cout << path.string() << "\n";
  }
  return 0;
}

// ------------------------------------------------------------------- solve
struct SolveOpts {
  std::string instance;
  std::string mode = "plain";
  std::string model_path;
  int beta = 100;
  CLI::Option* o_beta = nullptr;
  double delta = 0.9;
  long t_prime = 20000;
  std::string out;
  std::string log;
  AdmmFlags admm;
};

int run_solve(const GlobalOpts& g, const SolveOpts& o) {
  const ipfix::IpInstance inst = ipfix::read_instance(o.instance);
  const ipfix::AdmmParams params = o.admm.resolve(g);

  ipfix::Solution sol;
  std::optional<ipfix::EpisodeLog> log;
  ipfix::PolicyWeights<float> model;

  if (o.mode == "plain" && o.log.empty()) {
    sol = ipfix::solve(inst, params);
  } else {
    ipfix::RunConfig cfg;
    cfg.beta = o.beta;
    cfg.delta = o.delta;
    cfg.t_prime = o.mode == "plain" ? params.max_iters : o.t_prime;
    if (o.mode == "plain") {
      cfg.policy = ipfix::PolicyKind::None;
    } else if (o.mode == "heuristic") {
      cfg.policy = ipfix::PolicyKind::Heuristic;
    } else {
      cfg.policy = ipfix::PolicyKind::Learned;
      if (o.model_path.empty())
        throw ipfix::ValidationError("learned mode requires --model");
      model = ipfix::load_model<float>(o.model_path);
      cfg.model = &model;
      // The model dictates beta unless the user explicitly asked otherwise
      // (a mismatch is then rejected by validation).
      if (!o.o_beta->count()) cfg.beta = model.config.beta;
    }
    ipfix::RunResult rr = ipfix::run(inst, cfg, params);
    sol = rr.solution;
    log = std::move(rr.log);
  }

  if (g.fixed_clock) {
    sol.wall_ms = 0.0;
    if (log) {
      log->solver_ms = 0.0;
      log->total_ms = 0.0;
    }
  }

  std::cout << "instance: " << o.instance << "\n";
  std::cout << "n: " << inst.n << " m: "
            << (inst.constraints ? inst.constraints->m : 0) << "\n";
  std::cout << "mode: " << o.mode << "\n";
  std::cout << "objective: " << fmt_double(sol.objective) << "\n";
  std::cout << "iterations: " << sol.iterations << "\n";
  if (log)
    std::cout << "termination: " << ipfix::termination_name(log->termination)
              << "\n";
  else
    std::cout << "termination: " << (sol.converged ? "converged" : "budget")
              << "\n";
  std::cout << "feasible: "
            << (ipfix::is_feasible(inst, sol.x) ? "yes" : "no") << "\n";
  std::cout << "wall_ms: " << fmt_double(sol.wall_ms) << "\n";

  if (!o.out.empty()) ipfix::write_solution(sol, o.out);
  if (!o.log.empty() && log) ipfix::write_episode(*log, o.log);
  return 0;
}

// ----------------------------------------------------------------- collect
struct CollectOpts {
  std::vector<std::string> instances;
  int beta = 100;
  int gamma = 10;
  std::string out;
  AdmmFlags admm;
};

int run_collect(const GlobalOpts& g, const CollectOpts& o) {
  const auto named = load_instances(o.instances);
  std::vector<ipfix::IpInstance> insts;
  insts.reserve(named.size());
  for (const auto& [name, inst] : named) insts.push_back(inst);

  const ipfix::AdmmParams params = o.admm.resolve(g);
  ipfix::Dataset data =
      ipfix::collect_dataset(insts, params, o.beta, o.gamma);
  ipfix::write_dataset(data, o.out);

  std::size_t positives = 0;
  for (const ipfix::Sample& s : data.samples) positives += s.label;
  std::cout << "episodes: " << insts.size() << "\n";
  std::cout << "samples: " << data.samples.size() << "\n";
  std::cout << "positive_fraction: "
            << fmt_double(data.samples.empty()
                              ? 0.0
                              : static_cast<double>(positives) /
                                    static_cast<double>(data.samples.size()))
            << "\n";
  std::cout << "dataset: " << o.out << "\n";
  return 0;
}

// ------------------------------------------------------------------- train
struct TrainOpts {
  std::string dataset;
  std::string out;
  int epochs = 10;
  double lr = 1e-4;
  int batch_size = 256;
  bool no_attention = false;
  int window = 0, stride = 0;  // 0 = derive from beta
  int d_model = 128, heads = 8, layers = 2, d_ff = 512;
  std::vector<int> mlp = {256, 128, 16};
};

int run_train(const GlobalOpts& g, const TrainOpts& o) {
  const ipfix::Dataset data = ipfix::read_dataset(o.dataset);

  ipfix::PolicyConfig pc = ipfix::PolicyConfig::for_beta(data.beta);
  if (o.window > 0) pc.window = o.window;
  if (o.stride > 0) pc.stride = o.stride;
  pc.d_model = o.d_model;
  pc.heads = o.heads;
  pc.layers = o.layers;
  pc.d_ff = o.d_ff;
  pc.mlp_dims = o.mlp;
  pc.use_attention = !o.no_attention;
  pc.seed = g.seed;

  ipfix::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch_size;
  tc.seed = g.seed;

  ipfix::TrainResult result = ipfix::train(data, pc, tc);
  ipfix::save_model(result.weights, o.out);

  std::cout << "samples: " << data.samples.size() << "\n";
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e)
    std::cout << "epoch " << e + 1 << " loss "
              << fmt_double(result.epoch_losses[e]) << "\n";
  std::cout << "model: " << o.out << "\n";
  return 0;
}

// ------------------------------------------------------------------- bench
struct BenchOpts {
  std::vector<std::string> instances;
  std::vector<std::string> modes = {"plain", "heuristic"};
  std::vector<double> deltas = {0.9};
  int beta = 100;
  CLI::Option* o_beta = nullptr;
  long t_prime = 20000;
  std::string model_path;
  bool flip_hist = false;
  AdmmFlags admm;
};

int run_bench_cmd(const GlobalOpts& g, const BenchOpts& o) {
  ensure_out_dir(g);
  ipfix::BenchConfig cfg;
  cfg.instances = load_instances(o.instances);
  cfg.modes = o.modes;
  cfg.deltas = o.deltas;
  cfg.beta = o.beta;
  cfg.t_prime = o.t_prime;
  cfg.admm = o.admm.resolve(g);
  cfg.fixed_clock = g.fixed_clock;
  cfg.collect_flips = o.flip_hist;

  ipfix::PolicyWeights<float> model;
  if (!o.model_path.empty()) {
    model = ipfix::load_model<float>(o.model_path);
    cfg.model = &model;
    if (!o.o_beta->count()) cfg.beta = model.config.beta;
  }

  ipfix::BenchResult result = ipfix::run_bench(cfg);

  const fs::path csv_path = artifact_path(g, "bench.csv");
  write_text(csv_path, result.csv);

  nlohmann::ordered_json sidecar;
  sidecar["instances"] = nlohmann::ordered_json::array();
  for (const auto& [name, inst] : cfg.instances)
    sidecar["instances"].push_back(name);
  sidecar["modes"] = cfg.modes;
  sidecar["deltas"] = cfg.deltas;
  sidecar["beta"] = cfg.beta;
  sidecar["t_prime"] = cfg.t_prime;
  sidecar["admm"] = ipfix::admm_params_to_json(cfg.admm);
  if (o.model_path.empty())
    sidecar["model"] = nullptr;
  else
    sidecar["model"] = o.model_path;
  if (cfg.model)
    sidecar["model_config"] = ipfix::policy_config_to_json(model.config);
  sidecar["fixed_clock"] = cfg.fixed_clock;
  sidecar["rows"] = result.rows.size();
  const fs::path json_path = artifact_path(g, "bench.json");
  write_text(json_path, sidecar.dump(2) + "\n");

  if (o.flip_hist) {
    const fs::path flips_path = artifact_path(g, "flips.csv");
    write_text(flips_path, ipfix::flip_histogram_csv(result.flips));
    std::cout << "flips: " << flips_path.string() << "\n";
  }

  for (const ipfix::BenchRow& row : result.rows) {
    if (!row.summary) continue;
    std::cout << "mean mode=" << row.mode;
    if (row.has_delta) std::cout << " delta=" << fmt_double(row.delta);
    std::cout << " obj_gap=" << fmt_double(row.obj_gap)
              << " iter_speedup=" << fmt_double(row.iter_speedup)
              << " accuracy=" << fmt_double(row.accuracy)
              << " infeasible=" << row.infeasible << "\n";
  }
  std::cout << "csv: " << csv_path.string() << "\n";
  std::cout << "json: " << json_path.string() << "\n";
  return 0;
}

// --------------------------------------------------------------- flipstats
struct FlipStatsOpts {
  std::vector<std::string> instances;
  std::string out;
  AdmmFlags admm;
};

int run_flipstats(const GlobalOpts& g, const FlipStatsOpts& o) {
  const auto named = load_instances(o.instances);
  const ipfix::AdmmParams params = o.admm.resolve(g);

  Eigen::VectorXi all_flips;
  for (const auto& [name, inst] : named) {
    ipfix::Solution sol = ipfix::solve(inst, params, {}, 2);
    const Eigen::VectorXi& f = sol.trace->flips();
    const ipfix::Index offset = all_flips.size();
    all_flips.conservativeResize(offset + f.size());
    all_flips.segment(offset, f.size()) = f;
  }

  const ipfix::FlipHistogram hist = ipfix::flip_histogram(all_flips);
  fs::path out_path;
  if (o.out.empty()) {
    ensure_out_dir(g);
    out_path = artifact_path(g, "flips.csv");
  } else {
    out_path = o.out;
  }
  write_text(out_path, ipfix::flip_histogram_csv(hist));

  std::cout << "variables: " << hist.total_vars << "\n";
  std::cout << "zero_flip_fraction: " << fmt_double(hist.zero_flip_fraction())
            << "\n";
  const std::size_t modal = hist.modal_bin();
  std::cout << "modal_bin: [" << modal * hist.bin_width << ","
            << (modal + 1) * hist.bin_width << ")"
            << " fraction " << fmt_double(hist.fraction(modal)) << "\n";
  std::cout << "csv: " << out_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary integer programming via ADMM with learned early fixing"};
  app.require_subcommand(1);

  GlobalOpts global;
  CLI::Option* o_seed = app.add_option("--seed", global.seed,
                                       "master random seed")
                            ->capture_default_str();
  app.add_option("--threads", global.threads, "linear-algebra thread count")
      ->capture_default_str();
  app.add_option("--out-dir", global.out_dir,
                 "directory for fixed-name artifacts")
      ->capture_default_str();
  app.add_flag("--fixed-clock", global.fixed_clock,
               "report all wall times as zero (reproducible outputs)");

  GenerateOpts gen;
  CLI::App* c_gen = app.add_subcommand("generate", "write random instances");
  c_gen->add_option("--kind", gen.kind, "instance family")
      ->check(CLI::IsMember({"auction", "mrf"}))
      ->capture_default_str();
  c_gen->add_option("--count", gen.count, "number of instances")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_gen->add_option("--prefix", gen.prefix, "file name prefix (default: kind)");
  c_gen->add_option("--n", gen.n, "auction: number of bids")
      ->capture_default_str();
  c_gen->add_option("--items", gen.items, "auction: number of items")
      ->capture_default_str();
  c_gen->add_option("--xi", gen.xi, "auction: item pool scale")
      ->capture_default_str();
  c_gen->add_option("--density", gen.density,
                    "auction: per-item bundle inclusion probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c_gen->add_option("--price-scale", gen.price_scale, "auction: price scale")
      ->capture_default_str();
  c_gen->add_option("--width", gen.width, "mrf: grid width")
      ->capture_default_str();
  c_gen->add_option("--height", gen.height, "mrf: grid height")
      ->capture_default_str();
  c_gen->add_option("--unary", gen.unary, "mrf: unary field strength")
      ->capture_default_str();
  c_gen->add_option("--coupling", gen.coupling, "mrf: coupling strength")
      ->capture_default_str();

  SolveOpts sol;
  CLI::App* c_solve = app.add_subcommand("solve", "run the solver");
  c_solve->add_option("--instance", sol.instance, "instance JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  c_solve->add_option("--mode", sol.mode, "solver mode")
      ->check(CLI::IsMember({"plain", "heuristic", "learned"}))
      ->capture_default_str();
  c_solve->add_option("--model", sol.model_path,
                      "policy model file (learned mode)");
  sol.o_beta =
      c_solve->add_option("--beta", sol.beta, "iterations between policy calls")
          ->capture_default_str();
  c_solve->add_option("--delta", sol.delta, "fixing confidence threshold")
      ->capture_default_str();
  c_solve->add_option("--t-prime", sol.t_prime,
                      "iteration budget with early fixing")
      ->capture_default_str();
  c_solve->add_option("--out", sol.out, "write solution JSON here");
  c_solve->add_option("--log", sol.log, "write episode log JSON here");
  sol.admm.add_to(c_solve);

  CollectOpts col;
  CLI::App* c_collect =
      app.add_subcommand("collect", "build a behavior-cloning dataset");
  c_collect->add_option("instances", col.instances, "instance JSON files")
      ->required()
      ->check(CLI::ExistingFile);
  c_collect->add_option("--beta", col.beta, "trace length per round")
      ->capture_default_str();
  c_collect->add_option("--gamma", col.gamma, "rounds sampled per episode")
      ->capture_default_str();
  c_collect->add_option("--out", col.out, "dataset output file")->required();
  col.admm.add_to(c_collect);

  TrainOpts tr;
  CLI::App* c_train = app.add_subcommand("train", "train the fixing policy");
  c_train->add_option("--dataset", tr.dataset, "dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "model output file")->required();
  c_train->add_option("--epochs", tr.epochs, "training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_option("--lr", tr.lr, "learning rate")->capture_default_str();
  c_train->add_option("--batch-size", tr.batch_size, "minibatch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_train->add_flag("--no-attention", tr.no_attention,
                    "ablate the attention encoder");
  c_train->add_option("--window", tr.window, "trace window length")
      ->capture_default_str();
  c_train->add_option("--stride", tr.stride, "trace window stride")
      ->capture_default_str();
  c_train->add_option("--d-model", tr.d_model, "encoder width")
      ->capture_default_str();
  c_train->add_option("--heads", tr.heads, "attention heads")
      ->capture_default_str();
  c_train->add_option("--layers", tr.layers, "encoder blocks")
      ->capture_default_str();
  c_train->add_option("--d-ff", tr.d_ff, "feed-forward width")
      ->capture_default_str();
  c_train->add_option("--mlp", tr.mlp, "classifier hidden sizes")
      ->delimiter(',')
      ->capture_default_str();

  BenchOpts ben;
  CLI::App* c_bench =
      app.add_subcommand("bench", "compare solver modes over instances");
  c_bench->add_option("instances", ben.instances, "instance JSON files")
      ->required()
      ->check(CLI::ExistingFile);
  c_bench->add_option("--modes", ben.modes, "modes to run")
      ->delimiter(',')
      ->capture_default_str();
  c_bench->add_option("--delta", ben.deltas, "fixing thresholds to sweep")
      ->delimiter(',')
      ->capture_default_str();
  ben.o_beta =
      c_bench->add_option("--beta", ben.beta, "iterations between policy calls")
          ->capture_default_str();
  c_bench->add_option("--t-prime", ben.t_prime,
                      "iteration budget with early fixing")
      ->capture_default_str();
  c_bench->add_option("--model", ben.model_path,
                      "policy model file (learned mode)");
  c_bench->add_flag("--flip-hist", ben.flip_hist,
                    "also write the flip histogram of the plain runs");
  ben.admm.add_to(c_bench);

  FlipStatsOpts fl;
  CLI::App* c_flip = app.add_subcommand(
      "flipstats", "flip-count histogram of plain solver runs");
  c_flip->add_option("instances", fl.instances, "instance JSON files")
      ->required()
      ->check(CLI::ExistingFile);
  c_flip->add_option("--out", fl.out, "histogram CSV path");
  fl.admm.add_to(c_flip);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  global.seed_given = o_seed->count() > 0;

  try {
    if (global.threads > 0) Eigen::setNbThreads(global.threads);
    if (c_gen->parsed()) return run_generate(global, gen);
    if (c_solve->parsed()) return run_solve(global, sol);
    if (c_collect->parsed()) return run_collect(global, col);
    if (c_train->parsed()) return run_train(global, tr);
    if (c_bench->parsed()) return run_bench_cmd(global, ben);
    if (c_flip->parsed()) return run_flipstats(global, fl);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const ipfix::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ipfix::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
