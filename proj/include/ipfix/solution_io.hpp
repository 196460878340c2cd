#ifndef IPFIX_SOLUTION_IO_HPP
#define IPFIX_SOLUTION_IO_HPP

#include <fstream>
#include <string>

#include <json.hpp>

#include "ipfix/admm.hpp"
#include "ipfix/earlyfix.hpp"
#include "ipfix/instance_io.hpp"

namespace ipfix {

inline nlohmann::ordered_json solution_to_json(const Solution& sol) {
  nlohmann::ordered_json j;
  j["x"] = nlohmann::ordered_json::array();
  for (Index i = 0; i < sol.x.size(); ++i)
    j["x"].push_back(static_cast<int>(sol.x[i]));
  j["objective"] = sol.objective;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  j["wall_ms"] = sol.wall_ms;
  return j;
}

inline void write_solution(const Solution& sol, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << solution_to_json(sol).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::AllFixed: return "all_fixed";
    case Termination::Budget: return "budget";
  }
  return "budget";  // unreachable
}

inline nlohmann::ordered_json episode_to_json(const EpisodeLog& log) {
  nlohmann::ordered_json j;
  j["termination"] = termination_name(log.termination);
  j["solver_ms"] = log.solver_ms;
  j["total_ms"] = log.total_ms;
  j["objective_trace"] = log.objective_trace;
  j["rounds"] = nlohmann::ordered_json::array();
  for (const RoundRecord& r : log.rounds) {
    nlohmann::ordered_json jr;
    jr["iteration"] = r.iteration;
    jr["fixed_to_one"] = r.fixed_to_one;
    jr["fixed_to_zero"] = r.fixed_to_zero;
    jr["remaining"] = r.remaining;
    j["rounds"].push_back(std::move(jr));
  }
  return j;
}

inline void write_episode(const EpisodeLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << episode_to_json(log).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline nlohmann::ordered_json admm_params_to_json(const AdmmParams& p) {
  nlohmann::ordered_json j;
  j["rho1"] = p.rho1;
  j["rho2"] = p.rho2;
  j["rho3"] = p.rho3;
  j["mu"] = p.mu;
  j["rho_max"] = p.rho_max;
  j["tol"] = p.tol;
  j["max_iters"] = p.max_iters;
  j["cg_tol"] = p.cg_tol;
  j["cg_max_iters"] = p.cg_max_iters;
  j["seed"] = p.seed;
  return j;
}

// Applies the fields present in `j` on top of `base`; unknown keys are
// rejected so typos do not silently fall back to defaults.
inline AdmmParams admm_params_from_json(const nlohmann::json& j,
                                        AdmmParams base = {}) {
  if (!j.is_object()) throw ParseError("params: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "rho1")
        base.rho1 = value.get<double>();
      else if (key == "rho2")
        base.rho2 = value.get<double>();
      else if (key == "rho3")
        base.rho3 = value.get<double>();
      else if (key == "mu")
        base.mu = value.get<double>();
      else if (key == "rho_max")
        base.rho_max = value.get<double>();
      else if (key == "tol")
        base.tol = value.get<double>();
      else if (key == "max_iters")
        base.max_iters = value.get<long>();
      else if (key == "cg_tol")
        base.cg_tol = value.get<double>();
      else if (key == "cg_max_iters")
        base.cg_max_iters = value.get<long>();
      else if (key == "seed")
        base.seed = value.get<std::uint64_t>();
      else
        throw ParseError("params: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("params: bad value for '" + key + "': " + e.what());
    }
  }
  return base;
}

}  // namespace ipfix

#endif  // IPFIX_SOLUTION_IO_HPP
