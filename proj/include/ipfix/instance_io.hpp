#ifndef IPFIX_INSTANCE_IO_HPP
#define IPFIX_INSTANCE_IO_HPP

#include <fstream>
#include <set>
#include <string>
#include <utility>

#include <json.hpp>

#include "ipfix/instance.hpp"

namespace ipfix {

// File/system level failure (unreadable path, short file, ...).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content; the message names the offending field.
class ParseError : public IoError {
 public:
  using IoError::IoError;
};

namespace detail {

using Json = nlohmann::ordered_json;

inline const Json& require_field(const Json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end())
    throw ParseError(std::string("instance: missing field '") + field + "'");
  return *it;
}

inline SparseMat triplets_to_matrix(const Json& jtrips, Index rows, Index cols,
                                    const char* field) {
  if (!jtrips.is_array())
    throw ParseError(std::string("instance: '") + field + "' must be an array");
  std::vector<Triplet> trips;
  std::set<std::pair<Index, Index>> seen;
  for (const auto& entry : jtrips) {
    if (!entry.is_array() || entry.size() != 3)
      throw ParseError(std::string("instance: '") + field +
                       "' entries must be [row, col, value]");
    const Index r = entry[0].get<Index>();
    const Index c = entry[1].get<Index>();
    const double v = entry[2].get<double>();
    if (r < 0 || r >= rows || c < 0 || c >= cols)
      throw ParseError(std::string("instance: '") + field +
                       "' index out of range");
    if (!seen.insert({r, c}).second)
      throw ParseError(std::string("instance: '") + field +
                       "' contains duplicate entries");
    trips.emplace_back(r, c, v);
  }
  SparseMat mat(rows, cols);
  mat.setFromTriplets(trips.begin(), trips.end());
  return mat;
}

inline Json matrix_to_triplets(const SparseMat& A) {
  Json out = Json::array();
  for (const Triplet& t : canonical_triplets(A))
    out.push_back(Json::array({t.row(), t.col(), t.value()}));
  return out;
}

inline Eigen::VectorXd parse_vector(const Json& j, Index expected,
                                    const char* field) {
  if (!j.is_array() || static_cast<Index>(j.size()) != expected)
    throw ParseError(std::string("instance: '") + field +
                     "' must be an array of length matching its dimension");
  Eigen::VectorXd v(expected);
  for (Index i = 0; i < expected; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace detail

inline nlohmann::ordered_json instance_to_json(const IpInstance& inst) {
  using detail::Json;
  inst.validate();
  Json j;
  j["n"] = inst.n;
  j["sense"] = inst.sense == Sense::Maximize ? "max" : "min";
  j["offset"] = inst.offset;
  j["b"] = Json::array();
  for (Index i = 0; i < inst.n; ++i) j["b"].push_back(inst.b[i]);
  if (inst.quadratic) {
    Json ja;
    ja["triplets"] = detail::matrix_to_triplets(inst.quadratic->A);
    ja["symmetric"] = inst.quadratic->symmetric;
    j["A"] = std::move(ja);
  } else {
    j["A"] = nullptr;
  }
  if (inst.constraints) {
    const ConstraintBlock& cb = *inst.constraints;
    Json jc;
    jc["m"] = cb.m;
    jc["relation"] = cb.relation == Relation::LE   ? "le"
                     : cb.relation == Relation::GE ? "ge"
                                                   : "eq";
    jc["C"] = detail::matrix_to_triplets(cb.C);
    jc["d"] = Json::array();
    for (Index i = 0; i < cb.m; ++i) jc["d"].push_back(cb.d[i]);
    j["constraints"] = std::move(jc);
  } else {
    j["constraints"] = nullptr;
  }
  return j;
}

inline IpInstance instance_from_json(const nlohmann::ordered_json& j) {
  using detail::require_field;
  IpInstance inst;
  inst.n = require_field(j, "n").get<Index>();
  if (inst.n < 0) throw ParseError("instance: 'n' must be non-negative");
  const std::string sense = require_field(j, "sense").get<std::string>();
  if (sense == "max")
    inst.sense = Sense::Maximize;
  else if (sense == "min")
    inst.sense = Sense::Minimize;
  else
    throw ParseError("instance: 'sense' must be \"max\" or \"min\"");
  inst.offset = require_field(j, "offset").get<double>();
  inst.b = detail::parse_vector(require_field(j, "b"), inst.n, "b");

  const auto& ja = require_field(j, "A");
  if (!ja.is_null()) {
    QuadraticTerm quad;
    quad.A = detail::triplets_to_matrix(require_field(ja, "triplets"), inst.n,
                                        inst.n, "A.triplets");
    quad.symmetric = require_field(ja, "symmetric").get<bool>();
    inst.quadratic = std::move(quad);
  }

  const auto& jc = require_field(j, "constraints");
  if (!jc.is_null()) {
    ConstraintBlock cb;
    cb.m = require_field(jc, "m").get<Index>();
    if (cb.m < 0) throw ParseError("instance: 'constraints.m' must be non-negative");
    const std::string rel = require_field(jc, "relation").get<std::string>();
    if (rel == "le")
      cb.relation = Relation::LE;
    else if (rel == "ge")
      cb.relation = Relation::GE;
    else if (rel == "eq")
      cb.relation = Relation::EQ;
    else
      throw ParseError("instance: 'constraints.relation' must be le, ge or eq");
    cb.C = detail::triplets_to_matrix(require_field(jc, "C"), cb.m, inst.n,
                                      "constraints.C");
    cb.d = detail::parse_vector(require_field(jc, "d"), cb.m, "constraints.d");
    inst.constraints = std::move(cb);
  }

  try {
    inst.validate();
  } catch (const ValidationError& err) {
    throw ParseError(err.what());
  }
  return inst;
}

inline void write_instance(const IpInstance& inst, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << instance_to_json(inst).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline IpInstance read_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& err) {
    throw ParseError("instance: invalid JSON in " + path + ": " + err.what());
  }
  return instance_from_json(j);
}

}  // namespace ipfix

#endif  // IPFIX_INSTANCE_IO_HPP
