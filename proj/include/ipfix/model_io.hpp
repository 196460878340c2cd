#ifndef IPFIX_MODEL_IO_HPP
#define IPFIX_MODEL_IO_HPP

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipfix/attention_net.hpp"
#include "ipfix/instance_io.hpp"

namespace ipfix {

// Model file layout:
//   8-byte magic "IPFXMDL\n", u64 header length, JSON header, float32 blob.
// The header records the format version, the architecture and the tensor
// manifest (names and shapes in traversal order); the blob holds every
// tensor's values row-major as little-endian float32, batch-norm running
// statistics included. Weights are stored in single precision regardless
// of the in-memory scalar type.
inline constexpr char kModelMagic[8] = {'I', 'P', 'F', 'X',
                                        'M', 'D', 'L', '\n'};
inline constexpr int kModelFormatVersion = 1;

inline nlohmann::ordered_json policy_config_to_json(const PolicyConfig& cfg) {
  nlohmann::ordered_json j;
  j["beta"] = cfg.beta;
  j["window"] = cfg.window;
  j["stride"] = cfg.stride;
  j["d_model"] = cfg.d_model;
  j["heads"] = cfg.heads;
  j["layers"] = cfg.layers;
  j["d_ff"] = cfg.d_ff;
  j["mlp_dims"] = cfg.mlp_dims;
  j["use_attention"] = cfg.use_attention;
  j["seed"] = cfg.seed;
  return j;
}

inline PolicyConfig policy_config_from_json(const nlohmann::ordered_json& j) {
  PolicyConfig cfg;
  try {
    cfg.beta = j.at("beta").get<int>();
    cfg.window = j.at("window").get<int>();
    cfg.stride = j.at("stride").get<int>();
    cfg.d_model = j.at("d_model").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.layers = j.at("layers").get<int>();
    cfg.d_ff = j.at("d_ff").get<int>();
    cfg.mlp_dims = j.at("mlp_dims").get<std::vector<int>>();
    cfg.use_attention = j.at("use_attention").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& err) {
    throw ParseError(std::string("model: bad config: ") + err.what());
  }
  try {
    cfg.validate();
  } catch (const ValidationError& err) {
    throw ParseError(err.what());
  }
  return cfg;
}

template <typename Scalar>
void save_model(const PolicyWeights<Scalar>& weights, const std::string& path) {
  nlohmann::ordered_json header;
  header["format_version"] = kModelFormatVersion;
  header["config"] = policy_config_to_json(weights.config);
  header["inference_mode"] = weights.inference_mode;
  header["tensors"] = nlohmann::ordered_json::array();

  std::vector<float> blob;
  weights.for_each_tensor(
      [&](const std::string& name, const DynMat<Scalar>& t) {
        header["tensors"].push_back(
            {{"name", name}, {"shape", {t.rows(), t.cols()}}});
        for (Eigen::Index r = 0; r < t.rows(); ++r)
          for (Eigen::Index c = 0; c < t.cols(); ++c)
            blob.push_back(static_cast<float>(t(r, c)));
      });

  const std::string header_str = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kModelMagic, sizeof(kModelMagic));
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(),
            static_cast<std::streamsize>(header_str.size()));
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path);
}

template <typename Scalar = float>
PolicyWeights<Scalar> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    throw ParseError("model: bad magic in " + path);
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in) throw ParseError("model: truncated header in " + path);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ParseError("model: truncated header in " + path);

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(header_str);
  } catch (const nlohmann::json::exception& err) {
    throw ParseError(std::string("model: invalid header JSON: ") + err.what());
  }
  if (header.value("format_version", -1) != kModelFormatVersion)
    throw ParseError("model: unsupported format_version");

  PolicyWeights<Scalar> weights =
      PolicyWeights<Scalar>::zeros(policy_config_from_json(header.at("config")));
  weights.inference_mode = header.value("inference_mode", true);

  const auto& manifest = header.at("tensors");
  std::size_t entry = 0;
  weights.for_each_tensor([&](const std::string& name, DynMat<Scalar>& t) {
    if (entry >= manifest.size())
      throw ParseError("model: manifest is missing tensor " + name);
    const auto& meta = manifest[entry++];
    if (meta.at("name").get<std::string>() != name)
      throw ParseError("model: manifest order mismatch at " + name);
    const auto shape = meta.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
      throw ParseError("model: shape mismatch for " + name);
    std::vector<float> buf(static_cast<std::size_t>(t.size()));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw ParseError("model: truncated blob at " + name);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c)
        t(r, c) = static_cast<Scalar>(buf[i++]);
  });
  if (entry != manifest.size())
    throw ParseError("model: manifest lists unknown extra tensors");
  return weights;
}

}  // namespace ipfix

#endif  // IPFIX_MODEL_IO_HPP
