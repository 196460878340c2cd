#ifndef IPFIX_DATASET_IO_HPP
#define IPFIX_DATASET_IO_HPP

#include <cstring>
#include <fstream>
#include <string>

#include "ipfix/instance_io.hpp"
#include "ipfix/training.hpp"

namespace ipfix {

// Dataset file layout (little-endian):
//   8-byte magic "IPFXDS\n\0", u64 sample count, u32 beta, then per sample
//   beta float32 trace values, u8 label, float32 weight and the provenance
//   triple (episode, round, variable) as u32.
inline constexpr char kDatasetMagic[8] = {'I', 'P', 'F', 'X',
                                          'D', 'S', '\n', '\0'};

inline void write_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  const std::uint64_t count = data.samples.size();
  const std::uint32_t beta = static_cast<std::uint32_t>(data.beta);
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(&beta), sizeof(beta));
  for (const Sample& s : data.samples) {
    if (s.trace.size() != data.beta)
      throw ValidationError("dataset: sample trace length differs from beta");
    out.write(reinterpret_cast<const char*>(s.trace.data()),
              static_cast<std::streamsize>(sizeof(float) * data.beta));
    out.write(reinterpret_cast<const char*>(&s.label), sizeof(s.label));
    out.write(reinterpret_cast<const char*>(&s.weight), sizeof(s.weight));
    out.write(reinterpret_cast<const char*>(&s.episode), sizeof(s.episode));
    out.write(reinterpret_cast<const char*>(&s.round), sizeof(s.round));
    out.write(reinterpret_cast<const char*>(&s.variable), sizeof(s.variable));
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0)
    throw ParseError("dataset: bad magic in " + path);
  std::uint64_t count = 0;
  std::uint32_t beta = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  in.read(reinterpret_cast<char*>(&beta), sizeof(beta));
  if (!in || beta < 2) throw ParseError("dataset: bad header in " + path);

  Dataset data;
  data.beta = static_cast<int>(beta);
  data.samples.resize(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    Sample& s = data.samples[k];
    s.trace.resize(beta);
    in.read(reinterpret_cast<char*>(s.trace.data()),
            static_cast<std::streamsize>(sizeof(float) * beta));
    in.read(reinterpret_cast<char*>(&s.label), sizeof(s.label));
    in.read(reinterpret_cast<char*>(&s.weight), sizeof(s.weight));
    in.read(reinterpret_cast<char*>(&s.episode), sizeof(s.episode));
    in.read(reinterpret_cast<char*>(&s.round), sizeof(s.round));
    in.read(reinterpret_cast<char*>(&s.variable), sizeof(s.variable));
    if (!in) throw ParseError("dataset: truncated at sample " +
                              std::to_string(k) + " in " + path);
    if (s.label > 1) throw ParseError("dataset: label out of range in " + path);
  }
  char extra;
  if (in.read(&extra, 1))
    throw ParseError("dataset: trailing bytes in " + path);
  return data;
}

}  // namespace ipfix

#endif  // IPFIX_DATASET_IO_HPP
