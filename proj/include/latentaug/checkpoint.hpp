#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "latentaug/tensor.hpp"

namespace latentaug {

// Checkpoint container: a human-readable header followed by raw little-endian
// float32 tensor data.
//
//   <magic>\n
//   meta <key> <value>\n            (value runs to end of line)
//   tensor <name> <rank> <d0> ...\n
//   end\n
//   <payload: tensors in declaration order, 4 bytes per element>
//
// Parameters are stored as float32; loading restores them as float64 with the
// corresponding rounding (relative error <= 2^-24 per value).

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Checkpoint {
  std::string magic;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<NamedTensor> tensors;

  const std::string& meta_value(const std::string& key) const;
  bool has_meta(const std::string& key) const;
};

void write_checkpoint(const std::filesystem::path& path, const std::string& magic,
                      const std::vector<std::pair<std::string, std::string>>& meta,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors);

// Reads a checkpoint, validating the magic line against `expected_magic`
// (VersionError on mismatch) and the structure of header and payload
// (ParseError with the byte offset of the problem).
Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_magic);

}  // namespace latentaug
