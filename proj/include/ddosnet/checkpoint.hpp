#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddosnet/ndgrad/layers.hpp"
#include "json.hpp"

namespace ddosnet::checkpoint {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kMagic[8] = {'D', 'D', 'O', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct Array {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

struct Checkpoint {
  nlohmann::json metadata;
  std::vector<Array> arrays;

  const Array* find(const std::string& name) const;
};

/// Layout: magic, u32 version, u64 metadata length + JSON text, u64 array
/// count, then per array u32 name length + name, u32 rank, u64 dims, and
/// little-endian float32 values. Every integer is little-endian.
void save(const std::filesystem::path& path, const nlohmann::json& metadata, const ndgrad::StateList& state);
Checkpoint load(const std::filesystem::path& path);

/// Copies arrays into the tensors of `target` by name. Every target tensor
/// must be present with a matching shape.
void restore(const ndgrad::StateList& target, const Checkpoint& ckpt);

}  // namespace ddosnet::checkpoint
