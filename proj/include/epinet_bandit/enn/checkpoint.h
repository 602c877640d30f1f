#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "epinet_bandit/enn/epinet.h"
#include "epinet_bandit/nn/parameter_store.h"

namespace epinet_bandit::enn {

// Binary container of named float64 tensors.
//
// Layout (little-endian):
//   8 bytes   magic "EPNBCKPT"
//   u32       format version
//   u64       header length H
//   H bytes   JSON header: {"version", "tensors": [{"name","rows","cols"}...],
//             "payload_fnv1a": hex string, "meta": {...}}
//   payload   rows*cols doubles per tensor, in header order, row-major
struct NamedTensor {
  std::string name;
  nn::Tensor2 value;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& checkpoint);
// Throws LoadError on any structural problem (bad magic, version, truncated
// payload, checksum mismatch, malformed header).
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Every parameter of every store becomes one tensor.
void append_stores(Checkpoint& checkpoint, std::span<const nn::ParameterStore* const> stores);
// Validates every name and shape before writing anything; throws LoadError.
void restore_stores(const Checkpoint& checkpoint, std::span<nn::ParameterStore* const> stores);

// Epinet head with its variant, prior_scale and index dim in the meta block.
Checkpoint epinet_checkpoint(const EpinetHead& head);
EpinetHead load_epinet(const Checkpoint& checkpoint);

}  // namespace epinet_bandit::enn
