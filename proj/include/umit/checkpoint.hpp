#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "umit/tensor.hpp"

namespace umit {

// Binary tensor container. Layout, all little-endian:
//   magic "UMITCKPT" (8 bytes), format version u32, iteration u64,
//   tensor count u32, then per tensor: name length u16, name bytes,
//   rank u8, one u32 per dim, raw float32 payload.
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  uint64_t iter = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
  // scalar convenience for meta entries; throws if missing
  float meta(const std::string& name) const;
  bool has(const std::string& name) const { return find(name) != nullptr; }
};

void save_checkpoint(const std::string& path, uint64_t iter,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace umit
