#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "umit/tensor.hpp"

namespace umit {

// Named parameter set. std::map keeps iteration in name order, so optimizer
// sweeps, checkpoints, and printed breakdowns are deterministic.
template <typename T>
using ParamMap = std::map<std::string, TensorT<T>>;

struct ParamCount {
  size_t total = 0;
  std::vector<std::pair<std::string, size_t>> breakdown;  // name order
};

template <typename T>
ParamCount count_parameters(const ParamMap<T>& params) {
  ParamCount c;
  for (const auto& [name, t] : params) {
    size_t n = size_t(t.numel());
    c.breakdown.emplace_back(name, n);
    c.total += n;
  }
  return c;
}

template <typename T>
std::vector<std::pair<std::string, TensorT<T>>> to_entries(const ParamMap<T>& params) {
  std::vector<std::pair<std::string, TensorT<T>>> v;
  v.reserve(params.size());
  for (const auto& [name, t] : params) v.emplace_back(name, t);
  return v;
}

}  // namespace umit
