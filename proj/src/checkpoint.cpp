#include "umit/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace umit {

namespace {

constexpr char kMagic[8] = {'U', 'M', 'I', 'T', 'C', 'K', 'P', 'T'};

template <typename U>
void put(std::ostream& o, U v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename U>
U take(std::istream& i, const std::string& where) {
  U v{};
  if (!i.read(reinterpret_cast<char*>(&v), sizeof v))
    throw std::runtime_error("checkpoint: truncated at " + where);
  return v;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

float Checkpoint::meta(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t || t->numel() != 1)
    throw std::runtime_error("checkpoint: missing scalar entry " + name);
  return t->data()[0];
}

void save_checkpoint(const std::string& path, uint64_t iter,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
  if (tensors.empty()) throw std::invalid_argument("checkpoint: nothing to save");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  f.write(kMagic, sizeof kMagic);
  put<uint32_t>(f, kCheckpointVersion);
  put<uint64_t>(f, iter);
  put<uint32_t>(f, uint32_t(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.size() > 0xffff)
      throw std::invalid_argument("checkpoint: bad tensor name: '" + name + "'");
    if (!t.defined())
      throw std::invalid_argument("checkpoint: undefined tensor " + name);
    put<uint16_t>(f, uint16_t(name.size()));
    f.write(name.data(), std::streamsize(name.size()));
    const Shape& s = t.shape();
    put<uint8_t>(f, uint8_t(s.rank()));
    for (int i = 0; i < s.rank(); ++i) put<uint32_t>(f, uint32_t(s[i]));
    f.write(reinterpret_cast<const char*>(t.data()),
            std::streamsize(sizeof(float) * size_t(t.numel())));
  }
  f.flush();
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  if (!f.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint32_t version = take<uint32_t>(f, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  ck.iter = take<uint64_t>(f, "iteration");
  uint32_t count = take<uint32_t>(f, "tensor count");
  ck.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t len = take<uint16_t>(f, "name length of tensor " + std::to_string(i));
    std::string name(len, '\0');
    if (!f.read(name.data(), len))
      throw std::runtime_error("checkpoint: truncated at name of tensor " + std::to_string(i));
    uint8_t rank = take<uint8_t>(f, "rank of " + name);
    if (rank < 1 || rank > 4)
      throw std::runtime_error("checkpoint: bad rank " + std::to_string(rank) + " for " + name);
    std::vector<int> dims(rank);
    int64_t n = 1;
    for (int d = 0; d < rank; ++d) {
      uint32_t v = take<uint32_t>(f, "dims of " + name);
      dims[d] = int(v);
      n *= int64_t(v);
    }
    Tensor t = Tensor::zeros(Shape::of(dims));
    if (!f.read(reinterpret_cast<char*>(t.data()), std::streamsize(sizeof(float) * size_t(n))))
      throw std::runtime_error("checkpoint: truncated at payload of " + name);
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (f.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("checkpoint: trailing bytes after last tensor in " + path);
  return ck;
}

}  // namespace umit
