#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace umit {

// Shapes are rank 0..4; images are (B, C, H, W).
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> ds) {
    if (ds.size() > 4) throw std::invalid_argument("Shape: rank > 4");
    for (int d : ds) dims_[rank_++] = d;
  }
  static Shape of(const std::vector<int>& ds) {
    Shape s;
    if (ds.size() > 4) throw std::invalid_argument("Shape: rank > 4");
    for (int d : ds) s.dims_[s.rank_++] = d;
    return s;
  }
  int rank() const { return rank_; }
  int operator[](int i) const {
    if (i < 0 || i >= rank_) throw std::out_of_range("Shape: axis " + std::to_string(i));
    return dims_[i];
  }
  int64_t numel() const {
    int64_t n = 1;
    for (int i = 0; i < rank_; ++i) n *= dims_[i];
    return n;
  }
  bool operator==(const Shape& o) const {
    if (rank_ != o.rank_) return false;
    for (int i = 0; i < rank_; ++i)
      if (dims_[i] != o.dims_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const {
    if (rank_ == 0) return "scalar";
    std::string s;
    for (int i = 0; i < rank_; ++i) {
      if (i) s += 'x';
      s += std::to_string(dims_[i]);
    }
    return s;
  }

 private:
  int rank_ = 0;
  std::array<int, 4> dims_{0, 0, 0, 0};
};

template <typename T>
struct Storage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until backward first touches this leaf
};

template <typename T>
class Tape;

// Value-semantic handle; copies alias the same buffer. The node/tape fields
// tie a tensor to the operation that produced it on the live tape and are
// managed by the op layer, not by callers.
template <typename T>
class TensorT {
 public:
  using value_type = T;

  TensorT() = default;

  static TensorT zeros(Shape s) {
    TensorT t;
    t.st_ = std::make_shared<Storage<T>>();
    t.st_->shape = s;
    t.st_->data.assign(size_t(s.numel()), T(0));
    return t;
  }
  static TensorT full(Shape s, T v) {
    TensorT t = zeros(s);
    for (auto& x : t.st_->data) x = v;
    return t;
  }
  static TensorT from(Shape s, std::vector<T> v) {
    if (int64_t(v.size()) != s.numel())
      throw std::invalid_argument("Tensor::from: data size " + std::to_string(v.size()) +
                                  " != shape " + s.str());
    TensorT t;
    t.st_ = std::make_shared<Storage<T>>();
    t.st_->shape = s;
    t.st_->data = std::move(v);
    return t;
  }
  static TensorT scalar(T v) { return full(Shape{1}, v); }

  bool defined() const { return bool(st_); }
  const Shape& shape() const { return st_->shape; }
  int64_t numel() const { return st_ ? st_->shape.numel() : 0; }
  T* data() { return st_->data.data(); }
  const T* data() const { return st_->data.data(); }
  std::vector<T>& vec() { return st_->data; }
  const std::vector<T>& vec() const { return st_->data; }

  T item() const {
    if (!st_ || st_->shape.numel() != 1)
      throw std::logic_error("Tensor::item: not a scalar");
    return st_->data[0];
  }

  bool requires_grad() const { return requires_grad_; }
  TensorT& set_requires_grad(bool b) {
    requires_grad_ = b;
    return *this;
  }

  // gradient buffer as a tensor handle (undefined if never populated)
  TensorT grad() const {
    if (!st_ || st_->grad.empty()) return {};
    TensorT g;
    g.st_ = std::make_shared<Storage<T>>();
    g.st_->shape = st_->shape;
    g.st_->data = st_->grad;
    return g;
  }
  bool has_grad() const { return st_ && !st_->grad.empty(); }
  std::vector<T>& grad_vec() { return st_->grad; }
  const std::vector<T>& grad_vec() const { return st_->grad; }
  void ensure_zero_grad() { st_->grad.assign(st_->data.size(), T(0)); }
  void drop_grad() { st_->grad.clear(); }

  // same buffer, no tape linkage, treated as a constant downstream
  TensorT detached() const {
    TensorT t = *this;
    t.node = -1;
    t.tape_id = 0;
    t.requires_grad_ = false;
    return t;
  }
  // deep copy, no linkage
  TensorT clone() const {
    TensorT t;
    if (!st_) return t;
    t.st_ = std::make_shared<Storage<T>>(*st_);
    t.requires_grad_ = requires_grad_;
    return t;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out = TensorT<U>::zeros(st_->shape);
    for (size_t i = 0; i < st_->data.size(); ++i) out.data()[i] = U(st_->data[i]);
    return out;
  }

  Storage<T>* storage() const { return st_.get(); }
  std::shared_ptr<Storage<T>> storage_ptr() const { return st_; }

  // managed by the op layer
  int64_t node = -1;
  uint64_t tape_id = 0;

 private:
  bool requires_grad_ = false;
  std::shared_ptr<Storage<T>> st_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// One recorded operation. parents encode, per differentiable input:
//   >= 0  : node index on the tape
//   -1    : constant (no gradient flows)
//   <= -2 : leaf slot -(v+2)
template <typename T>
struct TapeNode {
  std::array<int64_t, 3> parents{-1, -1, -1};
  int n_parents = 0;
  std::function<void(const TensorT<T>& g, const std::array<bool, 3>& need,
                     std::array<TensorT<T>, 3>& out)>
      vjp;
  const char* name = "";
};

template <typename T>
class Tape {
 public:
  Tape() : id_(next_id()++) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  uint64_t id() const { return id_; }
  bool consumed = false;

  std::vector<TapeNode<T>>& nodes() { return nodes_; }
  const TapeNode<T>& node(int64_t i) const { return nodes_[size_t(i)]; }
  int64_t size() const { return int64_t(nodes_.size()); }

  int64_t leaf_slot(const TensorT<T>& t) {
    auto it = leaf_index_.find(t.storage());
    if (it != leaf_index_.end()) return it->second;
    int64_t slot = int64_t(leaves_.size());
    leaves_.push_back(t);
    leaf_index_.emplace(t.storage(), slot);
    return slot;
  }
  int64_t find_leaf(const void* storage) const {
    auto it = leaf_index_.find(storage);
    return it == leaf_index_.end() ? -1 : it->second;
  }
  const std::vector<TensorT<T>>& leaves() const { return leaves_; }

  int64_t append(TapeNode<T> n) {
    nodes_.push_back(std::move(n));
    return int64_t(nodes_.size()) - 1;
  }

  // the live tape for this thread (null outside any TapeScope)
  static Tape*& current();
  // false inside a NoRecordScope
  static bool& recording_flag();
  static bool recording() { return current() != nullptr && recording_flag(); }

 private:
  static uint64_t& next_id() {
    static uint64_t n = 1;
    return n;
  }
  uint64_t id_;
  std::vector<TapeNode<T>> nodes_;
  std::vector<TensorT<T>> leaves_;
  std::unordered_map<const void*, int64_t> leaf_index_;
};

template <typename T>
class TapeScope {
 public:
  TapeScope() : prev_(Tape<T>::current()) { Tape<T>::current() = &tape_; }
  ~TapeScope() { Tape<T>::current() = prev_; }
  TapeScope(const TapeScope&) = delete;
  Tape<T>& tape() { return tape_; }

 private:
  Tape<T>* prev_;
  Tape<T> tape_;
};

template <typename T>
class NoRecordScope {
 public:
  NoRecordScope() : prev_(Tape<T>::recording_flag()) { Tape<T>::recording_flag() = false; }
  ~NoRecordScope() { Tape<T>::recording_flag() = prev_; }
  NoRecordScope(const NoRecordScope&) = delete;

 private:
  bool prev_;
};

// Reverse sweep from a scalar loss; accumulates into .grad of every
// requires_grad leaf reachable from it. Consumes the tape.
template <typename T>
void backward(const TensorT<T>& loss);

// Adjoints of `out` w.r.t. `wrt` without touching .grad or consuming the
// tape. With create_graph the returned tensors are themselves recorded, so
// they can be differentiated again (second order).
template <typename T>
std::vector<TensorT<T>> gradient(const TensorT<T>& out, const std::vector<TensorT<T>>& wrt,
                                 bool create_graph);

extern template class TensorT<float>;
extern template class TensorT<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template void backward<float>(const TensorT<float>&);
extern template void backward<double>(const TensorT<double>&);
extern template std::vector<TensorT<float>> gradient<float>(const TensorT<float>&,
                                                            const std::vector<TensorT<float>>&,
                                                            bool);
extern template std::vector<TensorT<double>> gradient<double>(
    const TensorT<double>&, const std::vector<TensorT<double>>&, bool);

}  // namespace umit
