#include "umit/tensor.hpp"

namespace umit {

template <typename T>
Tape<T>*& Tape<T>::current() {
  thread_local Tape<T>* cur = nullptr;
  return cur;
}

template <typename T>
bool& Tape<T>::recording_flag() {
  thread_local bool rec = true;
  return rec;
}

template class TensorT<float>;
template class TensorT<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace umit
