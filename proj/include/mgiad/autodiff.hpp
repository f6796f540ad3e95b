#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mgiad/errors.hpp"
#include "mgiad/tensor.hpp"

namespace mgiad {

// A value in the computation graph together with its gradient buffer.
// Parameters are nodes with a name; sharing a weight across several use
// sites means reusing the same node, so its gradient accumulates the
// contributions of every occurrence.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = true;
  std::string name;  // set for parameters only

  Node(Tensor<T> v, bool rg) : value(std::move(v)), grad(Tensor<T>::zeros(value.shape)), requires_grad(rg) {}
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// Linear record of the forward pass; backward() replays it once in reverse.
// check_finite guards every op output against NaN/Inf and defaults to on in
// double precision (the verification precision).
template <typename T>
class Tape {
 public:
  Tape() : check_finite(std::is_same_v<T, double>) {}

  NodePtr<T> node(Tensor<T> v, bool requires_grad = true) {
    auto n = std::make_shared<Node<T>>(std::move(v), requires_grad);
    if (check_finite && !n->value.all_finite())
      throw UsageError("non-finite value entered the tape");
    return n;
  }

  void record(std::function<void()> back) { steps_.push_back(std::move(back)); }

  void backward(const NodePtr<T>& loss) {
    if (steps_.empty()) throw UsageError("backward called without a recorded forward pass");
    if (loss->value.numel() != 1) throw UsageError("backward expects a scalar loss");
    loss->grad.data[0] = T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  void clear() { steps_.clear(); }
  std::size_t size() const { return steps_.size(); }

  bool check_finite;

 private:
  std::vector<std::function<void()>> steps_;
};

}  // namespace mgiad
