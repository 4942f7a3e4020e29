#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ofmt {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/contract violations (bad extents, length mismatches, invalid params).
struct DimensionError : Error {
  using Error::Error;
};

using Shape = std::vector<int>;

inline long numel(const Shape& s) {
  long n = 1;
  for (int e : s) {
    if (e <= 0) throw DimensionError("tensor extent must be positive");
    n *= e;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

// N-dimensional row-major tensor. T is float for training runs and double
// for gradient audits; the layer ops are templated on it.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty until first use; same length as data otherwise

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0))
      : shape(std::move(s)), data(static_cast<size_t>(numel(shape)), fill) {}

  long size() const { return static_cast<long>(data.size()); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(Shape s, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<T>>(std::move(s));
  t->requires_grad = requires_grad;
  return t;
}

template <typename T>
TensorPtr<T> make_tensor(Shape s, std::vector<T> values, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<T>>();
  t->shape = std::move(s);
  if (static_cast<long>(values.size()) != numel(t->shape))
    throw DimensionError("value count does not match shape " + shape_str(t->shape));
  t->data = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

// Reverse-mode tape. Ops append a backward step when any input needs
// gradients; backward() seeds a scalar loss and replays steps in reverse.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

  void backward(const TensorPtr<T>& loss) {
    if (loss->size() != 1)
      throw Error("backward requires a scalar loss, got shape " + shape_str(loss->shape));
    loss->ensure_grad();
    loss->grad[0] = T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  void clear() { steps_.clear(); }
  size_t size() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
};

}  // namespace ofmt
