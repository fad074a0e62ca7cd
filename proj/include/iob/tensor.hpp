#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace iob {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float tensor. Copies are shallow: data and gradient
// buffers are shared, which is what the tape's backward closures rely on.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  const Shape& shape() const { return shape_; }
  int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

  float* data() { return data_->data(); }
  const float* data() const { return data_->data(); }
  float& at(int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
  float at(int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

  // A tensor is "tracked" once a gradient buffer exists; ops record
  // backward closures only for tracked inputs.
  bool tracked() const { return grad_ != nullptr; }
  void track();
  void untrack() { grad_.reset(); }
  float* grad() { return grad_ ? grad_->data() : nullptr; }
  const float* grad() const { return grad_ ? grad_->data() : nullptr; }
  void zero_grad();

  Tensor detached() const;          // same data buffer, no grad
  Tensor clone() const;             // deep copy of data, no grad
  Tensor reshaped(Shape shape) const;  // shares buffers, new shape

  float scalar() const;  // requires size()==1

 private:
  Shape shape_;
  std::shared_ptr<std::vector<float>> data_;
  std::shared_ptr<std::vector<float>> grad_;
};

// Record of executed ops; backward() replays the closures in reverse.
class Tape {
 public:
  void record(std::function<void()> backward) { ops_.push_back(std::move(backward)); }
  size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  // Seeds d(loss)/d(loss)=1 and accumulates into every tracked tensor's grad.
  void backward(Tensor& loss);

 private:
  std::vector<std::function<void()>> ops_;
};

}  // namespace iob
