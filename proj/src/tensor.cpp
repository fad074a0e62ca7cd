#include "iob/tensor.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace iob {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<float>>(static_cast<size_t>(shape_numel(shape_)), fill)) {
  for (int64_t d : shape_)
    if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim in " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<float>>(std::move(values))) {
  if (shape_numel(shape_) != static_cast<int64_t>(data_->size()))
    throw std::invalid_argument("Tensor: " + shape_str(shape_) + " does not match value count " +
                                std::to_string(data_->size()));
}

void Tensor::track() {
  if (!grad_) grad_ = std::make_shared<std::vector<float>>(data_->size(), 0.0f);
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0f);
}

Tensor Tensor::detached() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = data_;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = std::make_shared<std::vector<float>>(*data_);
  return t;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != size())
    throw std::invalid_argument("reshape: " + shape_str(shape_) + " -> " + shape_str(shape) +
                                " changes element count");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  t.grad_ = grad_;
  return t;
}

float Tensor::scalar() const {
  if (size() != 1) throw std::runtime_error("scalar(): tensor has " + std::to_string(size()) + " elements");
  return (*data_)[0];
}

void Tape::backward(Tensor& loss) {
  if (loss.size() != 1) throw std::runtime_error("backward: loss must be scalar");
  if (!loss.tracked()) throw std::runtime_error("backward: loss is not tracked by this tape");
  loss.grad()[0] += 1.0f;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

}  // namespace iob
