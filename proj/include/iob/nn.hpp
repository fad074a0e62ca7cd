#pragma once

#include <memory>
#include <string>
#include <vector>

#include "iob/rng.hpp"
#include "iob/tensor.hpp"

namespace iob {

enum class Activation { kIdentity, kRelu };

struct Layer {
  virtual ~Layer() = default;
  // tape == nullptr runs pure inference (nothing recorded, outputs untracked).
  virtual Tensor forward(const Tensor& x, Tape* tape) = 0;
  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::string name() const = 0;
};

class DenseLayer : public Layer {
 public:
  // He-uniform init for relu, Glorot-uniform for identity.
  DenseLayer(int64_t in, int64_t out, Activation act, Rng& rng, std::string name = "dense");
  Tensor forward(const Tensor& x, Tape* tape) override;
  std::vector<Tensor*> params() override { return {&weights, &bias}; }
  std::string name() const override { return name_; }

  Tensor weights;  // [out, in]
  Tensor bias;     // [out]
  Activation activation;
  int64_t in_width, out_width;

 private:
  std::string name_;
};

class Conv2dLayer : public Layer {
 public:
  Conv2dLayer(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride, int64_t padding,
              Activation act, Rng& rng, std::string name = "conv2d");
  Tensor forward(const Tensor& x, Tape* tape) override;
  std::vector<Tensor*> params() override { return {&filters, &bias}; }
  std::string name() const override { return name_; }

  Tensor filters;  // [out_ch, in_ch, kh, kw]
  Tensor bias;     // [out_ch]
  int64_t in_ch, out_ch, kernel, stride, padding;
  Activation activation;

 private:
  std::string name_;
};

class ConvTranspose2dLayer : public Layer {
 public:
  ConvTranspose2dLayer(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
                       int64_t padding, Activation act, Rng& rng,
                       std::string name = "conv_transpose2d");
  Tensor forward(const Tensor& x, Tape* tape) override;
  std::vector<Tensor*> params() override { return {&filters, &bias}; }
  std::string name() const override { return name_; }

  // Stored so that conv2d with the same buffer is the exact adjoint:
  // [in_ch, out_ch, kh, kw].
  Tensor filters;
  Tensor bias;  // [out_ch]
  int64_t in_ch, out_ch, kernel, stride, padding;
  Activation activation;

 private:
  std::string name_;
};

// [B,C,H,W] <-> [B,C*H*W]; shares buffers, no copy.
class FlattenLayer : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape* tape) override;
  std::string name() const override { return "flatten"; }
};

class ReshapeLayer : public Layer {
 public:
  explicit ReshapeLayer(Shape per_sample) : per_sample_(std::move(per_sample)) {}
  Tensor forward(const Tensor& x, Tape* tape) override;
  std::string name() const override { return "reshape"; }

 private:
  Shape per_sample_;
};

// Raw functional forms (used by layers and by adjointness checks).
// w is [out_ch, in_ch, kh, kw]; maps in_ch -> out_ch channels.
Tensor conv2d_raw(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride,
                  int64_t padding, Activation act, Tape* tape, const std::string& name);
// Same w buffer interpreted as [from_ch, to_ch, kh, kw]; maps from_ch -> to_ch
// through the fractionally-strided (adjoint) operator.
Tensor conv_transpose2d_raw(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride,
                            int64_t padding, Activation act, Tape* tape, const std::string& name);

Tensor relu(const Tensor& x, Tape* tape);

enum class Reduction { kMean, kSum };

// Negative Gaussian log-likelihood with fixed variance:
//   (1/(2s2)) * sum_d (yhat_d - y_d)^2 + (D/2) * log(2*pi*s2)
// reduced over the batch. Differentiable w.r.t. yhat only.
Tensor gaussian_nll(const Tensor& yhat, const Tensor& y, double variance, Tape* tape,
                    Reduction reduction = Reduction::kMean);

// y[b,i] = x[b,i] * e[i]; gradients flow to whichever inputs are tracked.
Tensor mask_mul(const Tensor& x, const Tensor& e, Tape* tape);

// sum_i weights[i] * scalars[i] as a scalar tensor.
Tensor weighted_sum(const std::vector<Tensor>& scalars, const std::vector<double>& weights,
                    Tape* tape);

Tensor sum_all(const Tensor& x, Tape* tape);

struct AdamConfig {
  float lr = 5e-5f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig config = {});
  void step();
  void zero_grad();
  void set_lr(float lr) { config_.lr = lr; }
  int64_t steps() const { return step_count_; }
  const std::vector<Tensor*>& params() const { return params_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<float>> m_, v_;
  AdamConfig config_;
  int64_t step_count_ = 0;
};

}  // namespace iob
