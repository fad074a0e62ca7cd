#include "iob/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace iob {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

namespace {

void init_uniform(Tensor& t, double limit, Rng& rng) {
  for (int64_t i = 0; i < t.size(); ++i)
    t.at(i) = static_cast<float>(rng.uniform(-limit, limit));
}

[[noreturn]] void dim_error(const std::string& layer, const std::string& what) {
  throw std::invalid_argument(layer + ": " + what);
}

int64_t conv_out_size(int64_t in, int64_t kernel, int64_t stride, int64_t padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

// col is [C*k*k, OH*OW] row-major; gathers with zero padding.
void im2col(const float* x, int64_t C, int64_t H, int64_t W, int64_t k, int64_t s, int64_t p,
            float* col) {
  const int64_t OH = conv_out_size(H, k, s, p);
  const int64_t OW = conv_out_size(W, k, s, p);
  const int64_t P = OH * OW;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < k; ++ki) {
      for (int64_t kj = 0; kj < k; ++kj) {
        float* row = col + ((c * k + ki) * k + kj) * P;
        for (int64_t oi = 0; oi < OH; ++oi) {
          const int64_t ii = oi * s - p + ki;
          for (int64_t oj = 0; oj < OW; ++oj) {
            const int64_t jj = oj * s - p + kj;
            row[oi * OW + oj] =
                (ii >= 0 && ii < H && jj >= 0 && jj < W) ? x[(c * H + ii) * W + jj] : 0.0f;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds col back into the [C,H,W] image.
void col2im_add(const float* col, int64_t C, int64_t H, int64_t W, int64_t k, int64_t s, int64_t p,
                float* x) {
  const int64_t OH = conv_out_size(H, k, s, p);
  const int64_t OW = conv_out_size(W, k, s, p);
  const int64_t P = OH * OW;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < k; ++ki) {
      for (int64_t kj = 0; kj < k; ++kj) {
        const float* row = col + ((c * k + ki) * k + kj) * P;
        for (int64_t oi = 0; oi < OH; ++oi) {
          const int64_t ii = oi * s - p + ki;
          if (ii < 0 || ii >= H) continue;
          for (int64_t oj = 0; oj < OW; ++oj) {
            const int64_t jj = oj * s - p + kj;
            if (jj >= 0 && jj < W) x[(c * H + ii) * W + jj] += row[oi * OW + oj];
          }
        }
      }
    }
  }
}

void apply_activation(Tensor& y, Activation act) {
  if (act != Activation::kRelu) return;
  float* d = y.data();
  for (int64_t i = 0; i < y.size(); ++i)
    if (d[i] < 0.0f) d[i] = 0.0f;
}

// Upstream gradient gated through the activation; y holds post-activation values.
std::vector<float> gated_grad(const Tensor& y, Activation act) {
  std::vector<float> g(y.grad(), y.grad() + y.size());
  if (act == Activation::kRelu) {
    const float* d = y.data();
    for (size_t i = 0; i < g.size(); ++i)
      if (d[i] <= 0.0f) g[i] = 0.0f;
  }
  return g;
}

}  // namespace

DenseLayer::DenseLayer(int64_t in, int64_t out, Activation act, Rng& rng, std::string name)
    : weights({out, in}), bias({out}), activation(act), in_width(in), out_width(out),
      name_(std::move(name)) {
  const double limit = act == Activation::kRelu ? std::sqrt(6.0 / in)
                                                : std::sqrt(6.0 / (in + out));
  init_uniform(weights, limit, rng);
  weights.track();
  bias.track();
}

Tensor DenseLayer::forward(const Tensor& x, Tape* tape) {
  if (x.ndim() != 2 || x.dim(1) != in_width)
    dim_error(name_, "expected input [batch," + std::to_string(in_width) + "], got " +
                         shape_str(x.shape()));
  const int64_t B = x.dim(0);
  Tensor y({B, out_width});
  MapMat Y(y.data(), B, out_width);
  CMapMat X(x.data(), B, in_width);
  CMapMat W(weights.data(), out_width, in_width);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.data(), out_width);
  apply_activation(y, activation);

  if (tape && (x.tracked() || weights.tracked() || bias.tracked())) {
    y.track();
    Tensor xc = x, yc = y, wc = weights, bc = bias;
    Activation act = activation;
    int64_t in = in_width, out = out_width;
    tape->record([xc, yc, wc, bc, act, B, in, out]() mutable {
      std::vector<float> g = gated_grad(yc, act);
      CMapMat G(g.data(), B, out);
      CMapMat X(xc.data(), B, in);
      if (wc.tracked()) {
        MapMat GW(wc.grad(), out, in);
        GW.noalias() += G.transpose() * X;
        Eigen::Map<Eigen::VectorXf> GB(bc.grad(), out);
        GB.noalias() += G.colwise().sum().transpose();
      }
      if (xc.tracked()) {
        CMapMat W(wc.data(), out, in);
        MapMat GX(xc.grad(), B, in);
        GX.noalias() += G * W;
      }
    });
  }
  return y;
}

Conv2dLayer::Conv2dLayer(int64_t in_ch_, int64_t out_ch_, int64_t kernel_, int64_t stride_,
                         int64_t padding_, Activation act, Rng& rng, std::string name)
    : filters({out_ch_, in_ch_, kernel_, kernel_}), bias({out_ch_}), in_ch(in_ch_),
      out_ch(out_ch_), kernel(kernel_), stride(stride_), padding(padding_), activation(act),
      name_(std::move(name)) {
  const int64_t fan_in = in_ch * kernel * kernel;
  const int64_t fan_out = out_ch * kernel * kernel;
  const double limit = act == Activation::kRelu ? std::sqrt(6.0 / fan_in)
                                                : std::sqrt(6.0 / (fan_in + fan_out));
  init_uniform(filters, limit, rng);
  filters.track();
  bias.track();
}

Tensor conv2d_raw(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride,
                  int64_t padding, Activation act, Tape* tape, const std::string& name) {
  if (x.ndim() != 4) dim_error(name, "expected 4-d input, got " + shape_str(x.shape()));
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t OC = w.dim(0), k = w.dim(2);
  if (w.dim(1) != C)
    dim_error(name, "filter in_ch " + std::to_string(w.dim(1)) + " != input channels " +
                        std::to_string(C));
  const int64_t OH = conv_out_size(H, k, stride, padding);
  const int64_t OW = conv_out_size(W, k, stride, padding);
  if (OH <= 0 || OW <= 0) dim_error(name, "input smaller than kernel minus padding");
  const int64_t Ckk = C * k * k, P = OH * OW;

  Tensor y({B, OC, OH, OW});
  std::vector<float> col(static_cast<size_t>(Ckk * P));
  CMapMat Wm(w.data(), OC, Ckk);
  for (int64_t b = 0; b < B; ++b) {
    im2col(x.data() + b * C * H * W, C, H, W, k, stride, padding, col.data());
    MapMat Y(y.data() + b * OC * P, OC, P);
    CMapMat Col(col.data(), Ckk, P);
    Y.noalias() = Wm * Col;
    if (bias)
      for (int64_t oc = 0; oc < OC; ++oc)
        Y.row(oc).array() += bias->at(oc);
  }
  apply_activation(y, act);

  const bool bias_tracked = bias && bias->tracked();
  if (tape && (x.tracked() || w.tracked() || bias_tracked)) {
    y.track();
    Tensor xc = x, yc = y, wc = w;
    Tensor bc = bias ? *bias : Tensor();
    const bool has_bias = bias_tracked;
    tape->record([xc, yc, wc, bc, has_bias, act, B, C, H, W, OC, k, stride, padding, OH, OW, Ckk,
                  P]() mutable {
      std::vector<float> g = gated_grad(yc, act);
      std::vector<float> col(static_cast<size_t>(Ckk * P));
      std::vector<float> dcol(static_cast<size_t>(Ckk * P));
      CMapMat Wm(wc.data(), OC, Ckk);
      for (int64_t b = 0; b < B; ++b) {
        CMapMat G(g.data() + b * OC * P, OC, P);
        if (wc.tracked()) {
          im2col(xc.data() + b * C * H * W, C, H, W, k, stride, padding, col.data());
          CMapMat Col(col.data(), Ckk, P);
          MapMat GW(wc.grad(), OC, Ckk);
          GW.noalias() += G * Col.transpose();
        }
        if (has_bias) {
          for (int64_t oc = 0; oc < OC; ++oc) bc.grad()[oc] += G.row(oc).sum();
        }
        if (xc.tracked()) {
          MapMat DCol(dcol.data(), Ckk, P);
          DCol.noalias() = Wm.transpose() * G;
          col2im_add(dcol.data(), C, H, W, k, stride, padding, xc.grad() + b * C * H * W);
        }
      }
    });
  }
  return y;
}

Tensor Conv2dLayer::forward(const Tensor& x, Tape* tape) {
  return conv2d_raw(x, filters, &bias, stride, padding, activation, tape, name_);
}

ConvTranspose2dLayer::ConvTranspose2dLayer(int64_t in_ch_, int64_t out_ch_, int64_t kernel_,
                                           int64_t stride_, int64_t padding_, Activation act,
                                           Rng& rng, std::string name)
    : filters({in_ch_, out_ch_, kernel_, kernel_}), bias({out_ch_}), in_ch(in_ch_),
      out_ch(out_ch_), kernel(kernel_), stride(stride_), padding(padding_), activation(act),
      name_(std::move(name)) {
  const int64_t fan_in = in_ch * kernel * kernel;
  const int64_t fan_out = out_ch * kernel * kernel;
  const double limit = act == Activation::kRelu ? std::sqrt(6.0 / fan_in)
                                                : std::sqrt(6.0 / (fan_in + fan_out));
  init_uniform(filters, limit, rng);
  filters.track();
  bias.track();
}

Tensor conv_transpose2d_raw(const Tensor& x, const Tensor& w, const Tensor* bias, int64_t stride,
                            int64_t padding, Activation act, Tape* tape, const std::string& name) {
  if (x.ndim() != 4) dim_error(name, "expected 4-d input, got " + shape_str(x.shape()));
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t OC = w.dim(1), k = w.dim(2);
  if (w.dim(0) != C)
    dim_error(name, "filter from_ch " + std::to_string(w.dim(0)) + " != input channels " +
                        std::to_string(C));
  const int64_t OH = (H - 1) * stride - 2 * padding + k;
  const int64_t OW = (W - 1) * stride - 2 * padding + k;
  if (OH <= 0 || OW <= 0) dim_error(name, "degenerate output size");
  const int64_t Ckk = OC * k * k, P = H * W;

  Tensor y({B, OC, OH, OW});
  std::vector<float> col(static_cast<size_t>(Ckk * P));
  CMapMat Wm(w.data(), C, Ckk);
  for (int64_t b = 0; b < B; ++b) {
    CMapMat X(x.data() + b * C * P, C, P);
    MapMat Col(col.data(), Ckk, P);
    Col.noalias() = Wm.transpose() * X;
    float* out = y.data() + b * OC * OH * OW;
    col2im_add(col.data(), OC, OH, OW, k, stride, padding, out);
    if (bias)
      for (int64_t oc = 0; oc < OC; ++oc)
        for (int64_t i = 0; i < OH * OW; ++i) out[oc * OH * OW + i] += bias->at(oc);
  }
  apply_activation(y, act);

  const bool bias_tracked = bias && bias->tracked();
  if (tape && (x.tracked() || w.tracked() || bias_tracked)) {
    y.track();
    Tensor xc = x, yc = y, wc = w;
    Tensor bc = bias ? *bias : Tensor();
    const bool has_bias = bias_tracked;
    tape->record([xc, yc, wc, bc, has_bias, act, B, C, OC, k, stride, padding, OH, OW, Ckk,
                  P]() mutable {
      std::vector<float> g = gated_grad(yc, act);
      std::vector<float> gcol(static_cast<size_t>(Ckk * P));
      CMapMat Wm(wc.data(), C, Ckk);
      for (int64_t b = 0; b < B; ++b) {
        const float* gb = g.data() + b * OC * OH * OW;
        im2col(gb, OC, OH, OW, k, stride, padding, gcol.data());
        CMapMat GCol(gcol.data(), Ckk, P);
        if (wc.tracked()) {
          CMapMat X(xc.data() + b * C * P, C, P);
          MapMat GW(wc.grad(), C, Ckk);
          GW.noalias() += X * GCol.transpose();
        }
        if (has_bias) {
          for (int64_t oc = 0; oc < OC; ++oc) {
            double s = 0.0;
            for (int64_t i = 0; i < OH * OW; ++i) s += gb[oc * OH * OW + i];
            bc.grad()[oc] += static_cast<float>(s);
          }
        }
        if (xc.tracked()) {
          MapMat GX(xc.grad() + b * C * P, C, P);
          GX.noalias() += Wm * GCol;
        }
      }
    });
  }
  return y;
}

Tensor ConvTranspose2dLayer::forward(const Tensor& x, Tape* tape) {
  return conv_transpose2d_raw(x, filters, &bias, stride, padding, activation, tape, name_);
}

Tensor FlattenLayer::forward(const Tensor& x, Tape*) {
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor ReshapeLayer::forward(const Tensor& x, Tape*) {
  Shape s{x.dim(0)};
  s.insert(s.end(), per_sample_.begin(), per_sample_.end());
  return x.reshaped(std::move(s));
}

Tensor relu(const Tensor& x, Tape* tape) {
  Tensor y = x.clone();
  apply_activation(y, Activation::kRelu);
  if (tape && x.tracked()) {
    y.track();
    Tensor xc = x, yc = y;
    tape->record([xc, yc]() mutable {
      std::vector<float> g = gated_grad(yc, Activation::kRelu);
      for (int64_t i = 0; i < xc.size(); ++i) xc.grad()[i] += g[static_cast<size_t>(i)];
    });
  }
  return y;
}

Tensor gaussian_nll(const Tensor& yhat, const Tensor& y, double variance, Tape* tape,
                    Reduction reduction) {
  if (variance <= 0.0) throw std::domain_error("gaussian_nll: variance must be positive");
  if (yhat.shape() != y.shape())
    throw std::invalid_argument("gaussian_nll: shape mismatch " + shape_str(yhat.shape()) +
                                " vs " + shape_str(y.shape()));
  const int64_t B = yhat.dim(0);
  const int64_t D = yhat.size() / B;
  double sq = 0.0;  // 64-bit accumulation
  for (int64_t i = 0; i < yhat.size(); ++i) {
    const double r = static_cast<double>(yhat.at(i)) - static_cast<double>(y.at(i));
    sq += r * r;
  }
  const double per_batch_const = 0.5 * D * std::log(2.0 * M_PI * variance);
  const double coeff = reduction == Reduction::kMean ? 1.0 / B : 1.0;
  const double value = coeff * (sq / (2.0 * variance) + B * per_batch_const);

  Tensor loss({1}, {static_cast<float>(value)});
  if (tape && yhat.tracked()) {
    loss.track();
    Tensor yhc = yhat, yc = y, lc = loss;
    tape->record([yhc, yc, lc, variance, coeff]() mutable {
      const float gl = lc.grad()[0];
      const float scale = static_cast<float>(gl * coeff / variance);
      for (int64_t i = 0; i < yhc.size(); ++i)
        yhc.grad()[i] += scale * (yhc.at(i) - yc.at(i));
    });
  }
  return loss;
}

Tensor mask_mul(const Tensor& x, const Tensor& e, Tape* tape) {
  if (x.ndim() != 2 || e.ndim() != 1 || x.dim(1) != e.dim(0))
    throw std::invalid_argument("mask_mul: want [batch,K] x [K], got " + shape_str(x.shape()) +
                                " x " + shape_str(e.shape()));
  const int64_t B = x.dim(0), K = x.dim(1);
  Tensor y({B, K});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t i = 0; i < K; ++i) y.at(b * K + i) = x.at(b * K + i) * e.at(i);

  if (tape && (x.tracked() || e.tracked())) {
    y.track();
    Tensor xc = x, ec = e, yc = y;
    tape->record([xc, ec, yc, B, K]() mutable {
      for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < K; ++i) {
          const float g = yc.grad()[b * K + i];
          if (xc.tracked()) xc.grad()[b * K + i] += g * ec.at(i);
          if (ec.tracked()) ec.grad()[i] += g * xc.at(b * K + i);
        }
    });
  }
  return y;
}

Tensor weighted_sum(const std::vector<Tensor>& scalars, const std::vector<double>& weights,
                    Tape* tape) {
  if (scalars.size() != weights.size())
    throw std::invalid_argument("weighted_sum: size mismatch");
  double total = 0.0;
  bool any_tracked = false;
  for (size_t i = 0; i < scalars.size(); ++i) {
    total += weights[i] * scalars[i].scalar();
    any_tracked = any_tracked || scalars[i].tracked();
  }
  Tensor out({1}, {static_cast<float>(total)});
  if (tape && any_tracked) {
    out.track();
    std::vector<Tensor> terms = scalars;
    std::vector<double> w = weights;
    Tensor oc = out;
    tape->record([terms, w, oc]() mutable {
      const float g = oc.grad()[0];
      for (size_t i = 0; i < terms.size(); ++i)
        if (terms[i].tracked()) terms[i].grad()[0] += static_cast<float>(w[i]) * g;
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x, Tape* tape) {
  double s = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) s += x.at(i);
  Tensor out({1}, {static_cast<float>(s)});
  if (tape && x.tracked()) {
    out.track();
    Tensor xc = x, oc = out;
    tape->record([xc, oc]() mutable {
      const float g = oc.grad()[0];
      for (int64_t i = 0; i < xc.size(); ++i) xc.grad()[i] += g;
    });
  }
  return out;
}

Adam::Adam(std::vector<Tensor*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (Tensor* p : params_) {
    m_.emplace_back(static_cast<size_t>(p->size()), 0.0f);
    v_.emplace_back(static_cast<size_t>(p->size()), 0.0f);
  }
}

void Adam::step() {
  ++step_count_;
  const float bc1 = 1.0f - std::pow(config_.beta1, static_cast<float>(step_count_));
  const float bc2 = 1.0f - std::pow(config_.beta2, static_cast<float>(step_count_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor* p = params_[pi];
    if (!p->tracked()) throw std::runtime_error("Adam::step: parameter has no gradient");
    float* grad = p->grad();
    float* data = p->data();
    float* m = m_[pi].data();
    float* v = v_[pi].data();
    for (int64_t i = 0; i < p->size(); ++i) {
      const float g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0f - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0f - config_.beta2) * g * g;
      const float mhat = m[i] / bc1;
      const float vhat = v[i] / bc2;
      data[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

}  // namespace iob
