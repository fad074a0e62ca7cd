#pragma once

#include <memory>
#include <string>
#include <vector>

#include "iob/nn.hpp"

namespace iob {

struct Sequential {
  std::vector<std::unique_ptr<Layer>> layers;

  Tensor forward(const Tensor& x, Tape* tape) {
    Tensor h = x;
    for (auto& l : layers) h = l->forward(h, tape);
    return h;
  }
  std::vector<Tensor*> params() {
    std::vector<Tensor*> out;
    for (auto& l : layers)
      for (Tensor* p : l->params()) out.push_back(p);
    return out;
  }
};

struct LayerSpec {
  enum Kind { kDense, kConv, kConvTranspose, kFlatten, kReshape };
  Kind kind;
  int64_t in = 0, out = 0;
  int64_t kernel = 0, stride = 1, padding = 0;
  Activation act = Activation::kIdentity;
  Shape reshape_dims;  // per-sample target for kReshape

  static LayerSpec dense(int64_t in, int64_t out, Activation act) {
    return {kDense, in, out, 0, 1, 0, act, {}};
  }
  static LayerSpec conv(int64_t in, int64_t out, int64_t k, int64_t s, int64_t p, Activation act) {
    return {kConv, in, out, k, s, p, act, {}};
  }
  static LayerSpec conv_transpose(int64_t in, int64_t out, int64_t k, int64_t s, int64_t p,
                                  Activation act) {
    return {kConvTranspose, in, out, k, s, p, act, {}};
  }
  static LayerSpec flatten() { return {kFlatten, 0, 0, 0, 1, 0, Activation::kIdentity, {}}; }
  static LayerSpec reshape(Shape per_sample) {
    return {kReshape, 0, 0, 0, 1, 0, Activation::kIdentity, std::move(per_sample)};
  }
};

// Declarative architecture; presets below follow the experiments' layouts.
struct AutoencoderSpec {
  std::string preset;  // "scurve", "ndisk", or "dense"
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
  int64_t k_max = 0;
  Shape input_shape;  // per-sample

  // dense 3-64-64-4 encoder, mirrored decoder
  static AutoencoderSpec scurve();
  // conv 4/12/24 filters (4x4, stride 2, pad 1) + dense 256-128-16, mirrored
  // decoder with transposed convs
  static AutoencoderSpec ndisk();
  // generic dense autoencoder: dims = {input, hidden..., k_max}
  static AutoencoderSpec dense_stack(const std::vector<int64_t>& dims);
};

// Text form of an architecture, one layer token per entry
// (e.g. "dense:3:64:relu", "conv:1:4:4:2:1:relu", "reshape:24:4:4").
std::string spec_serialize(const AutoencoderSpec& spec);
AutoencoderSpec spec_deserialize(const std::string& text);

class Autoencoder {
 public:
  Autoencoder(const AutoencoderSpec& spec, uint64_t seed);

  Tensor encode(const Tensor& x, Tape* tape) { return encoder.forward(x, tape); }
  Tensor decode(const Tensor& z, Tape* tape) { return decoder.forward(z, tape); }

  std::vector<Tensor*> params();
  void zero_grad();

  Sequential encoder;
  Sequential decoder;
  int64_t k_max;
  AutoencoderSpec spec;
  // Final encoder dense layer; row i of its weights feeds latent unit i.
  DenseLayer* bottleneck = nullptr;
};

}  // namespace iob
