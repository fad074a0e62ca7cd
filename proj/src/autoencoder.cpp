#include "iob/autoencoder.hpp"

#include <stdexcept>

namespace iob {

AutoencoderSpec AutoencoderSpec::scurve() {
  AutoencoderSpec s;
  s.preset = "scurve";
  s.k_max = 4;
  s.input_shape = {3};
  s.encoder = {
      LayerSpec::dense(3, 64, Activation::kRelu),
      LayerSpec::dense(64, 64, Activation::kRelu),
      LayerSpec::dense(64, 4, Activation::kIdentity),
  };
  s.decoder = {
      LayerSpec::dense(4, 64, Activation::kRelu),
      LayerSpec::dense(64, 64, Activation::kRelu),
      LayerSpec::dense(64, 3, Activation::kIdentity),
  };
  return s;
}

AutoencoderSpec AutoencoderSpec::ndisk() {
  AutoencoderSpec s;
  s.preset = "ndisk";
  s.k_max = 16;
  s.input_shape = {1, 32, 32};
  s.encoder = {
      LayerSpec::conv(1, 4, 4, 2, 1, Activation::kRelu),    // 32 -> 16
      LayerSpec::conv(4, 12, 4, 2, 1, Activation::kRelu),   // 16 -> 8
      LayerSpec::conv(12, 24, 4, 2, 1, Activation::kRelu),  // 8 -> 4
      LayerSpec::flatten(),                                 // 24*4*4 = 384
      LayerSpec::dense(384, 256, Activation::kRelu),
      LayerSpec::dense(256, 128, Activation::kRelu),
      LayerSpec::dense(128, 16, Activation::kIdentity),
  };
  s.decoder = {
      LayerSpec::dense(16, 128, Activation::kRelu),
      LayerSpec::dense(128, 256, Activation::kRelu),
      LayerSpec::dense(256, 384, Activation::kRelu),
      LayerSpec::reshape({24, 4, 4}),
      LayerSpec::conv_transpose(24, 12, 4, 2, 1, Activation::kRelu),  // 4 -> 8
      LayerSpec::conv_transpose(12, 4, 4, 2, 1, Activation::kRelu),   // 8 -> 16
      LayerSpec::conv_transpose(4, 1, 4, 2, 1, Activation::kIdentity),  // 16 -> 32
  };
  return s;
}

AutoencoderSpec AutoencoderSpec::dense_stack(const std::vector<int64_t>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("dense_stack: need at least input and k_max");
  AutoencoderSpec s;
  s.preset = "dense";
  s.k_max = dims.back();
  s.input_shape = {dims.front()};
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    s.encoder.push_back(LayerSpec::dense(dims[i], dims[i + 1],
                                         last ? Activation::kIdentity : Activation::kRelu));
  }
  for (size_t i = dims.size() - 1; i > 0; --i) {
    const bool last = i == 1;
    s.decoder.push_back(LayerSpec::dense(dims[i], dims[i - 1],
                                         last ? Activation::kIdentity : Activation::kRelu));
  }
  return s;
}

namespace {

std::string act_str(Activation a) { return a == Activation::kRelu ? "relu" : "identity"; }

Activation act_parse(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string layer_str(const LayerSpec& l) {
  switch (l.kind) {
    case LayerSpec::kDense:
      return "dense:" + std::to_string(l.in) + ":" + std::to_string(l.out) + ":" + act_str(l.act);
    case LayerSpec::kConv:
    case LayerSpec::kConvTranspose: {
      std::string s = l.kind == LayerSpec::kConv ? "conv" : "convt";
      return s + ":" + std::to_string(l.in) + ":" + std::to_string(l.out) + ":" +
             std::to_string(l.kernel) + ":" + std::to_string(l.stride) + ":" +
             std::to_string(l.padding) + ":" + act_str(l.act);
    }
    case LayerSpec::kFlatten:
      return "flatten";
    case LayerSpec::kReshape: {
      std::string s = "reshape";
      for (int64_t d : l.reshape_dims) s += ":" + std::to_string(d);
      return s;
    }
  }
  throw std::logic_error("layer_str: unreachable");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t at = 0;
  while (at <= s.size()) {
    const size_t next = s.find(sep, at);
    if (next == std::string::npos) {
      out.push_back(s.substr(at));
      break;
    }
    out.push_back(s.substr(at, next - at));
    at = next + 1;
  }
  return out;
}

LayerSpec layer_parse(const std::string& token) {
  const std::vector<std::string> f = split(token, ':');
  if (f[0] == "dense" && f.size() == 4)
    return LayerSpec::dense(std::stoll(f[1]), std::stoll(f[2]), act_parse(f[3]));
  if ((f[0] == "conv" || f[0] == "convt") && f.size() == 7) {
    const auto make = f[0] == "conv" ? LayerSpec::conv : LayerSpec::conv_transpose;
    return make(std::stoll(f[1]), std::stoll(f[2]), std::stoll(f[3]), std::stoll(f[4]),
                std::stoll(f[5]), act_parse(f[6]));
  }
  if (f[0] == "flatten" && f.size() == 1) return LayerSpec::flatten();
  if (f[0] == "reshape" && f.size() > 1) {
    Shape shape;
    for (size_t i = 1; i < f.size(); ++i) shape.push_back(std::stoll(f[i]));
    return LayerSpec::reshape(shape);
  }
  throw std::invalid_argument("bad layer token: " + token);
}

}  // namespace

std::string spec_serialize(const AutoencoderSpec& spec) {
  std::string out = "preset=" + spec.preset + "\nk_max=" + std::to_string(spec.k_max) + "\n";
  out += "input_shape=";
  for (size_t i = 0; i < spec.input_shape.size(); ++i)
    out += (i ? ":" : "") + std::to_string(spec.input_shape[i]);
  out += "\nencoder=";
  for (size_t i = 0; i < spec.encoder.size(); ++i)
    out += (i ? ";" : "") + layer_str(spec.encoder[i]);
  out += "\ndecoder=";
  for (size_t i = 0; i < spec.decoder.size(); ++i)
    out += (i ? ";" : "") + layer_str(spec.decoder[i]);
  out += "\n";
  return out;
}

AutoencoderSpec spec_deserialize(const std::string& text) {
  AutoencoderSpec spec;
  for (const std::string& line : split(text, '\n')) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "preset") spec.preset = value;
    else if (key == "k_max") spec.k_max = std::stoll(value);
    else if (key == "input_shape") {
      for (const std::string& d : split(value, ':'))
        if (!d.empty()) spec.input_shape.push_back(std::stoll(d));
    } else if (key == "encoder" || key == "decoder") {
      auto& dst = key == "encoder" ? spec.encoder : spec.decoder;
      for (const std::string& token : split(value, ';'))
        if (!token.empty()) dst.push_back(layer_parse(token));
    }
  }
  return spec;
}

namespace {

void build(Sequential& seq, const std::vector<LayerSpec>& specs, const std::string& prefix,
           Rng& rng, DenseLayer** last_dense) {
  int idx = 0;
  for (const auto& ls : specs) {
    const std::string name = prefix + "." + std::to_string(idx++);
    switch (ls.kind) {
      case LayerSpec::kDense: {
        auto l = std::make_unique<DenseLayer>(ls.in, ls.out, ls.act, rng, name);
        if (last_dense) *last_dense = l.get();
        seq.layers.push_back(std::move(l));
        break;
      }
      case LayerSpec::kConv:
        seq.layers.push_back(std::make_unique<Conv2dLayer>(ls.in, ls.out, ls.kernel, ls.stride,
                                                           ls.padding, ls.act, rng, name));
        break;
      case LayerSpec::kConvTranspose:
        seq.layers.push_back(std::make_unique<ConvTranspose2dLayer>(
            ls.in, ls.out, ls.kernel, ls.stride, ls.padding, ls.act, rng, name));
        break;
      case LayerSpec::kFlatten:
        seq.layers.push_back(std::make_unique<FlattenLayer>());
        break;
      case LayerSpec::kReshape:
        seq.layers.push_back(std::make_unique<ReshapeLayer>(ls.reshape_dims));
        break;
    }
  }
}

}  // namespace

Autoencoder::Autoencoder(const AutoencoderSpec& spec_, uint64_t seed)
    : k_max(spec_.k_max), spec(spec_) {
  Rng rng = Rng::stream(seed, 0x1a7e);
  build(encoder, spec.encoder, "encoder", rng, &bottleneck);
  build(decoder, spec.decoder, "decoder", rng, nullptr);
  if (!bottleneck || bottleneck->out_width != k_max)
    throw std::invalid_argument("autoencoder: encoder must end in a dense layer of width k_max");
}

std::vector<Tensor*> Autoencoder::params() {
  std::vector<Tensor*> out = encoder.params();
  for (Tensor* p : decoder.params()) out.push_back(p);
  return out;
}

void Autoencoder::zero_grad() {
  for (Tensor* p : params()) p->zero_grad();
}

}  // namespace iob
