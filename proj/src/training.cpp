#include "iob/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "iob/stats.hpp"
#include "iob/tensor_io.hpp"

namespace iob {

namespace {

std::string fnv1a(const unsigned char* bytes, size_t n) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Tensor gather_rows(const Tensor& data, const std::vector<int64_t>& order, int64_t from,
                   int64_t to) {
  const int64_t per = data.size() / data.dim(0);
  Shape shape = data.shape();
  shape[0] = to - from;
  Tensor out(shape);
  for (int64_t i = from; i < to; ++i)
    std::copy(data.data() + order[static_cast<size_t>(i)] * per,
              data.data() + (order[static_cast<size_t>(i)] + 1) * per,
              out.data() + (i - from) * per);
  return out;
}

Tensor slice_rows(const Tensor& data, int64_t from, int64_t to) {
  const int64_t per = data.size() / data.dim(0);
  Shape shape = data.shape();
  shape[0] = to - from;
  Tensor out(shape);
  std::copy(data.data() + from * per, data.data() + to * per, out.data());
  return out;
}

constexpr int64_t kEvalBatch = 256;

// Mean per-sample loss over a dataset under a fixed-width mask.
double eval_masked(Autoencoder& model, const Tensor& data, int64_t k, double variance) {
  const int64_t n = data.dim(0);
  double total = 0.0;
  for (int64_t at = 0; at < n; at += kEvalBatch) {
    const int64_t to = std::min(at + kEvalBatch, n);
    Tensor x = slice_rows(data, at, to);
    total += masked_loss(model, x, x, k, variance, nullptr).scalar() * (to - at);
  }
  return total / static_cast<double>(n);
}

// Mean composite loss over a dataset (the Linear IOB validation objective).
double eval_composite(Autoencoder& model, const Tensor& data, const std::vector<double>& rho,
                      double variance) {
  const int64_t n = data.dim(0);
  double total = 0.0;
  for (int64_t at = 0; at < n; at += kEvalBatch) {
    const int64_t to = std::min(at + kEvalBatch, n);
    Tensor x = slice_rows(data, at, to);
    total += composite_loss_exact(model, x, x, rho, variance, nullptr).scalar() * (to - at);
  }
  return total / static_cast<double>(n);
}

std::vector<int64_t> shuffled_indices(int64_t n, uint64_t seed, uint64_t epoch) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  Rng rng = Rng::stream(seed, 0xe90c0 + epoch);
  for (int64_t i = n - 1; i > 0; --i)
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(0, i))]);
  return idx;
}

}  // namespace

std::string fingerprint_tensor(const Tensor& t) {
  return fnv1a(reinterpret_cast<const unsigned char*>(t.data()), sizeof(float) * t.size());
}

bool early_stop_triggered(const std::vector<double>& val_history, const EarlyStopConfig& config) {
  const size_t patience = static_cast<size_t>(config.patience);
  if (val_history.size() < patience + 1) return false;
  const size_t window_start = val_history.size() - patience;
  double best_before = val_history[0];
  for (size_t i = 1; i < window_start; ++i) best_before = std::min(best_before, val_history[i]);
  double best_in_window = val_history[window_start];
  for (size_t i = window_start + 1; i < val_history.size(); ++i)
    best_in_window = std::min(best_in_window, val_history[i]);
  const double improvement =
      (best_before - best_in_window) / std::max(std::abs(best_before), 1e-12);
  return improvement < config.min_improvement;
}

void RunManifest::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("RunManifest::save: cannot open " + path);
  os.precision(17);
  os << "config_hash=" << config_hash << "\n"
     << "seed=" << seed << "\n"
     << "prng=" << prng << "\n"
     << "dataset_fingerprint=" << dataset_fingerprint << "\n"
     << "diverged=" << (diverged ? 1 : 0) << "\n"
     << "wall_clock_sec=" << wall_clock_sec << "\n"
     << "model_path=" << model_path << "\n"
     << "epochs=" << train_losses.size() << "\n";
  for (size_t i = 0; i < train_losses.size(); ++i)
    os << "epoch." << i << ".train=" << train_losses[i] << "\n"
       << "epoch." << i << ".val=" << val_losses[i] << "\n";
  for (size_t i = 0; i < events.size(); ++i) os << "event." << i << "=" << events[i] << "\n";
}

TrainResult train_iob(const AutoencoderSpec& spec, const IobConfig& iob_config,
                      const DatasetBundle& bundle, const TrainConfig& train_config) {
  if (spec.k_max != iob_config.k_max)
    throw std::invalid_argument("train_iob: spec.k_max != iob_config.k_max");
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  result.model = std::make_unique<Autoencoder>(spec, train_config.seed);
  Autoencoder& model = *result.model;
  RunManifest& manifest = result.manifest;
  manifest.seed = train_config.seed;
  manifest.prng = Rng::name();
  manifest.dataset_fingerprint = fingerprint_tensor(bundle.train);
  {
    const std::string cfg = spec.preset + "|kmax=" + std::to_string(iob_config.k_max) +
                            "|scheme=" + (iob_config.scheme == WeightScheme::kLinear ? "linear" : "geometric") +
                            "|rate=" + std::to_string(iob_config.rate) +
                            "|lr=" + std::to_string(train_config.lr) +
                            "|batch=" + std::to_string(train_config.batch_size) +
                            "|seed=" + std::to_string(train_config.seed) +
                            (train_config.lr_decay_every > 0
                                 ? "|decay=" + std::to_string(train_config.lr_decay) + "/" +
                                       std::to_string(train_config.lr_decay_every)
                                 : "");
    manifest.config_hash = fnv1a(reinterpret_cast<const unsigned char*>(cfg.data()), cfg.size());
  }

  const double variance = bundle.population_variance;
  const bool geometric = iob_config.scheme == WeightScheme::kGeometric;
  const std::vector<double> rho = weight_profile(iob_config);
  IobConfig config = iob_config;  // mutable sweep state lives here

  Adam opt(model.params(), AdamConfig{train_config.lr, 0.9f, 0.999f, 1e-8f});
  const int64_t n_train = bundle.train.dim(0);
  std::vector<double> frontier_history;  // geometric: val losses since last advance

  for (int epoch = 0; epoch < train_config.max_epochs; ++epoch) {
    if (train_config.lr_decay_every > 0 && epoch > 0 && epoch % train_config.lr_decay_every == 0)
      opt.set_lr(train_config.lr *
                 std::pow(train_config.lr_decay,
                          static_cast<float>(epoch / train_config.lr_decay_every)));
    const std::vector<int64_t> order =
        shuffled_indices(n_train, train_config.seed, static_cast<uint64_t>(epoch));
    Rng krng = Rng::stream(train_config.seed, 0x5a3b1e + static_cast<uint64_t>(epoch));
    double epoch_loss = 0.0;
    int64_t seen = 0;
    for (int64_t at = 0; at < n_train; at += train_config.batch_size) {
      const int64_t to = std::min(at + train_config.batch_size, n_train);
      Tensor x = gather_rows(bundle.train, order, at, to);
      Tape tape;
      Tensor loss = geometric
                        ? composite_loss_stochastic(model, x, x, config, variance, krng, &tape)
                        : composite_loss_exact(model, x, x, rho, variance, &tape);
      if (!std::isfinite(loss.scalar())) {
        manifest.diverged = true;
        manifest.events.push_back("diverged at epoch " + std::to_string(epoch));
        manifest.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
      }
      opt.zero_grad();
      tape.backward(loss);
      if (geometric) apply_frozen_prefix(model, config.sweep.frozen_prefix);
      opt.step();
      epoch_loss += loss.scalar() * (to - at);
      seen += to - at;
    }
    manifest.train_losses.push_back(epoch_loss / static_cast<double>(seen));

    if (geometric) {
      const int64_t frontier = std::min(config.sweep.frozen_prefix + 1, config.k_max);
      const double val = eval_masked(model, bundle.val, frontier, variance);
      manifest.val_losses.push_back(val);
      frontier_history.push_back(val);
      if (sweep_advance(config.sweep, frontier_history, config.k_max)) {
        manifest.events.push_back("sweep advance: frozen_prefix=" +
                                  std::to_string(config.sweep.frozen_prefix) + " at epoch " +
                                  std::to_string(epoch));
        if (train_config.verbose)
          std::printf("[epoch %d] sweep advance -> s=%lld\n", epoch,
                      static_cast<long long>(config.sweep.frozen_prefix));
        frontier_history.clear();
        if (config.sweep.frozen_prefix > config.k_max) break;  // final window done
      }
    } else {
      const double val = eval_composite(model, bundle.val, rho, variance);
      manifest.val_losses.push_back(val);
      if (early_stop_triggered(manifest.val_losses, train_config.early_stop)) {
        manifest.events.push_back("early stop at epoch " + std::to_string(epoch));
        break;
      }
    }
    if (train_config.verbose)
      std::printf("[epoch %d] train=%.6f val=%.6f\n", epoch, manifest.train_losses.back(),
                  manifest.val_losses.back());
  }

  manifest.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<TrainResult> train_separate_autoencoders(const AutoencoderSpec& spec,
                                                     const DatasetBundle& bundle,
                                                     const TrainConfig& train_config,
                                                     const std::vector<int64_t>& ks) {
  std::vector<TrainResult> results;
  for (int64_t k : ks) {
    AutoencoderSpec narrowed = spec;
    int64_t width = k;
    if (k == 0) {
      // a zero-wide dense layer cannot exist; a fully closed mask over the
      // standard bottleneck trains the same mean predictor
      width = spec.k_max;
    } else {
      narrowed.k_max = k;
      narrowed.encoder.back().out = k;
      narrowed.decoder.front().in = k;
    }

    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result;
    result.model = std::make_unique<Autoencoder>(narrowed, train_config.seed);
    Autoencoder& model = *result.model;
    RunManifest& manifest = result.manifest;
    manifest.seed = train_config.seed;
    manifest.prng = Rng::name();
    manifest.dataset_fingerprint = fingerprint_tensor(bundle.train);
    manifest.config_hash = fnv1a(reinterpret_cast<const unsigned char*>(&k), sizeof(k));

    const double variance = bundle.population_variance;
    const int64_t mask_k = k == 0 ? 0 : width;
    Adam opt(model.params(), AdamConfig{train_config.lr, 0.9f, 0.999f, 1e-8f});
    const int64_t n_train = bundle.train.dim(0);
    bool done = false;
    for (int epoch = 0; epoch < train_config.max_epochs && !done; ++epoch) {
      const std::vector<int64_t> order =
          shuffled_indices(n_train, train_config.seed, static_cast<uint64_t>(epoch));
      double epoch_loss = 0.0;
      for (int64_t at = 0; at < n_train; at += train_config.batch_size) {
        const int64_t to = std::min(at + train_config.batch_size, n_train);
        Tensor x = gather_rows(bundle.train, order, at, to);
        Tape tape;
        Tensor loss = masked_loss(model, x, x, mask_k, variance, &tape);
        if (!std::isfinite(loss.scalar())) {
          manifest.diverged = true;
          done = true;
          break;
        }
        opt.zero_grad();
        tape.backward(loss);
        opt.step();
        epoch_loss += loss.scalar() * (to - at);
      }
      if (manifest.diverged) break;
      manifest.train_losses.push_back(epoch_loss / static_cast<double>(n_train));
      manifest.val_losses.push_back(eval_masked(model, bundle.val, mask_k, variance));
      if (early_stop_triggered(manifest.val_losses, train_config.early_stop)) {
        manifest.events.push_back("early stop at epoch " + std::to_string(epoch));
        break;
      }
    }
    manifest.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results.push_back(std::move(result));
  }
  return results;
}

std::vector<double> per_sample_nmse(Autoencoder& model, const Tensor& data, int64_t k,
                                    double variance) {
  const int64_t n = data.dim(0);
  const int64_t per = data.size() / n;
  std::vector<double> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t at = 0; at < n; at += kEvalBatch) {
    const int64_t to = std::min(at + kEvalBatch, n);
    Tensor x = slice_rows(data, at, to);
    Tensor z = model.encode(x, nullptr);
    Tensor zk = mask_mul(z, mask_tensor(k, model.k_max), nullptr);
    Tensor yhat = model.decode(zk, nullptr);
    for (int64_t b = 0; b < to - at; ++b) {
      double sq = 0.0;
      for (int64_t j = 0; j < per; ++j) {
        const double r =
            static_cast<double>(yhat.at(b * per + j)) - static_cast<double>(x.at(b * per + j));
        sq += r * r;
      }
      out.push_back(sq / static_cast<double>(per) / variance);
    }
  }
  return out;
}

std::vector<CurvePoint> evaluate_mse_curve(Autoencoder& model, const DatasetBundle& bundle,
                                           const std::vector<int64_t>& ks) {
  std::vector<CurvePoint> curve;
  for (int64_t k : ks) {
    std::vector<double> nmse =
        per_sample_nmse(model, bundle.val, std::min(k, model.k_max), bundle.population_variance);
    curve.push_back({k, mean(nmse), percentile_nearest_rank(nmse, 16.0),
                     percentile_nearest_rank(nmse, 84.0)});
  }
  return curve;
}

void save_model(const std::string& path, Autoencoder& model) {
  std::vector<std::pair<std::string, Tensor>> records;
  auto collect = [&records](Sequential& seq) {
    for (auto& layer : seq.layers) {
      auto params = layer->params();
      for (size_t i = 0; i < params.size(); ++i)
        records.emplace_back(layer->name() + ".p" + std::to_string(i), *params[i]);
    }
  };
  collect(model.encoder);
  collect(model.decoder);
  write_model_file(path, records);
}

void load_model(const std::string& path, Autoencoder& model) {
  auto records = read_model_file(path);
  size_t at = 0;
  auto restore = [&](Sequential& seq) {
    for (auto& layer : seq.layers) {
      auto params = layer->params();
      for (size_t i = 0; i < params.size(); ++i) {
        const std::string want = layer->name() + ".p" + std::to_string(i);
        if (at >= records.size() || records[at].first != want)
          throw std::runtime_error("load_model: expected record " + want + " in " + path);
        if (records[at].second.shape() != params[i]->shape())
          throw std::runtime_error("load_model: shape mismatch for " + want);
        std::copy(records[at].second.data(), records[at].second.data() + params[i]->size(),
                  params[i]->data());
        ++at;
      }
    }
  };
  restore(model.encoder);
  restore(model.decoder);
}

void save_model_full(const std::string& path, Autoencoder& model) {
  save_model(path, model);
  std::ofstream os(path + ".spec");
  if (!os) throw std::runtime_error("save_model_full: cannot open " + path + ".spec");
  os << spec_serialize(model.spec);
}

std::unique_ptr<Autoencoder> load_model_full(const std::string& path) {
  std::ifstream is(path + ".spec");
  if (!is) throw std::runtime_error("load_model_full: missing " + path + ".spec");
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  auto model = std::make_unique<Autoencoder>(spec_deserialize(text), 0);
  load_model(path, *model);
  return model;
}

}  // namespace iob
