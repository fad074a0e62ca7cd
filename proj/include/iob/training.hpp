#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "iob/autoencoder.hpp"
#include "iob/datasets.hpp"
#include "iob/iob.hpp"

namespace iob {

struct EarlyStopConfig {
  double min_improvement = 1e-4;  // 0.01% relative
  int patience = 20;              // epochs
};

struct TrainConfig {
  float lr = 5e-5f;
  float lr_decay = 1.0f;     // multiplicative step decay factor (1 = constant lr)
  int lr_decay_every = 0;    // epochs between decay steps (0 = disabled)
  int64_t batch_size = 64;
  EarlyStopConfig early_stop;
  int max_epochs = 2000;
  uint64_t seed = 0;
  bool deterministic = true;
  bool verbose = false;
};

struct RunManifest {
  std::string config_hash;
  uint64_t seed = 0;
  std::string prng;
  std::string dataset_fingerprint;
  std::vector<double> train_losses;  // per epoch
  std::vector<double> val_losses;
  std::vector<std::string> events;  // sweep advances etc.
  double wall_clock_sec = 0.0;
  std::string model_path;
  bool diverged = false;

  void save(const std::string& path) const;
};

// True when the best validation loss over the trailing window improved on
// the best before it by less than the threshold fraction.
bool early_stop_triggered(const std::vector<double>& val_history, const EarlyStopConfig& config);

std::string fingerprint_tensor(const Tensor& t);  // FNV-1a over the payload bytes

struct TrainResult {
  std::unique_ptr<Autoencoder> model;
  RunManifest manifest;
};

// Composite-objective IOB training. Linear uses the exact per-k sum every
// step; geometric uses the stochastic single-k loss with unit sweeping.
TrainResult train_iob(const AutoencoderSpec& spec, const IobConfig& iob_config,
                      const DatasetBundle& bundle, const TrainConfig& train_config);

// Fixed-width baseline: one normal autoencoder per requested k, plain
// reconstruction objective, no masking (k=0 trains the standard
// architecture against a fully closed mask, i.e. a learned mean predictor).
std::vector<TrainResult> train_separate_autoencoders(const AutoencoderSpec& spec,
                                                     const DatasetBundle& bundle,
                                                     const TrainConfig& train_config,
                                                     const std::vector<int64_t>& ks);

struct CurvePoint {
  int64_t k;
  double mean_nmse;
  double p16;
  double p84;
};

// Per-sample validation MSE divided by the bundle's population variance,
// evaluated at each masked width.
std::vector<CurvePoint> evaluate_mse_curve(Autoencoder& model, const DatasetBundle& bundle,
                                           const std::vector<int64_t>& ks);

// Per-sample normalized MSE at one width (helper shared with analysis).
std::vector<double> per_sample_nmse(Autoencoder& model, const Tensor& data, int64_t k,
                                    double variance);

void save_model(const std::string& path, Autoencoder& model);
void load_model(const std::string& path, Autoencoder& model);

// save_model plus a <path>.spec sidecar so the model can be rebuilt
// without outside knowledge of its architecture.
void save_model_full(const std::string& path, Autoencoder& model);
std::unique_ptr<Autoencoder> load_model_full(const std::string& path);

}  // namespace iob
