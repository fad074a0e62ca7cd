#pragma once

#include <string>
#include <vector>

#include "iob/autoencoder.hpp"
#include "iob/tensor.hpp"

namespace iob {

enum class LogLikMode { kTotal, kMean };

struct MaskOptConfig {
  float lr = 1e-2f;
  int max_iters = 500;
  double tol = 1e-6;   // relative log-likelihood improvement
  int tol_window = 20;  // iterations
  LogLikMode mode = LogLikMode::kTotal;
};

struct MaskParams {
  std::vector<float> e;   // length k_max; e[i] == 0 for i >= free_count
  int64_t free_count = 0;
  bool converged = true;
};

struct IdRow {
  int64_t k;
  double loglik;     // maximized L_k
  double statistic;  // D_k = 2*(L_{k+1} - L_k); NaN on the last row
  double threshold;
  bool reject;
};

struct IdReport {
  std::vector<IdRow> rows;
  int64_t k_hat = 0;
  double alpha = 0.05;
  bool saturated = false;  // sweep exhausted k_max still rejecting

  void write_csv(const std::string& path) const;
  std::string summary() const;
};

// Log-likelihood of targets given decode(z * e), with the decoder frozen.
// Differentiable w.r.t. e only when e is tracked.
Tensor latent_loglik(Autoencoder& decoder_model, const Tensor& latents, const Tensor& targets,
                     const Tensor& e, double variance, LogLikMode mode, Tape* tape);

// Gradient ascent over the first `free_count` mask components (the rest are
// pinned at zero). `init` seeds the free components; pass nullptr for
// all-ones init.
std::pair<MaskParams, double> maximize_masked_loglik(Autoencoder& decoder_model,
                                                     const Tensor& latents, const Tensor& targets,
                                                     int64_t free_count, double variance,
                                                     const MaskOptConfig& opt,
                                                     const MaskParams* warm_start = nullptr);

// Nested likelihood-ratio sweep: D_k = 2*(L_{k+1}-L_k) vs the chi^2(1)
// quantile at 1-alpha; k_hat is the first k where rejection fails.
IdReport wilks_sweep(Autoencoder& model, const Tensor& test_inputs, double variance,
                     double alpha = 0.05, const MaskOptConfig& opt = {});

}  // namespace iob
