#pragma once

#include <vector>

#include "iob/autoencoder.hpp"
#include "iob/rng.hpp"
#include "iob/tensor.hpp"

namespace iob {

enum class WeightScheme { kLinear, kGeometric };
enum class Summation { kExact, kStochastic };

// Unit-sweeping state for geometric training. frozen_prefix s counts the
// latent units already converged and frozen; it never decreases.
struct UnitSweepConfig {
  double convergence_threshold = 0.01;
  int patience_epochs = 10;
  int64_t frozen_prefix = 0;
};

struct IobConfig {
  int64_t k_max = 0;
  WeightScheme scheme = WeightScheme::kLinear;
  double rate = 0.95;  // geometric only
  Summation summation = Summation::kExact;
  UnitSweepConfig sweep;

  static IobConfig linear(int64_t k_max) {
    return {k_max, WeightScheme::kLinear, 0.0, Summation::kExact, {}};
  }
  static IobConfig geometric(int64_t k_max, double rate) {
    return {k_max, WeightScheme::kGeometric, rate, Summation::kStochastic, {}};
  }
};

// Prefix-of-ones mask: e_k[i] = 1 iff i < k.
std::vector<float> mask_vector(int64_t k, int64_t k_max);
Tensor mask_tensor(int64_t k, int64_t k_max);

// Normalized weights over k in {0..k_max}. Linear is uniform; geometric is
// (1-r)^k * r truncated to k_max and renormalized.
std::vector<double> weight_profile(const IobConfig& config);

// Per-batch k draw for the stochastic sum: k = s + Geom(rate), clamped to
// k_max (tail mass lumped at k_max).
int64_t sample_k(double rate, int64_t frozen_prefix, int64_t k_max, Rng& rng);

// Analytic pmf of sample_k over {s..k_max} (test oracle and documentation).
std::vector<double> shifted_geometric_pmf(double rate, int64_t frozen_prefix, int64_t k_max);

// Eq-style composite objective: encode once, decode at every width
// k in {0..k_max}, return sum_k rho[k] * NLL_k.
Tensor composite_loss_exact(Autoencoder& model, const Tensor& x, const Tensor& y,
                            const std::vector<double>& rho, double variance, Tape* tape);

// Single-k stochastic estimate of the composite restricted to k >= s.
Tensor composite_loss_stochastic(Autoencoder& model, const Tensor& x, const Tensor& y,
                                 const IobConfig& config, double variance, Rng& rng, Tape* tape,
                                 int64_t* sampled_k = nullptr);

// Single fixed-width loss (k-open mask), used by oracles and evaluation.
Tensor masked_loss(Autoencoder& model, const Tensor& x, const Tensor& y, int64_t k,
                   double variance, Tape* tape);

// Frontier-convergence check: true (and s incremented) when the best loss in
// the trailing patience window improves on the window's start by less than
// the threshold fraction. History holds per-epoch validation losses recorded
// since the last advance.
bool sweep_advance(UnitSweepConfig& sweep, const std::vector<double>& validation_history,
                   int64_t k_max);

// Zeroes the gradient rows of the bottleneck layer that feed frozen units.
void apply_frozen_prefix(Autoencoder& model, int64_t frozen_prefix);

}  // namespace iob
