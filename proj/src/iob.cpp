#include "iob/iob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iob {

std::vector<float> mask_vector(int64_t k, int64_t k_max) {
  if (k < 0 || k > k_max)
    throw std::domain_error("mask_vector: k=" + std::to_string(k) + " outside [0," +
                            std::to_string(k_max) + "]");
  std::vector<float> e(static_cast<size_t>(k_max), 0.0f);
  for (int64_t i = 0; i < k; ++i) e[static_cast<size_t>(i)] = 1.0f;
  return e;
}

Tensor mask_tensor(int64_t k, int64_t k_max) { return Tensor({k_max}, mask_vector(k, k_max)); }

std::vector<double> weight_profile(const IobConfig& config) {
  if (config.k_max < 0) throw std::domain_error("weight_profile: negative k_max");
  const size_t n = static_cast<size_t>(config.k_max + 1);
  std::vector<double> rho(n);
  if (config.scheme == WeightScheme::kLinear) {
    std::fill(rho.begin(), rho.end(), 1.0 / static_cast<double>(n));
    return rho;
  }
  if (config.rate <= 0.0 || config.rate >= 1.0)
    throw std::domain_error("weight_profile: geometric rate must be in (0,1)");
  double total = 0.0;
  for (size_t k = 0; k < n; ++k) {
    rho[k] = std::pow(1.0 - config.rate, static_cast<double>(k)) * config.rate;
    total += rho[k];
  }
  for (double& w : rho) w /= total;
  return rho;
}

int64_t sample_k(double rate, int64_t frozen_prefix, int64_t k_max, Rng& rng) {
  if (rate <= 0.0 || rate >= 1.0) throw std::domain_error("sample_k: rate must be in (0,1)");
  // inverse-CDF draw of Geom(rate) on {0,1,2,...}
  const double u = rng.uniform();
  const double j = std::floor(std::log1p(-u) / std::log1p(-rate));
  const int64_t k = frozen_prefix + static_cast<int64_t>(j);
  return std::min(k, k_max);
}

std::vector<double> shifted_geometric_pmf(double rate, int64_t frozen_prefix, int64_t k_max) {
  std::vector<double> pmf(static_cast<size_t>(k_max + 1), 0.0);
  for (int64_t k = frozen_prefix; k < k_max; ++k)
    pmf[static_cast<size_t>(k)] =
        std::pow(1.0 - rate, static_cast<double>(k - frozen_prefix)) * rate;
  pmf[static_cast<size_t>(k_max)] =
      std::pow(1.0 - rate, static_cast<double>(k_max - frozen_prefix));
  return pmf;
}

Tensor composite_loss_exact(Autoencoder& model, const Tensor& x, const Tensor& y,
                            const std::vector<double>& rho, double variance, Tape* tape) {
  const int64_t k_max = model.k_max;
  if (static_cast<int64_t>(rho.size()) != k_max + 1)
    throw std::invalid_argument("composite_loss_exact: rho must have k_max+1 entries");
  Tensor z = model.encode(x, tape);
  std::vector<Tensor> terms;
  terms.reserve(rho.size());
  for (int64_t k = 0; k <= k_max; ++k) {
    Tensor zk = mask_mul(z, mask_tensor(k, k_max), tape);
    Tensor yhat = model.decode(zk, tape);
    terms.push_back(gaussian_nll(yhat, y, variance, tape));
  }
  return weighted_sum(terms, rho, tape);
}

Tensor masked_loss(Autoencoder& model, const Tensor& x, const Tensor& y, int64_t k,
                   double variance, Tape* tape) {
  Tensor z = model.encode(x, tape);
  Tensor zk = mask_mul(z, mask_tensor(k, model.k_max), tape);
  Tensor yhat = model.decode(zk, tape);
  return gaussian_nll(yhat, y, variance, tape);
}

Tensor composite_loss_stochastic(Autoencoder& model, const Tensor& x, const Tensor& y,
                                 const IobConfig& config, double variance, Rng& rng, Tape* tape,
                                 int64_t* sampled_k) {
  if (config.scheme != WeightScheme::kGeometric)
    throw std::invalid_argument("composite_loss_stochastic: geometric scheme required");
  const int64_t k = sample_k(config.rate, config.sweep.frozen_prefix, config.k_max, rng);
  if (sampled_k) *sampled_k = k;
  return masked_loss(model, x, y, k, variance, tape);
}

bool sweep_advance(UnitSweepConfig& sweep, const std::vector<double>& validation_history,
                   int64_t k_max) {
  if (sweep.frozen_prefix > k_max) return false;
  const size_t patience = static_cast<size_t>(sweep.patience_epochs);
  if (validation_history.size() < patience) return false;
  const size_t start = validation_history.size() - patience;
  const double ref = validation_history[start];
  double best = ref;
  for (size_t i = start + 1; i < validation_history.size(); ++i)
    best = std::min(best, validation_history[i]);
  const double improvement = (ref - best) / std::max(std::abs(ref), 1e-12);
  if (improvement < sweep.convergence_threshold) {
    ++sweep.frozen_prefix;
    return true;
  }
  return false;
}

void apply_frozen_prefix(Autoencoder& model, int64_t frozen_prefix) {
  if (frozen_prefix <= 0) return;
  DenseLayer* layer = model.bottleneck;
  const int64_t in = layer->in_width;
  float* wg = layer->weights.grad();
  float* bg = layer->bias.grad();
  for (int64_t row = 0; row < std::min(frozen_prefix, layer->out_width); ++row) {
    std::fill(wg + row * in, wg + (row + 1) * in, 0.0f);
    bg[row] = 0.0f;
  }
}

}  // namespace iob
