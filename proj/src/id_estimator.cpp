#include "iob/id_estimator.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "iob/iob.hpp"
#include "iob/stats.hpp"

namespace iob {

Tensor latent_loglik(Autoencoder& decoder_model, const Tensor& latents, const Tensor& targets,
                     const Tensor& e, double variance, LogLikMode mode, Tape* tape) {
  Tensor zk = mask_mul(latents, e, tape);
  Tensor yhat = decoder_model.decode(zk, tape);
  Tensor nll = gaussian_nll(yhat, targets, variance, tape,
                            mode == LogLikMode::kTotal ? Reduction::kSum : Reduction::kMean);
  return weighted_sum({nll}, {-1.0}, tape);
}

namespace {

void freeze_params(Sequential& seq) {
  for (auto& layer : seq.layers)
    for (Tensor* p : layer->params()) p->untrack();
}

double eval_loglik(Autoencoder& model, const Tensor& latents, const Tensor& targets,
                   const Tensor& e, double variance, LogLikMode mode) {
  return latent_loglik(model, latents, targets, e, variance, mode, nullptr).scalar();
}

}  // namespace

std::pair<MaskParams, double> maximize_masked_loglik(Autoencoder& model, const Tensor& latents,
                                                     const Tensor& targets, int64_t free_count,
                                                     double variance, const MaskOptConfig& opt,
                                                     const MaskParams* warm_start) {
  const int64_t k_max = model.k_max;
  if (free_count < 0 || free_count > k_max)
    throw std::domain_error("maximize_masked_loglik: free_count outside [0,k_max]");
  freeze_params(model.decoder);  // likelihood varies through e only

  MaskParams result;
  result.free_count = free_count;
  result.e.assign(static_cast<size_t>(k_max), 0.0f);
  for (int64_t i = 0; i < free_count; ++i) {
    const bool warm = warm_start && i < static_cast<int64_t>(warm_start->e.size()) &&
                      i < warm_start->free_count;
    result.e[static_cast<size_t>(i)] = warm ? warm_start->e[static_cast<size_t>(i)] : 1.0f;
  }

  Tensor e({k_max}, result.e);
  if (free_count == 0) {
    return {result, eval_loglik(model, latents, targets, e, variance, opt.mode)};
  }

  e.track();
  Adam optimizer({&e}, AdamConfig{opt.lr, 0.9f, 0.999f, 1e-8f});
  double best = -std::numeric_limits<double>::infinity();
  std::vector<float> best_e = result.e;
  // the nested optimum is at least the previous solution with the new
  // component closed; seed best with that point
  if (warm_start) {
    Tensor e0({k_max}, std::vector<float>(result.e));
    e0.at(free_count - 1) = 0.0f;
    best = eval_loglik(model, latents, targets, e0, variance, opt.mode);
    best_e.assign(e0.data(), e0.data() + k_max);
  }

  std::vector<double> history;
  result.converged = false;
  for (int iter = 0; iter < opt.max_iters; ++iter) {
    Tape tape;
    Tensor zk = mask_mul(latents, e, &tape);
    Tensor yhat = model.decode(zk, &tape);
    Tensor nll = gaussian_nll(yhat, targets, variance, &tape,
                              opt.mode == LogLikMode::kTotal ? Reduction::kSum : Reduction::kMean);
    const double L = -nll.scalar();
    if (L > best) {
      best = L;
      best_e.assign(e.data(), e.data() + k_max);
    }
    history.push_back(best);
    if (static_cast<int>(history.size()) > opt.tol_window) {
      const double prev = history[history.size() - 1 - static_cast<size_t>(opt.tol_window)];
      const double rel = (best - prev) / std::max(std::abs(prev), 1e-12);
      if (rel < opt.tol) {
        result.converged = true;
        break;
      }
    }
    e.zero_grad();
    tape.backward(nll);
    for (int64_t i = free_count; i < k_max; ++i) e.grad()[i] = 0.0f;  // projected out
    optimizer.step();
    for (int64_t i = free_count; i < k_max; ++i) e.at(i) = 0.0f;
  }

  result.e = best_e;
  return {result, best};
}

IdReport wilks_sweep(Autoencoder& model, const Tensor& test_inputs, double variance, double alpha,
                     const MaskOptConfig& opt) {
  const int64_t n = test_inputs.dim(0);
  const int64_t k_max = model.k_max;

  // precompute latents with the frozen encoder, in bounded chunks
  Tensor latents({n, k_max});
  constexpr int64_t kChunk = 256;
  const int64_t per = test_inputs.size() / n;
  for (int64_t at = 0; at < n; at += kChunk) {
    const int64_t to = std::min(at + kChunk, n);
    Shape shape = test_inputs.shape();
    shape[0] = to - at;
    Tensor x(shape);
    std::copy(test_inputs.data() + at * per, test_inputs.data() + to * per, x.data());
    Tensor z = model.encode(x, nullptr);
    std::copy(z.data(), z.data() + z.size(), latents.data() + at * k_max);
  }

  IdReport report;
  report.alpha = alpha;
  const double threshold = chi2_quantile_1dof(1.0 - alpha);

  auto [prev_params, prev_L] =
      maximize_masked_loglik(model, latents, test_inputs, 0, variance, opt, nullptr);
  bool decided = false;
  for (int64_t k = 0; k < k_max; ++k) {
    auto [params, L] =
        maximize_masked_loglik(model, latents, test_inputs, k + 1, variance, opt, &prev_params);
    const double D = 2.0 * (L - prev_L);
    const bool reject = D > threshold;
    report.rows.push_back({k, prev_L, D, threshold, reject});
    if (!reject) {
      report.k_hat = k;
      decided = true;
      break;
    }
    prev_params = params;
    prev_L = L;
  }
  if (!decided) {
    report.rows.push_back(
        {k_max, prev_L, std::numeric_limits<double>::quiet_NaN(), threshold, false});
    report.k_hat = k_max;
    report.saturated = true;
  }
  return report;
}

void IdReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("IdReport::write_csv: cannot open " + path);
  os.precision(12);
  os << "k,L_k,D_k,threshold,reject\n";
  for (const IdRow& row : rows)
    os << row.k << "," << row.loglik << "," << row.statistic << "," << row.threshold << ","
       << (row.reject ? 1 : 0) << "\n";
  os << summary() << "\n";
}

std::string IdReport::summary() const {
  std::ostringstream ss;
  ss << "k_hat=" << k_hat << " alpha=" << alpha << (saturated ? " saturated=1" : "");
  return ss.str();
}

}  // namespace iob
