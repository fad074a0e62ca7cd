#include "iob/twonn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "iob/rng.hpp"

namespace iob {

TwoNnResult twonn_estimate(const Tensor& data, int64_t subsample, uint64_t seed) {
  const int64_t n_all = data.dim(0);
  const int64_t p = data.size() / n_all;
  if (n_all < 3) throw std::invalid_argument("twonn_estimate: need at least 3 points");

  std::vector<int64_t> idx(static_cast<size_t>(n_all));
  for (int64_t i = 0; i < n_all; ++i) idx[static_cast<size_t>(i)] = i;
  int64_t n = n_all;
  if (subsample > 0 && subsample < n_all) {
    Rng rng = Rng::stream(seed, 0x2a2a);
    for (int64_t i = n_all - 1; i > 0; --i)
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(0, i))]);
    n = subsample;
  }

  double log_ratio_sum = 0.0;
  int64_t used = 0, duplicates = 0;
  for (int64_t a = 0; a < n; ++a) {
    const float* xa = data.data() + idx[static_cast<size_t>(a)] * p;
    double r1 = std::numeric_limits<double>::infinity();
    double r2 = std::numeric_limits<double>::infinity();
    for (int64_t b = 0; b < n; ++b) {
      if (b == a) continue;
      const float* xb = data.data() + idx[static_cast<size_t>(b)] * p;
      double d2 = 0.0;
      for (int64_t j = 0; j < p; ++j) {
        const double r = static_cast<double>(xa[j]) - static_cast<double>(xb[j]);
        d2 += r * r;
      }
      if (d2 < r1) {  // strict comparison: distance ties fall to higher index
        r2 = r1;
        r1 = d2;
      } else if (d2 < r2) {
        r2 = d2;
      }
    }
    if (r1 <= 0.0) {
      ++duplicates;
      continue;
    }
    log_ratio_sum += 0.5 * std::log(r2 / r1);  // sqrt folded into the log
    ++used;
  }
  if (used == 0 || log_ratio_sum <= 0.0)
    throw std::runtime_error("twonn_estimate: no usable neighbor ratios");
  return {static_cast<double>(used) / log_ratio_sum, used, duplicates};
}

}  // namespace iob
