#pragma once

#include <cstdint>

#include "iob/tensor.hpp"

namespace iob {

struct TwoNnResult {
  double dimension = 0.0;
  int64_t used = 0;        // points contributing ratios
  int64_t duplicates = 0;  // excluded because r1 == 0
};

// Maximum-likelihood TwoNN: d = n / sum_i log(r2_i / r1_i) over the ratios
// of second- to first-nearest-neighbor distances. Brute-force O(N^2) search
// on a subsample (0 = use everything); ties broken by index.
TwoNnResult twonn_estimate(const Tensor& data, int64_t subsample = 5000, uint64_t seed = 0);

}  // namespace iob
