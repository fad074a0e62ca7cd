#pragma once

#include <vector>

#include "iob/tensor.hpp"

namespace iob {

struct PcaModel {
  std::vector<double> mean;                 // [p]
  std::vector<std::vector<double>> components;  // [p][p], orthonormal rows, by descending eigenvalue
  std::vector<double> eigenvalues;          // non-increasing, >= 0
  int64_t p = 0;
};

// Centered eigendecomposition of the covariance via SVD of the centered
// data matrix (rows are samples, flattened to [n, p]).
PcaModel pca_fit(const Tensor& data);

// Project onto the top-k components, re-embed, add mean.
Tensor pca_reconstruct(const PcaModel& model, const Tensor& x, int64_t k);

// Mean per-sample MSE of the rank-k reconstruction divided by `variance`.
double pca_nmse(const PcaModel& model, const Tensor& data, int64_t k, double variance);

// Count of leading components whose variance fraction exceeds the
// broken-stick expectation b_i = (1/p) * sum_{j=i}^{p} 1/j.
int pca_id_broken_stick(const PcaModel& model);

}  // namespace iob
