#include "iob/pca.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace iob {

PcaModel pca_fit(const Tensor& data) {
  const int64_t n = data.dim(0);
  const int64_t p = data.size() / n;
  if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 samples");

  Eigen::MatrixXd X(n, p);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < p; ++j) X(i, j) = data.at(i * p + j);

  PcaModel model;
  model.p = p;
  model.mean.resize(static_cast<size_t>(p));
  for (int64_t j = 0; j < p; ++j) {
    model.mean[static_cast<size_t>(j)] = X.col(j).mean();
    X.col(j).array() -= model.mean[static_cast<size_t>(j)];
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const auto& V = svd.matrixV();  // columns are principal directions
  model.eigenvalues.assign(static_cast<size_t>(p), 0.0);
  model.components.assign(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(p), 0.0));
  for (int64_t i = 0; i < p && i < sv.size(); ++i) {
    model.eigenvalues[static_cast<size_t>(i)] = sv(i) * sv(i) / static_cast<double>(n);
    for (int64_t j = 0; j < p; ++j) model.components[static_cast<size_t>(i)][static_cast<size_t>(j)] = V(j, i);
  }
  return model;
}

Tensor pca_reconstruct(const PcaModel& model, const Tensor& x, int64_t k) {
  if (k < 0 || k > model.p)
    throw std::domain_error("pca_reconstruct: k=" + std::to_string(k) + " outside [0," +
                            std::to_string(model.p) + "]");
  const int64_t n = x.dim(0);
  const int64_t p = model.p;
  if (x.size() / n != p) throw std::invalid_argument("pca_reconstruct: dimension mismatch");
  Tensor out(x.shape());
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> centered(static_cast<size_t>(p));
    for (int64_t j = 0; j < p; ++j)
      centered[static_cast<size_t>(j)] = x.at(i * p + j) - model.mean[static_cast<size_t>(j)];
    std::vector<double> rec(model.mean);
    for (int64_t c = 0; c < k; ++c) {
      const auto& comp = model.components[static_cast<size_t>(c)];
      double proj = 0.0;
      for (int64_t j = 0; j < p; ++j) proj += comp[static_cast<size_t>(j)] * centered[static_cast<size_t>(j)];
      for (int64_t j = 0; j < p; ++j) rec[static_cast<size_t>(j)] += proj * comp[static_cast<size_t>(j)];
    }
    for (int64_t j = 0; j < p; ++j) out.at(i * p + j) = static_cast<float>(rec[static_cast<size_t>(j)]);
  }
  return out;
}

double pca_nmse(const PcaModel& model, const Tensor& data, int64_t k, double variance) {
  Tensor rec = pca_reconstruct(model, data, k);
  const int64_t n = data.dim(0);
  const int64_t p = data.size() / n;
  double total = 0.0;
  for (int64_t i = 0; i < data.size(); ++i) {
    const double r = static_cast<double>(rec.at(i)) - static_cast<double>(data.at(i));
    total += r * r;
  }
  return total / static_cast<double>(n * p) / variance;
}

int pca_id_broken_stick(const PcaModel& model) {
  const int64_t p = model.p;
  double total = 0.0;
  for (double e : model.eigenvalues) total += e;
  if (total <= 0.0) return 0;
  // b_i precomputed back-to-front: b_i = (1/p) * sum_{j=i}^{p} 1/j (1-based)
  std::vector<double> b(static_cast<size_t>(p));
  double tail = 0.0;
  for (int64_t i = p; i >= 1; --i) {
    tail += 1.0 / static_cast<double>(i);
    b[static_cast<size_t>(i - 1)] = tail / static_cast<double>(p);
  }
  int count = 0;
  for (int64_t i = 0; i < p; ++i) {
    if (model.eigenvalues[static_cast<size_t>(i)] / total > b[static_cast<size_t>(i)])
      ++count;
    else
      break;
  }
  return count;
}

}  // namespace iob
