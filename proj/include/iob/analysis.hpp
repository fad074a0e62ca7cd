#pragma once

#include <map>
#include <string>
#include <vector>

#include "iob/autoencoder.hpp"
#include "iob/datasets.hpp"
#include "iob/pca.hpp"
#include "iob/training.hpp"

namespace iob {

struct CurveRow {
  int64_t k;
  std::string estimator;
  double mean;  // group median for the per-n heterogeneous tables
  double p16;
  double p84;
};

struct CurveTable {
  std::vector<CurveRow> rows;
  void write_csv(const std::string& path) const;  // header: k,estimator,mean,p16,p84
};

// Normalized-MSE comparison across every supplied estimator, evaluated at
// each k in {0..k_max}. Null models are skipped.
CurveTable compression_comparison(Autoencoder* linear_iob, Autoencoder* geometric_iob,
                                  const std::vector<std::pair<int64_t, Autoencoder*>>& separate,
                                  const PcaModel* pca, const DatasetBundle& bundle);

struct InterpolationSpec {
  int64_t a = 0;  // validation sample indices
  int64_t b = 1;
  int64_t m = 8;   // steps, >= 2
  int64_t k = -1;  // bottleneck width; -1 means k_max
};

// z(alpha) = (1-alpha) z_a + alpha z_b on m uniform steps, masked at width
// k, decoded. Returns [m, ...] reconstructions (alpha=0 and alpha=1 equal
// the endpoint reconstructions bit-exactly).
Tensor interpolate_latents(Autoencoder& model, const DatasetBundle& bundle,
                           const InterpolationSpec& spec);

// Vertical PGM strip with 1-px separator lines after the first and before
// the last image (the endpoints).
void export_interpolation_strip(const std::string& path, const Tensor& images);

struct HeterogeneousReport {
  CurveTable per_n;  // estimators "n=1".."n=4"; mean column holds the median
  std::map<int, std::vector<double>> nmse_at_exemplar_k;  // per-sample, per group
  int64_t exemplar_k = 9;
  std::map<int, std::vector<int64_t>> exemplar_val_indices;  // 5/25/50/75/95 loss percentiles
};

// Groups validation samples by true disk count. When out_dir is non-empty,
// writes per_n.csv, an exemplar reconstruction grid (PGM), and a sidecar
// text index.
HeterogeneousReport heterogeneous_report(Autoencoder& model, const DatasetBundle& bundle,
                                         const std::string& out_dir = "", int64_t exemplar_k = 9);

}  // namespace iob
