#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iob/rng.hpp"
#include "iob/tensor.hpp"

namespace iob {

struct ScurveConfig {
  int64_t n_samples = 10000;
  double noise_sigma = 0.1;
  uint64_t seed = 0;
};

struct NDiskConfig {
  int n_disks = 1;           // ignored when heterogeneous
  bool heterogeneous = false;  // n per sample drawn uniformly from {1..4}
  int64_t n_samples = 10000;
  int64_t image_size = 32;
  uint64_t seed = 0;
};

struct DiskParams {
  double a, b, r;
};

// Train/validation tensors plus per-sample generator metadata. The 90/10
// split and the pooled population variance (train only) are fixed at build
// time.
struct DatasetBundle {
  std::string name;
  Tensor train;
  Tensor val;
  std::vector<std::vector<double>> meta_train;  // generator params per sample
  std::vector<std::vector<double>> meta_val;
  std::vector<int> n_train;  // disk counts; empty for non-disk sets
  std::vector<int> n_val;
  double population_variance = 0.0;
  uint64_t seed = 0;
};

Tensor scurve_point(double t, double u);  // noiseless (sin t, u, sign(t)(cos t - 1))

DatasetBundle sample_scurve(const ScurveConfig& config);

// Algorithm: per disk, r ~ U(2,5), a,b ~ U(r, 32-r); pixel (j,k) is 1 iff
// any disk satisfies r^2 >= (a-j+0.5)^2 + (b-k+0.5)^2 (union of disks).
Tensor generate_ndisk_image(int n, Rng& rng, std::vector<DiskParams>* params = nullptr,
                            int64_t image_size = 32);

DatasetBundle build_ndisk(const NDiskConfig& config);
DatasetBundle build_heterogeneous(const NDiskConfig& config);

// Rank-d control set: x = A u + noise with A a random [ambient x d] map and
// u ~ N(0, I_d). Known intrinsic dimensionality d.
DatasetBundle build_linear_gaussian(int d, int64_t ambient, int64_t n_samples, double noise_sigma,
                                    uint64_t seed);

// Pooled scalar variance over every dimension of the data (per-dimension
// means, variance averaged across dimensions).
double population_variance(const Tensor& data);

// Directory layout: train.iobt, val.iobt, meta_train.tsv, meta_val.tsv,
// bundle.manifest (flat key=value).
void save_bundle(const std::string& dir, const DatasetBundle& bundle);
DatasetBundle load_bundle(const std::string& dir);

}  // namespace iob
