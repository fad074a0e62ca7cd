#include "iob/datasets.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "iob/tensor_io.hpp"

namespace iob {

namespace {

constexpr uint64_t kSplitStream = 0x5917a11bULL;

struct SplitIndices {
  std::vector<int64_t> train, val;
};

// 90/10 split; membership is a pure function of (seed, n_samples).
SplitIndices make_split(uint64_t seed, int64_t n_samples) {
  std::vector<int64_t> idx(static_cast<size_t>(n_samples));
  for (int64_t i = 0; i < n_samples; ++i) idx[static_cast<size_t>(i)] = i;
  Rng rng = Rng::stream(seed, kSplitStream);
  for (int64_t i = n_samples - 1; i > 0; --i)
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(0, i))]);
  const int64_t n_train = (n_samples * 9) / 10;
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.end());
  return s;
}

DatasetBundle assemble(std::string name, uint64_t seed, const Tensor& all,
                       const std::vector<std::vector<double>>& meta, const std::vector<int>& ns) {
  const int64_t n_samples = all.dim(0);
  const int64_t per = all.size() / n_samples;
  const SplitIndices split = make_split(seed, n_samples);

  auto gather = [&](const std::vector<int64_t>& which) {
    Shape shape = all.shape();
    shape[0] = static_cast<int64_t>(which.size());
    Tensor out(shape);
    for (size_t i = 0; i < which.size(); ++i)
      std::copy(all.data() + which[i] * per, all.data() + (which[i] + 1) * per,
                out.data() + static_cast<int64_t>(i) * per);
    return out;
  };

  DatasetBundle bundle;
  bundle.name = std::move(name);
  bundle.seed = seed;
  bundle.train = gather(split.train);
  bundle.val = gather(split.val);
  for (int64_t i : split.train) {
    bundle.meta_train.push_back(meta[static_cast<size_t>(i)]);
    if (!ns.empty()) bundle.n_train.push_back(ns[static_cast<size_t>(i)]);
  }
  for (int64_t i : split.val) {
    bundle.meta_val.push_back(meta[static_cast<size_t>(i)]);
    if (!ns.empty()) bundle.n_val.push_back(ns[static_cast<size_t>(i)]);
  }
  bundle.population_variance = population_variance(bundle.train);
  return bundle;
}

}  // namespace

double population_variance(const Tensor& data) {
  const int64_t n = data.dim(0);
  const int64_t d = data.size() / n;
  double pooled = 0.0;
  for (int64_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += data.at(i * d + j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double r = data.at(i * d + j) - mean;
      var += r * r;
    }
    pooled += var / static_cast<double>(n);
  }
  return pooled / static_cast<double>(d);
}

Tensor scurve_point(double t, double u) {
  const double sign = t < 0.0 ? -1.0 : 1.0;
  return Tensor({3}, {static_cast<float>(std::sin(t)), static_cast<float>(u),
                      static_cast<float>(sign * (std::cos(t) - 1.0))});
}

DatasetBundle sample_scurve(const ScurveConfig& config) {
  if (config.noise_sigma < 0.0) throw std::domain_error("sample_scurve: negative noise_sigma");
  Tensor all({config.n_samples, 3});
  std::vector<std::vector<double>> meta;
  meta.reserve(static_cast<size_t>(config.n_samples));
  for (int64_t i = 0; i < config.n_samples; ++i) {
    Rng rng = Rng::stream(config.seed, static_cast<uint64_t>(i));
    const double t = rng.uniform(-1.5 * M_PI, 1.5 * M_PI);
    const double u = rng.uniform(0.0, 2.0);
    Tensor p = scurve_point(t, u);
    for (int64_t j = 0; j < 3; ++j)
      all.at(i * 3 + j) =
          p.at(j) + static_cast<float>(config.noise_sigma * rng.gaussian());
    meta.push_back({t, u});
  }
  return assemble("scurve", config.seed, all, meta, {});
}

Tensor generate_ndisk_image(int n, Rng& rng, std::vector<DiskParams>* params,
                            int64_t image_size) {
  if (n < 1) throw std::domain_error("generate_ndisk_image: n must be >= 1");
  const int64_t S = image_size;
  Tensor img({1, S, S});
  for (int i = 0; i < n; ++i) {
    DiskParams d;
    d.r = rng.uniform(2.0, 5.0);
    d.a = rng.uniform(d.r, static_cast<double>(S) - d.r);
    d.b = rng.uniform(d.r, static_cast<double>(S) - d.r);
    if (params) params->push_back(d);
    const double r2 = d.r * d.r;
    for (int64_t j = 0; j < S; ++j) {
      const double dj = d.a - static_cast<double>(j + 1) + 0.5;
      for (int64_t k = 0; k < S; ++k) {
        const double dk = d.b - static_cast<double>(k + 1) + 0.5;
        // union of disks: overlapping disks never erase each other
        if (r2 >= dj * dj + dk * dk) img.at(j * S + k) = 1.0f;
      }
    }
  }
  return img;
}

namespace {

DatasetBundle build_disks(const NDiskConfig& config, bool heterogeneous) {
  const int64_t S = config.image_size;
  Tensor all({config.n_samples, 1, S, S});
  std::vector<std::vector<double>> meta;
  std::vector<int> ns;
  for (int64_t i = 0; i < config.n_samples; ++i) {
    Rng rng = Rng::stream(config.seed, static_cast<uint64_t>(i));
    const int n = heterogeneous ? static_cast<int>(rng.uniform_int(1, 4)) : config.n_disks;
    std::vector<DiskParams> params;
    Tensor img = generate_ndisk_image(n, rng, &params, S);
    std::copy(img.data(), img.data() + img.size(), all.data() + i * S * S);
    std::vector<double> row;
    for (const DiskParams& d : params) {
      row.push_back(d.a);
      row.push_back(d.b);
      row.push_back(d.r);
    }
    meta.push_back(std::move(row));
    ns.push_back(n);
  }
  std::string name = heterogeneous ? "heterogeneous"
                                   : std::to_string(config.n_disks) + "disk";
  return assemble(std::move(name), config.seed, all, meta, ns);
}

}  // namespace

DatasetBundle build_ndisk(const NDiskConfig& config) {
  if (config.n_disks < 1) throw std::domain_error("build_ndisk: n_disks must be >= 1");
  return build_disks(config, false);
}

DatasetBundle build_heterogeneous(const NDiskConfig& config) { return build_disks(config, true); }

DatasetBundle build_linear_gaussian(int d, int64_t ambient, int64_t n_samples, double noise_sigma,
                                    uint64_t seed) {
  if (d < 1 || d > ambient) throw std::domain_error("build_linear_gaussian: bad rank");
  Rng arng = Rng::stream(seed, 0xa0a0);
  std::vector<double> A(static_cast<size_t>(ambient * d));
  for (double& v : A) v = arng.gaussian() / std::sqrt(static_cast<double>(d));
  Tensor all({n_samples, ambient});
  std::vector<std::vector<double>> meta;
  for (int64_t i = 0; i < n_samples; ++i) {
    Rng rng = Rng::stream(seed, static_cast<uint64_t>(i));
    std::vector<double> u(static_cast<size_t>(d));
    for (double& v : u) v = rng.gaussian();
    for (int64_t j = 0; j < ambient; ++j) {
      double x = 0.0;
      for (int jd = 0; jd < d; ++jd) x += A[static_cast<size_t>(j * d + jd)] * u[static_cast<size_t>(jd)];
      all.at(i * ambient + j) = static_cast<float>(x + noise_sigma * rng.gaussian());
    }
    meta.push_back(u);
  }
  return assemble("lingauss" + std::to_string(d), seed, all, meta, {});
}

namespace {

void write_meta(const std::string& path, const std::vector<std::vector<double>>& meta,
                const std::vector<int>& ns) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.precision(17);
  for (size_t i = 0; i < meta.size(); ++i) {
    if (!ns.empty()) os << ns[i] << '\t';
    for (size_t j = 0; j < meta[i].size(); ++j) os << (j ? " " : "") << meta[i][j];
    os << '\n';
  }
}

void read_meta(const std::string& path, bool has_counts, std::vector<std::vector<double>>& meta,
               std::vector<int>& ns) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    if (has_counts) {
      int n;
      ls >> n;
      ns.push_back(n);
    }
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    meta.push_back(std::move(row));
  }
}

}  // namespace

void save_bundle(const std::string& dir, const DatasetBundle& bundle) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_tensor_file(dir + "/train.iobt", bundle.train);
  write_tensor_file(dir + "/val.iobt", bundle.val);
  write_meta(dir + "/meta_train.tsv", bundle.meta_train, bundle.n_train);
  write_meta(dir + "/meta_val.tsv", bundle.meta_val, bundle.n_val);
  std::ofstream os(dir + "/bundle.manifest");
  if (!os) throw std::runtime_error("cannot open " + dir + "/bundle.manifest");
  os.precision(17);
  os << "name=" << bundle.name << "\n"
     << "seed=" << bundle.seed << "\n"
     << "prng=" << Rng::name() << "\n"
     << "population_variance=" << bundle.population_variance << "\n"
     << "has_disk_counts=" << (bundle.n_train.empty() ? 0 : 1) << "\n";
}

DatasetBundle load_bundle(const std::string& dir) {
  DatasetBundle bundle;
  bundle.train = read_tensor_file(dir + "/train.iobt");
  bundle.val = read_tensor_file(dir + "/val.iobt");
  std::ifstream is(dir + "/bundle.manifest");
  if (!is) throw std::runtime_error("cannot open " + dir + "/bundle.manifest");
  std::string line;
  bool has_counts = false;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "name") bundle.name = value;
    else if (key == "seed") bundle.seed = std::stoull(value);
    else if (key == "population_variance") bundle.population_variance = std::stod(value);
    else if (key == "has_disk_counts") has_counts = value == "1";
  }
  read_meta(dir + "/meta_train.tsv", has_counts, bundle.meta_train, bundle.n_train);
  read_meta(dir + "/meta_val.tsv", has_counts, bundle.meta_val, bundle.n_val);
  return bundle;
}

}  // namespace iob
