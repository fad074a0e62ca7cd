#include "iob/analysis.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "iob/iob.hpp"
#include "iob/stats.hpp"
#include "iob/tensor_io.hpp"

namespace iob {

void CurveTable::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("CurveTable::write_csv: cannot open " + path);
  os.precision(12);
  os << "k,estimator,mean,p16,p84\n";
  for (const CurveRow& row : rows)
    os << row.k << "," << row.estimator << "," << row.mean << "," << row.p16 << "," << row.p84
       << "\n";
}

CurveTable compression_comparison(Autoencoder* linear_iob, Autoencoder* geometric_iob,
                                  const std::vector<std::pair<int64_t, Autoencoder*>>& separate,
                                  const PcaModel* pca, const DatasetBundle& bundle) {
  CurveTable table;
  int64_t k_max = 0;
  if (linear_iob) k_max = std::max(k_max, linear_iob->k_max);
  if (geometric_iob) k_max = std::max(k_max, geometric_iob->k_max);
  for (const auto& [k, m] : separate)
    if (m) k_max = std::max(k_max, k);
  if (pca) k_max = std::max(k_max, pca->p);

  auto add_model_rows = [&](Autoencoder* model, const std::string& name) {
    if (!model) return;
    for (int64_t k = 0; k <= model->k_max; ++k) {
      std::vector<double> nmse =
          per_sample_nmse(*model, bundle.val, k, bundle.population_variance);
      table.rows.push_back({k, name, mean(nmse), percentile_nearest_rank(nmse, 16.0),
                            percentile_nearest_rank(nmse, 84.0)});
    }
  };
  add_model_rows(linear_iob, "linear_iob");
  add_model_rows(geometric_iob, "geometric_iob");
  for (const auto& [k, model] : separate) {
    if (!model) continue;
    std::vector<double> nmse = per_sample_nmse(*model, bundle.val, k == 0 ? 0 : model->k_max,
                                               bundle.population_variance);
    table.rows.push_back({k, "separate", mean(nmse), percentile_nearest_rank(nmse, 16.0),
                          percentile_nearest_rank(nmse, 84.0)});
  }
  if (pca) {
    const int64_t n = bundle.val.dim(0);
    const int64_t p = bundle.val.size() / n;
    for (int64_t k = 0; k <= std::min(k_max, pca->p); ++k) {
      Tensor rec = pca_reconstruct(*pca, bundle.val, k);
      std::vector<double> nmse;
      nmse.reserve(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (int64_t j = 0; j < p; ++j) {
          const double r = static_cast<double>(rec.at(i * p + j)) -
                           static_cast<double>(bundle.val.at(i * p + j));
          sq += r * r;
        }
        nmse.push_back(sq / static_cast<double>(p) / bundle.population_variance);
      }
      table.rows.push_back({k, "pca", mean(nmse), percentile_nearest_rank(nmse, 16.0),
                            percentile_nearest_rank(nmse, 84.0)});
    }
  }
  return table;
}

Tensor interpolate_latents(Autoencoder& model, const DatasetBundle& bundle,
                           const InterpolationSpec& spec) {
  const int64_t n = bundle.val.dim(0);
  if (spec.a < 0 || spec.a >= n || spec.b < 0 || spec.b >= n)
    throw std::out_of_range("interpolate_latents: endpoint index outside validation split");
  if (spec.m < 2) throw std::invalid_argument("interpolate_latents: need at least 2 steps");
  const int64_t k = spec.k < 0 ? model.k_max : spec.k;
  const int64_t per = bundle.val.size() / n;

  Shape pair_shape = bundle.val.shape();
  pair_shape[0] = 2;
  Tensor endpoints(pair_shape);
  std::copy(bundle.val.data() + spec.a * per, bundle.val.data() + (spec.a + 1) * per,
            endpoints.data());
  std::copy(bundle.val.data() + spec.b * per, bundle.val.data() + (spec.b + 1) * per,
            endpoints.data() + per);
  Tensor z = model.encode(endpoints, nullptr);

  Tensor zs({spec.m, model.k_max});
  for (int64_t s = 0; s < spec.m; ++s) {
    const float alpha = static_cast<float>(s) / static_cast<float>(spec.m - 1);
    for (int64_t i = 0; i < model.k_max; ++i)
      zs.at(s * model.k_max + i) =
          (1.0f - alpha) * z.at(i) + alpha * z.at(model.k_max + i);
  }
  Tensor masked = mask_mul(zs, mask_tensor(k, model.k_max), nullptr);
  return model.decode(masked, nullptr);
}

void export_interpolation_strip(const std::string& path, const Tensor& images) {
  if (images.ndim() != 4 || images.dim(1) != 1)
    throw std::invalid_argument("export_interpolation_strip: expected [m,1,H,W]");
  const int64_t m = images.dim(0), h = images.dim(2), w = images.dim(3);
  const int64_t sep = 1;
  Tensor strip({m * h + 2 * sep, w}, 0.5f);  // separator rows stay mid-gray
  int64_t out_row = 0;
  for (int64_t s = 0; s < m; ++s) {
    if (s == 1 || s == m - 1) out_row += sep;  // lines bracketing the interpolants
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j)
        strip.at((out_row + i) * w + j) = std::clamp(images.at((s * h + i) * w + j), 0.0f, 1.0f);
    out_row += h;
  }
  export_pgm(path, strip);
}

HeterogeneousReport heterogeneous_report(Autoencoder& model, const DatasetBundle& bundle,
                                         const std::string& out_dir, int64_t exemplar_k) {
  if (bundle.n_val.empty())
    throw std::invalid_argument("heterogeneous_report: bundle has no per-sample disk counts");
  HeterogeneousReport report;
  report.exemplar_k = exemplar_k;

  std::map<int, std::vector<int64_t>> groups;
  for (size_t i = 0; i < bundle.n_val.size(); ++i)
    groups[bundle.n_val[i]].push_back(static_cast<int64_t>(i));

  // per-k normalized MSE for the full split, reused across groups
  std::vector<std::vector<double>> nmse_by_k;
  for (int64_t k = 0; k <= model.k_max; ++k)
    nmse_by_k.push_back(per_sample_nmse(model, bundle.val, k, bundle.population_variance));

  for (const auto& [n, members] : groups) {
    for (int64_t k = 0; k <= model.k_max; ++k) {
      std::vector<double> vals;
      vals.reserve(members.size());
      for (int64_t i : members) vals.push_back(nmse_by_k[static_cast<size_t>(k)][static_cast<size_t>(i)]);
      report.per_n.rows.push_back({k, "n=" + std::to_string(n),
                                   percentile_nearest_rank(vals, 50.0),
                                   percentile_nearest_rank(vals, 16.0),
                                   percentile_nearest_rank(vals, 84.0)});
    }
    // exemplars spanning the loss distribution at the exemplar width
    std::vector<std::pair<double, int64_t>> scored;
    for (int64_t i : members)
      scored.push_back({nmse_by_k[static_cast<size_t>(exemplar_k)][static_cast<size_t>(i)], i});
    std::sort(scored.begin(), scored.end());
    std::vector<double>& group_nmse = report.nmse_at_exemplar_k[n];
    for (const auto& [v, i] : scored) group_nmse.push_back(v);
    for (double pct : {5.0, 25.0, 50.0, 75.0, 95.0}) {
      size_t rank = static_cast<size_t>(std::ceil(pct / 100.0 * scored.size()));
      rank = std::min(std::max<size_t>(rank, 1), scored.size()) - 1;
      report.exemplar_val_indices[n].push_back(scored[rank].second);
    }
  }

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    report.per_n.write_csv(out_dir + "/per_n.csv");
    std::ofstream index(out_dir + "/exemplars.txt");
    const int64_t per = bundle.val.size() / bundle.val.dim(0);
    for (const auto& [n, indices] : report.exemplar_val_indices) {
      for (size_t ei = 0; ei < indices.size(); ++ei) {
        Shape shape = bundle.val.shape();
        shape[0] = 1;
        Tensor x(shape);
        std::copy(bundle.val.data() + indices[ei] * per,
                  bundle.val.data() + (indices[ei] + 1) * per, x.data());
        Tensor z = model.encode(x, nullptr);
        Tensor zk = mask_mul(z, mask_tensor(exemplar_k, model.k_max), nullptr);
        Tensor rec = model.decode(zk, nullptr);
        const std::string name =
            "exemplar_n" + std::to_string(n) + "_p" + std::to_string(ei) + ".pgm";
        export_pgm(out_dir + "/" + name, rec.reshaped({rec.dim(2), rec.dim(3)}));
        index << name << "\tval_index=" << indices[ei] << "\tn=" << n
              << "\tnmse=" << nmse_by_k[static_cast<size_t>(exemplar_k)][static_cast<size_t>(indices[ei])]
              << "\n";
      }
    }
  }
  return report;
}

}  // namespace iob
