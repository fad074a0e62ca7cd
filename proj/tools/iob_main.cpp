// Command-line front end: dataset generation, IOB/baseline training,
// evaluation curves, intrinsic-dimensionality estimation, and exploration
// outputs. Every command writes a manifest sufficient to re-run it.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "iob/analysis.hpp"
#include "iob/datasets.hpp"
#include "iob/id_estimator.hpp"
#include "iob/pca.hpp"
#include "iob/tensor_io.hpp"
#include "iob/training.hpp"
#include "iob/twonn.hpp"

namespace fs = std::filesystem;
using namespace iob;

namespace {

void write_run_manifest(const std::string& path, int argc, char** argv) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "command=";
  for (int i = 0; i < argc; ++i) os << (i ? " " : "") << argv[i];
  os << "\nprng=" << Rng::name() << "\n";
}

AutoencoderSpec spec_for_bundle(const DatasetBundle& bundle, int64_t dense_kmax) {
  if (bundle.name == "scurve") return AutoencoderSpec::scurve();
  if (!bundle.n_train.empty() || bundle.name.find("disk") != std::string::npos ||
      bundle.name == "heterogeneous")
    return AutoencoderSpec::ndisk();
  const int64_t p = bundle.train.size() / bundle.train.dim(0);
  return AutoencoderSpec::dense_stack({p, 64, 64, dense_kmax});
}

double default_rate(const AutoencoderSpec& spec) {
  return spec.preset == "scurve" ? 0.95 : 1.0 / 3.0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("IOB_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"information-ordered bottleneck experiments"};
  app.set_config("--config", "", "INI config file ([gen]/[train]/... sections)");
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a dataset bundle");
  std::string gen_experiment = "scurve", gen_out;
  int64_t gen_n = 10000;
  int gen_disks = 1, gen_rank = 2;
  int64_t gen_ambient = 16;
  double gen_noise = 0.1;
  uint64_t gen_seed = 0;
  bool gen_force = false;
  gen->add_option("--experiment", gen_experiment, "scurve | ndisk | heterogeneous | lingauss");
  gen->add_option("--n", gen_n, "sample count");
  gen->add_option("--disks", gen_disks, "disk count for ndisk");
  gen->add_option("--rank", gen_rank, "intrinsic rank for lingauss");
  gen->add_option("--ambient", gen_ambient, "ambient dimension for lingauss");
  gen->add_option("--noise", gen_noise, "noise sigma (scurve: 0.1, lingauss: 0.01)");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_flag("--force", gen_force, "overwrite an existing bundle");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train an IOB or baseline autoencoder");
  std::string train_data, train_model = "linear_iob", train_out;
  int64_t train_k = -1, train_kmax = 6, train_batch = 64;
  double train_rate = 0.0, train_lr = 5e-5;
  int train_max_epochs = -1;
  uint64_t train_seed = 0;
  bool train_verbose = false;
  train->add_option("--data", train_data, "bundle directory")->required();
  train->add_option("--model", train_model, "linear_iob | geometric_iob | separate");
  train->add_option("--k", train_k, "bottleneck width for separate");
  train->add_option("--kmax", train_kmax, "bottleneck width for dense (lingauss) presets");
  train->add_option("--rate", train_rate, "geometric rate (default: preset)");
  train->add_option("--lr", train_lr, "learning rate");
  train->add_option("--batch", train_batch, "batch size");
  train->add_option("--max-epochs", train_max_epochs, "epoch cap (default: preset)");
  train->add_option("--seed", train_seed, "training seed");
  train->add_option("--out", train_out, "output directory")->required();
  train->add_flag("--verbose", train_verbose, "per-epoch logging");

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "normalized-MSE compression curves");
  std::string eval_data, eval_linear, eval_geometric, eval_out = "curves.csv";
  std::vector<std::string> eval_separate;
  bool eval_pca = false;
  eval->add_option("--data", eval_data, "bundle directory")->required();
  eval->add_option("--linear", eval_linear, "linear IOB model file");
  eval->add_option("--geometric", eval_geometric, "geometric IOB model file");
  eval->add_option("--separate", eval_separate, "separate AE entries as k=path (repeatable)");
  eval->add_flag("--pca", eval_pca, "include a PCA baseline fit on the training split");
  eval->add_option("--out", eval_out, "output CSV");

  // ---- id ----
  auto* id = app.add_subcommand("id", "Wilks-test intrinsic dimensionality");
  std::string id_data, id_model, id_out = "id_report.csv", id_mode = "total";
  double id_alpha = 0.05;
  id->add_option("--data", id_data, "bundle directory")->required();
  id->add_option("--model", id_model, "trained IOB model file")->required();
  id->add_option("--alpha", id_alpha, "test tolerance level");
  id->add_option("--mode", id_mode, "total | mean log-likelihood statistic");
  id->add_option("--out", id_out, "output CSV");

  // ---- interp ----
  auto* interp = app.add_subcommand("interp", "latent-space interpolation strip");
  std::string interp_data, interp_model, interp_out = "interp.pgm";
  InterpolationSpec interp_spec;
  interp->add_option("--data", interp_data, "bundle directory")->required();
  interp->add_option("--model", interp_model, "trained model file")->required();
  interp->add_option("--a", interp_spec.a, "first validation index");
  interp->add_option("--b", interp_spec.b, "second validation index");
  interp->add_option("--steps", interp_spec.m, "interpolation steps");
  interp->add_option("--k", interp_spec.k, "bottleneck width (-1: k_max)");
  interp->add_option("--out", interp_out, "output PGM");

  // ---- explore ----
  auto* explore = app.add_subcommand("explore", "heterogeneous per-n compression report");
  std::string explore_data, explore_model, explore_out = "explore";
  int64_t explore_k = 9;
  explore->add_option("--data", explore_data, "bundle directory")->required();
  explore->add_option("--model", explore_model, "trained model file")->required();
  explore->add_option("--k", explore_k, "exemplar bottleneck width");
  explore->add_option("--out", explore_out, "output directory");

  // ---- twonn ----
  auto* twonn = app.add_subcommand("twonn", "TwoNN intrinsic-dimensionality baseline");
  std::string twonn_data;
  int64_t twonn_sub = 5000;
  twonn->add_option("--data", twonn_data, "bundle directory")->required();
  twonn->add_option("--subsample", twonn_sub, "neighbor-search subsample cap");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      if (fs::exists(gen_out + "/bundle.manifest") && !gen_force) {
        std::cerr << "gen: " << gen_out << " already holds a bundle (use --force)\n";
        return 1;
      }
      DatasetBundle bundle;
      if (gen_experiment == "scurve") {
        bundle = sample_scurve({gen_n, gen_noise, gen_seed});
      } else if (gen_experiment == "ndisk") {
        bundle = build_ndisk({gen_disks, false, gen_n, 32, gen_seed});
      } else if (gen_experiment == "heterogeneous") {
        bundle = build_heterogeneous({0, true, gen_n, 32, gen_seed});
      } else if (gen_experiment == "lingauss") {
        bundle = build_linear_gaussian(gen_rank, gen_ambient, gen_n,
                                       gen_noise == 0.1 ? 0.01 : gen_noise, gen_seed);
      } else {
        std::cerr << "gen: unknown experiment '" << gen_experiment << "'\n";
        return 1;
      }
      save_bundle(gen_out, bundle);
      write_run_manifest(gen_out + "/run.manifest", argc, argv);
      std::cout << "wrote " << gen_out << ": train " << shape_str(bundle.train.shape())
                << " val " << shape_str(bundle.val.shape())
                << " population_variance=" << bundle.population_variance << "\n";
    } else if (train->parsed()) {
      const DatasetBundle bundle = load_bundle(train_data);
      AutoencoderSpec spec = spec_for_bundle(bundle, train_kmax);
      TrainConfig config;
      config.lr = static_cast<float>(train_lr);
      config.batch_size = train_batch;
      config.seed = train_seed;
      config.verbose = train_verbose;
      config.max_epochs =
          train_max_epochs > 0 ? train_max_epochs : (spec.preset == "ndisk" ? 500 : 2000);
      fs::create_directories(train_out);

      TrainResult result;
      if (train_model == "separate") {
        if (train_k < 0) {
          std::cerr << "train: --model separate requires --k\n";
          return 1;
        }
        auto results = train_separate_autoencoders(spec, bundle, config, {train_k});
        result = std::move(results.front());
      } else if (train_model == "linear_iob" || train_model == "geometric_iob") {
        IobConfig iob_config =
            train_model == "linear_iob"
                ? IobConfig::linear(spec.k_max)
                : IobConfig::geometric(spec.k_max,
                                       train_rate > 0.0 ? train_rate : default_rate(spec));
        result = train_iob(spec, iob_config, bundle, config);
      } else {
        std::cerr << "train: unknown model '" << train_model << "'\n";
        return 1;
      }
      const std::string model_path = train_out + "/model.iobm";
      save_model_full(model_path, *result.model);
      result.manifest.model_path = model_path;
      result.manifest.save(train_out + "/train.manifest");
      write_run_manifest(train_out + "/run.manifest", argc, argv);
      for (size_t i = 0; i < result.manifest.val_losses.size(); ++i)
        std::cout << "epoch " << i << " train=" << result.manifest.train_losses[i]
                  << " val=" << result.manifest.val_losses[i] << "\n";
      for (const std::string& e : result.manifest.events) std::cout << e << "\n";
      if (result.manifest.diverged) {
        std::cerr << "train: diverged\n";
        return 2;
      }
    } else if (eval->parsed()) {
      const DatasetBundle bundle = load_bundle(eval_data);
      std::unique_ptr<Autoencoder> linear, geometric;
      if (!eval_linear.empty()) linear = load_model_full(eval_linear);
      if (!eval_geometric.empty()) geometric = load_model_full(eval_geometric);
      std::vector<std::unique_ptr<Autoencoder>> owned;
      std::vector<std::pair<int64_t, Autoencoder*>> separate;
      for (const std::string& entry : eval_separate) {
        const size_t eq = entry.find('=');
        if (eq == std::string::npos) {
          std::cerr << "eval: --separate entries are k=path\n";
          return 1;
        }
        owned.push_back(load_model_full(entry.substr(eq + 1)));
        separate.push_back({std::stoll(entry.substr(0, eq)), owned.back().get()});
      }
      PcaModel pca;
      if (eval_pca) pca = pca_fit(bundle.train);
      CurveTable table = compression_comparison(linear.get(), geometric.get(), separate,
                                                eval_pca ? &pca : nullptr, bundle);
      table.write_csv(eval_out);
      write_run_manifest(eval_out + ".manifest", argc, argv);
      std::cout << "wrote " << eval_out << " (" << table.rows.size() << " rows)\n";
    } else if (id->parsed()) {
      const DatasetBundle bundle = load_bundle(id_data);
      auto model = load_model_full(id_model);
      MaskOptConfig opt;
      opt.mode = id_mode == "mean" ? LogLikMode::kMean : LogLikMode::kTotal;
      IdReport report =
          wilks_sweep(*model, bundle.val, bundle.population_variance, id_alpha, opt);
      report.write_csv(id_out);
      write_run_manifest(id_out + ".manifest", argc, argv);
      std::cout << report.summary() << "\n";
    } else if (interp->parsed()) {
      const DatasetBundle bundle = load_bundle(interp_data);
      auto model = load_model_full(interp_model);
      Tensor images = interpolate_latents(*model, bundle, interp_spec);
      export_interpolation_strip(interp_out, images);
      write_run_manifest(interp_out + ".manifest", argc, argv);
      std::cout << "wrote " << interp_out << "\n";
    } else if (explore->parsed()) {
      const DatasetBundle bundle = load_bundle(explore_data);
      if (bundle.n_val.empty()) {
        std::cerr << "explore: bundle has no per-sample disk counts (not heterogeneous)\n";
        return 1;
      }
      auto model = load_model_full(explore_model);
      heterogeneous_report(*model, bundle, explore_out, explore_k);
      write_run_manifest(explore_out + "/run.manifest", argc, argv);
      std::cout << "wrote " << explore_out << "\n";
    } else if (twonn->parsed()) {
      const DatasetBundle bundle = load_bundle(twonn_data);
      const TwoNnResult r = twonn_estimate(bundle.train, twonn_sub, bundle.seed);
      if (r.duplicates > 0)
        std::cerr << "twonn: excluded " << r.duplicates << " duplicate points\n";
      std::cout << "twonn_dimension=" << r.dimension << " used=" << r.used << "\n";
    }
  } catch (const std::domain_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
