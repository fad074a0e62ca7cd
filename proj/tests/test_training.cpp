#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "iob/stats.hpp"
#include "iob/training.hpp"
#include "test_helpers.hpp"

using namespace iob;
using namespace iob::testing;
namespace fs = std::filesystem;

TEST_CASE("early stopping triggers only after a stale patience window") {
  EarlyStopConfig config;  // 0.01% over 20 epochs
  std::vector<double> flat(25, 1.0);
  CHECK(early_stop_triggered(flat, config));

  std::vector<double> improving;
  for (int i = 0; i < 40; ++i) improving.push_back(1.0 / (1.0 + 0.01 * i));  // ~1%/epoch
  CHECK_FALSE(early_stop_triggered(improving, config));

  std::vector<double> tiny;
  for (int i = 0; i < 40; ++i) improving.push_back(1.0 - 1e-7 * i);  // far below 0.01%
  tiny.assign(30, 1.0);
  for (int i = 0; i < 30; ++i) tiny.push_back(1.0 - 1e-7 * i);
  CHECK(early_stop_triggered(tiny, config));

  std::vector<double> shorter(10, 1.0);
  CHECK_FALSE(early_stop_triggered(shorter, config));
}

TEST_CASE("tensor fingerprints are stable and sensitive") {
  Tensor a({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  Tensor b({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  Tensor c({2, 2}, {1.0f, 2.0f, 3.0f, 4.00001f});
  CHECK(fingerprint_tensor(a) == fingerprint_tensor(b));
  CHECK(fingerprint_tensor(a) != fingerprint_tensor(c));
}

TEST_CASE("architecture specs serialize and rebuild identically") {
  for (const AutoencoderSpec& spec :
       {AutoencoderSpec::scurve(), AutoencoderSpec::ndisk(),
        AutoencoderSpec::dense_stack({16, 64, 64, 6})}) {
    const std::string text = spec_serialize(spec);
    AutoencoderSpec back = spec_deserialize(text);
    CHECK(spec_serialize(back) == text);
    CHECK(back.k_max == spec.k_max);
    Autoencoder m1(spec, 7), m2(back, 7);
    Rng rng(8);
    Shape in{2};
    for (int64_t d : spec.input_shape) in.push_back(d);
    Tensor x = random_tensor(in, rng);
    Tensor y1 = m1.decode(m1.encode(x, nullptr), nullptr);
    Tensor y2 = m2.decode(m2.encode(x, nullptr), nullptr);
    for (int64_t i = 0; i < y1.size(); ++i) CHECK(y1.at(i) == y2.at(i));
  }
}

TEST_CASE("model save/load round trip is bit-exact, full variant self-describing") {
  fs::path dir = fs::temp_directory_path() / "iob_test_models";
  fs::create_directories(dir);
  Autoencoder model(AutoencoderSpec::dense_stack({3, 10, 4}), 19);
  const std::string path = (dir / "m.iobm").string();
  save_model_full(path, model);
  auto back = load_model_full(path);
  Rng rng(20);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor y1 = model.decode(model.encode(x, nullptr), nullptr);
  Tensor y2 = back->decode(back->encode(x, nullptr), nullptr);
  for (int64_t i = 0; i < y1.size(); ++i) CHECK(y1.at(i) == y2.at(i));
  CHECK(back->k_max == 4);

  Autoencoder other(AutoencoderSpec::dense_stack({3, 10, 4}), 77);
  load_model(path, other);
  Tensor y3 = other.decode(other.encode(x, nullptr), nullptr);
  for (int64_t i = 0; i < y1.size(); ++i) CHECK(y1.at(i) == y3.at(i));
}

TEST_CASE("linear IOB training drives the composite loss down deterministically") {
  DatasetBundle bundle = sample_scurve({600, 0.1, 3});
  AutoencoderSpec spec = AutoencoderSpec::dense_stack({3, 16, 16, 4});
  TrainConfig config;
  config.lr = 1e-3f;
  config.max_epochs = 30;
  config.seed = 4;
  TrainResult a = train_iob(spec, IobConfig::linear(4), bundle, config);
  REQUIRE(a.manifest.val_losses.size() >= 2);
  CHECK(a.manifest.val_losses.back() < a.manifest.val_losses.front());
  CHECK_FALSE(a.manifest.diverged);
  CHECK(a.manifest.prng == std::string("splitmix64"));
  CHECK(a.manifest.dataset_fingerprint == fingerprint_tensor(bundle.train));

  TrainResult b = train_iob(spec, IobConfig::linear(4), bundle, config);
  CHECK(a.manifest.val_losses == b.manifest.val_losses);
  auto pa = a.model->params(), pb = b.model->params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i)
    CHECK(fingerprint_tensor(*pa[i]) == fingerprint_tensor(*pb[i]));

  fs::path dir = fs::temp_directory_path() / "iob_test_manifest";
  fs::create_directories(dir);
  a.manifest.save((dir / "run.manifest").string());
  std::ifstream is(dir / "run.manifest");
  std::string text((std::istreambuf_iterator<char>(is)), {});
  CHECK(text.find("seed=4") != std::string::npos);
  CHECK(text.find("splitmix64") != std::string::npos);
}

TEST_CASE("geometric IOB training sweeps the frozen prefix forward") {
  DatasetBundle bundle = sample_scurve({400, 0.1, 9});
  AutoencoderSpec spec = AutoencoderSpec::dense_stack({3, 16, 3});
  TrainConfig config;
  config.lr = 2e-3f;
  config.max_epochs = 120;
  config.seed = 1;
  IobConfig iob = IobConfig::geometric(3, 0.5);
  iob.sweep.patience_epochs = 5;
  TrainResult r = train_iob(spec, iob, bundle, config);
  CHECK_FALSE(r.manifest.diverged);
  bool advanced = false;
  for (const std::string& e : r.manifest.events)
    if (e.find("frozen_prefix") != std::string::npos) advanced = true;
  CHECK(advanced);
}

TEST_CASE("separate fixed-width autoencoders narrow the bottleneck") {
  DatasetBundle bundle = sample_scurve({300, 0.1, 5});
  AutoencoderSpec spec = AutoencoderSpec::dense_stack({3, 12, 4});
  TrainConfig config;
  config.lr = 1e-3f;
  config.max_epochs = 10;
  auto results = train_separate_autoencoders(spec, bundle, config, {0, 2, 4});
  REQUIRE(results.size() == 3);
  CHECK(results[1].model->k_max == 2);
  CHECK(results[1].model->bottleneck->out_width == 2);
  CHECK(results[2].model->k_max == 4);
  // k=0 keeps the architecture but must behave as a constant predictor
  Rng rng(44);
  Tensor x1 = random_tensor({1, 3}, rng);
  Tensor x2 = random_tensor({1, 3}, rng);
  auto& m0 = *results[0].model;
  Tensor y1 = m0.decode(mask_mul(m0.encode(x1, nullptr), mask_tensor(0, m0.k_max), nullptr), nullptr);
  Tensor y2 = m0.decode(mask_mul(m0.encode(x2, nullptr), mask_tensor(0, m0.k_max), nullptr), nullptr);
  for (int64_t i = 0; i < y1.size(); ++i) CHECK(y1.at(i) == y2.at(i));
}

TEST_CASE("evaluation curves normalize by the population variance") {
  DatasetBundle bundle = sample_scurve({300, 0.1, 6});
  Autoencoder model(AutoencoderSpec::scurve(), 2);
  auto curve = evaluate_mse_curve(model, bundle, {0, 2, 4});
  REQUIRE(curve.size() == 3);
  for (const auto& pt : curve) {
    CHECK(pt.mean_nmse >= 0.0);
    CHECK(pt.p16 <= pt.p84);
  }
  // untrained k=0 predicts near-constant output: NMSE lands near 1 or worse
  CHECK(curve[0].mean_nmse > 0.2);

  auto per = per_sample_nmse(model, bundle.val, 2, bundle.population_variance);
  CHECK(per.size() == 300 / 10);
  CHECK(curve[1].mean_nmse == doctest::Approx(mean(per)).epsilon(1e-9));
}
