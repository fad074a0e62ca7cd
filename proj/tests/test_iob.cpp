#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iob/iob.hpp"
#include "test_helpers.hpp"

using namespace iob;
using namespace iob::testing;

TEST_CASE("mask vectors are prefixes of ones") {
  CHECK(mask_vector(0, 4) == std::vector<float>{0, 0, 0, 0});
  CHECK(mask_vector(2, 4) == std::vector<float>{1, 1, 0, 0});
  CHECK(mask_vector(4, 4) == std::vector<float>{1, 1, 1, 1});
  Tensor t = mask_tensor(1, 3);
  CHECK(t.shape() == Shape{3});
  CHECK(t.at(0) == 1.0f);
  CHECK(t.at(1) == 0.0f);
}

TEST_CASE("weight profiles: uniform linear, truncated geometric") {
  auto lin = weight_profile(IobConfig::linear(4));
  REQUIRE(lin.size() == 5);
  for (double w : lin) CHECK(w == doctest::Approx(0.2).epsilon(1e-12));

  // (1-r)^k * r over k=0..4, renormalized (oracle values fixed externally)
  auto g95 = weight_profile(IobConfig::geometric(4, 0.95));
  const double want95[] = {0.9500002968750927, 0.04750001484375468, 0.0023750007421877357,
                           0.0001187500371093869, 5.93750185546935e-06};
  for (int i = 0; i < 5; ++i) CHECK(g95[i] == doctest::Approx(want95[i]).epsilon(1e-10));

  auto g13 = weight_profile(IobConfig::geometric(4, 1.0 / 3.0));
  const double want13[] = {0.3838862559241706, 0.2559241706161137, 0.17061611374407584,
                           0.11374407582938391, 0.07582938388625596};
  for (int i = 0; i < 5; ++i) CHECK(g13[i] == doctest::Approx(want13[i]).epsilon(1e-10));

  double sum = 0.0;
  for (double w : g13) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact composite equals the weighted per-width oracle") {
  Autoencoder model(AutoencoderSpec::dense_stack({3, 16, 8, 4}), 21);
  Rng rng(77);
  Tensor x = random_tensor({6, 3}, rng);
  const auto rho = weight_profile(IobConfig::geometric(4, 0.5));

  double oracle = 0.0;
  for (int64_t k = 0; k <= 4; ++k)
    oracle += rho[static_cast<size_t>(k)] *
              static_cast<double>(masked_loss(model, x, x, k, 1.1, nullptr).scalar());

  const double got =
      static_cast<double>(composite_loss_exact(model, x, x, rho, 1.1, nullptr).scalar());
  CHECK(std::abs(got - oracle) <= 1e-6 * (1.0 + std::abs(oracle)));
}

TEST_CASE("exact composite gradients match finite differences") {
  Autoencoder model(AutoencoderSpec::dense_stack({2, 6, 3}), 5);
  Rng rng(6);
  Tensor x = random_tensor({4, 2}, rng);
  const auto rho = weight_profile(IobConfig::linear(3));

  Tensor& w = model.bottleneck->weights;
  auto loss_value = [&]() {
    return static_cast<double>(composite_loss_exact(model, x, x, rho, 0.8, nullptr).scalar());
  };
  const auto fd = finite_difference(w, loss_value);

  Tape tape;
  model.zero_grad();
  Tensor loss = composite_loss_exact(model, x, x, rho, 0.8, &tape);
  tape.backward(loss);
  CHECK(grads_close(w, fd));
}

TEST_CASE("sample_k follows the shifted clamped geometric law") {
  const double r = 1.0 / 3.0;
  const auto pmf = shifted_geometric_pmf(r, 2, 5);
  REQUIRE(pmf.size() == 6);  // indexed over k in {0..5}; support is {2..5}
  CHECK(pmf[0] == 0.0);
  CHECK(pmf[1] == 0.0);
  const double want[] = {0.3333333333333333, 0.22222222222222224, 0.14814814814814817,
                         0.2962962962962963};
  for (int i = 0; i < 4; ++i) CHECK(pmf[i + 2] == doctest::Approx(want[i]).epsilon(1e-12));

  const int64_t draws = 100000;
  std::vector<int64_t> counts(4, 0);
  Rng rng(123);
  for (int64_t i = 0; i < draws; ++i) {
    const int64_t k = sample_k(r, 2, 5, rng);
    REQUIRE(k >= 2);
    REQUIRE(k <= 5);
    ++counts[static_cast<size_t>(k - 2)];
  }
  for (int i = 0; i < 4; ++i) {
    const double p = want[i];
    const double sigma = std::sqrt(p * (1.0 - p) * draws);
    CHECK(std::abs(counts[i] - p * draws) <= 3.0 * sigma);
  }
}

TEST_CASE("stochastic composite equals the fixed-width loss at its sampled k") {
  Autoencoder model(AutoencoderSpec::dense_stack({3, 8, 4}), 9);
  Rng data_rng(31);
  Tensor x = random_tensor({5, 3}, data_rng);
  IobConfig config = IobConfig::geometric(4, 0.5);
  config.sweep.frozen_prefix = 1;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(static_cast<uint64_t>(trial));
    int64_t k = -1;
    const float got = composite_loss_stochastic(model, x, x, config, 0.9, rng, nullptr, &k).scalar();
    REQUIRE(k >= 1);
    REQUIRE(k <= 4);
    const float want = masked_loss(model, x, x, k, 0.9, nullptr).scalar();
    CHECK(got == want);
  }
}

TEST_CASE("masked decodes are nested: width k ignores every unit past k") {
  Autoencoder model(AutoencoderSpec::dense_stack({3, 10, 5}), 40);
  Rng rng(41);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor z = model.encode(x, nullptr);
  for (int64_t k = 0; k <= 5; ++k) {
    Tensor zk = mask_mul(z, mask_tensor(k, 5), nullptr);
    Tensor ref = model.decode(zk, nullptr);
    // scribble on the masked-out units; the decode must be bit-identical
    Tensor junk = z.clone();
    for (int64_t b = 0; b < junk.dim(0); ++b)
      for (int64_t j = k; j < 5; ++j) junk.at(b * 5 + j) = 1e6f;
    Tensor got = model.decode(mask_mul(junk, mask_tensor(k, 5), nullptr), nullptr);
    for (int64_t i = 0; i < ref.size(); ++i) CHECK(ref.at(i) == got.at(i));
  }
}

TEST_CASE("sweep_advance: flat windows advance, improving windows do not") {
  UnitSweepConfig sweep;  // threshold 0.01, patience 10
  std::vector<double> flat(10, 1.0);
  CHECK(sweep_advance(sweep, flat, 8));
  CHECK(sweep.frozen_prefix == 1);

  UnitSweepConfig improving;
  std::vector<double> down;
  for (int i = 0; i < 10; ++i) down.push_back(1.0 * std::pow(0.95, i));  // 5% per epoch
  CHECK_FALSE(sweep_advance(improving, down, 8));
  CHECK(improving.frozen_prefix == 0);

  // short history: never advances before a full window exists
  UnitSweepConfig young;
  std::vector<double> shorthist(5, 1.0);
  CHECK_FALSE(sweep_advance(young, shorthist, 8));

  // frozen prefix saturates at k_max + 1 signalling completion
  UnitSweepConfig done;
  done.frozen_prefix = 2;
  CHECK(sweep_advance(done, flat, 2));
  CHECK(done.frozen_prefix == 3);
}

TEST_CASE("apply_frozen_prefix zeroes gradients feeding frozen latent units") {
  Autoencoder model(AutoencoderSpec::dense_stack({3, 6, 4}), 50);
  Rng rng(51);
  Tensor x = random_tensor({4, 3}, rng);
  Tape tape;
  model.zero_grad();
  Tensor loss = masked_loss(model, x, x, 4, 1.0, &tape);
  tape.backward(loss);
  DenseLayer* bn = model.bottleneck;
  const int64_t in = bn->in_width;
  // make sure there is something to zero
  double before = 0.0;
  for (int64_t j = 0; j < in; ++j) before += std::abs(bn->weights.grad()[j]);
  CHECK(before > 0.0);
  apply_frozen_prefix(model, 2);
  for (int64_t row = 0; row < 2; ++row) {
    for (int64_t j = 0; j < in; ++j) CHECK(bn->weights.grad()[row * in + j] == 0.0f);
    CHECK(bn->bias.grad()[row] == 0.0f);
  }
  double after = 0.0;
  for (int64_t j = 0; j < in; ++j) after += std::abs(bn->weights.grad()[2 * in + j]);
  CHECK(after > 0.0);
}
