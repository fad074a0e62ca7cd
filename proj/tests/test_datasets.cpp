#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iob/datasets.hpp"
#include "iob/tensor_io.hpp"
#include "iob/training.hpp"

using namespace iob;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("iob_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("noiseless s-curve points satisfy x^2 + (1-|z|)^2 = 1") {
  for (double t : {-4.0, -2.0, -0.5, 0.0, 0.1, 1.0, 3.0, 4.5}) {
    Tensor p = scurve_point(t, 1.3);
    REQUIRE(p.size() == 3);
    const double x = p.at(0), u = p.at(1), z = p.at(2);
    CHECK(u == doctest::Approx(1.3));
    CHECK(x * x + (1.0 - std::abs(z)) * (1.0 - std::abs(z)) == doctest::Approx(1.0).epsilon(1e-5));
    // z carries the sign of t and lies in [-2, 0] for t>0 ... [0,2] overall
    CHECK(std::abs(z) <= 2.0 + 1e-6);
    if (t > 0.0) CHECK(z <= 1e-6);
  }
}

TEST_CASE("s-curve bundle: split, ranges, noise scale, determinism") {
  DatasetBundle bundle = sample_scurve({2000, 0.1, 7});
  CHECK(bundle.train.shape() == Shape{1800, 3});
  CHECK(bundle.val.shape() == Shape{200, 3});
  CHECK(bundle.meta_train.size() == 1800);
  CHECK(bundle.population_variance > 0.0);

  // residual from the noiseless manifold point recorded in meta = (t, u)
  double sq = 0.0;
  for (size_t i = 0; i < 500; ++i) {
    const double t = bundle.meta_train[i][0], u = bundle.meta_train[i][1];
    CHECK(t >= -3.0 * M_PI / 2.0);
    CHECK(t <= 3.0 * M_PI / 2.0);
    CHECK(u >= 0.0);
    CHECK(u <= 2.0);
    Tensor clean = scurve_point(t, u);
    for (int64_t j = 0; j < 3; ++j) {
      const double r = bundle.train.at(static_cast<int64_t>(i) * 3 + j) - clean.at(j);
      sq += r * r;
    }
  }
  const double sigma_hat = std::sqrt(sq / (500.0 * 3.0));
  CHECK(sigma_hat == doctest::Approx(0.1).epsilon(0.15));

  DatasetBundle again = sample_scurve({2000, 0.1, 7});
  CHECK(fingerprint_tensor(again.train) == fingerprint_tensor(bundle.train));
  DatasetBundle other = sample_scurve({2000, 0.1, 8});
  CHECK(fingerprint_tensor(other.train) != fingerprint_tensor(bundle.train));
}

TEST_CASE("disk images match the pixel inequality for their recorded parameters") {
  Rng rng(99);
  for (int n : {1, 2, 4}) {
    std::vector<DiskParams> params;
    Tensor img = generate_ndisk_image(n, rng, &params);
    REQUIRE(img.shape() == Shape{1, 32, 32});
    REQUIRE(params.size() == static_cast<size_t>(n));
    for (const auto& d : params) {
      CHECK(d.r >= 2.0);
      CHECK(d.r <= 5.0);
      CHECK(d.a >= d.r);
      CHECK(d.a <= 32.0 - d.r);
    }
    int64_t on = 0;
    for (int64_t j = 1; j <= 32; ++j) {
      for (int64_t k = 1; k <= 32; ++k) {
        bool want = false;  // union across disks
        for (const auto& d : params) {
          const double dj = d.a - (j - 1) - 0.5, dk = d.b - (k - 1) - 0.5;
          if (d.r * d.r >= dj * dj + dk * dk) want = true;
        }
        const float v = img.at((j - 1) * 32 + (k - 1));
        CHECK(v == (want ? 1.0f : 0.0f));
        on += v > 0.5f;
      }
    }
    CHECK(on > 0);
  }
}

TEST_CASE("n-disk bundle shapes and metadata") {
  DatasetBundle bundle = build_ndisk({2, false, 300, 32, 3});
  CHECK(bundle.train.shape() == Shape{270, 1, 32, 32});
  CHECK(bundle.val.shape() == Shape{30, 1, 32, 32});
  CHECK(bundle.n_train.size() == 270);
  for (int n : bundle.n_val) CHECK(n == 2);
  CHECK(bundle.population_variance > 0.0);
}

TEST_CASE("heterogeneous bundle draws disk counts roughly uniformly from 1..4") {
  DatasetBundle bundle = build_heterogeneous({0, true, 2000, 32, 5});
  std::vector<int> counts(5, 0);
  for (int n : bundle.n_train) {
    REQUIRE(n >= 1);
    REQUIRE(n <= 4);
    ++counts[static_cast<size_t>(n)];
  }
  for (int n = 1; n <= 4; ++n) {
    const double frac = counts[static_cast<size_t>(n)] / 1800.0;
    CHECK(frac > 0.15);
    CHECK(frac < 0.35);
  }
}

TEST_CASE("linear-gaussian control bundle") {
  DatasetBundle bundle = build_linear_gaussian(2, 16, 1000, 0.01, 11);
  CHECK(bundle.train.shape() == Shape{900, 16});
  CHECK(bundle.population_variance > 0.0);
  CHECK(fingerprint_tensor(build_linear_gaussian(2, 16, 1000, 0.01, 11).train) ==
        fingerprint_tensor(bundle.train));
}

TEST_CASE("pooled population variance matches a direct computation") {
  Tensor data({3, 2}, {0.0f, 10.0f, 1.0f, 12.0f, 2.0f, 14.0f});
  // col means 1, 12; col variances (population) 2/3 and 8/3; pooled 5/3
  CHECK(population_variance(data) == doctest::Approx(5.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("IOBT round trip is bit-exact and malformed input is rejected") {
  const fs::path dir = temp_dir("iobt");
  Tensor t({2, 3}, {1.5f, -2.25f, 0.0f, 3.0e-7f, 1.0e9f, -0.0f});
  const std::string path = (dir / "t.iobt").string();
  write_tensor_file(path, t);
  Tensor back = read_tensor_file(path);
  REQUIRE(back.shape() == t.shape());
  for (int64_t i = 0; i < t.size(); ++i) {
    // bit-exact, including signed zero
    uint32_t a, b;
    std::memcpy(&a, &t.at(i), 4);
    std::memcpy(&b, &back.at(i), 4);
    CHECK(a == b);
  }

  {  // wrong magic
    std::ofstream os(dir / "bad.iobt", std::ios::binary);
    os << "NOPE" << std::string(16, '\0');
  }
  CHECK_THROWS_AS(read_tensor_file((dir / "bad.iobt").string()), FormatError);
  try {
    read_tensor_file((dir / "bad.iobt").string());
  } catch (const FormatError& e) {
    CHECK(e.offset == 0);
  }

  {  // truncated payload
    std::ifstream is(path, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(is)), {});
    std::ofstream os(dir / "trunc.iobt", std::ios::binary);
    os.write(all.data(), static_cast<std::streamsize>(all.size() - 5));
  }
  CHECK_THROWS_AS(read_tensor_file((dir / "trunc.iobt").string()), FormatError);
}

TEST_CASE("PGM export: header, round-half-up quantization, clamping") {
  const fs::path dir = temp_dir("pgm");
  Tensor img({2, 2}, {0.0f, 1.0f, 0.5f, 0.25f});
  const std::string path = (dir / "i.pgm").string();
  export_pgm(path, img);
  std::ifstream is(path, std::ios::binary);
  std::string all((std::istreambuf_iterator<char>(is)), {});
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(all.size() == header.size() + 4);
  CHECK(all.substr(0, header.size()) == header);
  const auto* px = reinterpret_cast<const unsigned char*>(all.data() + header.size());
  CHECK(px[0] == 0);
  CHECK(px[1] == 255);
  CHECK(px[2] == 128);  // 127.5 rounds half up
  CHECK(px[3] == 64);   // 63.75 rounds to nearest

  Tensor wild({1, 1, 2}, {-3.0f, 7.0f});
  export_pgm(path, wild);
  std::ifstream is2(path, std::ios::binary);
  std::string all2((std::istreambuf_iterator<char>(is2)), {});
  const auto* px2 = reinterpret_cast<const unsigned char*>(all2.data() + all2.size() - 2);
  CHECK(px2[0] == 0);
  CHECK(px2[1] == 255);
}

TEST_CASE("bundle save/load round trip preserves data, metadata and manifest") {
  const fs::path dir = temp_dir("bundle");
  DatasetBundle bundle = sample_scurve({400, 0.1, 13});
  save_bundle(dir.string(), bundle);
  CHECK(fs::exists(dir / "bundle.manifest"));
  DatasetBundle back = load_bundle(dir.string());
  CHECK(back.name == bundle.name);
  CHECK(back.seed == bundle.seed);
  CHECK(back.population_variance == doctest::Approx(bundle.population_variance).epsilon(1e-12));
  CHECK(fingerprint_tensor(back.train) == fingerprint_tensor(bundle.train));
  CHECK(fingerprint_tensor(back.val) == fingerprint_tensor(bundle.val));
  REQUIRE(back.meta_val.size() == bundle.meta_val.size());
  CHECK(back.meta_val[0][0] == doctest::Approx(bundle.meta_val[0][0]));

  std::ifstream mf(dir / "bundle.manifest");
  std::string text((std::istreambuf_iterator<char>(mf)), {});
  CHECK(text.find("splitmix64") != std::string::npos);
}
