#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iob/nn.hpp"
#include "iob/tensor.hpp"
#include "test_helpers.hpp"

using namespace iob;
using namespace iob::testing;

TEST_CASE("tensor shape helpers and basic semantics") {
  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK(shape_str({2, 3}) == "(2,3)");

  Tensor t({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  CHECK(t.size() == 4);
  CHECK(t.at(3) == 4.0f);
  CHECK_FALSE(t.tracked());
  t.track();
  CHECK(t.tracked());
  t.grad()[0] = 7.0f;
  t.zero_grad();
  CHECK(t.grad()[0] == 0.0f);

  Tensor shallow = t;  // shares the buffer
  shallow.at(0) = 9.0f;
  CHECK(t.at(0) == 9.0f);

  Tensor deep = t.clone();
  deep.at(0) = -1.0f;
  CHECK(t.at(0) == 9.0f);
  CHECK_FALSE(deep.tracked());

  Tensor view = t.reshaped({4});
  CHECK(view.ndim() == 1);
  view.at(1) = 5.0f;
  CHECK(t.at(1) == 5.0f);

  Tensor det = t.detached();
  CHECK_FALSE(det.tracked());
  det.at(2) = 11.0f;
  CHECK(t.at(2) == 11.0f);
}

TEST_CASE("splitmix64 determinism and stream separation") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(42).next_u64() != c.next_u64());
  CHECK(Rng::stream(7, 0).next_u64() != Rng::stream(7, 1).next_u64());
  for (int i = 0; i < 1000; ++i) {
    Rng r(static_cast<uint64_t>(i));
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("dense layer gradients match central finite differences") {
  for (uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed + 100);
    DenseLayer layer(3, 5, seed % 2 ? Activation::kRelu : Activation::kIdentity, rng);
    Tensor x = random_tensor({4, 3}, rng);
    Tensor y = random_tensor({4, 5}, rng);
    x.track();

    auto loss_value = [&]() {
      Tensor out = layer.forward(x, nullptr);
      return static_cast<double>(gaussian_nll(out, y, 0.7, nullptr).scalar());
    };
    const auto fd_w = finite_difference(layer.weights, loss_value);
    const auto fd_b = finite_difference(layer.bias, loss_value);
    const auto fd_x = finite_difference(x, loss_value);

    Tape tape;
    layer.weights.zero_grad();
    layer.bias.zero_grad();
    x.zero_grad();
    Tensor loss = gaussian_nll(layer.forward(x, &tape), y, 0.7, &tape);
    tape.backward(loss);

    CHECK(grads_close(layer.weights, fd_w));
    CHECK(grads_close(layer.bias, fd_b));
    CHECK(grads_close(x, fd_x));
  }
}

TEST_CASE("conv2d gradients match central finite differences") {
  for (uint64_t seed = 0; seed < 6; ++seed) {
    Rng rng(seed + 500);
    Conv2dLayer layer(2, 3, 3, 2, 1, Activation::kRelu, rng);
    Tensor x = random_tensor({2, 2, 6, 6}, rng);
    x.track();
    Tensor out0 = layer.forward(x, nullptr);
    Tensor y = random_tensor(out0.shape(), rng);

    auto loss_value = [&]() {
      Tensor out = layer.forward(x, nullptr);
      return static_cast<double>(gaussian_nll(out.reshaped({out.dim(0), out.size() / out.dim(0)}),
                                              y.reshaped({y.dim(0), y.size() / y.dim(0)}), 1.3,
                                              nullptr)
                                     .scalar());
    };
    const auto fd_w = finite_difference(layer.filters, loss_value);
    const auto fd_b = finite_difference(layer.bias, loss_value);
    const auto fd_x = finite_difference(x, loss_value);

    Tape tape;
    layer.filters.zero_grad();
    layer.bias.zero_grad();
    x.zero_grad();
    Tensor out = layer.forward(x, &tape);
    Tensor loss = gaussian_nll(out.reshaped({out.dim(0), out.size() / out.dim(0)}),
                               y.reshaped({y.dim(0), y.size() / y.dim(0)}), 1.3, &tape);
    tape.backward(loss);

    CHECK(grads_close(layer.filters, fd_w));
    CHECK(grads_close(layer.bias, fd_b));
    CHECK(grads_close(x, fd_x));
  }
}

TEST_CASE("conv_transpose2d gradients match central finite differences") {
  for (uint64_t seed = 0; seed < 6; ++seed) {
    Rng rng(seed + 900);
    ConvTranspose2dLayer layer(3, 2, 4, 2, 1, Activation::kIdentity, rng);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    x.track();
    Tensor out0 = layer.forward(x, nullptr);
    Tensor y = random_tensor(out0.shape(), rng);

    auto loss_value = [&]() {
      Tensor out = layer.forward(x, nullptr);
      return static_cast<double>(gaussian_nll(out.reshaped({out.dim(0), out.size() / out.dim(0)}),
                                              y.reshaped({y.dim(0), y.size() / y.dim(0)}), 0.9,
                                              nullptr)
                                     .scalar());
    };
    // identity activation makes the loss exactly quadratic per entry, so a
    // larger step costs no truncation error and beats float roundoff
    const auto fd_w = finite_difference(layer.filters, loss_value, 0.05);
    const auto fd_x = finite_difference(x, loss_value, 0.05);

    Tape tape;
    layer.filters.zero_grad();
    layer.bias.zero_grad();
    x.zero_grad();
    Tensor out = layer.forward(x, &tape);
    Tensor loss = gaussian_nll(out.reshaped({out.dim(0), out.size() / out.dim(0)}),
                               y.reshaped({y.dim(0), y.size() / y.dim(0)}), 0.9, &tape);
    tape.backward(loss);

    CHECK(grads_close(layer.filters, fd_w));
    CHECK(grads_close(x, fd_x));
  }
}

TEST_CASE("conv_transpose2d is the exact adjoint of conv2d on a shared buffer") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 1300);
    const int64_t stride = 1 + static_cast<int64_t>(seed % 2);
    const int64_t pad = static_cast<int64_t>(seed % 2);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);  // oc=3, ic=2
    Tensor x = random_tensor({2, 2, 7, 7}, rng);
    Tensor ax = conv2d_raw(x, w, nullptr, stride, pad, Activation::kIdentity, nullptr, "a");
    Tensor y = random_tensor(ax.shape(), rng);
    Tensor aty =
        conv_transpose2d_raw(y, w, nullptr, stride, pad, Activation::kIdentity, nullptr, "at");
    REQUIRE(aty.shape() == x.shape());
    const double lhs = dot(ax, y);
    const double rhs = dot(x, aty);
    CHECK(std::abs(lhs - rhs) <= 1e-4 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("relu gates gradients by the post-activation sign") {
  Tensor x({1, 4}, {-2.0f, -0.5f, 0.5f, 3.0f});
  x.track();
  Tape tape;
  Tensor out = relu(x, &tape);
  Tensor s = sum_all(out, &tape);
  tape.backward(s);
  CHECK(out.at(0) == 0.0f);
  CHECK(out.at(3) == 3.0f);
  CHECK(x.grad()[0] == 0.0f);
  CHECK(x.grad()[1] == 0.0f);
  CHECK(x.grad()[2] == 1.0f);
  CHECK(x.grad()[3] == 1.0f);
}

TEST_CASE("gaussian_nll matches the closed form") {
  Tensor yhat({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  Tensor y({2, 2}, {1.5f, 2.0f, 2.0f, 5.0f});
  // (1/(2*0.5))*sum_d r^2 + (2/2)*log(2*pi*0.5), averaged / summed over batch
  CHECK(gaussian_nll(yhat, y, 0.5, nullptr).scalar() ==
        doctest::Approx(2.2697298858494).epsilon(1e-6));
  CHECK(gaussian_nll(yhat, y, 0.5, nullptr, Reduction::kSum).scalar() ==
        doctest::Approx(4.5394597716988).epsilon(1e-6));
}

TEST_CASE("mask_mul scales columns and routes gradients to tracked inputs") {
  Tensor x({2, 3}, {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f});
  Tensor e({3}, {1.0f, 0.5f, 0.0f});
  x.track();
  e.track();
  Tape tape;
  Tensor out = mask_mul(x, e, &tape);
  CHECK(out.at(1) == 1.0f);
  CHECK(out.at(2) == 0.0f);
  CHECK(out.at(4) == 2.5f);
  Tensor s = sum_all(out, &tape);
  tape.backward(s);
  CHECK(x.grad()[0] == 1.0f);
  CHECK(x.grad()[1] == 0.5f);
  CHECK(x.grad()[2] == 0.0f);
  CHECK(e.grad()[0] == doctest::Approx(5.0f));   // 1 + 4
  CHECK(e.grad()[1] == doctest::Approx(7.0f));   // 2 + 5
  CHECK(e.grad()[2] == doctest::Approx(9.0f));   // 3 + 6
}

TEST_CASE("weighted_sum combines scalar losses with the given weights") {
  Tensor a({1}, {2.0f});
  Tensor b({1}, {3.0f});
  a.track();
  b.track();
  Tape tape;
  Tensor s = weighted_sum({a, b}, {0.25, 0.75}, &tape);
  CHECK(s.scalar() == doctest::Approx(2.75));
  tape.backward(s);
  CHECK(a.grad()[0] == doctest::Approx(0.25f));
  CHECK(b.grad()[0] == doctest::Approx(0.75f));
}

TEST_CASE("adam reproduces hand-computed update steps") {
  // step 1: theta=1, grad=0.5, lr=0.1 -> bias-corrected update of exactly lr
  Tensor p({1}, {1.0f});
  p.track();
  Adam opt({&p}, {0.1f, 0.9f, 0.999f, 1e-8f});
  p.grad()[0] = 0.5f;
  opt.step();
  CHECK(p.at(0) == doctest::Approx(0.9).epsilon(1e-6));
  // step 2 with grad -0.25 (oracle value computed independently)
  p.grad()[0] = -0.25f;
  opt.step();
  CHECK(p.at(0) == doctest::Approx(0.8733662987078463).epsilon(1e-5));
  CHECK(opt.steps() == 2);
}

TEST_CASE("forward without a tape produces untracked outputs and records nothing") {
  Rng rng(3);
  DenseLayer layer(3, 3, Activation::kRelu, rng);
  Tensor x = random_tensor({2, 3}, rng);
  Tensor out = layer.forward(x, nullptr);
  CHECK_FALSE(out.tracked());
  Tape tape;
  (void)layer.forward(x, &tape);
  CHECK(tape.size() > 0);
  const size_t n = tape.size();
  (void)layer.forward(x, nullptr);
  CHECK(tape.size() == n);
}

TEST_CASE("identical seeds give bit-identical forward passes") {
  Rng r1(11), r2(11);
  DenseLayer a(4, 4, Activation::kRelu, r1), b(4, 4, Activation::kRelu, r2);
  for (int64_t i = 0; i < a.weights.size(); ++i) CHECK(a.weights.at(i) == b.weights.at(i));
  Tensor x = random_tensor({3, 4}, r1);
  Tensor oa = a.forward(x, nullptr), ob = b.forward(x, nullptr);
  for (int64_t i = 0; i < oa.size(); ++i) CHECK(oa.at(i) == ob.at(i));
}
