#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snnkit/ops.hpp"
#include "snnkit/tensor.hpp"
#include "testutil.hpp"

using namespace snnkit;
using testutil::fd_grad;
using testutil::grad_check;
using testutil::max_rel_err;

namespace {

// Nudges the per-group argmax away from the runner-up so finite
// differences of max-based reductions do not straddle an argmax switch.
void widen_gap(double* vals, std::int64_t n, std::int64_t stride, double min_gap = 5e-3) {
  std::int64_t best = 0;
  for (std::int64_t i = 1; i < n; ++i) {
    if (vals[i * stride] > vals[best * stride]) best = i;
  }
  for (std::int64_t i = 0; i < n; ++i) {
    if (i != best && vals[best * stride] - vals[i * stride] < min_gap) {
      vals[best * stride] += min_gap;
    }
  }
}

Tensor identity_kernel(std::int64_t c) {
  Tensor k = Tensor::zeros({c, c, 3, 3});
  for (std::int64_t i = 0; i < c; ++i) k.raw()[((i * c + i) * 3 + 1) * 3 + 1] = 1.0;
  return k;
}

}  // namespace

TEST_CASE("conv2d hand-counted window sums") {
  Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, k, b, 1, 1);
  REQUIRE(y.shape() == Shape{1, 1, 3, 3});
  CHECK(y.at({0, 0, 1, 1}) == doctest::Approx(9.0));
  CHECK(y.at({0, 0, 0, 0}) == doctest::Approx(4.0));
  CHECK(y.at({0, 0, 0, 2}) == doctest::Approx(4.0));
  CHECK(y.at({0, 0, 2, 0}) == doctest::Approx(4.0));
  CHECK(y.at({0, 0, 2, 2}) == doctest::Approx(4.0));
  CHECK(y.at({0, 0, 0, 1}) == doctest::Approx(6.0));
}

TEST_CASE("conv2d zero kernel annihilates") {
  Rng rng(1);
  Tensor x = Tensor::uniform({2, 3, 4, 5}, rng, -1, 1);
  Tensor k = Tensor::zeros({2, 3, 3, 3});
  Tensor b = Tensor::zeros({2});
  Tensor y = conv2d(x, k, b, 1, 1);
  CHECK(y.shape() == Shape{2, 2, 4, 5});
  CHECK(y.data().abs().maxCoeff() == 0.0);
}

TEST_CASE("conv2d identity kernel is the identity map") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::int64_t n = 1 + rng.below(2), c = 1 + rng.below(3);
    const std::int64_t h = 1 + rng.below(5), w = 1 + rng.below(5);
    Tensor x = Tensor::uniform({n, c, h, w}, rng, -2, 2);
    Tensor y = conv2d(x, identity_kernel(c), Tensor::zeros({c}), 1, 1);
    REQUIRE(y.shape() == x.shape());
    CHECK((y.data() - x.data()).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("conv2d rejects channel mismatch") {
  Tensor x = Tensor::zeros({1, 3, 4, 4});
  Tensor k = Tensor::zeros({2, 2, 3, 3});
  CHECK_THROWS_AS(conv2d(x, k, Tensor::zeros({2}), 1, 1), ContractError);
}

TEST_CASE("matmul basics") {
  Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  Rng rng(3);
  Tensor b = Tensor::uniform({2, 3}, rng, -1, 1);
  Tensor y = matmul(eye, b);
  CHECK((y.data() - b.data()).abs().maxCoeff() == 0.0);

  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  Tensor v = Tensor::from_values({2, 1}, {1, 1});
  Tensor r = matmul(a, v);
  CHECK(r.at({0, 0}) == doctest::Approx(3.0));
  CHECK(r.at({1, 0}) == doctest::Approx(7.0));

  Tensor z = matmul(a, Tensor::zeros({2, 4}));
  CHECK(z.data().abs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), ContractError);
}

TEST_CASE("pool_spatial reductions") {
  Tensor c = Tensor::full({1, 2, 3, 3}, 0.75);
  CHECK(pool_spatial(c, PoolMode::kAvg).data().isApproxToConstant(0.75));
  CHECK(pool_spatial(c, PoolMode::kMax).data().isApproxToConstant(0.75));

  Tensor x = Tensor::from_values({1, 1, 2, 2}, {0, 1, 0, 0});
  CHECK(pool_spatial(x, PoolMode::kAvg).value() == doctest::Approx(0.25));
  CHECK(pool_spatial(x, PoolMode::kMax).value() == doctest::Approx(1.0));

  Rng rng(4);
  Tensor one = Tensor::uniform({2, 3, 1, 1}, rng, -1, 1);
  CHECK((pool_spatial(one, PoolMode::kAvg).data() - one.data()).abs().maxCoeff() == 0.0);
  CHECK((pool_spatial(one, PoolMode::kMax).data() - one.data()).abs().maxCoeff() == 0.0);
}

TEST_CASE("pool_channel reductions") {
  Rng rng(5);
  Tensor single = Tensor::uniform({1, 1, 2, 2}, rng, -1, 1);
  Tensor y = pool_channel(single);
  REQUIRE(y.shape() == Shape{1, 2, 2, 2});
  for (std::int64_t q = 0; q < 4; ++q) {
    CHECK(y.data()[q] == single.data()[q]);      // mean slice
    CHECK(y.data()[4 + q] == single.data()[q]);  // max slice
  }

  Tensor two = Tensor::from_values({1, 2, 1, 1}, {0, 1});
  Tensor p = pool_channel(two);
  CHECK(p.at({0, 0, 0, 0}) == doctest::Approx(0.5));
  CHECK(p.at({0, 1, 0, 0}) == doctest::Approx(1.0));

  CHECK(pool_channel(Tensor::zeros({2, 3, 2, 2})).data().abs().maxCoeff() == 0.0);
}

TEST_CASE("backward linear and quadratic hand values") {
  Tensor x = Tensor::from_values({3}, {1, 2, 3}, true);
  {
    Tape tape;
    tape.watch(x);
    Tensor loss = sum(x);
    tape.backward(loss);
    Array g = tape.grad(x);
    CHECK(g.isApproxToConstant(1.0));
  }
  Tensor x2 = Tensor::from_values({2}, {1, 2}, true);
  {
    Tape tape;
    tape.watch(x2);
    Tensor loss = sum(mul(x2, x2));
    tape.backward(loss);
    Array g = tape.grad(x2);
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(4.0));
  }
  {
    Tape tape;
    tape.watch(x);
    Tensor loss = add(sum(x), sum(x));
    tape.backward(loss);
    CHECK(tape.grad(x).isApproxToConstant(2.0));
  }
}

TEST_CASE("backward accumulates exactly k-fold on repeated subgraphs") {
  Tensor x = Tensor::from_values({4}, {1, 2, 3, 4}, true);
  Array single;
  {
    Tape tape;
    tape.watch(x);
    tape.backward(sum(mul(x, x)));
    single = tape.grad(x);
  }
  Tape tape;
  tape.watch(x);
  Tensor l = sum(mul(x, x));
  Tensor loss = add(add(l, sum(mul(x, x))), sum(mul(x, x)));
  tape.backward(loss);
  Array triple = tape.grad(x);
  for (Eigen::Index i = 0; i < triple.size(); ++i) CHECK(triple[i] == 3.0 * single[i]);
}

TEST_CASE("backward contract violations") {
  Tensor x = Tensor::from_values({2}, {1, 2}, true);
  {
    Tape tape;
    tape.watch(x);
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);  // not scalar
  }
  {
    Tape tape;
    Tensor loss = Tensor::scalar(1.0);
    CHECK_THROWS_AS(tape.backward(loss), ContractError);  // not on tape
  }
}

TEST_CASE("ops never mutate their inputs") {
  Rng rng(6);
  Tensor a = Tensor::uniform({2, 3, 4, 4}, rng, -1, 1, true);
  Tensor b = Tensor::uniform({2, 3, 4, 4}, rng, -1, 1, true);
  Array a0 = a.data(), b0 = b.data();
  Tape tape;
  tape.watch(a);
  tape.watch(b);
  Tensor k = Tensor::uniform({2, 3, 3, 3}, rng, -1, 1);
  Tensor r = conv2d(mul(a, b), k, Tensor::zeros({2}), 1, 1);
  Tensor loss = sum(add(r, r));
  tape.backward(loss);
  CHECK((a.data() - a0).abs().maxCoeff() == 0.0);
  CHECK((b.data() - b0).abs().maxCoeff() == 0.0);
}

TEST_CASE("finite differences validate every differentiable op over random shapes") {
  Rng rng(7);
  int shapes_checked = 0;
  double worst = 0;

  auto small = [&](std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng.below(hi - lo + 1));
  };

  for (int round = 0; round < 9; ++round) {
    // elementwise with and without broadcasting
    for (int i = 0; i < 2; ++i) {
      Shape sa{small(1, 3), small(1, 3), small(1, 4), small(1, 4)};
      Shape sb = sa;
      if (i == 1) {
        sb[1 + rng.below(3)] = 1;  // broadcast one trailing dim
      }
      Tensor a = Tensor::uniform(sa, rng, -1, 1, true);
      Tensor b = Tensor::uniform(sb, rng, -1, 1, true);
      worst = std::max(worst, grad_check({&a, &b}, [&] { return add(a, b); }));
      worst = std::max(worst, grad_check({&a, &b}, [&] { return sub(a, b); }));
      worst = std::max(worst, grad_check({&a, &b}, [&] { return mul(a, b); }));
      shapes_checked += 6;
    }
    {
      Shape s{small(1, 3), small(2, 5)};
      Tensor a = Tensor::uniform(s, rng, -1, 1, true);
      worst = std::max(worst, grad_check({&a}, [&] { return scale(a, -1.7); }));
      worst = std::max(worst, grad_check({&a}, [&] { return add_scalar(a, 0.3); }));
      worst = std::max(worst, grad_check({&a}, [&] { return logistic(a); }));
      worst = std::max(worst, grad_check({&a}, [&] { return sum(a); }));
      worst = std::max(worst, grad_check({&a}, [&] { return reshape(a, {a.size()}); }));
      shapes_checked += 5;

      // keep relu inputs away from the kink
      Tensor r = a.clone();
      for (Eigen::Index j = 0; j < r.size(); ++j) {
        if (std::abs(r.raw()[j]) < 1e-2) r.raw()[j] += 0.1;
      }
      r = Tensor::from_array(r.shape(), r.data(), true);
      worst = std::max(worst, grad_check({&r}, [&] { return relu(r); }));
      ++shapes_checked;
    }
    {
      const std::int64_t m = small(1, 4), k = small(1, 4), n = small(1, 4);
      Tensor a = Tensor::uniform({m, k}, rng, -1, 1, true);
      Tensor b = Tensor::uniform({k, n}, rng, -1, 1, true);
      worst = std::max(worst, grad_check({&a, &b}, [&] { return matmul(a, b); }));
      ++shapes_checked;
    }
    {
      const std::int64_t n = small(1, 2), cin = small(1, 3), cout = small(1, 3);
      const std::int64_t h = small(3, 5), w = small(3, 5);
      Tensor x = Tensor::uniform({n, cin, h, w}, rng, -1, 1, true);
      Tensor k = Tensor::uniform({cout, cin, 3, 3}, rng, -1, 1, true);
      Tensor b = Tensor::uniform({cout}, rng, -1, 1, true);
      worst = std::max(worst, grad_check({&x, &k, &b}, [&] { return conv2d(x, k, b, 1, 1); }));
      ++shapes_checked;
    }
    {
      const std::int64_t n = small(1, 2), c = small(1, 3);
      const std::int64_t h = small(1, 4), w = small(1, 4);
      Tensor x = Tensor::uniform({n, c, h, w}, rng, -1, 1, true);
      worst = std::max(worst, grad_check({&x}, [&] { return pool_spatial(x, PoolMode::kAvg); }));
      // widen max gaps per (n,c) group before the max checks
      for (std::int64_t p = 0; p < n * c; ++p) widen_gap(x.raw().data() + p * h * w, h * w, 1);
      worst = std::max(worst, grad_check({&x}, [&] { return pool_spatial(x, PoolMode::kMax); }));
      for (std::int64_t s = 0; s < n; ++s) {
        for (std::int64_t q = 0; q < h * w; ++q) {
          widen_gap(x.raw().data() + s * c * h * w + q, c, h * w);
        }
      }
      worst = std::max(worst, grad_check({&x}, [&] { return pool_channel(x); }));
      shapes_checked += 3;
    }
    {
      const std::int64_t n = small(1, 2), ca = small(1, 3), cb = small(1, 3);
      const std::int64_t h = small(1, 3), w = small(1, 3);
      Tensor a = Tensor::uniform({n, ca, h, w}, rng, -1, 1, true);
      Tensor b = Tensor::uniform({n, cb, h, w}, rng, -1, 1, true);
      worst = std::max(worst, grad_check({&a, &b}, [&] { return concat_channels(a, b); }));
      worst = std::max(worst, grad_check({&a}, [&] { return slice_channels(a, 0, ca); }));
      shapes_checked += 2;
    }
    {
      const std::int64_t t = small(2, 4), d = small(1, 4);
      Tensor x = Tensor::uniform({t, d}, rng, -1, 1, true);
      worst = std::max(worst, grad_check({&x}, [&] { return slice_leading(x, t - 1); }));
      Tensor p0 = Tensor::uniform({d}, rng, -1, 1, true);
      Tensor p1 = Tensor::uniform({d}, rng, -1, 1, true);
      worst = std::max(worst,
                       grad_check({&p0, &p1}, [&] { return stack_leading({p0, p1}); }));
      shapes_checked += 2;
    }
    {
      const std::int64_t n = small(1, 4), k = small(2, 5);
      Tensor logits = Tensor::uniform({n, k}, rng, -2, 2, true);
      std::vector<int> labels(n);
      for (auto& y : labels) y = static_cast<int>(rng.below(k));
      worst = std::max(worst, grad_check({&logits}, [&] {
        return softmax_cross_entropy(logits, labels);
      }));
      ++shapes_checked;
    }
  }
  CHECK(shapes_checked >= 100);
  CHECK(worst < 1e-4);
}

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), ContractError);
  CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1, 2, 3}), ContractError);
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(reshape(t, {4}), ContractError);
}

TEST_CASE("watch rejects tensors without requires_grad") {
  Tensor t = Tensor::zeros({2});
  Tape tape;
  CHECK_THROWS_AS(tape.watch(t), ContractError);
}

TEST_CASE("argmax ties break to lowest index") {
  Tensor logits = Tensor::from_values({2, 3}, {1, 1, 1, 0, 2, 2});
  auto r = argmax_rows(logits);
  CHECK(r[0] == 0);
  CHECK(r[1] == 1);
}
