#include <cmath>
#include <vector>

#include "doctest.h"
#include "retfuse/losses.hpp"
#include "testutil/gradcheck.hpp"

using namespace retfuse;

namespace {

// Independent NT-Xent oracle: direct enumeration of every exp term, no max
// subtraction, own cosine similarity.
double nt_xent_bruteforce(const Tensor& z, double tau) {
  const std::size_t rows = z.dim(0), d = z.dim(1);
  auto cosine = [&](std::size_t a, std::size_t b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      dot += z[a * d + k] * z[b * d + k];
      na += z[a * d + k] * z[a * d + k];
      nb += z[b * d + k] * z[b * d + k];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t j = i ^ 1;
    double denom = 0.0;
    for (std::size_t k = 0; k < rows; ++k)
      if (k != i) denom += std::exp(cosine(i, k) / tau);
    total += -std::log(std::exp(cosine(i, j) / tau) / denom);
  }
  return total / static_cast<double>(rows);
}

}  // namespace

TEST_CASE("bce analytic values") {
  Tensor y_hat({1}), y({1});
  y_hat[0] = 0.5;
  y[0] = 1.0;
  const auto r = bce_loss(y_hat, y);
  CHECK(std::fabs(r.loss - 0.6931471805599453) < 1e-12);

  // Perfect prediction only pays the clamp epsilon.
  Tensor p({2}), t({2});
  p[0] = 0.0;
  p[1] = 1.0;
  t[0] = 0.0;
  t[1] = 1.0;
  CHECK(bce_loss(p, t).loss <= 1.1e-12);
}

TEST_CASE("bce rejects bad input") {
  CHECK_THROWS_AS(bce_loss(Tensor({0}), Tensor({0})), ConfigError);
  Tensor y_hat({1}), y({1});
  y_hat[0] = 0.4;
  y[0] = 0.5;
  CHECK_THROWS_AS(bce_loss(y_hat, y), DataError);
}

TEST_CASE("bce gradient matches finite differences") {
  Rng rng(21);
  Tensor y_hat({7}), y({7});
  for (int i = 0; i < 7; ++i) {
    y_hat[i] = 0.05 + 0.9 * rng.uniform();
    y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  const auto r = bce_loss(y_hat, y);
  const double h = 1e-7;
  for (int i = 0; i < 7; ++i) {
    const double saved = y_hat[i];
    y_hat[i] = saved + h;
    const double up = bce_loss(y_hat, y).loss;
    y_hat[i] = saved - h;
    const double down = bce_loss(y_hat, y).loss;
    y_hat[i] = saved;
    CHECK(testutil::rel_err(r.grad[i], (up - down) / (2 * h)) < 1e-8);
  }
}

TEST_CASE("bce convexity probe along random segments") {
  Rng rng(22);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor a({5}), b({5}), mid({5}), y({5});
    for (int i = 0; i < 5; ++i) {
      a[i] = 0.02 + 0.96 * rng.uniform();
      b[i] = 0.02 + 0.96 * rng.uniform();
      mid[i] = 0.5 * (a[i] + b[i]);
      y[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    }
    CHECK(bce_loss(mid, y).loss <=
          0.5 * (bce_loss(a, y).loss + bce_loss(b, y).loss) + 1e-12);
  }
}

TEST_CASE("nt_xent with K=1 is exactly zero") {
  Rng rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor z = testutil::random_tensor({2, 4}, rng);
    TemperatureState temp;
    temp.tau = 0.1 + rng.uniform();
    CHECK(nt_xent_loss(z, temp).loss == 0.0);
  }
}

TEST_CASE("nt_xent equals brute-force enumeration for K in 1..4") {
  Rng rng(32);
  for (std::size_t K : {1u, 2u, 3u, 4u}) {
    for (int rep = 0; rep < 10; ++rep) {
      Tensor z = testutil::random_tensor({2 * K, 6}, rng);
      TemperatureState temp;
      temp.tau = 0.5;
      CHECK(std::fabs(nt_xent_loss(z, temp).loss - nt_xent_bruteforce(z, 0.5)) < 1e-12);
    }
  }
}

TEST_CASE("nt_xent hand-picked K=2 2d case agrees with oracle") {
  Tensor z({4, 2});
  const double vals[8] = {1.0, 0.2, 0.9, 0.3, -0.5, 1.0, -0.4, 0.8};
  for (int i = 0; i < 8; ++i) z[i] = vals[i];
  TemperatureState temp;
  temp.tau = 0.5;
  CHECK(std::fabs(nt_xent_loss(z, temp).loss - nt_xent_bruteforce(z, 0.5)) < 1e-12);
}

TEST_CASE("nt_xent gradients match finite differences") {
  Rng rng(33);
  Tensor z = testutil::random_tensor({6, 5}, rng);  // K=3, d=5
  TemperatureState temp;
  temp.tau = 0.37;
  const auto r = nt_xent_loss(z, temp);
  const double h = 1e-6;

  double max_err = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double saved = z[i];
    z[i] = saved + h;
    const double up = nt_xent_loss(z, temp).loss;
    z[i] = saved - h;
    const double down = nt_xent_loss(z, temp).loss;
    z[i] = saved;
    max_err = std::max(max_err, testutil::rel_err(r.grad_z[i], (up - down) / (2 * h)));
  }
  CHECK(max_err < 1e-6);

  TemperatureState up_t = temp, down_t = temp;
  up_t.tau = temp.tau + h;
  down_t.tau = temp.tau - h;
  const double fd_tau =
      (nt_xent_loss(z, up_t).loss - nt_xent_loss(z, down_t).loss) / (2 * h);
  CHECK(testutil::rel_err(r.grad_tau, fd_tau) < 1e-6);

  TemperatureState frozen = temp;
  frozen.frozen = true;
  CHECK(nt_xent_loss(z, frozen).grad_tau == 0.0);
}

TEST_CASE("nt_xent invariances") {
  Rng rng(34);
  Tensor z = testutil::random_tensor({8, 7}, rng);
  TemperatureState temp;
  temp.tau = 0.5;
  const double base = nt_xent_loss(z, temp).loss;

  // Embedding scale invariance (cosine similarity).
  Tensor scaled = z;
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= 37.5;
  CHECK(std::fabs(nt_xent_loss(scaled, temp).loss - base) < 1e-12);

  // Permuting sample pairs (keeping view pairs together) leaves the loss as is.
  const std::size_t perm[4] = {2, 0, 3, 1};
  Tensor permuted({8, 7});
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t c = 0; c < 7; ++c)
        permuted[(2 * perm[m] + v) * 7 + c] = z[(2 * m + v) * 7 + c];
  CHECK(std::fabs(nt_xent_loss(permuted, temp).loss - base) < 1e-12);
}

TEST_CASE("nt_xent rejects zero-norm rows") {
  Tensor z({2, 3});
  z[0] = 1.0;  // second row stays all-zero
  TemperatureState temp;
  CHECK_THROWS_AS(nt_xent_loss(z, temp), NumericError);
}

TEST_CASE("temperature update clamps and freezes") {
  TemperatureState t;
  t.tau = 0.5;

  auto s1 = apply_temperature_update(t, 0.3);
  CHECK(s1.tau == 0.3);
  CHECK(!s1.frozen);

  s1.tau = 0.12;
  auto s2 = apply_temperature_update(s1, 0.09);
  CHECK(s2.tau == 0.1);
  CHECK(s2.frozen);

  auto s3 = apply_temperature_update(s2, 0.4);
  CHECK(s3.tau == 0.1);
  CHECK(s3.frozen);

  CHECK_THROWS_AS(apply_temperature_update(t, std::nan("")), NumericError);
}

TEST_CASE("per-step clamp mode keeps learning after touching the floor") {
  TemperatureState t;
  t.per_step_clamp = true;
  auto s1 = apply_temperature_update(t, 0.05);
  CHECK(s1.tau == 0.1);
  CHECK(!s1.frozen);
  auto s2 = apply_temperature_update(s1, 0.2);
  CHECK(s2.tau == 0.2);
}
