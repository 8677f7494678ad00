#include <doctest.h>

#include <cmath>
#include <numbers>

#include "segauc/sampling.hpp"

using namespace segauc;

TEST_CASE("gumbel transform") {
  CHECK(gumbel_from_uniform(std::exp(-1.0)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::isfinite(gumbel_from_uniform(0.0)));
  CHECK(std::isfinite(gumbel_from_uniform(1.0)));
}

TEST_CASE("gumbel moments over 10^6 draws") {
  RngStream rng(11, 0, 0);
  const int N = 1'000'000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < N; ++i) {
    const double e = gumbel_draw(rng);
    sum += e;
    sumsq += e * e;
  }
  const double mean = sum / N;
  const double var = sumsq / N - mean * mean;
  const double pi2_6 = std::numbers::pi * std::numbers::pi / 6.0;
  CHECK(std::abs(mean - std::numbers::egamma) <= 3.0 * std::sqrt(pi2_6 / N));
  // Excess kurtosis of Gumbel(0,1) is 12/5.
  CHECK(std::abs(var - pi2_6) <= 3.0 * pi2_6 * std::sqrt((2.0 + 2.4) / N));
}

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(5, 2, 1), b(5, 2, 1), c(5, 2, 2), d(5, 3, 1);
  const auto na = draw_noise(a, 8);
  CHECK(na == draw_noise(b, 8));
  CHECK_FALSE(na == draw_noise(c, 8));
  CHECK_FALSE(na == draw_noise(d, 8));
  RngStream u(1, 0, 0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform_open();
    CHECK((x > 0.0 && x < 1.0));
  }
}

TEST_CASE("perturbed scores") {
  CHECK(perturbed_score(1.0, 1.0, 0.0) == 1.0);
  CHECK(perturbed_score(0.87, 3.0, 0.0) == doctest::Approx(2.61));
  CHECK(perturbed_score(0.0, 5.0, 10.0) == 0.0);
  CHECK(std::isinf(log_score(0.0, 5.0, 10.0)));
  CHECK(log_score(0.87, 3.0, 0.4) ==
        doctest::Approx(std::log(perturbed_score(0.87, 3.0, 0.4))));
}

TEST_CASE("log and linear comparisons agree") {
  RngStream rng(3, 0, 0);
  for (int i = 0; i < 10000; ++i) {
    const double q1 = rng.uniform_open(), q2 = rng.uniform_open();
    const double b1 = 3 * rng.uniform_open(), b2 = 3 * rng.uniform_open();
    const double e1 = gumbel_draw(rng), e2 = gumbel_draw(rng);
    CHECK((perturbed_score(q1, b1, e1) > perturbed_score(q2, b2, e2)) ==
          (log_score(q1, b1, e1) > log_score(q2, b2, e2)));
  }
}
