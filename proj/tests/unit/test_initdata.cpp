#include <catch_amalgamated.hpp>

#include <cmath>

#include "casep/initdata.hpp"
#include "casep/stats.hpp"

using namespace casep;
using Catch::Approx;

namespace {

Window span_of(double eps, double x) {
  const auto k = static_cast<Site>(std::ceil(x / eps));
  return {-k, k};
}

double sup_error(const SmoothProfile& f, double eps, double half) {
  auto h = approx_viable(f, eps, span_of(eps, half + 1));
  double worst = 0;
  const auto k = static_cast<Site>(std::floor(half / eps));
  for (Site s = -k; s <= k; ++s) {
    const double x = static_cast<double>(s) * eps;
    worst = std::max(worst, std::fabs(rescaled_value(h, eps, x) - f(x)));
  }
  return worst;
}

// f = a tanh((x - c) / w) + b sin_damped, g = f + a2 tanh((x - c2) / w2), a2 >= 0.
std::pair<SmoothProfile, SmoothProfile> random_pair(Rng& rng) {
  const double a = 4 * rng.uniform() - 2, c = 2 * rng.uniform() - 1, w = 0.3 + rng.uniform();
  const double b = 2 * rng.uniform() - 1, om = 1 + 2 * rng.uniform();
  const double a2 = 3 * rng.uniform(), c2 = 2 * rng.uniform() - 1, w2 = 0.3 + rng.uniform();
  auto base = [=](double x) {
    return a * std::tanh((x - c) / w) + b * std::sin(om * x) * std::exp(-x * x / 2);
  };
  auto dbase = [=](double x) {
    const double ch = std::cosh((x - c) / w);
    return a / (w * ch * ch) + b * std::exp(-x * x / 2) * (om * std::cos(om * x) - x * std::sin(om * x));
  };
  auto extra = [=](double x) { return a2 * std::tanh((x - c2) / w2); };
  auto dextra = [=](double x) {
    const double ch = std::cosh((x - c2) / w2);
    return a2 / (w2 * ch * ch);
  };
  C1Grid grid;
  grid.extent = 64;
  auto f = make_profile("f", base, dbase, 0.5, grid);
  auto g = make_profile(
      "g", [=](double x) { return base(x) + extra(x); },
      [=](double x) { return dbase(x) + dextra(x); }, 0.5, grid);
  return {f, g};
}

}  // namespace

TEST_CASE("A^eps of the zero profile oscillates within one lattice unit") {
  for (double eps : {0.25, 0.04, 0.01, 1.0 / 1024}) {
    auto h = approx_viable(zero_profile(), eps, span_of(eps, 6));
    CHECK(check_viable(h).is_viable);
    for (Site x = h.window.lo; x <= h.window.hi; ++x)
      REQUIRE(std::sqrt(eps) * std::fabs(static_cast<double>(h.at(x))) <= std::sqrt(eps) + 1e-12);
  }
}

TEST_CASE("A^eps parameters") {
  auto f = tanh_profile();
  auto p = approx_params(f, 1.0 / 4096, {-100, 100});
  CHECK(p.block_steps == 512);
  CHECK(p.block_steps % 2 == 0);
  CHECK(p.cutoff >= 1.0);
  CHECK(p.cutoff == std::floor(p.cutoff));
  SmoothProfile raw{"raw", [](double) { return 0.0; }, [](double) { return 0.0; }, 0.5};
  CHECK_THROWS_AS(approx_params(raw, 0.04, {-10, 10}), NotInC1Delta);
  CHECK_THROWS_AS(approx_params(f, 0.0, {-10, 10}), OutOfRange);
  CHECK_THROWS_AS(approx_viable(f, 0.04, {1, 10}), OutOfRange);
}

TEST_CASE("A^eps output is viable with h(0) even") {
  for (double eps : {0.5, 0.04, 1.0 / 256}) {
    for (const auto& f : {tanh_profile(3.0, 0.5), sin_damped_profile(2.0), sin_profile()}) {
      auto h = approx_viable(f, eps, span_of(eps, 5));
      CHECK(check_viable(h).is_viable);
      CHECK(h.at(0) % 2 == 0);
    }
  }
}

TEST_CASE("A^eps sup error decays in eps") {
  for (const auto& f : {tanh_profile(), sin_damped_profile()}) {
    std::vector<double> le, lerr;
    for (int k = 4; k <= 10; ++k) {
      const double eps = std::ldexp(1.0, -k);
      le.push_back(std::log(eps));
      lerr.push_back(std::log(sup_error(f, eps, 2.0)));
    }
    const auto fit = linear_fit(le, lerr);
    INFO(f.name << " exponent " << fit.slope);
    CHECK(fit.slope >= 0.2);
  }
}

TEST_CASE("A^eps preserves nondecreasing differences exactly") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    auto [f, g] = random_pair(rng);
    const double eps = std::ldexp(1.0, -static_cast<int>(2 + rng.below(9)));
    auto [af, ag] = approx_viable_pair(f, g, eps, span_of(eps, 6));
    REQUIRE_FALSE(first_difference_decrease(af, ag));
    REQUIRE(check_viable(af).is_viable);
    REQUIRE(check_viable(ag).is_viable);
  }
}

TEST_CASE("A^eps weighted Hoelder bound with exponent 1/4 is uniform in eps") {
  const double delta = 0.5;
  for (const auto& f : {tanh_profile(), sin_damped_profile()}) {
    double worst = 0;
    for (int k = 2; k <= 12; k += 2) {
      const double eps = std::ldexp(1.0, -k);
      auto h = approx_viable(f, eps, span_of(eps, 5));
      const auto n = static_cast<Site>(std::floor(4 / eps));
      const auto stride = std::max<Site>(1, n / 256);
      for (Site a = -n; a <= n; a += stride) {
        for (Site m = 1; m * eps <= 1.0 && a + m <= n; m *= 2) {
          const double x = static_cast<double>(a) * eps, y = static_cast<double>(a + m) * eps;
          const double d = std::fabs(rescaled_value(h, eps, x) - rescaled_value(h, eps, y));
          worst = std::max(worst, d / (std::pow(1 + std::fabs(x), delta) * std::pow(y - x, 0.25)));
        }
      }
    }
    INFO(f.name << " worst ratio " << worst);
    CHECK(worst <= 4.0);
  }
}

TEST_CASE("bernoulli_height examples") {
  auto up = bernoulli_height(1.0, {1, 20}, 3);
  auto down = bernoulli_height(0.0, {1, 20}, 3);
  for (Site x = 0; x <= 20; ++x) {
    CHECK(up.at(x) == x);
    CHECK(down.at(x) == -x);
  }
  CHECK_THROWS_AS(bernoulli_height(1.5, {1, 2}, 1), OutOfRange);
}

TEST_CASE("bernoulli_height has random-walk variance") {
  for (Site n : {4, 16, 64}) {
    RunningStats sq;
    for (std::uint64_t i = 0; i < 4000; ++i) {
      auto h = bernoulli_height(0.5, {1, 64}, derive_seed(5, i));
      sq.push(static_cast<double>(h.at(n) * h.at(n)));
    }
    INFO("n = " << n);
    CHECK(within_band(sq.mean_estimate(), static_cast<double>(n), 4));
  }
}

TEST_CASE("ordered bernoulli pair has nondecreasing difference") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto [lo, hi] = ordered_bernoulli_pair(0.3, 0.7, {-30, 30}, s);
    REQUIRE_FALSE(first_difference_decrease(lo, hi));
    REQUIRE(lo.at(0) == 0);
    REQUIRE(hi.at(0) == 0);
  }
  CHECK_THROWS_AS(ordered_bernoulli_pair(0.7, 0.3, {0, 3}, 1), OutOfRange);
}

TEST_CASE("product and flat data") {
  auto p = product_height(0.5, 3, {-20, 20}, 9);
  CHECK(check_viable(p).is_viable);
  CHECK(p.spin_max == 3);
  auto f = flat_height({-10, 10});
  const auto [mn, mx] = std::minmax_element(f.values.begin(), f.values.end());
  CHECK(*mx - *mn == 1);
  CHECK(f.at(0) == 0);
}

TEST_CASE("spin lift keeps viability") {
  auto h = approx_viable(tanh_profile(), 0.04, {-50, 50});
  for (int J = 1; J <= 4; ++J) {
    auto l = lift_to_spin(h, J);
    CHECK(l.spin_max == J);
    CHECK(check_viable(l).is_viable);
    CHECK(l.at(10) == spin_lift_factor(J) * h.at(10));
  }
  CHECK_THROWS_AS(lift_to_spin(lift_to_spin(h, 2), 2), OutOfRange);
}

TEST_CASE("dominating profile examples") {
  auto f = tanh_profile();
  auto r = dominating_profile(f, f);
  for (double x : {-5.0, -1.0, 0.0, 0.3, 2.0, 7.0}) CHECK(r(x) == Approx(f(x) - f(0)).margin(1e-9));

  auto g = tanh_profile(2.0);
  auto r2 = dominating_profile(f, g);
  for (double x : {-3.0, -0.5, 0.5, 3.0}) CHECK(r2(x) == Approx(g(x) - g(0)).margin(1e-9));

  auto s = sin_profile(), ms = sin_profile(-1.0);
  auto r3 = dominating_profile(s, ms);
  // Oracle: midpoint rule for int_0^x |cos u| du.
  for (double x : {-4.0, -1.0, 0.7, 2.5, 6.0}) {
    const int n = 200000;
    double acc = 0;
    for (int i = 0; i < n; ++i) acc += std::fabs(std::cos(x * (i + 0.5) / n));
    CHECK(r3(x) == Approx(acc * x / n).margin(1e-6));
    CHECK(r3.derivative(x) == Approx(std::fabs(std::cos(x))));
  }
  for (double x = -6; x <= 6; x += 0.37) {
    CHECK(r3(x + 0.1) - s(x + 0.1) >= r3(x) - s(x) - 1e-9);
    CHECK(r3(x + 0.1) - ms(x + 0.1) >= r3(x) - ms(x) - 1e-9);
  }
  SmoothProfile raw{"raw", [](double) { return 0.0; }, [](double) { return 0.0; }, 0.5};
  CHECK_THROWS_AS(dominating_profile(raw, f), NotInC1Delta);
}

TEST_CASE("envelope pair examples") {
  auto z = zero_profile();
  auto [up, lo] = envelope_pair(z, 10);
  for (double x = -10; x <= 10; x += 0.01) {
    REQUIRE(up(x) >= 0);
    REQUIRE(lo(x) <= 0);
    REQUIRE(up(x) - lo(x) <= 0.1 + 1e-12);
  }
  auto t = tanh_profile();
  auto [tu, tl] = envelope_pair(t, 4);
  for (double x = -40; x <= 40; x += 0.05) {
    REQUIRE(tu(x) - t(x) >= 0);
    REQUIRE(t(x) - tl(x) >= 0);
  }
  const double gamma = 0.5 * (0.5 + 0.75);
  for (double x : {1e3, 1e4, 1e5}) {
    CHECK(up(x) > 10);
    CHECK(up(x) / std::pow(x, gamma) == Approx(1.0).epsilon(0.1));
    CHECK(lo(-x) / std::pow(x, gamma) == Approx(-1.0).epsilon(0.1));
  }
  CHECK_THROWS_AS(envelope_pair(z, 0), OutOfRange);
}
