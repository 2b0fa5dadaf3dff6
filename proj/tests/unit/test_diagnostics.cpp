#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "casep/diagnostics.hpp"
#include "casep/initdata.hpp"
#include "casep/profile.hpp"

using namespace casep;
using Catch::Approx;

namespace {

GridFunction sampled(double lo, double hi, double dx, const std::function<double(double)>& f) {
  GridFunction g;
  g.x0 = lo;
  g.dx = dx;
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / dx));
  for (std::size_t i = 0; i <= n; ++i) g.v.push_back(f(lo + static_cast<double>(i) * dx));
  return g;
}

GridFunction random_grid(Rng& rng, std::size_t n, double dx) {
  GridFunction g;
  g.x0 = -static_cast<double>(n / 2) * dx;
  g.dx = dx;
  for (std::size_t i = 0; i < n; ++i) g.v.push_back(2 * rng.uniform() - 1);
  return g;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::vector<GridFunction> bernoulli_fields(double eps, double half, std::size_t n, std::uint64_t master) {
  const auto k = static_cast<Site>(std::llround(half / eps));
  std::vector<GridFunction> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(rescaled_grid(bernoulli_height(0.5, {-k + 1, k}, derive_seed(master, i)), eps));
  return out;
}

}  // namespace

TEST_CASE("weighted Hoelder norm examples") {
  NormParams p(0.25, 0.5, 0.0);
  CHECK(weighted_holder_norm(sampled(-8, 8, 1.0 / 64, [](double) { return 3.0; }), p) == Approx(3.0));
  CHECK(std::isinf(weighted_holder_norm(sampled(-64, 64, 1.0 / 16, [](double x) { return x; }), p)));
  CHECK(weighted_holder_norm(GridFunction{}, p) == 0.0);
  CHECK_THROWS_AS(NormParams(0.5, 0.5, 2.0), OutOfRange);
  CHECK_THROWS_AS(NormParams(0.0, 0.5, 0.0), OutOfRange);
  CHECK(NormParams(0.5, 0.5, 0.0).p == Approx(3.0));
}

TEST_CASE("weighted Hoelder norm is a seminorm on grid functions") {
  Rng rng(4);
  NormParams p(0.3, 0.4, 0.0, 6);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = random_grid(rng, 257, 1.0 / 32), g = random_grid(rng, 257, 1.0 / 32);
    const double c = 4 * rng.uniform() - 2;
    GridFunction cf = f, sum = f;
    for (std::size_t i = 0; i < f.size(); ++i) {
      cf.v[i] *= c;
      sum.v[i] += g.v[i];
    }
    const double nf = weighted_holder_norm(f, p), ng = weighted_holder_norm(g, p);
    CHECK(weighted_holder_norm(cf, p) == Approx(std::fabs(c) * nf).epsilon(1e-12));
    CHECK(weighted_holder_norm(sum, p) <= nf + ng + 1e-12);
  }
}

TEST_CASE("weighted Hoelder norm is nondecreasing in the finest level") {
  Rng rng(5);
  auto f = random_grid(rng, 1025, 1.0 / 256);
  double prev = 0;
  for (int r = 0; r <= 10; ++r) {
    NormParams p(0.25, 0.5, 0.0, r);
    const double n = weighted_holder_norm(f, p);
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("random walk Hoelder oracle") {
  std::vector<double> q25_coarse, q25_fine, q50_coarse, q50_fine;
  for (std::uint64_t s = 0; s < 25; ++s) {
    for (int k : {6, 14}) {
      const double eps = std::ldexp(1.0, -k);
      auto g = rescaled_grid(bernoulli_height(0.5, {-(Site{1} << (k + 1)) + 1, Site{1} << (k + 1)},
                                              derive_seed(30, s)),
                             eps);
      const double a = weighted_holder_norm(g, NormParams(0.25, 0.5, 0.0, k));
      const double b = weighted_holder_norm(g, NormParams(0.5, 0.5, 0.0, k));
      (k == 6 ? q25_coarse : q25_fine).push_back(a);
      (k == 6 ? q50_coarse : q50_fine).push_back(b);
    }
  }
  INFO("alpha 1/4: " << median(q25_coarse) << " -> " << median(q25_fine));
  INFO("alpha 1/2: " << median(q50_coarse) << " -> " << median(q50_fine));
  CHECK(median(q25_fine) <= 1.25 * median(q25_coarse));
  CHECK(median(q50_fine) >= 1.2 * median(q50_coarse));
}

TEST_CASE("C^1_delta norm examples") {
  auto c = make_profile("c", [](double) { return -2.5; }, [](double) { return 0.0; }, 0.5);
  CHECK(c.c1_norm == Approx(2.5));

  auto t = tanh_profile();
  double oracle = 0;
  for (double x = -50; x <= 50; x += 1e-4) {
    const double ch = std::cosh(x);
    oracle = std::max(oracle, (1 / (ch * ch) + std::fabs(std::tanh(x))) / std::sqrt(1 + std::fabs(x)));
  }
  CHECK(t.c1_norm == Approx(oracle).epsilon(5e-3));

  SmoothProfile sq{"square", [](double x) { return x * x; }, [](double x) { return 2 * x; }, 0.9};
  CHECK(std::isinf(c1_delta_norm(sq)));
  CHECK_THROWS_AS(make_profile("square", sq.f, sq.df, 0.9), NotInC1Delta);
  SmoothProfile bad{"bad", [](double) { return 0.0; }, [](double) { return std::nan(""); }, 0.5};
  CHECK_THROWS_AS(c1_delta_norm(bad), QuadratureFailure);
}

TEST_CASE("dyadic quadratic variation examples") {
  auto id = sampled(0, 1, 1.0 / 1024, [](double x) { return x; });
  CHECK(dyadic_qvar(id, 3) == Approx(0.125));
  CHECK(dyadic_qvar(sampled(0, 1, 1.0 / 64, [](double) { return 7.0; }), 5) == 0.0);
  for (int N = 0; N <= 10; ++N) CHECK(dyadic_qvar(id, N) == Approx(std::ldexp(1.0, -N)));
  auto coarse = sampled(0, 1, 1.0 / 8, [](double x) { return x; });
  CHECK_THROWS_AS(dyadic_qvar(coarse, 5), ResolutionMismatch);
  CHECK(dyadic_qvar(coarse, 5, 0, 1, DyadicSampling::lattice_step) == Approx(8 * 0.125 * 0.125));
  CHECK_THROWS_AS(dyadic_qvar(id, 3, -1, 1), GridUncovered);
  auto wide = sampled(-2, 2, 1.0 / 256, [](double x) { return x; });
  CHECK(dyadic_qvar(wide, 4, -1.5, 1.5) == Approx(3 * 16 * std::ldexp(1.0, -8)));
}

TEST_CASE("p-variation examples and properties") {
  const std::vector<double> mono{0, 0.5, 0.7, 2, 3.5};
  CHECK(p_variation(mono, 1.0) == Approx(3.5));
  CHECK(p_variation(std::vector<double>{1, 1, 1}, 2.0) == 0.0);
  CHECK(p_variation(std::vector<double>{0, 1, 0}, 2.0) == Approx(2.0));
  CHECK(p_variation(std::vector<double>{0, 1, 2}, 2.0) == Approx(4.0));
  CHECK_THROWS_AS(p_variation(std::vector<double>(kPVariationExactLimit + 1, 0.0), 2.0,
                              PVariationMode::exact),
                  GridTooLarge);
  CHECK_THROWS_AS(p_variation(mono, 0.5), OutOfRange);

  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> y(2 + rng.below(200));
    for (auto& v : y) v = rng.uniform();
    const double p = 1 + 2 * rng.uniform();
    const double exact = p_variation(y, p, PVariationMode::exact);
    CHECK(exact >= p_variation(y, p, PVariationMode::dyadic) - 1e-12);
    // Every partition is dominated by the full-refinement bound for p = 1.
    double tv = 0;
    for (std::size_t i = 1; i < y.size(); ++i) tv += std::fabs(y[i] - y[i - 1]);
    CHECK(p_variation(y, 1.0) == Approx(tv));
  }
}

TEST_CASE("moment bound check") {
  NormParams p(0.5, 0.5, 3.0, 6);
  std::vector<GridFunction> det(120, sampled(-4, 4, 1.0 / 64, [](double) { return 0.5; }));
  auto rep = moment_bound_check(det, p, 1.0);
  CHECK(rep.quantities[0].estimate == Approx(0.5));
  CHECK(rep.quantities[1].estimate == 0.0);
  CHECK(rep.pass());
  CHECK_FALSE(moment_bound_check(det, p, 0.4).pass());
  std::vector<GridFunction> few(det.begin(), det.begin() + 50);
  CHECK_THROWS_AS(moment_bound_check(few, p, 1.0), EnsembleTooSmall);

  auto fields = bernoulli_fields(1.0 / 64, 8, 300, 9);
  auto ok = moment_bound_check(fields, p, 1.5, 4);
  INFO("alpha = delta = 1/2: " << ok.quantities[0].estimate << ", " << ok.quantities[1].estimate);
  CHECK(ok.pass());

  NormParams narrow(0.5, 0.1, 3.0, 6);
  auto bad = moment_bound_check(fields, narrow, 1.5, 4);
  CHECK_FALSE(bad.pass());
  auto wider = moment_bound_check(bernoulli_fields(1.0 / 64, 32, 300, 9), narrow, 1.5, 16);
  CHECK(wider.quantities[0].estimate > bad.quantities[0].estimate);
}

TEST_CASE("ordering checks") {
  auto h = bernoulli_height(0.5, {-30, 30}, 1);
  std::vector<HeightFunction> same{h, h};
  auto tr = evolve_coupled(same, asep_model(0.04), 10, {0, 5, 10}, 3);
  for (auto k : {OrderingKind::M, OrderingKind::A, OrderingKind::monotone_difference})
    CHECK(ordering_check(tr, k).pass());

  for (std::uint64_t s = 0; s < 20; ++s) {
    auto [lo, hi] = ordered_bernoulli_pair(0.3, 0.6, {-30, 30}, derive_seed(2, s, 1));
    std::vector<HeightFunction> init{lo, hi};
    auto t2 = evolve_coupled(init, asep_model(0.04), 20, {0, 5, 10, 15, 20}, derive_seed(2, s));
    REQUIRE(ordering_check(t2, OrderingKind::A).pass());
    REQUIRE(ordering_check(t2, OrderingKind::monotone_difference).pass());
  }

  int detected = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto [lo, hi] = ordered_bernoulli_pair(0.3, 0.6, {-30, 30}, derive_seed(3, s, 1));
    std::vector<double> times{0, 5, 10, 15, 20};
    auto a = evolve_coupled(std::span(&lo, 1), asep_model(0.04), 20, times, derive_seed(3, s, 2));
    auto b = evolve_coupled(std::span(&hi, 1), asep_model(0.04), 20, times, derive_seed(3, s, 3));
    auto rep = ordering_check(combine_replicas({a, b}), OrderingKind::A);
    if (!rep.pass()) {
      ++detected;
      REQUIRE(rep.violation);
      CHECK(rep.violation->time > 0);
    }
  }
  CHECK(detected >= 18);

  auto [lo, hi] = ordered_bernoulli_pair(0.3, 0.6, {-5, 5}, 1);
  std::vector<HeightFunction> reversed{hi, lo};
  auto t3 = evolve_coupled(reversed, asep_model(0.04), 0, {0}, 1);
  CHECK_THROWS_AS(ordering_check(t3, OrderingKind::A), PreconditionNotMet);
  auto t4 = evolve_coupled(std::span(&h, 1), asep_model(0.04), 0, {0}, 1);
  CHECK_THROWS_AS(ordering_check(t4, OrderingKind::M), PreconditionNotMet);
}

TEST_CASE("report serialization") {
  EstimatorReport r;
  r.name = "demo";
  Quantity q{"ratio", 0.25, 0.01, 0.5, "<=", true};
  q.x = 1.5;
  q.n = 10;
  r.add(q);
  auto j = verdict_json(r);
  CHECK(j["check"] == "demo");
  CHECK(j["pass"] == true);
  CHECK(j["checks"][0]["check"] == "demo.ratio");
  CHECK(j["checks"][0]["threshold"] == 0.5);
  CHECK(j["checks"][0]["stderr"] == 0.01);
  std::ostringstream os;
  write_report_csv(os, {r});
  CHECK(os.str() == "quantity,x,y,t,estimate,stderr,n\ndemo.ratio,1.5,,,0.25,0.01,10\n");
  r.violation = Violation{1.0, 3, 0, 1};
  CHECK_FALSE(r.pass());
  CHECK(verdict_json(r)["violation"]["site"] == 3);
}
