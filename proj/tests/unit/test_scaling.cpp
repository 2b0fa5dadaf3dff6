#include <catch_amalgamated.hpp>

#include <cmath>

#include "casep/initdata.hpp"
#include "casep/scaling.hpp"

using namespace casep;
using Catch::Approx;

namespace {

// Trajectory holding a fixed (possibly non-viable) height at the given times.
Trajectory frozen_trajectory(const std::vector<Height>& values, Site lo, std::vector<double> times) {
  HeightFunction h;
  h.window = {lo, lo + static_cast<Site>(values.size()) - 1};
  h.values = values;
  CoupledState st;
  st.replicas.push_back(Configuration{});
  st.heights.push_back(h);
  Trajectory tr;
  tr.snapshot_times = times;
  for (double t : times) {
    st.time = t;
    tr.snapshots.push_back(st);
  }
  tr.initial_current = {0};
  return tr;
}

std::vector<double> grid(double dt, double horizon) {
  std::vector<double> out;
  const auto n = static_cast<int>(std::llround(horizon / dt));
  for (int j = 0; j <= n; ++j) out.push_back(j * dt);
  return out;
}

std::vector<MartingaleResidual> residuals(const Trajectory& tr, const ScalingParams& p) {
  std::vector<MartingaleResidual> out;
  for (std::size_t r = 0; r < tr.snapshots.front().size(); ++r)
    out.push_back(martingale_residual(hopf_cole(rescale_field(tr, r, p))));
  return out;
}

}  // namespace

TEST_CASE("scaling constants") {
  ScalingParams p;
  p.epsilon = 0.01;
  CHECK(p.a() == Approx(0.1));
  CHECK(p.b() == Approx(50 + 1.0 / 24));
  CHECK(p.c() == Approx(50 - 1.0 / 24));
  CHECK(p.s() == Approx(0.1));
  p.epsilon = 0.0;
  CHECK_THROWS_AS(p.validate(), OutOfRange);
}

TEST_CASE("rescale_field examples") {
  ScalingParams p;
  p.epsilon = 0.01;
  auto tr = frozen_trajectory(std::vector<Height>(21, 0), -10, {0.0, 1e4});
  auto f = rescale_field(tr, 0, p, {0.0, 1.0}, {-0.05, 0.0, 0.1});
  CHECK(f.at(1, 1) == Approx(50.0416667).margin(1e-6));
  CHECK(f.at(0, 0) == 0.0);
  p.drift_sign = DriftSign::minus;
  CHECK(rescale_field(tr, 0, p, {1.0}, {0.0}).values[0] == Approx(-50.0416667).margin(1e-6));

  auto ramp = frozen_trajectory({-2, -1, 0, 1, 2}, -2, {0.0});
  p.drift_sign = DriftSign::plus;
  auto g = rescale_field(ramp, 0, p, {0.0}, {-0.02, -0.015, 0.0, 0.02});
  CHECK(g.values[0] == Approx(-0.2));
  CHECK(g.values[1] == Approx(-0.15));
  CHECK(g.values[2] == 0.0);
  CHECK(g.values[3] == Approx(0.2));
  CHECK_THROWS_AS(rescale_field(ramp, 0, p, {0.0}, {0.05}), GridUncovered);
  CHECK_THROWS_AS(rescale_field(ramp, 0, p, {0.5}, {0.0}), GridUncovered);
}

TEST_CASE("hopf_cole examples") {
  ScalingParams p;
  p.epsilon = 0.04;
  auto zero = hopf_cole(rescale_field(frozen_trajectory(std::vector<Height>(9, 0), -4, {0.0}), 0, p));
  for (double z : zero.values) CHECK(z == 1.0);

  auto h = bernoulli_height(0.5, {-30, 30}, 5);
  auto tr = evolve_coupled(std::span(&h, 1), asep_model(0.04), 20.0, {0, 10, 20}, 11);
  for (auto conv : {HopfColeConvention::exact, HopfColeConvention::paper}) {
    p.convention = conv;
    auto field = rescale_field(tr, 0, p);
    auto z = hopf_cole(field);
    for (std::size_t i = 0; i < z.values.size(); ++i) {
      REQUIRE(z.values[i] > 0);
      REQUIRE(std::log(z.values[i]) == Approx(z.log_values[i]).margin(1e-12));
      // Exponent wiring: lambda h_micro + nu tau, with h_micro recovered from the rescaled value.
      const std::size_t j = i / z.xs.size();
      const double hm = (field.values[i] - p.sign() * p.b() * field.times[j]) / p.a();
      REQUIRE(z.log_values[i] == Approx(p.lambda() * hm + p.nu() * field.micro_times[j]).margin(1e-9));
    }
    for (std::size_t j = 0; j < z.times.size(); ++j)
      for (std::size_t i = 0; i + 1 < z.xs.size(); ++i)
        if (field.micro_height[j * z.xs.size() + i] < field.micro_height[j * z.xs.size() + i + 1])
          REQUIRE(z.at(j, i) < z.at(j, i + 1));
  }
  p.convention = HopfColeConvention::paper;
  CHECK(p.lambda() == Approx(0.2));
  CHECK(p.nu() * 1.0 / (0.04 * 0.04) == Approx(p.c()));
}

TEST_CASE("discrete laplacian examples") {
  CHECK(discrete_laplacian({3, 3, 3, 3}) == std::vector<double>{0, 0});
  CHECK(discrete_laplacian({-2, -1, 0, 1, 2}) == std::vector<double>{0, 0, 0});
  CHECK(discrete_laplacian({9, 4, 1, 0, 1, 4, 9}) == std::vector<double>{1, 1, 1, 1, 1});
  CHECK(discrete_laplacian({1, 2}).empty());
}

TEST_CASE("periodic laplacian is symmetric") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.below(40);
    std::vector<double> f(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = rng.uniform() - 0.5;
      g[i] = rng.uniform() - 0.5;
    }
    const auto lf = discrete_laplacian_periodic(f), lg = discrete_laplacian_periodic(g);
    double a = 0, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a += f[i] * lg[i];
      b += g[i] * lf[i];
    }
    CHECK(a == Approx(b).margin(1e-12));
  }
}

TEST_CASE("residual without events has the closed form") {
  ScalingParams p;
  p.epsilon = 0.04;
  const auto times = grid(0.1, 5.0);
  auto tr = frozen_trajectory(std::vector<Height>(7, 4), -3, times);
  auto z = hopf_cole(rescale_field(tr, 0, p));
  auto m = martingale_residual(z);
  const double z0 = std::exp(p.lambda() * 4);
  for (std::size_t j = 0; j < times.size(); ++j)
    for (std::size_t i = 0; i < m.sites.size(); ++i)
      REQUIRE(m.at(j, i) == Approx(z0 * (std::exp(p.nu() * times[j]) - 1)).margin(1e-12));
  for (std::size_t i = 0; i < m.sites.size(); ++i) CHECK(m.at(0, i) == 0.0);
  CHECK(m.sites == std::vector<Site>{-2, -1, 0, 1, 2});
}

TEST_CASE("residual quadrature control") {
  ScalingParams p;
  p.epsilon = 0.04;
  auto tr = frozen_trajectory(std::vector<Height>(7, 0), -3, {0.0, 0.5});
  auto z = hopf_cole(rescale_field(tr, 0, p));
  CHECK_THROWS_AS(martingale_residual(z), QuadratureTooCoarse);
  CHECK_NOTHROW(martingale_residual(z, 0.5));
}

namespace {

struct BracketBatch {
  std::vector<Estimate> means;
  Estimate qv, same01, same34, cross01, cross22;
  std::vector<MartingaleResidual> m1;
};

BracketBatch bracket_batch(bool symmetric, std::uint64_t master) {
  ScalingParams p;
  p.epsilon = 0.04;
  if (symmetric) p.asymmetry = 0.0;
  const auto model = symmetric ? ssep_model() : asep_model(0.04);
  const auto times = grid(0.1, 4.0);
  std::vector<MartingaleResidual> m1, m2;
  RunningStats mean[3];
  const Site probes[3] = {-4, 0, 5};
  for (std::uint64_t i = 0; i < 1000; ++i) {
    auto [lo, hi] = ordered_bernoulli_pair(0.4, 0.6, {-15, 15}, derive_seed(master, i, 1));
    std::vector<HeightFunction> init{lo, hi};
    auto tr = evolve_coupled(init, model, 4.0, times, derive_seed(master, i));
    auto res = residuals(tr, p);
    for (int k = 0; k < 3; ++k) mean[k].push(res[0].at(times.size() - 1, res[0].site_index(probes[k])));
    m1.push_back(res[0]);
    m2.push_back(res[1]);
  }
  BracketBatch b;
  for (auto& s : mean) b.means.push_back(s.mean_estimate());
  b.qv = bracket_cross_estimator(m1, m1, 0, 0);
  b.same01 = bracket_cross_estimator(m1, m1, 0, 1);
  b.same34 = bracket_cross_estimator(m1, m1, -3, 4);
  b.cross01 = bracket_cross_estimator(m1, m2, 0, 1);
  b.cross22 = bracket_cross_estimator(m1, m2, 2, -2);
  b.m1 = std::move(m1);
  return b;
}

}  // namespace

// Statistical bands follow the two-batch rule: a check fails only when two
// independently seeded batches both fail.
TEST_CASE("residual is centered and site-orthogonal") {
  for (bool symmetric : {false, true}) {
    const auto a = bracket_batch(symmetric, 21), b = bracket_batch(symmetric, 22);
    INFO((symmetric ? "ssep" : "asep"));
    auto centered = [](const Estimate& e) { return within_band(e, 0.0, 3); };
    for (std::size_t k = 0; k < 3; ++k) CHECK(two_batch_pass(centered(a.means[k]), centered(b.means[k])));
    CHECK(a.qv.value > 5 * a.qv.se);
    CHECK(b.qv.value > 5 * b.qv.se);
    CHECK(two_batch_pass(centered(a.same01), centered(b.same01)));
    CHECK(two_batch_pass(centered(a.same34), centered(b.same34)));
    CHECK(two_batch_pass(centered(a.cross01), centered(b.cross01)));
    CHECK(two_batch_pass(centered(a.cross22), centered(b.cross22)));
    std::vector<MartingaleResidual> few(a.m1.begin(), a.m1.begin() + 10);
    CHECK_THROWS_AS(bracket_cross_estimator(few, few, 0, 0), EnsembleTooSmall);
  }
}

TEST_CASE("the plus drift sign keeps flat stationary data drift-free") {
  const double eps = 0.04, t = 0.2;
  const double tau = t / (eps * eps);
  RunningStats plus, minus;
  ScalingParams p;
  p.epsilon = eps;
  ScalingParams m = p;
  m.drift_sign = DriftSign::minus;
  EvolveOptions opt{BoundaryMode::periodic, Scheduler::superposition};
  for (std::uint64_t i = 0; i < 400; ++i) {
    auto h = bernoulli_height(0.5, {-99, 100}, derive_seed(8, i, 1));
    auto tr = evolve_coupled(std::span(&h, 1), asep_model(eps), tau, {0.0, tau}, derive_seed(8, i), opt);
    const auto fp = rescale_field(tr, 0, p, {0.0, t}, {0.0});
    const auto fm = rescale_field(tr, 0, m, {0.0, t}, {0.0});
    plus.push(fp.values[1] - fp.values[0]);
    minus.push(fm.values[1] - fm.values[0]);
  }
  CHECK(within_band(plus.mean_estimate(), 0.0, 3));
  CHECK_FALSE(within_band(minus.mean_estimate(), 0.0, 3));
}
