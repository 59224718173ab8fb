#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "mlemsparse/mlem.hpp"

using namespace mlemsparse;
using fixtures::op_from;
using fixtures::textbook;

namespace {

double total_variation(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
  return 0.5 * s;
}

}  // namespace

TEST_CASE("mlem_step") {
  const auto op = op_from(textbook());
  SUBCASE("hand-evaluated update") {
    const auto y = DataVector::from_frequencies({0.95, 0.05});
    const auto s1 = mlem_step(op, y, make_state(op, y, Measure(op.grid(), {0.5, 0.5})));
    const double e0 = 0.5 * (0.95 * 0.8 / 0.55 + 0.05 * 0.2 / 0.45);
    const double e1 = 0.5 * (0.95 * 0.3 / 0.55 + 0.05 * 0.7 / 0.45);
    CHECK(s1.mu[0] == doctest::Approx(e0).epsilon(1e-14));
    CHECK(s1.mu[1] == doctest::Approx(e1).epsilon(1e-14));
    CHECK(s1.mu[0] == doctest::Approx(0.70202).epsilon(1e-5));
    CHECK(s1.mu[1] == doctest::Approx(0.29798).epsilon(1e-5));
    CHECK(s1.k == 1);
    const auto ref = apply(op, s1.mu);
    CHECK(s1.a_mu == ref);
  }
  SUBCASE("consistent fixed point") {
    const auto y = DataVector::from_frequencies({0.5, 0.5});
    const auto s0 = make_state(op, y, Measure(op.grid(), {0.4, 0.6}));
    const auto s1 = mlem_step(op, y, s0);
    CHECK(s1.mu[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(s1.mu[1] == doctest::Approx(0.6).epsilon(1e-15));
  }
  SUBCASE("zero atoms stay zero") {
    const auto y = DataVector::from_frequencies({0.3, 0.7});
    auto s = make_state(op, y, Measure(op.grid(), {1.0, 0.0}));
    for (int k = 0; k < 20; ++k) s = mlem_step(op, y, s);
    CHECK(s.mu[1] == 0.0);
  }
  SUBCASE("precondition names the detector") {
    const auto diag = op_from({{1.0, 0.0}, {0.0, 1.0}});
    const auto y = DataVector::from_frequencies({0.5, 0.5});
    try {
      make_state(diag, y, Measure(diag.grid(), {1.0, 0.0}));
      FAIL("expected a domain error");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find("a_1") != std::string::npos);
    }
  }
  SUBCASE("single-detector data multiplies by the row") {
    const auto y = DataVector::from_frequencies({1.0, 0.0});
    const auto s1 = mlem_step(op, y, make_state(op, y, Measure(op.grid(), {0.5, 0.5})));
    CHECK(s1.mu[0] / s1.mu[1] == doctest::Approx(0.8 / 0.3).epsilon(1e-14));
  }
}

TEST_CASE("random instances: descent, mass, support, oracle agreement") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 30; ++t) {
    const std::size_t m = 2 + t % 8, r = 2 + (t * 7) % 40;
    const auto a = oracle::random_normalized(rng, m, r, 0.4);
    const auto op = op_from(a);
    auto yv = oracle::random_simplex(rng, m);
    if (t % 3 == 0) {
      yv[0] = 0.0;
      double s = 0.0;
      for (double v : yv) s += v;
      for (double& v : yv) v /= s;
    }
    const auto y = DataVector::from_frequencies(yv);
    Vector w0(r, 1.0 / r);
    auto s = make_state(op, y, Measure(op.grid(), w0));
    Vector ref = w0;
    double prev = loss(op, y, s.mu).value;
    for (int k = 0; k < 60; ++k) {
      const auto next = mlem_step(op, y, s);
      ref = oracle::mlem_step(a, yv, ref);
      for (std::size_t j = 0; j < r; ++j) {
        CHECK(next.mu[j] == doctest::Approx(ref[j]).epsilon(1e-10));
        if (s.mu[j] == 0.0) CHECK(next.mu[j] == 0.0);
      }
      CHECK(std::abs(next.mu.mass() - 1.0) <= 1e-12);
      const double cur = loss(op, y, next.mu).value;
      CHECK(cur <= prev + 1e-12 * std::abs(prev));
      CHECK(kl_measure(next.mu, s.mu) <= prev - cur + 1e-10);
      prev = cur;
      s = next;
    }
  }
}

TEST_CASE("solve records diagnostics") {
  const auto grid = Grid::square(8, 1.0);
  const auto beam = build_parallel_beam(grid, {4, 8, {}, 2});
  PhantomSpec ph;
  ph.kind = PhantomSpec::Kind::uniform;
  const auto truth = make_phantom(beam.op.grid(), ph).normalized();
  const auto y = DataVector::from_frequencies(apply(beam.op, truth));
  SolveConfig cfg;
  cfg.max_iters = 50;
  cfg.record_every = 10;
  cfg.projection_every = 25;
  cfg.reference_measure = truth;
  const auto res = solve(beam.op, y, Measure::uniform(beam.op.grid()), cfg);
  REQUIRE(res.trace.size() == 6);
  CHECK(res.trace.front().k == 0);
  CHECK(res.trace.back().k == 50);
  CHECK(res.projections.k == std::vector<int>{0, 25, 50});
  CHECK(res.iterations == 50);
  for (std::size_t p = 1; p < res.trace.size(); ++p) {
    CHECK(res.trace[p].loss <= res.trace[p - 1].loss + 1e-12);
    CHECK(res.trace[p].kl_to_data <= res.trace[p - 1].kl_to_data + 1e-12);
    CHECK(std::abs(res.trace[p].mass - 1.0) <= 1e-12);
    CHECK(res.trace[p].kl_to_reference.has_value());
  }

  SUBCASE("early stopping") {
    SolveConfig early = cfg;
    early.max_iters = 1000;
    early.stop_tol = 1e-6;
    const auto r2 = solve(beam.op, y, Measure::uniform(beam.op.grid()), early);
    CHECK(r2.iterations < 1000);
    CHECK(r2.trace.back().k == r2.iterations);
  }

  SUBCASE("config validation") {
    SolveConfig bad;
    bad.percentile = 1.0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = SolveConfig{};
    bad.max_iters = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
  }
}

TEST_CASE("mass_percentile") {
  const Vector w{0.5, 0.3, 0.15, 0.05};
  CHECK(mass_percentile(w, 0.95) == 0.15);
  CHECK(mass_percentile(w, 0.5) == 0.5);
  CHECK(mass_percentile(w, 0.96) == 0.05);
  CHECK(mass_percentile(Vector{0.0, 0.0}, 0.95) == 0.0);
}

TEST_CASE("kkt_check") {
  const auto op = op_from(textbook());
  SUBCASE("consistent optimum") {
    const auto y = DataVector::from_frequencies({0.5, 0.5});
    const auto r = kkt_check(op, y, Measure(op.grid(), {0.4, 0.6}), 1e-12);
    CHECK(r.support_residual <= 1e-14);
    CHECK(r.sup_violation <= 1e-14);
    CHECK(r.is_optimal);
  }
  SUBCASE("outside data: the atom at node 0 is optimal, the multiplier is below one at node 1") {
    const auto y = DataVector::from_frequencies({0.95, 0.05});
    const auto r = kkt_check(op, y, Measure(op.grid(), {1.0, 0.0}), 1e-12);
    CHECK(r.support_residual <= 1e-15);
    CHECK(r.sup_violation == 0.0);
    CHECK(r.is_optimal);
  }
  SUBCASE("fixed point that is not optimal") {
    // A single atom at node 1 is a fixed point but node 0 has multiplier > 1.
    const auto y = DataVector::from_frequencies({0.95, 0.05});
    const auto r = kkt_check(op, y, Measure(op.grid(), {0.0, 1.0}), 1e-12);
    CHECK(r.support_residual <= 1e-15);
    CHECK(r.sup_violation > 0.1);
    CHECK_FALSE(r.is_optimal);
  }
  SUBCASE("uniform start on a random instance is not a fixed point") {
    std::mt19937_64 rng(29);
    const auto a = oracle::random_normalized(rng, 5, 12);
    const auto opr = op_from(a);
    const auto y = DataVector::from_frequencies(oracle::random_simplex(rng, 5));
    const auto r = kkt_check(opr, y, Measure::uniform(opr.grid()), 1e-6);
    CHECK(r.support_residual > 1e-6);
  }
}

TEST_CASE("fixed points and zero KKT residual coincide") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const auto a = oracle::random_normalized(rng, 3 + t % 4, 6 + t % 5);
    const auto op = op_from(a);
    const auto y = DataVector::from_frequencies(oracle::random_simplex(rng, a.size()));
    SolveConfig cfg;
    cfg.max_iters = 20000;
    cfg.record_every = 20000;
    const auto res = solve(op, y, Measure::uniform(op.grid()), cfg);
    const auto s = make_state(op, y, res.mu);
    const auto next = mlem_step(op, y, s);
    const double tv = total_variation(s.mu.weights(), next.mu.weights());
    const auto r = kkt_check(op, y, s.mu, 1e-12);
    if (r.support_residual <= 1e-12) CHECK(tv <= 1e-10);
    if (tv > 1e-10) CHECK(r.support_residual > 1e-12);
    const auto u = make_state(op, y, Measure::uniform(op.grid()));
    const auto un = mlem_step(op, y, u);
    if (total_variation(u.mu.weights(), un.mu.weights()) > 1e-10) {
      CHECK(kkt_check(op, y, u.mu, 1e-12).support_residual > 1e-12);
    }
  }
}

TEST_CASE("surrogate identities") {
  std::mt19937_64 rng(37);
  for (int t = 0; t < 40; ++t) {
    const auto a = oracle::random_normalized(rng, 2 + t % 4, 3);
    const auto op = op_from(a);
    const auto y = DataVector::from_frequencies(oracle::random_simplex(rng, a.size()));
    const Measure mk(op.grid(), oracle::random_simplex(rng, 3));
    const auto at_k = surrogate_gap(op, y, mk, mk);
    CHECK(std::abs(at_k.first) <= 1e-12);
    const Measure mu(op.grid(), oracle::random_simplex(rng, 3));
    const auto g = surrogate_gap(op, y, mk, mu);
    CHECK(g.first >= -1e-12);
    CHECK(std::abs(g.second) <= 1e-10);
    const auto next = mlem_step(op, y, make_state(op, y, mk));
    CHECK(std::abs(surrogate_gap(op, y, mk, next.mu).second) <= 1e-12);
  }
  SUBCASE("mu outside X_k") {
    const auto op = op_from(textbook());
    const auto y = DataVector::from_frequencies({0.5, 0.5});
    CHECK_THROWS_AS(surrogate_gap(op, y, Measure(op.grid(), {1.0, 0.0}),
                                  Measure(op.grid(), {0.5, 0.5})),
                    DomainError);
  }
}

TEST_CASE("single-detector closed form") {
  std::mt19937_64 rng(41);
  const auto a = oracle::random_normalized(rng, 3, 30);
  const auto op = op_from(a);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Vector w0(30);
  for (double& v : w0) v = u(rng);
  const Measure mu0(op.grid(), w0);

  const auto k0 = single_detector_iterate(op, 1, mu0, 0);
  CHECK(k0.mass() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k0[3] == doctest::Approx(w0[3] / mu0.mass()).epsilon(1e-15));

  const auto y = DataVector::from_frequencies({0.0, 1.0, 0.0});
  auto s = make_state(op, y, mu0);
  for (int k = 1; k <= 50; ++k) {
    s = mlem_step(op, y, s);
    const auto closed = single_detector_iterate(op, 1, mu0, k);
    for (std::size_t j = 0; j < 30; ++j) {
      CHECK(closed[j] == doctest::Approx(s.mu[j]).epsilon(1e-10));
    }
  }

  const auto far = single_detector_iterate(op, 1, mu0, 1'000'000);
  const auto row = op.dense_row(1);
  const auto top = std::max_element(row.begin(), row.end()) - row.begin();
  CHECK(far[static_cast<std::size_t>(top)] > 0.999);

  const auto zero_row = op_from({{1.0, 0.0}, {0.0, 1.0}});
  CHECK_THROWS_AS(single_detector_iterate(zero_row, 1, Measure(zero_row.grid(), {1.0, 0.0}), 5),
                  DomainError);
}

TEST_CASE("dirac_limit_prediction") {
  const auto grid = Grid::line(5);
  const Vector profile{0.1, 0.9, 0.2, 0.9, 0.3};
  const auto mu0 = Measure::uniform(grid);
  SUBCASE("single maximum") {
    const auto p = dirac_limit_prediction(profile, mu0, {{1, {-2.0, 0.0, -2.0}}});
    CHECK(p[1] == 1.0);
  }
  SUBCASE("determinant ratio four") {
    const auto p = dirac_limit_prediction(
        profile, mu0, {{1, {-4.0, 0.0, -4.0}}, {3, {-2.0, 0.0, -2.0}}});
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(p[3] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }
  SUBCASE("initial density scales the weight") {
    const Measure tilted(grid, {0.2, 0.4, 0.2, 0.2, 0.2});
    const auto p = dirac_limit_prediction(
        profile, tilted, {{1, {-4.0, 0.0, -4.0}}, {3, {-2.0, 0.0, -2.0}}});
    // Unnormalized weights 0.4/4 and 0.2/2 are equal.
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("degenerate Hessian") {
    CHECK_THROWS_AS(dirac_limit_prediction(profile, mu0, {{1, {-1.0, 1.0, -1.0}}}),
                    ConditionError);
  }
  SUBCASE("unequal maxima") {
    CHECK_THROWS_AS(dirac_limit_prediction(profile, mu0,
                                           {{1, {-1.0, 0.0, -1.0}}, {2, {-1.0, 0.0, -1.0}}}),
                    DomainError);
  }
}

TEST_CASE("KL to an optimum decreases") {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 10; ++t) {
    const std::size_t m = 6, r = 4;
    const auto a = oracle::random_normalized(rng, m, r);
    const auto op = op_from(a);
    const Measure star(op.grid(), oracle::random_simplex(rng, r));
    const auto y = DataVector::from_frequencies(apply(op, star));
    const auto seq = iterate_sequence(op, y, Measure::uniform(op.grid()), 200);
    const auto kl = kl_to_reference_trace(op, y, star, seq);
    const double l_star = loss(op, y, star).value;
    for (std::size_t k = 0; k + 1 < kl.size(); ++k) {
      CHECK(kl[k + 1] <= kl[k] + 1e-12);
      CHECK(kl[k + 1] - kl[k] <= -loss(op, y, seq[k]).value + l_star + 1e-10);
    }
  }
  SUBCASE("starting at the optimum") {
    const auto op = op_from(textbook());
    const Measure star(op.grid(), {0.4, 0.6});
    const auto y = DataVector::from_frequencies({0.5, 0.5});
    for (double v : kl_to_reference_trace(op, y, star, iterate_sequence(op, y, star, 5))) {
      CHECK(std::abs(v) <= 1e-15);
    }
  }
  SUBCASE("reference outside the iterate support") {
    const auto op = op_from(textbook());
    const auto y = DataVector::from_frequencies({0.5, 0.5});
    const auto kl = kl_to_reference_trace(op, y, Measure(op.grid(), {0.4, 0.6}),
                                          {Measure(op.grid(), {1.0, 0.0})});
    CHECK(kl[0] == std::numeric_limits<double>::infinity());
  }
}
