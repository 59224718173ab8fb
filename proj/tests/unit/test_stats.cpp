#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "mlemsparse/rng.hpp"
#include "mlemsparse/stats.hpp"

using namespace mlemsparse;
using fixtures::op_from;
using fixtures::textbook;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Reference evaluations in long double.
long double ref_conditioned_sanov(int m, long double eps, long double n) {
  return std::pow(n + 1.0L, m) * std::exp(-n * eps);
}
long double ref_alt(int m, long double eps, long double x) {
  return 2.0L * m * std::exp(-x * eps / m);
}

DoseModel two_detector_model() {
  const auto op = op_from(textbook());
  return make_dose_model(op, Measure(op.grid(), {40.0, 60.0}));
}

}  // namespace

TEST_CASE("philox known answers") {
  using rng::Block;
  CHECK(rng::philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(rng::philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                           {0xffffffffu, 0xffffffffu}) ==
        Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(rng::philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                           {0xa4093822u, 0x299f31d0u}) ==
        Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("counter streams") {
  rng::CounterStream a(42, 7), b(42, 7), c(42, 8);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u32();
    CHECK(x == b.next_u32());
    (void)c;
  }
  rng::CounterStream d(42, 7), e(42, 8);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += d.next_u32() == e.next_u32();
  CHECK(same < 2);
  rng::CounterStream f(1, 0);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = f.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(std::abs(sum / 100000 - 0.5) < 3 * std::sqrt(1.0 / 12 / 100000));
}

TEST_CASE("poisson sampler moments") {
  for (double mean : {0.3, 4.0, 9.9, 10.0, 50.0, 1000.0}) {
    rng::CounterStream s(99, static_cast<std::uint64_t>(mean * 10));
    const int n = 100000;
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(rng::poisson(s, mean));
      m1 += k;
      m2 += k * k;
    }
    m1 /= n;
    const double var = m2 / n - m1 * m1;
    CHECK(std::abs(m1 - mean) <= 4 * std::sqrt(mean / n));
    CHECK(std::abs(var - mean) <= 0.05 * mean);
  }
  rng::CounterStream s(1, 1);
  CHECK(rng::poisson(s, 0.0) == 0);
  CHECK_THROWS_AS(rng::poisson(s, -1.0), DomainError);
}

TEST_CASE("sample_counts") {
  const auto model = two_detector_model();
  CHECK(model.gamma_total == doctest::Approx(100.0));
  CHECK(model.y_real[0] == doctest::Approx(0.5));

  SUBCASE("tiny dose gives empty draws") {
    const auto op = op_from({{1.0}});
    const auto unit = make_dose_model(op, Measure(op.grid(), {1.0}));
    int zeros = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) zeros += sample_counts(unit, 1e-9, 5, s)[0] == 0;
    CHECK(zeros >= 990);
  }
  SUBCASE("means and the variance of the total") {
    const double t = 1.0;
    const int n = 100000;
    double s0 = 0.0, s1 = 0.0, tot = 0.0, tot2 = 0.0;
    for (int s = 0; s < n; ++s) {
      const auto c = sample_counts(model, t, 2024, static_cast<std::uint64_t>(s));
      s0 += c[0];
      s1 += c[1];
      const double sum = static_cast<double>(c[0] + c[1]);
      tot += sum;
      tot2 += sum * sum;
    }
    CHECK(std::abs(s0 / n - 50.0) <= 3 * std::sqrt(50.0 / n));
    CHECK(std::abs(s1 / n - 50.0) <= 3 * std::sqrt(50.0 / n));
    const double mean = tot / n;
    CHECK(std::abs(tot2 / n - mean * mean - 100.0) <= 5.0);
  }
  SUBCASE("reproducible") {
    CHECK(sample_counts(model, 3.0, 11, 4) == sample_counts(model, 3.0, 11, 4));
    CHECK_THROWS_AS(sample_counts(model, 0.0, 11), ParameterError);
  }
}

TEST_CASE("conditioned bounds") {
  const auto b = bound_conditioned(2, 0.1, 10);
  CHECK(b.sanov == doctest::Approx(static_cast<double>(ref_conditioned_sanov(2, 0.1L, 10))).epsilon(1e-13));
  CHECK(b.alt == doctest::Approx(static_cast<double>(ref_alt(2, 0.1L, 10))).epsilon(1e-13));
  CHECK(b.sanov == doctest::Approx(44.51).epsilon(1e-4));
  CHECK(b.alt == doctest::Approx(2.426).epsilon(1e-4));
  CHECK(b.sanov_vacuous);
  CHECK(b.alt_vacuous);

  const auto z = bound_conditioned(3, 0.0, 9);
  CHECK(z.sanov == doctest::Approx(1000.0));
  CHECK(z.alt == doctest::Approx(6.0));
  CHECK(z.sanov_vacuous);

  const auto x = bound_conditioned(4, 0.01, 100);
  CHECK(x.alt < x.sanov);
  CHECK(bound_conditioned(2, 1.0, 200).alt < 1.0);
  CHECK_FALSE(bound_conditioned(2, 1.0, 200).alt_vacuous);
}

TEST_CASE("dose bounds") {
  const auto b = bound_dose(2, 0.2, 1.0, 50.0);
  CHECK(b.alt == doctest::Approx(4.0 * std::exp(-5.0)).epsilon(1e-14));
  CHECK(b.alt == doctest::Approx(0.02695).epsilon(1e-3));
  CHECK(b.sanov == doctest::Approx(5.0 * (1.0 + 2500.0) * std::exp(-10.0)).epsilon(1e-13));

  for (double n : {1.0, 7.0, 50.0, 333.0}) {
    CHECK(bound_dose(3, 0.05, n / 4.0, 4.0).alt == bound_conditioned(3, 0.05, n).alt);
  }

  double prev = kInf;
  for (int k = 0; k < 20; ++k) {
    const double t = std::pow(10.0, -2.0 + 0.25 * k);
    const double v = bound_dose(3, 0.1, t, 20.0).alt;
    CHECK(v < prev);
    prev = v;
  }

  const auto huge = bound_dose(30, 0.0, 1e300, 1e10);
  CHECK(huge.sanov == kInf);
  CHECK(huge.sanov_vacuous);

  SUBCASE("input validation") {
    BoundInputs in;
    in.m = 2;
    in.epsilon = 0.1;
    CHECK_THROWS_AS(bounds(in), ParameterError);
    in.n = 10;
    CHECK(bounds(in).sanov == bound_conditioned(2, 0.1, 10).sanov);
    in.t = 1.0;
    in.gamma_total = 10.0;
    CHECK_THROWS_AS(bounds(in), ParameterError);
    in.n.reset();
    CHECK(bounds(in).alt == bound_dose(2, 0.1, 1.0, 10.0).alt);
    in.gamma_total.reset();
    CHECK_THROWS_AS(bounds(in), ParameterError);
  }
}

TEST_CASE("monotone in epsilon") {
  for (int m : {1, 2, 5}) {
    double ps = kInf, pa = kInf;
    for (int k = 0; k <= 10; ++k) {
      const auto b = bound_conditioned(m, 0.05 * k, 40);
      CHECK(b.sanov <= ps);
      CHECK(b.alt <= pa);
      ps = b.sanov;
      pa = b.alt;
    }
  }
}

TEST_CASE("Bell constant") {
  const auto ref = oracle::bell(25);
  for (int n = 0; n <= 25; ++n) CHECK(bell_number(n) == static_cast<std::uint64_t>(ref[n]));
  CHECK(bound_bell_constant(1).bell == 2);
  CHECK(bound_bell_constant(4).bell == 52);
  for (int m = 1; m <= 24; ++m) {
    const auto c = bound_bell_constant(m);
    CHECK(c.exact);
    CHECK(c.log_value <= bell_upper_bound_log(m));
  }
  const auto big = bound_bell_constant(25);
  CHECK_FALSE(big.exact);
  CHECK(big.log_value == bell_upper_bound_log(25));
  CHECK_THROWS_AS(bell_number(26), CapabilityError);
}

TEST_CASE("Wilson interval") {
  const auto w = wilson_interval(0, 10);
  CHECK(w.lo == 0.0);
  const double z2 = 1.959963984540054 * 1.959963984540054;
  CHECK(w.hi == doctest::Approx(z2 / (10.0 + z2)).epsilon(1e-14));
  const auto e = wilson_interval(0, 0);
  CHECK(e.lo == 0.0);
  CHECK(e.hi == 1.0);
  const auto mid = wilson_interval(50, 100);
  CHECK(mid.lo == doctest::Approx(1.0 - mid.hi).epsilon(1e-14));
  CHECK(mid.lo < 0.5);
}

TEST_CASE("epsilon_by_search") {
  const auto op = op_from(textbook());
  const Vector y_real{0.5, 0.5};
  const double expected = 0.3 * std::log(0.6) + 0.7 * std::log(1.4);
  const double eps = epsilon_by_search(op, y_real, 0.05);
  CHECK(eps == doctest::Approx(expected).epsilon(1e-9));
  CHECK(eps == doctest::Approx(0.0823).epsilon(1e-3));
  const double finer = epsilon_by_search(op, y_real, 0.025);
  CHECK(std::abs(finer - eps) <= 1e-9);

  const auto full = op_from({{1.0, 0.0}, {0.0, 1.0}});
  CHECK(epsilon_by_search(full, y_real, 0.1) == kInf);
  const Vector out{0.95, 0.05};
  CHECK(epsilon_by_search(op, out, 0.1) == 0.0);

  const auto five = op_from({{0.2}, {0.2}, {0.2}, {0.2}, {0.2}});
  const Vector y5{0.2, 0.2, 0.2, 0.2, 0.2};
  CHECK_THROWS_AS(epsilon_by_search(five, y5, 0.1), CapabilityError);
}

TEST_CASE("escape probability estimates") {
  const auto op = op_from(textbook());
  const auto model = two_detector_model();
  const std::vector<double> doses{0.005, 0.05, 0.5};
  const auto a = estimate_escape_probability(op, model, doses, 2000, 7, 0.0823, 1);
  const auto b = estimate_escape_probability(op, model, doses, 2000, 7, 0.0823, 3);
  REQUIRE(a.size() == 3);
  for (std::size_t d = 0; d < 3; ++d) {
    CHECK(escape_csv_row(a[d]) == escape_csv_row(b[d]));
    CHECK(a[d].wilson.lo <= a[d].p_hat);
    CHECK(a[d].p_hat <= a[d].wilson.hi);
    CHECK(a[d].all_zero <= a[d].outside);
  }
  // Tiny dose: almost every draw is empty.
  CHECK(a[0].all_zero_fraction > 0.5);
  CHECK(a[2].p_hat < a[0].p_hat);

  const auto none = estimate_escape_probability(op, model, doses, 0, 7);
  CHECK(none[0].p_hat == 0.0);
  CHECK(none[0].wilson.hi == 1.0);
  CHECK(std::isnan(none[0].bounds.alt));

  CHECK(std::string(escape_csv_header()) ==
        "t,trials,p_hat,wilson_lo,wilson_hi,bound_sanov,bound_alt,epsilon,all_zero_fraction");
}
