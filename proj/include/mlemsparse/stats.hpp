#pragma once

// Poisson data at a given dose, concentration bounds for the probability
// that empirical frequencies leave the image cone, and Monte-Carlo checks.

#include <cstdint>
#include <optional>
#include <vector>

#include "mlemsparse/certify.hpp"
#include "mlemsparse/model.hpp"

namespace mlemsparse {

/// Ground truth for dose experiments: gamma_i = <mu_real, a_i>.
struct DoseModel {
  Measure mu_real;
  Vector gamma;
  double gamma_total = 0.0;
  /// gamma / gamma_total, a point of the cone on the simplex.
  Vector y_real;
};

DoseModel make_dose_model(const ForwardOperator& op, const Measure& mu_real);

/// Independent N_i ~ Poisson(gamma_i * t). Stream `stream` of the
/// counter-based generator keyed by `seed`.
std::vector<std::uint64_t> sample_counts(const DoseModel& model, double t,
                                         std::uint64_t seed,
                                         std::uint64_t stream = 0);

struct BoundInputs {
  int m = 1;
  double epsilon = 0.0;
  std::optional<double> n;
  std::optional<double> t;
  std::optional<double> gamma_total;

  /// Exactly one of n or (t and gamma_total) must be present.
  void validate() const;
};

struct BoundPair {
  /// Sanov-type bound: (n+1)^m e^{-n eps}, or C(m)(1+(gamma t)^m) e^{-gamma t eps}.
  double sanov = 0.0;
  /// 2m e^{-n eps / m}, or 2m e^{-gamma t eps / m}.
  double alt = 0.0;
  bool sanov_vacuous = false;
  bool alt_vacuous = false;

  double smaller() const { return sanov < alt ? sanov : alt; }
};

/// Bounds on P(y_hat_n outside the cone) given n events. Raw values, never
/// clamped; vacuous flags mark values >= 1.
BoundPair bound_conditioned(int m, double epsilon, double n);
/// Bounds on P(y_hat_t outside the cone) at dose t.
BoundPair bound_dose(int m, double epsilon, double t, double gamma_total);
/// Dispatches on which of n / (t, gamma_total) is present.
BoundPair bounds(const BoundInputs& inputs);

struct BellConstant {
  /// C(m) as a double (exact Bell number B_{m+1} when `exact`).
  double value = 0.0;
  double log_value = 0.0;
  bool exact = false;
  /// B_{m+1} when exact, else 0.
  std::uint64_t bell = 0;
};

/// Bell number B_n for 0 <= n <= 25 from the Bell triangle.
std::uint64_t bell_number(int n);
/// (0.792 (m+1) / log(m+2))^{m+1}, in log space.
double bell_upper_bound_log(int m);
/// C(m) = B_{m+1} when m + 1 <= 25, otherwise the closed-form upper bound.
BellConstant bound_bell_constant(int m);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for `successes` out of `trials` at normal
/// quantile z; [0, 1] when trials == 0.
WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                               double z = 1.959963984540054);

struct EscapeRecord {
  double t = 0.0;
  std::uint64_t trials = 0;
  /// Trials judged outside the cone, all-zero draws included.
  std::uint64_t outside = 0;
  std::uint64_t all_zero = 0;
  std::uint64_t undecided = 0;
  double p_hat = 0.0;
  WilsonInterval wilson;  // 95%
  BoundPair bounds;
  double epsilon = 0.0;
  double all_zero_fraction = 0.0;
};

/// For each dose draws `trials` independent y_hat_t, decides membership with
/// the exact oracle and compares the escape frequency to the bounds at the
/// supplied epsilon (NaN bounds when none is given). Trial s of dose d uses
/// stream (d, s), so results do not depend on `threads`.
std::vector<EscapeRecord> estimate_escape_probability(
    const ForwardOperator& op, const DoseModel& model,
    const std::vector<double>& t_grid, std::uint64_t trials, std::uint64_t seed,
    std::optional<double> epsilon = std::nullopt, int threads = 1);

/// inf of d(q || y_real) over simplex points q outside the cone, searched on
/// the simplex lattice of step grid_resolution and refined by bisection along
/// the segments from y_real to the best lattice points. +inf when no lattice
/// point is outside. Only m <= 4 is supported.
double epsilon_by_search(const ForwardOperator& op, std::span<const double> y_real,
                         double grid_resolution);

/// CSV header matching EscapeRecord rows.
const char* escape_csv_header();
std::string escape_csv_row(const EscapeRecord& rec);

}  // namespace mlemsparse
