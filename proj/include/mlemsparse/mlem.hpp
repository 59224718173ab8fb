#pragma once

// ML-EM iteration and its diagnostics.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mlemsparse/divergence.hpp"
#include "mlemsparse/model.hpp"

namespace mlemsparse {

struct SolveConfig {
  int max_iters = 400;
  int record_every = 1;
  /// Mass fraction used by the percentile diagnostic.
  double percentile = 0.95;
  /// When set, diagnostics include D(reference || mu_k).
  std::optional<Measure> reference_measure;
  /// Stop once the loss decreases by less than this in one step (0: never).
  double stop_tol = 0.0;
  /// Keep A mu_k every this many iterations for certificate search (0: off).
  int projection_every = 0;

  void validate() const;
};

struct IterateDiagnostics {
  int k = 0;
  double loss = 0.0;
  double kl_to_data = 0.0;
  double mass = 0.0;
  double percentile_value = 0.0;
  std::size_t support_size = 0;
  /// max over the field of view of sum_i y_i a_i / (A mu_k)_i.
  double kkt_sup = 0.0;
  /// max over supp(mu_k) of |sum_i y_i a_i / (A mu_k)_i - 1|.
  double kkt_residual_on_support = 0.0;
  std::optional<double> kl_to_reference;
};

/// Current iterate together with its cached projection A mu.
struct MlemState {
  Measure mu;
  Vector a_mu;
  int k = 0;
};

/// Builds the initial state, checking (A mu0)_i > 0 on the data support.
MlemState make_state(const ForwardOperator& op, const DataVector& y,
                     Measure mu0);

/// One multiplicative update mu <- mu * A*(y / A mu). Zero atoms stay zero.
MlemState mlem_step(const ForwardOperator& op, const DataVector& y,
                    const MlemState& state);

/// Projections A mu_k kept along a run.
struct ProjectionTrace {
  std::vector<int> k;
  std::vector<Vector> a_mu;

  bool empty() const { return k.empty(); }
  std::size_t size() const { return k.size(); }
};

struct SolveResult {
  Measure mu;
  std::vector<IterateDiagnostics> trace;
  ProjectionTrace projections;
  int iterations = 0;
};

/// Runs ML-EM from mu0. Diagnostics are recorded at k = 0, every
/// record_every steps, and at the final iterate.
SolveResult solve(const ForwardOperator& op, const DataVector& y,
                  const Measure& mu0, const SolveConfig& cfg);

/// Diagnostics of a single iterate.
IterateDiagnostics diagnose(const ForwardOperator& op, const DataVector& y,
                            const MlemState& state, double percentile,
                            const Measure* reference = nullptr);

/// Smallest weight among the heaviest atoms that jointly carry at least
/// `fraction` of the total mass.
double mass_percentile(std::span<const double> weights, double fraction);

/// sum_{i in supp y} y_i a_i(x_j) / (A mu)_i at every node.
Vector em_multiplier(const ForwardOperator& op, const DataVector& y,
                     std::span<const double> a_mu);

struct KktReport {
  double sup_violation = 0.0;
  double support_residual = 0.0;
  bool is_optimal = false;
};

/// Residuals of the optimality conditions
///   multiplier <= 1 on the field of view, = 1 on supp(mu).
KktReport kkt_check(const ForwardOperator& op, const DataVector& y,
                    const Measure& mu, double tol);

/// Majorizer checks at mu_k: returns
///   (Q_k(mu) - loss(mu), Q_k(mu) - Q_k(mu_{k+1}) - D(mu_{k+1} || mu)),
/// where Q_k(mu) = loss(mu) + sum_i y_i D(nu_i(mu_k) || nu_i(mu)) and
/// nu_i(mu) = a_i mu / <mu, a_i>. mu must have unit mass and satisfy
/// supp(mu_{k+1}) in supp(mu) in supp(mu_k).
std::pair<double, double> surrogate_gap(const ForwardOperator& op,
                                        const DataVector& y,
                                        const Measure& mu_k,
                                        const Measure& mu);

/// Closed form of ML-EM for data concentrated on detector i0:
/// mu_k proportional to a_{i0}^k mu_0, evaluated in log space.
Measure single_detector_iterate(const ForwardOperator& op, std::size_t i0,
                                const Measure& mu0, long long k);

/// An interior maximizer of a detector profile with its Hessian there.
struct ProfileMaximum {
  std::size_t node = 0;
  /// Hessian entries (xx, xy, yy).
  std::array<double, 3> hessian{0.0, 0.0, 0.0};
};

/// Atomic weak-* limit of single-detector ML-EM: weight at each maximizer
/// proportional to mu0(x) / sqrt|det H|, normalized to unit mass.
/// `profile` holds the detector values on the grid; the maxima must share
/// the same value (relative 1e-9).
Measure dirac_limit_prediction(std::span<const double> profile,
                               const Measure& mu0,
                               const std::vector<ProfileMaximum>& maxima);

/// Runs ML-EM and returns every iterate mu_0..mu_n (for small instances).
std::vector<Measure> iterate_sequence(const ForwardOperator& op,
                                      const DataVector& y, const Measure& mu0,
                                      int n);

/// D(mu_star || mu_k) for each iterate; +inf where mu_star is not absolutely
/// continuous with respect to mu_k.
std::vector<double> kl_to_reference_trace(const ForwardOperator& op,
                                          const DataVector& y,
                                          const Measure& mu_star,
                                          const std::vector<Measure>& iterates);

}  // namespace mlemsparse
