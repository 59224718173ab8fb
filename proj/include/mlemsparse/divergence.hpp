#pragma once

// Scalar functionals of the Poisson likelihood problem.
//
// Extended reals are plain doubles: +inf and -inf are legitimate results
// (loss off its domain, dual function at lambda_i = 1). Errors are thrown only
// for malformed input.

#include <span>

#include "mlemsparse/model.hpp"

namespace mlemsparse {

/// Dual variable lambda in R^m together with how it was obtained.
struct DualVector {
  enum class Origin { from_iterate, lifted, manual };

  Vector lambda;
  Origin origin = Origin::manual;

  std::size_t size() const { return lambda.size(); }
  double operator[](std::size_t i) const { return lambda[i]; }
};

struct LossValue {
  double value = 0.0;
  bool finite = true;
};

/// d(u||v) = sum_i (v_i - u_i - u_i log(v_i / u_i)), with 0 log 0 = 0.
/// +inf iff some v_i = 0 < u_i.
double kl_vec(std::span<const double> u, std::span<const double> v);

/// D(mu||nu) = sum_{j in supp mu} mu_j log(mu_j / nu_j) for unit-mass
/// measures (mass checked to 1e-9); +inf unless supp(mu) is inside supp(nu).
double kl_measure(const Measure& mu, const Measure& nu);

/// Same divergence on raw unit-mass weight vectors.
double kl_weights(std::span<const double> mu, std::span<const double> nu);

/// Negative log-likelihood <mu, 1> - sum_{i in supp y} y_i log (A mu)_i.
LossValue loss(const ForwardOperator& op, const DataVector& y,
               const Measure& mu);
/// Loss given a precomputed projection A mu and the measure mass.
LossValue loss_from_projection(const DataVector& y, std::span<const double> a_mu,
                               double mass);

/// Gradient 1 - sum_{i in supp y} y_i a_i / (A mu)_i on the field of view
/// (zero at masked nodes). Throws DomainError when the loss is infinite.
Vector loss_gradient(const ForwardOperator& op, const DataVector& y,
                     const Measure& mu);

/// lambda_i = 1 - y_i / w_i on supp y, and 1 elsewhere.
DualVector lambda_of(const DataVector& y, std::span<const double> w);

/// g(lambda) = sum_{i in supp y} y_i log(1 - lambda_i); -inf as soon as some
/// lambda_i >= 1 on the support or lambda_i > 1 off it.
double dual_value(const DataVector& y, const DualVector& lam);

/// Entropy term 1 - sum y_i log y_i, the value of the loss at any mu with
/// A mu = y.
double consistent_loss(const DataVector& y);

}  // namespace mlemsparse
