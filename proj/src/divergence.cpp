#include "mlemsparse/divergence.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mlemsparse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_nonnegative(std::span<const double> v, const char* name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0)) {
      std::ostringstream msg;
      msg << name << "[" << i << "] = " << v[i] << " is negative";
      throw DomainError(msg.str());
    }
  }
}

void check_unit_mass(double mass, const char* name) {
  if (std::abs(mass - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << name << " has mass " << mass << ", expected 1";
    throw DomainError(msg.str());
  }
}

}  // namespace

double kl_vec(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("kl_vec: vectors have different lengths");
  }
  check_nonnegative(u, "u");
  check_nonnegative(v, "v");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] == 0.0) {
      acc += v[i];
    } else if (v[i] == 0.0) {
      return kInf;
    } else {
      acc += v[i] - u[i] - u[i] * std::log(v[i] / u[i]);
    }
  }
  return acc;
}

double kl_weights(std::span<const double> mu, std::span<const double> nu) {
  if (mu.size() != nu.size()) {
    throw DimensionError("kl_measure: measures have different sizes");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (mu[j] == 0.0) continue;
    if (nu[j] == 0.0) return kInf;
    acc += mu[j] * std::log(mu[j] / nu[j]);
  }
  return acc;
}

double kl_measure(const Measure& mu, const Measure& nu) {
  if (!mu.grid()->same_layout(*nu.grid())) {
    throw DimensionError("kl_measure: measures live on different grids");
  }
  check_unit_mass(mu.mass(), "mu");
  check_unit_mass(nu.mass(), "nu");
  return kl_weights(mu.weights(), nu.weights());
}

LossValue loss_from_projection(const DataVector& y, std::span<const double> a_mu,
                               double mass) {
  if (a_mu.size() != y.size()) {
    throw DimensionError("loss: data and projection lengths differ");
  }
  double acc = mass;
  for (std::size_t i : y.support()) {
    if (!(a_mu[i] > 0.0)) return {kInf, false};
    acc -= y[i] * std::log(a_mu[i]);
  }
  return {acc, true};
}

LossValue loss(const ForwardOperator& op, const DataVector& y,
               const Measure& mu) {
  if (y.size() != op.rows()) {
    throw DimensionError("loss: data has " + std::to_string(y.size()) +
                         " entries, operator has " + std::to_string(op.rows()));
  }
  const Vector a_mu = apply(op, mu);
  return loss_from_projection(y, a_mu, mu.mass());
}

Vector loss_gradient(const ForwardOperator& op, const DataVector& y,
                     const Measure& mu) {
  if (y.size() != op.rows()) throw DimensionError("loss_gradient: size mismatch");
  const Vector a_mu = apply(op, mu);
  Vector ratio(op.rows(), 0.0);
  for (std::size_t i : y.support()) {
    if (!(a_mu[i] > 0.0)) {
      throw DomainError("loss_gradient: (A mu)_" + std::to_string(i) +
                        " = 0 on the data support; mu is outside dom(loss)");
    }
    ratio[i] = y[i] / a_mu[i];
  }
  Vector grad = adjoint_apply(op, ratio);
  const Grid& grid = *op.grid();
  for (std::size_t j = 0; j < grad.size(); ++j) {
    grad[j] = grid.in_fov(j) ? 1.0 - grad[j] : 0.0;
  }
  return grad;
}

DualVector lambda_of(const DataVector& y, std::span<const double> w) {
  if (w.size() != y.size()) throw DimensionError("lambda_of: size mismatch");
  Vector lam(y.size(), 1.0);
  for (std::size_t i : y.support()) {
    if (!(w[i] > 0.0)) {
      throw DomainError("lambda_of: w_" + std::to_string(i) +
                        " = 0 while y_" + std::to_string(i) + " > 0");
    }
    lam[i] = 1.0 - y[i] / w[i];
  }
  return {std::move(lam), DualVector::Origin::from_iterate};
}

double dual_value(const DataVector& y, const DualVector& lam) {
  if (lam.size() != y.size()) throw DimensionError("dual_value: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double slack = 1.0 - lam[i];
    if (!y.in_support(i)) {
      // The infimum over w_i >= 0 of (1 - lambda_i) w_i is -inf here.
      if (slack < 0.0) return -kInf;
      continue;
    }
    if (!(slack > 0.0)) return -kInf;
    acc += y[i] * std::log(slack);
  }
  return acc;
}

double consistent_loss(const DataVector& y) {
  double acc = 1.0;
  for (std::size_t i : y.support()) acc -= y[i] * std::log(y[i]);
  return acc;
}

}  // namespace mlemsparse
