#include "mlemsparse/mlem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace mlemsparse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_compatible(const ForwardOperator& op, const DataVector& y,
                      const Measure& mu) {
  if (y.size() != op.rows()) {
    throw DimensionError("data has " + std::to_string(y.size()) +
                         " entries, operator has " + std::to_string(op.rows()) +
                         " detectors");
  }
  if (!op.grid()->same_layout(*mu.grid())) {
    throw DimensionError("measure and operator live on different grids");
  }
}

void check_in_domain(const DataVector& y, std::span<const double> a_mu) {
  for (std::size_t i : y.support()) {
    if (!(a_mu[i] > 0.0)) {
      throw DomainError("iterate outside dom(loss): <mu, a_" +
                        std::to_string(i) + "> = 0 while y_" +
                        std::to_string(i) + " > 0");
    }
  }
}

}  // namespace

void SolveConfig::validate() const {
  if (max_iters < 1) throw ParameterError("max_iters must be >= 1");
  if (record_every < 1) throw ParameterError("record_every must be >= 1");
  if (!(percentile > 0.0 && percentile < 1.0)) {
    throw ParameterError("percentile must lie in (0, 1)");
  }
  if (!(stop_tol >= 0.0)) throw ParameterError("stop_tol must be >= 0");
  if (projection_every < 0) throw ParameterError("projection_every must be >= 0");
}

MlemState make_state(const ForwardOperator& op, const DataVector& y,
                     Measure mu0) {
  check_compatible(op, y, mu0);
  Measure mu = mu0.on_grid(op.grid());
  Vector a_mu = apply(op, mu);
  check_in_domain(y, a_mu);
  return {std::move(mu), std::move(a_mu), 0};
}

Vector em_multiplier(const ForwardOperator& op, const DataVector& y,
                     std::span<const double> a_mu) {
  Vector ratio(op.rows(), 0.0);
  // Detectors with y_i = 0 contribute nothing (0/0 is taken as 0).
  for (std::size_t i : y.support()) ratio[i] = y[i] / a_mu[i];
  return adjoint_apply(op, ratio);
}

MlemState mlem_step(const ForwardOperator& op, const DataVector& y,
                    const MlemState& state) {
  check_compatible(op, y, state.mu);
  check_in_domain(y, state.a_mu);
  const Vector mult = em_multiplier(op, y, state.a_mu);
  Vector w = state.mu.weights();
  for (std::size_t j = 0; j < w.size(); ++j) w[j] *= mult[j];
  Measure next(state.mu.grid(), std::move(w));
  Vector a_mu = apply(op, next);
  return {std::move(next), std::move(a_mu), state.k + 1};
}

double mass_percentile(std::span<const double> weights, double fraction) {
  Vector sorted(weights.begin(), weights.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double total = 0.0;
  for (double v : sorted) total += v;
  if (!(total > 0.0)) return 0.0;
  const double target = fraction * total;
  double acc = 0.0;
  for (double v : sorted) {
    acc += v;
    if (acc >= target) return v;
  }
  return sorted.back();
}

IterateDiagnostics diagnose(const ForwardOperator& op, const DataVector& y,
                            const MlemState& state, double percentile,
                            const Measure* reference) {
  IterateDiagnostics d;
  d.k = state.k;
  d.mass = state.mu.mass();
  d.loss = loss_from_projection(y, state.a_mu, d.mass).value;
  d.kl_to_data = kl_vec(y.y(), state.a_mu);
  d.percentile_value = mass_percentile(state.mu.weights(), percentile);
  d.support_size = state.mu.support_size();

  bool finite = true;
  for (std::size_t i : y.support()) finite = finite && state.a_mu[i] > 0.0;
  if (finite) {
    const Vector mult = em_multiplier(op, y, state.a_mu);
    const Grid& grid = *op.grid();
    double sup = -kInf;
    double res = 0.0;
    for (std::size_t j = 0; j < mult.size(); ++j) {
      if (!grid.in_fov(j)) continue;
      sup = std::max(sup, mult[j]);
      if (state.mu.in_support(j)) res = std::max(res, std::abs(mult[j] - 1.0));
    }
    d.kkt_sup = sup;
    d.kkt_residual_on_support = res;
  } else {
    d.kkt_sup = kInf;
    d.kkt_residual_on_support = kInf;
  }
  if (reference) {
    d.kl_to_reference = kl_weights(reference->weights(), state.mu.weights());
  }
  return d;
}

SolveResult solve(const ForwardOperator& op, const DataVector& y,
                  const Measure& mu0, const SolveConfig& cfg) {
  cfg.validate();
  MlemState state = make_state(op, y, mu0);
  const Measure* ref = cfg.reference_measure ? &*cfg.reference_measure : nullptr;

  SolveResult out{state.mu, {}, {}, 0};
  auto keep_projection = [&](const MlemState& s) {
    out.projections.k.push_back(s.k);
    out.projections.a_mu.push_back(s.a_mu);
  };
  out.trace.push_back(diagnose(op, y, state, cfg.percentile, ref));
  if (cfg.projection_every > 0) keep_projection(state);

  double prev_loss = out.trace.back().loss;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    state = mlem_step(op, y, state);
    const bool last = k == cfg.max_iters;
    bool stop = false;
    double cur_loss = prev_loss;
    if (cfg.stop_tol > 0.0) {
      cur_loss = loss_from_projection(y, state.a_mu, state.mu.mass()).value;
      stop = prev_loss - cur_loss < cfg.stop_tol;
    }
    if (k % cfg.record_every == 0 || last || stop) {
      out.trace.push_back(diagnose(op, y, state, cfg.percentile, ref));
    }
    if (cfg.projection_every > 0 &&
        (k % cfg.projection_every == 0 || last || stop)) {
      keep_projection(state);
    }
    prev_loss = cur_loss;
    if (stop) break;
  }
  out.iterations = state.k;
  out.mu = std::move(state.mu);
  return out;
}

KktReport kkt_check(const ForwardOperator& op, const DataVector& y,
                    const Measure& mu, double tol) {
  check_compatible(op, y, mu);
  const Vector a_mu = apply(op, mu);
  check_in_domain(y, a_mu);
  const Vector mult = em_multiplier(op, y, a_mu);
  const Grid& grid = *op.grid();
  KktReport r;
  double sup = -kInf;
  for (std::size_t j = 0; j < mult.size(); ++j) {
    if (!grid.in_fov(j)) continue;
    sup = std::max(sup, mult[j]);
    if (mu.in_support(j)) {
      r.support_residual = std::max(r.support_residual, std::abs(mult[j] - 1.0));
    }
  }
  r.sup_violation = std::max(0.0, sup - 1.0);
  r.is_optimal = r.sup_violation <= tol && r.support_residual <= tol;
  return r;
}

std::pair<double, double> surrogate_gap(const ForwardOperator& op,
                                        const DataVector& y,
                                        const Measure& mu_k,
                                        const Measure& mu) {
  check_compatible(op, y, mu_k);
  check_compatible(op, y, mu);
  const MlemState sk = make_state(op, y, mu_k);
  const MlemState sk1 = mlem_step(op, y, sk);
  const auto& wk = sk.mu.weights();
  const auto& wk1 = sk1.mu.weights();
  const auto& w = mu.weights();

  if (std::abs(mu.mass() - 1.0) > 1e-9) {
    throw DomainError("surrogate_gap: mu must have unit mass");
  }
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (wk1[j] > 0.0 && !(w[j] > 0.0)) {
      throw DomainError("surrogate_gap: mu_{k+1} is not absolutely continuous "
                        "with respect to mu (node " + std::to_string(j) + ")");
    }
    if (w[j] > 0.0 && !(wk[j] > 0.0)) {
      throw DomainError("surrogate_gap: mu is not absolutely continuous with "
                        "respect to mu_k (node " + std::to_string(j) + ")");
    }
  }

  const Vector a_mu = apply(op, mu);
  const Vector a_mu1 = sk1.a_mu;

  // sum_i y_i D(nu_i(mu_k) || nu_i(nu)) for nu = mu or mu_{k+1}.
  auto coupling = [&](std::span<const double> wn, std::span<const double> an) {
    double acc = 0.0;
    for (std::size_t i : y.support()) {
      double d = 0.0;
      op.for_each_in_row(i, [&](std::size_t j, double a) {
        const double p = a * wk[j] / sk.a_mu[i];
        if (p == 0.0) return;
        if (!(wn[j] > 0.0)) {
          d = kInf;
          return;
        }
        d += p * std::log((wk[j] * an[i]) / (wn[j] * sk.a_mu[i]));
      });
      acc += y[i] * d;
    }
    return acc;
  };

  const double loss_mu = loss_from_projection(y, a_mu, mu.mass()).value;
  const double loss_mu1 = loss_from_projection(y, a_mu1, sk1.mu.mass()).value;
  const double q_mu = loss_mu + coupling(w, a_mu);
  const double q_mu1 = loss_mu1 + coupling(wk1, a_mu1);
  const double d = kl_weights(wk1, w);
  return {q_mu - loss_mu, q_mu - q_mu1 - d};
}

Measure single_detector_iterate(const ForwardOperator& op, std::size_t i0,
                                const Measure& mu0, long long k) {
  if (i0 >= op.rows()) throw DimensionError("detector index out of range");
  if (k < 0) throw ParameterError("iteration count must be >= 0");
  if (!op.grid()->same_layout(*mu0.grid())) {
    throw DimensionError("measure and operator live on different grids");
  }
  const Vector a = op.dense_row(i0);
  const auto& w0 = mu0.weights();
  double pairing = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) pairing += a[j] * w0[j];
  if (!(pairing > 0.0)) {
    throw DomainError("single_detector_iterate: <mu0, a_" + std::to_string(i0) +
                      "> = 0");
  }
  if (k == 0) return mu0.normalized();

  // log weight k log a_j + log mu0_j, shifted by its maximum.
  const double kk = static_cast<double>(k);
  Vector logw(a.size(), -kInf);
  double top = -kInf;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] > 0.0 && w0[j] > 0.0) {
      logw[j] = kk * std::log(a[j]) + std::log(w0[j]);
      top = std::max(top, logw[j]);
    }
  }
  Vector w(a.size(), 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (logw[j] > -kInf) {
      w[j] = std::exp(logw[j] - top);
      total += w[j];
    }
  }
  for (double& v : w) v /= total;
  return Measure(op.grid(), std::move(w));
}

Measure dirac_limit_prediction(std::span<const double> profile,
                               const Measure& mu0,
                               const std::vector<ProfileMaximum>& maxima) {
  if (profile.size() != mu0.size()) {
    throw DimensionError("profile and measure sizes differ");
  }
  if (maxima.empty()) throw ParameterError("no maxima supplied");
  const double level = profile[maxima.front().node];
  Vector w(mu0.size(), 0.0);
  double total = 0.0;
  for (const auto& mx : maxima) {
    if (mx.node >= profile.size()) throw DimensionError("maximum node out of range");
    if (std::abs(profile[mx.node] - level) > 1e-9 * std::abs(level)) {
      throw DomainError("declared maxima do not share the same value");
    }
    const auto& h = mx.hessian;
    const double det = h[0] * h[2] - h[1] * h[1];
    if (std::abs(det) < 1e-12) {
      std::ostringstream msg;
      msg << "degenerate Hessian at node " << mx.node << " (det = " << det << ")";
      throw ConditionError(msg.str());
    }
    const double weight = mu0[mx.node] / std::sqrt(std::abs(det));
    w[mx.node] += weight;
    total += weight;
  }
  if (!(total > 0.0)) {
    throw DomainError("initial measure vanishes at every declared maximum");
  }
  for (double& v : w) v /= total;
  return Measure(mu0.grid(), std::move(w));
}

std::vector<Measure> iterate_sequence(const ForwardOperator& op,
                                      const DataVector& y, const Measure& mu0,
                                      int n) {
  MlemState s = make_state(op, y, mu0);
  std::vector<Measure> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back(s.mu);
  for (int k = 0; k < n; ++k) {
    s = mlem_step(op, y, s);
    out.push_back(s.mu);
  }
  return out;
}

std::vector<double> kl_to_reference_trace(const ForwardOperator& op,
                                          const DataVector& y,
                                          const Measure& mu_star,
                                          const std::vector<Measure>& iterates) {
  check_compatible(op, y, mu_star);
  std::vector<double> out;
  out.reserve(iterates.size());
  for (const auto& mu : iterates) {
    if (!mu.grid()->same_layout(*mu_star.grid())) {
      throw DimensionError("iterate lives on a different grid");
    }
    out.push_back(kl_weights(mu_star.weights(), mu.weights()));
  }
  return out;
}

}  // namespace mlemsparse
