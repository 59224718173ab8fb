#include "mlemsparse/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mlemsparse/simplex.hpp"

namespace mlemsparse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCertifyThreshold = 1e-10;

double min_on_fov(const Grid& grid, const Vector& values) {
  double lo = kInf;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (grid.in_fov(j)) lo = std::min(lo, values[j]);
  }
  return lo;
}

void require_normalized(const ForwardOperator& op) {
  if (!op.normalized()) {
    throw StateError("dual-cone lifting needs a normalized operator");
  }
}

}  // namespace

std::pair<DualVector, double> lift_to_dual_cone(const ForwardOperator& op,
                                                const DualVector& lam,
                                                double margin) {
  require_normalized(op);
  const Vector adj = adjoint_apply(op, lam.lambda);
  const double c = std::max(0.0, -min_on_fov(*op.grid(), adj)) + margin;
  DualVector out{lam.lambda, DualVector::Origin::lifted};
  for (double& v : out.lambda) v += c;
  return {std::move(out), c};
}

std::pair<DualVector, double> lift_to_dual_cone(const ForwardOperator& op,
                                                const DualVector& lam,
                                                const DataVector& y,
                                                double margin) {
  require_normalized(op);
  if (lam.size() != y.size() || y.size() != op.rows()) {
    throw DimensionError("lift_to_dual_cone: size mismatch");
  }
  DualVector base{lam.lambda, DualVector::Origin::lifted};
  Vector on_support(op.rows(), 0.0);
  for (std::size_t i = 0; i < base.lambda.size(); ++i) {
    if (y.in_support(i)) {
      on_support[i] = 1.0;
    } else {
      base.lambda[i] = 1.0;
    }
  }
  const Vector adj = adjoint_apply(op, base.lambda);
  const Vector weight = adjoint_apply(op, on_support);
  const Grid& grid = *op.grid();
  double c = 0.0;
  for (std::size_t j = 0; j < adj.size(); ++j) {
    if (!grid.in_fov(j) || adj[j] >= 0.0) continue;
    // adj < 0 forces some support detector to see node j, so weight > 0.
    c = std::max(c, -adj[j] / weight[j]);
  }
  c += margin;
  for (std::size_t i = 0; i < base.lambda.size(); ++i) {
    if (y.in_support(i)) base.lambda[i] += c;
  }
  return {std::move(base), c};
}

CertificateReport certificate_at(const ForwardOperator& op, const DataVector& y,
                                 const Vector& a_mu, int k) {
  CertificateReport rep;
  rep.iterate_index = k;
  rep.lambda_raw = lambda_of(y, a_mu);
  auto [lifted, c] = lift_to_dual_cone(op, rep.lambda_raw, y);
  rep.lambda_lifted = std::move(lifted);
  rep.shift_c = c;
  rep.dual_value = dual_value(y, rep.lambda_lifted);
  rep.min_adjoint_value =
      min_on_fov(*op.grid(), adjoint_apply(op, rep.lambda_lifted.lambda));
  rep.kl_at_iterate = kl_vec(y.y(), a_mu);
  return rep;
}

CertificateReport certify_outside(const ForwardOperator& op, const DataVector& y,
                                  const ProjectionTrace& trace,
                                  int check_every) {
  if (trace.empty()) throw ParameterError("certify_outside: empty trace");
  if (check_every < 1) throw ParameterError("check_every must be >= 1");
  if (y.size() != op.rows()) throw DimensionError("certify_outside: size mismatch");

  CertificateReport best;
  bool have = false;
  for (std::size_t p = 0; p < trace.size(); ++p) {
    const bool last = p + 1 == trace.size();
    if (trace.k[p] % check_every != 0 && !last) continue;
    CertificateReport rep = certificate_at(op, y, trace.a_mu[p], trace.k[p]);
    if (!have || rep.dual_value > best.dual_value) {
      best = std::move(rep);
      have = true;
    }
  }
  best.certified_outside = best.dual_value > kCertifyThreshold &&
                           best.min_adjoint_value >= -1e-12;
  if (best.certified_outside) {
    best.note = "dual certificate g(lambda) > 0: y lies outside the image cone";
  } else {
    best.note =
        "no certificate found; this does not prove that y lies in the cone";
  }
  return best;
}

std::vector<std::size_t> sparsity_locus(const ForwardOperator& op,
                                        const CertificateReport& report,
                                        double rel_tol) {
  if (!report.certified_outside) {
    throw StateError("sparsity_locus needs a certified report");
  }
  const Vector adj = adjoint_apply(op, report.lambda_lifted.lambda);
  const Grid& grid = *op.grid();
  double lo = kInf, hi = -kInf;
  for (std::size_t j = 0; j < adj.size(); ++j) {
    if (!grid.in_fov(j)) continue;
    lo = std::min(lo, adj[j]);
    hi = std::max(hi, adj[j]);
  }
  const double cut = lo + rel_tol * (hi - lo);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < adj.size(); ++j) {
    if (grid.in_fov(j) && adj[j] <= cut) out.push_back(j);
  }
  return out;
}

std::string to_string(ConeVerdict::Status status) {
  switch (status) {
    case ConeVerdict::Status::inside_interior: return "inside_interior";
    case ConeVerdict::Status::inside_boundary: return "inside_boundary";
    case ConeVerdict::Status::outside: return "outside";
    case ConeVerdict::Status::undecided: return "undecided";
  }
  return "undecided";
}

ConeVerdict cone_membership_oracle(const ForwardOperator& op,
                                   std::span<const double> y,
                                   const OracleOptions& options) {
  const std::size_t m = op.rows();
  if (y.size() != m) throw DimensionError("oracle: data length mismatch");
  if (m * op.cols() > options.max_size) {
    throw CapabilityError("oracle: instance with m * r = " +
                          std::to_string(m * op.cols()) +
                          " exceeds the exact-decision size guard of " +
                          std::to_string(options.max_size));
  }
  const Grid& grid = *op.grid();
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (grid.in_fov(j)) cols.push_back(j);
  }
  const std::size_t n = cols.size();
  std::vector<double> a(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < n; ++c) a[i * n + c] = op.at(i, cols[c]);
  }

  ConeVerdict verdict;
  const auto res = lp::find_feasible_point(a, m, n, y);
  using S = lp::FeasibilityResult::Status;
  if (res.status == S::iteration_limit) return verdict;

  if (res.status == S::infeasible) {
    // Check the Farkas certificate in double precision.
    double min_adj = kInf;
    for (std::size_t c = 0; c < n; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += res.farkas[i] * a[i * n + c];
      min_adj = std::min(min_adj, acc);
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < m; ++i) dot += res.farkas[i] * y[i];
    verdict.residual = std::max(0.0, -min_adj);
    if (verdict.residual <= 1e-9 && dot < 0.0) {
      verdict.status = ConeVerdict::Status::outside;
      verdict.farkas = res.farkas;
    }
    return verdict;
  }

  Vector mu(grid.size(), 0.0);
  for (std::size_t c = 0; c < n; ++c) mu[cols[c]] = res.x[c];
  const Vector img = mlemsparse::apply(op, std::span<const double>(mu));
  double resid = 0.0;
  for (std::size_t i = 0; i < m; ++i) resid = std::max(resid, std::abs(img[i] - y[i]));
  verdict.residual = resid;
  if (resid > 1e-9) return verdict;
  verdict.witness_mu = std::move(mu);
  verdict.status = ConeVerdict::Status::inside_boundary;
  if (!options.classify_interior) return verdict;

  // Interior iff every axis perturbation of radius tol stays in the cone.
  std::vector<double> shifted(y.begin(), y.end());
  for (std::size_t i = 0; i < m; ++i) {
    for (double dir : {1.0, -1.0}) {
      shifted[i] = y[i] + dir * options.tol;
      if (shifted[i] < 0.0) return verdict;
      const auto p = lp::find_feasible_point(a, m, n, shifted);
      shifted[i] = y[i];
      if (p.status != S::feasible) return verdict;
    }
  }
  verdict.status = ConeVerdict::Status::inside_interior;
  return verdict;
}

}  // namespace mlemsparse
