#pragma once

// Dual certificates that data lies outside the image cone C = {A mu : mu >= 0},
// plus an exact membership oracle for small instances.

#include <string>
#include <vector>

#include "mlemsparse/divergence.hpp"
#include "mlemsparse/mlem.hpp"
#include "mlemsparse/model.hpp"

namespace mlemsparse {

/// Shifts lambda by the smallest constant c >= 0 (plus margin) such that
/// A* (lambda + c 1) >= 0 on the field of view. Uses A* 1 = 1, so the
/// operator must be normalized.
std::pair<DualVector, double> lift_to_dual_cone(const ForwardOperator& op,
                                                const DualVector& lam,
                                                double margin = 0.0);

/// Data-aware lift used for certificates: the shift is applied on supp(y)
/// only and entries off the support are held at 1, the largest value for
/// which the dual function stays finite. c is the smallest value making
/// A* lambda' >= 0. Coincides with the plain lift when y has no zeros.
std::pair<DualVector, double> lift_to_dual_cone(const ForwardOperator& op,
                                                const DualVector& lam,
                                                const DataVector& y,
                                                double margin = 0.0);

struct CertificateReport {
  DualVector lambda_raw;
  double shift_c = 0.0;
  DualVector lambda_lifted;
  double dual_value = 0.0;
  bool certified_outside = false;
  int iterate_index = -1;
  double min_adjoint_value = 0.0;
  /// d(y || A mu_k) at the iterate that produced the certificate.
  double kl_at_iterate = 0.0;
  std::string note;
};

/// Evaluates lambda_k = 1 - y / A mu_k at every iterate of the trace whose
/// index is a multiple of check_every (and at the last one), lifts it into
/// the dual cone and keeps the one with the largest dual value.
/// Certified iff that value exceeds 1e-10. Failing to certify does not show
/// that y lies in the cone.
CertificateReport certify_outside(const ForwardOperator& op, const DataVector& y,
                                  const ProjectionTrace& trace,
                                  int check_every = 10);

/// Certificate from a single projection A mu.
CertificateReport certificate_at(const ForwardOperator& op, const DataVector& y,
                                 const Vector& a_mu, int k);

/// Nodes where A* lambda_lifted is within rel_tol * range of its minimum
/// over the field of view. Any likelihood maximizer is supported there.
std::vector<std::size_t> sparsity_locus(const ForwardOperator& op,
                                        const CertificateReport& report,
                                        double rel_tol = 1e-8);

struct ConeVerdict {
  enum class Status { inside_interior, inside_boundary, outside, undecided };

  Status status = Status::undecided;
  /// Nonnegative weights with A mu = y (inside cases).
  Vector witness_mu;
  /// lambda with A* lambda >= 0 and <lambda, y> < 0 (outside case).
  Vector farkas;
  /// max |A mu - y| for inside, max(0, -min A* lambda) for outside.
  double residual = 0.0;

  bool inside() const {
    return status == Status::inside_interior || status == Status::inside_boundary;
  }
};

std::string to_string(ConeVerdict::Status status);

struct OracleOptions {
  /// Perturbation radius separating interior from boundary.
  double tol = 1e-6;
  /// Skip the 2m perturbed solves and report inside_boundary for every
  /// feasible instance when false.
  bool classify_interior = true;
  /// Largest m * r accepted.
  std::size_t max_size = 1'000'000;
};

/// Exact decision of y in C by phase-one simplex. Throws CapabilityError when
/// m * r exceeds the size guard.
ConeVerdict cone_membership_oracle(const ForwardOperator& op,
                                   std::span<const double> y,
                                   const OracleOptions& options = {});

}  // namespace mlemsparse
