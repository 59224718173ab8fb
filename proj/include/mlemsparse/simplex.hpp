#pragma once

// Phase-one simplex for {x >= 0 : A x = b}.

#include <span>
#include <vector>

namespace mlemsparse::lp {

struct FeasibilityResult {
  enum class Status { feasible, infeasible, iteration_limit };

  Status status = Status::iteration_limit;
  /// Basic solution (feasible case), length n.
  std::vector<double> x;
  /// Farkas vector (infeasible case), length m: A^T y >= 0 and <y, b> < 0,
  /// scaled to unit max-norm.
  std::vector<double> farkas;
  double phase_one_objective = 0.0;
  int pivots = 0;
};

/// Dense tableau simplex with Bland's rule on
///   min sum(s)  s.t.  A x + s = b,  x, s >= 0
/// (rows with negative b are negated first). `a` is row-major m x n.
/// Arithmetic is carried out in long double.
FeasibilityResult find_feasible_point(std::span<const double> a, std::size_t m,
                                      std::size_t n, std::span<const double> b,
                                      double feasibility_tol = 1e-12,
                                      int max_pivots = 0);

}  // namespace mlemsparse::lp
