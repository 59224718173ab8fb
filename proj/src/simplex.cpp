#include "mlemsparse/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mlemsparse/errors.hpp"

namespace mlemsparse::lp {

namespace {

using Real = long double;

constexpr Real kReducedCostTol = 1e-13L;
constexpr Real kPivotTol = 1e-12L;

}  // namespace

FeasibilityResult find_feasible_point(std::span<const double> a, std::size_t m,
                                      std::size_t n, std::span<const double> b,
                                      double feasibility_tol, int max_pivots) {
  if (a.size() != m * n || b.size() != m) {
    throw DimensionError("find_feasible_point: inconsistent sizes");
  }
  if (max_pivots <= 0) max_pivots = static_cast<int>(50 * (m + n) + 1000);

  const std::size_t cols = n + m;  // structural + artificial
  const std::size_t width = cols + 1;
  // Rows 0..m-1 are constraints, row m is the reduced-cost row; the last
  // column holds the right-hand side (and minus the objective in row m).
  std::vector<Real> t((m + 1) * width, 0.0L);
  auto at = [&](std::size_t r, std::size_t c) -> Real& { return t[r * width + c]; };

  std::vector<Real> sign(m, 1.0L);
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    sign[i] = b[i] < 0.0 ? -1.0L : 1.0L;
    for (std::size_t j = 0; j < n; ++j) at(i, j) = sign[i] * a[i * n + j];
    at(i, n + i) = 1.0L;
    at(i, cols) = sign[i] * b[i];
    basis[i] = n + i;
  }
  for (std::size_t j = 0; j < n; ++j) {
    Real acc = 0.0L;
    for (std::size_t i = 0; i < m; ++i) acc += at(i, j);
    at(m, j) = -acc;
  }
  {
    Real acc = 0.0L;
    for (std::size_t i = 0; i < m; ++i) acc += at(i, cols);
    at(m, cols) = -acc;
  }

  FeasibilityResult res;
  bool optimal = false;
  while (res.pivots < max_pivots) {
    // Bland: lowest-index column with a negative reduced cost enters.
    std::size_t enter = cols;
    for (std::size_t j = 0; j < cols; ++j) {
      if (at(m, j) < -kReducedCostTol) {
        enter = j;
        break;
      }
    }
    if (enter == cols) {
      optimal = true;
      break;
    }
    // Ratio test; ties go to the lowest-index basic variable.
    std::size_t leave = m;
    Real best = std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      const Real p = at(i, enter);
      if (p <= kPivotTol) continue;
      const Real ratio = at(i, cols) / p;
      if (ratio < best || (ratio == best && basis[i] < basis[leave])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave == m) {
      // Unbounded direction cannot occur in phase one (objective >= 0);
      // treat it as numerical breakdown.
      break;
    }
    const Real piv = at(leave, enter);
    for (std::size_t c = 0; c < width; ++c) at(leave, c) /= piv;
    for (std::size_t r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const Real f = at(r, enter);
      if (f == 0.0L) continue;
      for (std::size_t c = 0; c < width; ++c) at(r, c) -= f * at(leave, c);
      at(r, enter) = 0.0L;
    }
    basis[leave] = enter;
    ++res.pivots;
  }

  if (!optimal) {
    res.status = FeasibilityResult::Status::iteration_limit;
    return res;
  }

  const Real objective = -at(m, cols);
  res.phase_one_objective = static_cast<double>(objective);
  Real scale = 1.0L;
  for (std::size_t i = 0; i < m; ++i) scale += std::abs(static_cast<Real>(b[i]));
  if (objective <= static_cast<Real>(feasibility_tol) * scale) {
    res.status = FeasibilityResult::Status::feasible;
    res.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < n) {
        res.x[basis[i]] = static_cast<double>(std::max(at(i, cols), 0.0L));
      }
    }
    return res;
  }

  // Simplex multipliers from the artificial columns: rc(s_i) = 1 - pi_i.
  // The Farkas vector for the original rows is -sign_i * pi_i.
  res.status = FeasibilityResult::Status::infeasible;
  std::vector<Real> lam(m);
  Real norm = 0.0L;
  for (std::size_t i = 0; i < m; ++i) {
    const Real pi = 1.0L - at(m, n + i);
    lam[i] = -sign[i] * pi;
    norm = std::max(norm, std::abs(lam[i]));
  }
  res.farkas.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    res.farkas[i] = static_cast<double>(norm > 0.0L ? lam[i] / norm : lam[i]);
  }
  return res;
}

}  // namespace mlemsparse::lp
