#include "mlemsparse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <thread>

#include "mlemsparse/divergence.hpp"
#include "mlemsparse/rng.hpp"

namespace mlemsparse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double exp_or_inf(double log_value) {
  if (log_value > 709.0) return kInf;
  return std::exp(log_value);
}

void check_bound_args(int m, double epsilon) {
  if (m < 1) throw ParameterError("bounds need m >= 1");
  if (!(epsilon >= 0.0)) throw ParameterError("bounds need epsilon >= 0");
}

// log(1 + x^m) from log x, without overflow.
double log1p_pow(double log_x, int m) {
  const double lx = m * log_x;
  if (lx > 0.0) return lx + std::log1p(std::exp(-lx));
  return std::log1p(std::exp(lx));
}

// x * eps with 0 * inf taken as 0.
double rate(double x, double eps) { return eps == 0.0 ? 0.0 : x * eps; }

}  // namespace

DoseModel make_dose_model(const ForwardOperator& op, const Measure& mu_real) {
  DoseModel model{mu_real, apply(op, mu_real), 0.0, {}};
  model.gamma_total = std::accumulate(model.gamma.begin(), model.gamma.end(), 0.0);
  if (!(model.gamma_total > 0.0)) {
    throw DomainError("dose model: the ground truth is invisible to every detector");
  }
  model.y_real = model.gamma;
  for (double& v : model.y_real) v /= model.gamma_total;
  return model;
}

std::vector<std::uint64_t> sample_counts(const DoseModel& model, double t,
                                         std::uint64_t seed,
                                         std::uint64_t stream) {
  if (!(t > 0.0) || !std::isfinite(t)) throw ParameterError("dose t must be positive");
  rng::CounterStream s(seed, stream);
  std::vector<std::uint64_t> counts(model.gamma.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    counts[i] = rng::poisson(s, model.gamma[i] * t);
  }
  return counts;
}

void BoundInputs::validate() const {
  check_bound_args(m, epsilon);
  const bool has_n = n.has_value();
  const bool has_dose = t.has_value() && gamma_total.has_value();
  const bool partial_dose = t.has_value() != gamma_total.has_value();
  if (has_n == has_dose || partial_dose) {
    throw ParameterError("give either n, or both t and gamma_total");
  }
  if (has_n && !(*n >= 0.0)) throw ParameterError("n must be >= 0");
  if (has_dose && (!(*t > 0.0) || !(*gamma_total > 0.0))) {
    throw ParameterError("t and gamma_total must be positive");
  }
}

BoundPair bound_conditioned(int m, double epsilon, double n) {
  check_bound_args(m, epsilon);
  if (!(n >= 0.0)) throw ParameterError("n must be >= 0");
  BoundPair out;
  out.sanov = exp_or_inf(m * std::log1p(n) - rate(n, epsilon));
  out.alt = exp_or_inf(std::log(2.0 * m) - rate(n, epsilon) / m);
  out.sanov_vacuous = out.sanov >= 1.0;
  out.alt_vacuous = out.alt >= 1.0;
  return out;
}

BoundPair bound_dose(int m, double epsilon, double t, double gamma_total) {
  check_bound_args(m, epsilon);
  if (!(t > 0.0) || !(gamma_total > 0.0)) {
    throw ParameterError("t and gamma_total must be positive");
  }
  const double log_gt = std::log(gamma_total) + std::log(t);
  const double gt = gamma_total * t;
  const BellConstant c = bound_bell_constant(m);
  BoundPair out;
  out.sanov = exp_or_inf(c.log_value + log1p_pow(log_gt, m) - rate(gt, epsilon));
  out.alt = exp_or_inf(std::log(2.0 * m) - rate(gt, epsilon) / m);
  out.sanov_vacuous = out.sanov >= 1.0;
  out.alt_vacuous = out.alt >= 1.0;
  return out;
}

BoundPair bounds(const BoundInputs& in) {
  in.validate();
  if (in.n) return bound_conditioned(in.m, in.epsilon, *in.n);
  return bound_dose(in.m, in.epsilon, *in.t, *in.gamma_total);
}

std::uint64_t bell_number(int n) {
  if (n < 0 || n > 25) throw CapabilityError("bell_number: n must lie in [0, 25]");
  // Bell triangle: each row starts with the last entry of the previous one.
  std::vector<unsigned __int128> row{1};
  for (int r = 1; r <= n; ++r) {
    std::vector<unsigned __int128> next{row.back()};
    for (auto v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return static_cast<std::uint64_t>(row.front());
}

double bell_upper_bound_log(int m) {
  if (m < 1) throw ParameterError("m must be >= 1");
  const double k = m + 1.0;
  return k * std::log(0.792 * k / std::log(m + 2.0));
}

BellConstant bound_bell_constant(int m) {
  if (m < 1) throw ParameterError("m must be >= 1");
  BellConstant c;
  if (m + 1 <= 25) {
    c.exact = true;
    c.bell = bell_number(m + 1);
    c.value = static_cast<double>(c.bell);
    c.log_value = std::log(c.value);
  } else {
    c.log_value = bell_upper_bound_log(m);
    c.value = exp_or_inf(c.log_value);
  }
  return c;
}

WilsonInterval wilson_interval(std::uint64_t successes, std::uint64_t trials,
                               double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::vector<EscapeRecord> estimate_escape_probability(
    const ForwardOperator& op, const DoseModel& model,
    const std::vector<double>& t_grid, std::uint64_t trials, std::uint64_t seed,
    std::optional<double> epsilon, int threads) {
  if (model.gamma.size() != op.rows()) {
    throw DimensionError("dose model and operator disagree on the detector count");
  }
  OracleOptions opts;
  opts.classify_interior = false;
  if (op.rows() * op.cols() > opts.max_size) {
    throw CapabilityError("montecarlo: instance exceeds the oracle size guard");
  }
  threads = std::max(1, threads);
  const int m = static_cast<int>(op.rows());

  std::vector<EscapeRecord> out;
  for (std::size_t d = 0; d < t_grid.size(); ++d) {
    const double t = t_grid[d];
    if (!(t > 0.0)) throw ParameterError("doses must be positive");
    EscapeRecord rec;
    rec.t = t;
    rec.trials = trials;
    rec.epsilon = epsilon.value_or(kNaN);

    struct Tally {
      std::uint64_t outside = 0, all_zero = 0, undecided = 0;
    };
    std::vector<Tally> tallies(static_cast<std::size_t>(threads));
    auto worker = [&](int w) {
      Tally& tally = tallies[static_cast<std::size_t>(w)];
      for (std::uint64_t s = static_cast<std::uint64_t>(w); s < trials;
           s += static_cast<std::uint64_t>(threads)) {
        const auto counts = sample_counts(
            model, t, seed,
            rng::stream_id(static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(s)));
        std::uint64_t total = 0;
        for (auto c : counts) total += c;
        if (total == 0) {
          ++tally.all_zero;
          ++tally.outside;
          continue;
        }
        Vector y_hat(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) {
          y_hat[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
        }
        const ConeVerdict v = cone_membership_oracle(op, y_hat, opts);
        if (v.status == ConeVerdict::Status::outside) {
          ++tally.outside;
        } else if (v.status == ConeVerdict::Status::undecided) {
          ++tally.undecided;
        }
      }
    };
    if (threads == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
      for (auto& th : pool) th.join();
    }
    for (const auto& tl : tallies) {
      rec.outside += tl.outside;
      rec.all_zero += tl.all_zero;
      rec.undecided += tl.undecided;
    }
    if (trials > 0) {
      rec.p_hat = static_cast<double>(rec.outside) / static_cast<double>(trials);
      rec.all_zero_fraction =
          static_cast<double>(rec.all_zero) / static_cast<double>(trials);
    }
    rec.wilson = wilson_interval(rec.outside, trials);
    if (epsilon) {
      rec.bounds = bound_dose(m, *epsilon, t, model.gamma_total);
    } else {
      rec.bounds = {kNaN, kNaN, false, false};
    }
    out.push_back(rec);
  }
  return out;
}

double epsilon_by_search(const ForwardOperator& op, std::span<const double> y_real,
                         double grid_resolution) {
  const std::size_t m = op.rows();
  if (m > 4) {
    throw CapabilityError("epsilon_by_search: simplex search supports m <= 4, got " +
                          std::to_string(m));
  }
  if (y_real.size() != m) throw DimensionError("epsilon_by_search: size mismatch");
  if (!(grid_resolution > 0.0 && grid_resolution <= 1.0)) {
    throw ParameterError("grid_resolution must lie in (0, 1]");
  }
  OracleOptions opts;
  opts.classify_interior = false;
  auto outside = [&](std::span<const double> q) {
    return cone_membership_oracle(op, q, opts).status == ConeVerdict::Status::outside;
  };
  if (outside(y_real)) return 0.0;

  const int steps = static_cast<int>(std::ceil(1.0 / grid_resolution - 1e-9));
  struct Candidate {
    double value;
    Vector q;
  };
  std::vector<Candidate> found;
  std::vector<int> parts(m, 0);
  // Enumerate compositions of `steps` into m nonnegative parts.
  auto visit = [&](auto&& self, std::size_t pos, int left) -> void {
    if (pos + 1 == m) {
      parts[pos] = left;
      Vector q(m);
      for (std::size_t i = 0; i < m; ++i) q[i] = static_cast<double>(parts[i]) / steps;
      if (outside(q)) found.push_back({kl_vec(q, y_real), std::move(q)});
      return;
    }
    for (int v = 0; v <= left; ++v) {
      parts[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  visit(visit, 0, steps);
  if (found.empty()) return kInf;

  std::sort(found.begin(), found.end(),
            [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
  double best = found.front().value;
  const std::size_t n_refine = std::min<std::size_t>(found.size(), 16);
  Vector p(m);
  for (std::size_t c = 0; c < n_refine; ++c) {
    const Vector& q = found[c].q;
    // y_real is inside, q outside: bisect for the crossing point.
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      for (std::size_t i = 0; i < m; ++i) p[i] = y_real[i] + mid * (q[i] - y_real[i]);
      if (outside(p)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    for (std::size_t i = 0; i < m; ++i) p[i] = y_real[i] + hi * (q[i] - y_real[i]);
    best = std::min(best, kl_vec(p, y_real));
  }
  return best;
}

const char* escape_csv_header() {
  return "t,trials,p_hat,wilson_lo,wilson_hi,bound_sanov,bound_alt,epsilon,"
         "all_zero_fraction";
}

std::string escape_csv_row(const EscapeRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.17g,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                r.t, static_cast<unsigned long long>(r.trials), r.p_hat, r.wilson.lo,
                r.wilson.hi, r.bounds.sanov, r.bounds.alt, r.epsilon,
                r.all_zero_fraction);
  return buf;
}

}  // namespace mlemsparse
