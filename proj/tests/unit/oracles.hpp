#pragma once

// Reference evaluations written independently of the library: plain loops
// over dense matrices, long double accumulation where it helps.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline Vec matvec(const Matrix& a, const Vec& x) {
  Vec out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    long double acc = 0.0L;
    for (std::size_t j = 0; j < x.size(); ++j) acc += (long double)a[i][j] * x[j];
    out[i] = static_cast<double>(acc);
  }
  return out;
}

inline Vec rmatvec(const Matrix& a, const Vec& w) {
  Vec out(a.empty() ? 0 : a[0].size(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (long double)a[i][j] * w[i];
    out[j] = static_cast<double>(acc);
  }
  return out;
}

/// sum (v - u - u log(v/u)), 0 log 0 = 0.
inline double kl(const Vec& u, const Vec& v) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] > 0.0 && v[i] == 0.0) return std::numeric_limits<double>::infinity();
    acc += (long double)v[i] - u[i];
    if (u[i] > 0.0) acc -= (long double)u[i] * std::log((long double)v[i] / u[i]);
  }
  return static_cast<double>(acc);
}

inline double loss(const Matrix& a, const Vec& y, const Vec& mu) {
  const Vec w = matvec(a, mu);
  long double acc = 0.0L;
  for (double v : mu) acc += v;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) continue;
    if (w[i] == 0.0) return std::numeric_limits<double>::infinity();
    acc -= (long double)y[i] * std::log((long double)w[i]);
  }
  return static_cast<double>(acc);
}

inline Vec mlem_step(const Matrix& a, const Vec& y, const Vec& mu) {
  const Vec w = matvec(a, mu);
  Vec out(mu.size(), 0.0);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] > 0.0) s += (long double)y[i] * a[i][j] / w[i];
    }
    out[j] = static_cast<double>(mu[j] * s);
  }
  return out;
}

/// Random m x r matrix with nonnegative entries, unit column sums and no
/// empty row.
inline Matrix random_normalized(std::mt19937_64& rng, std::size_t m, std::size_t r,
                                double zero_fraction = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix a(m, Vec(r, 0.0));
  bool empty_row = true;
  while (empty_row) {
    for (std::size_t j = 0; j < r; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        a[i][j] = u(rng) < zero_fraction ? 0.0 : u(rng);
        s += a[i][j];
      }
      if (s == 0.0) {
        a[j % m][j] = 1.0;
        s = 1.0;
      }
      for (std::size_t i = 0; i < m; ++i) a[i][j] /= s;
    }
    empty_row = false;
    for (const auto& row : a) {
      double s = 0.0;
      for (double v : row) s += v;
      empty_row = empty_row || s == 0.0;
    }
  }
  return a;
}

/// Uniform point on the probability simplex.
inline Vec random_simplex(std::mt19937_64& rng, std::size_t m) {
  std::exponential_distribution<double> e(1.0);
  Vec y(m);
  double s = 0.0;
  for (double& v : y) s += (v = e(rng));
  for (double& v : y) v /= s;
  return y;
}

/// Bell numbers B_0..B_n from the recurrence B_{k+1} = sum C(k, i) B_i.
inline std::vector<unsigned __int128> bell(int n) {
  std::vector<unsigned __int128> b(n + 1, 0);
  b[0] = 1;
  for (int k = 0; k < n; ++k) {
    unsigned __int128 c = 1, acc = 0;
    for (int i = 0; i <= k; ++i) {
      acc += c * b[i];
      c = c * (k - i) / (i + 1);
    }
    b[k + 1] = acc;
  }
  return b;
}

}  // namespace oracle
