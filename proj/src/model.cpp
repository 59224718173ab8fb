#include "mlemsparse/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mlemsparse {

namespace {

void check_grid_args(int nx, int ny, std::array<double, 2> spacing) {
  if (nx < 1 || ny < 1) {
    throw ParameterError("grid dimensions must be positive");
  }
  if (!(spacing[0] > 0.0) || !(spacing[1] > 0.0)) {
    throw ParameterError("grid spacing must be positive");
  }
}

}  // namespace

// ---------------------------------------------------------------- Grid

Grid::Grid(int nx, int ny, std::array<double, 2> spacing,
           std::array<double, 2> origin)
    : nx_(nx), ny_(ny), spacing_(spacing), origin_(origin) {
  check_grid_args(nx, ny, spacing);
  fov_.assign(size(), 1);
}

Grid::Grid(int nx, int ny, std::array<double, 2> spacing,
           std::array<double, 2> origin, std::vector<std::uint8_t> fov_mask)
    : nx_(nx), ny_(ny), spacing_(spacing), origin_(origin),
      fov_(std::move(fov_mask)) {
  check_grid_args(nx, ny, spacing);
  if (fov_.size() != size()) {
    throw DimensionError("field-of-view mask has " +
                         std::to_string(fov_.size()) + " entries, expected " +
                         std::to_string(size()));
  }
  if (fov_count() == 0) {
    throw EmptyFieldOfViewError("field-of-view mask is empty");
  }
}

std::shared_ptr<const Grid> Grid::line(int r) {
  return std::make_shared<const Grid>(r, 1);
}

std::shared_ptr<const Grid> Grid::square(int n, double extent) {
  if (!(extent > 0.0)) throw ParameterError("grid extent must be positive");
  const double h = extent / n;
  return std::make_shared<const Grid>(n, n, std::array{h, h},
                                      std::array{0.5 * h, 0.5 * h});
}

std::array<double, 2> Grid::point(std::size_t j) const {
  auto [ix, iy] = coords(j);
  return {origin_[0] + ix * spacing_[0], origin_[1] + iy * spacing_[1]};
}

std::array<double, 2> Grid::center() const {
  return {origin_[0] + 0.5 * (nx_ - 1) * spacing_[0],
          origin_[1] + 0.5 * (ny_ - 1) * spacing_[1]};
}

std::size_t Grid::fov_count() const {
  return static_cast<std::size_t>(std::count(fov_.begin(), fov_.end(), 1));
}

std::shared_ptr<const Grid> Grid::with_mask(
    std::vector<std::uint8_t> mask) const {
  return std::make_shared<const Grid>(nx_, ny_, spacing_, origin_,
                                      std::move(mask));
}

bool Grid::same_layout(const Grid& other) const {
  return nx_ == other.nx_ && ny_ == other.ny_ &&
         spacing_ == other.spacing_ && origin_ == other.origin_;
}

// ---------------------------------------------------------------- Measure

Measure::Measure(GridPtr grid, Vector weights)
    : grid_(std::move(grid)), weights_(std::move(weights)) {
  if (!grid_) throw ParameterError("measure needs a grid");
  if (weights_.size() != grid_->size()) {
    throw DimensionError("measure has " + std::to_string(weights_.size()) +
                         " weights for a grid of " +
                         std::to_string(grid_->size()) + " nodes");
  }
  for (std::size_t j = 0; j < weights_.size(); ++j) {
    const double w = weights_[j];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DomainError("measure weight " + std::to_string(j) +
                        " is negative or not finite");
    }
    if (w != 0.0 && !grid_->in_fov(j)) {
      throw DomainError("measure has mass at node " + std::to_string(j) +
                        " outside the field of view");
    }
  }
}

Measure Measure::zeros(GridPtr grid) {
  Vector w(grid->size(), 0.0);
  return Measure(std::move(grid), std::move(w));
}

Measure Measure::uniform(GridPtr grid, double mass) {
  const double n = static_cast<double>(grid->fov_count());
  Vector w(grid->size(), 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (grid->in_fov(j)) w[j] = mass / n;
  }
  return Measure(std::move(grid), std::move(w));
}

double Measure::mass() const {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

std::size_t Measure::support_size() const {
  return static_cast<std::size_t>(std::count_if(
      weights_.begin(), weights_.end(), [](double w) { return w > 0.0; }));
}

Measure Measure::normalized() const {
  const double total = mass();
  if (!(total > 0.0)) throw DomainError("cannot normalize a zero measure");
  Vector w = weights_;
  for (double& v : w) v /= total;
  return Measure(grid_, std::move(w));
}

Measure Measure::on_grid(GridPtr grid) const {
  if (!grid->same_layout(*grid_)) {
    throw DimensionError("grid layouts differ");
  }
  Vector w = weights_;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (!grid->in_fov(j)) w[j] = 0.0;
  }
  return Measure(std::move(grid), std::move(w));
}

// ---------------------------------------------------------------- ForwardOperator

ForwardOperator::ForwardOperator(GridPtr grid, const std::vector<Vector>& rows,
                                 bool normalized)
    : grid_(std::move(grid)), m_(rows.size()) {
  if (!grid_) throw ParameterError("operator needs a grid");
  r_ = grid_->size();
  if (m_ == 0) throw DimensionError("operator has no detectors");
  // Stage as dense, then let finish() choose the storage.
  values_.assign(m_ * r_, 0.0);
  for (std::size_t i = 0; i < m_; ++i) {
    if (rows[i].size() != r_) {
      throw DimensionError("operator row " + std::to_string(i) + " has " +
                           std::to_string(rows[i].size()) +
                           " entries, expected " + std::to_string(r_));
    }
    std::copy(rows[i].begin(), rows[i].end(), values_.begin() + i * r_);
  }
  sparse_ = false;
  finish(normalized);
}

ForwardOperator::ForwardOperator(GridPtr grid, std::size_t n_rows,
                                 const std::vector<std::vector<Entry>>& rows,
                                 bool normalized)
    : grid_(std::move(grid)), m_(n_rows) {
  if (!grid_) throw ParameterError("operator needs a grid");
  r_ = grid_->size();
  if (m_ == 0) throw DimensionError("operator has no detectors");
  if (rows.size() != m_) throw DimensionError("row count mismatch");
  row_ptr_.assign(m_ + 1, 0);
  for (std::size_t i = 0; i < m_; ++i) {
    auto entries = rows[i];
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.col < b.col; });
    for (std::size_t p = 0; p < entries.size(); ++p) {
      if (entries[p].col >= r_) {
        throw DimensionError("column index " + std::to_string(entries[p].col) +
                             " out of range in row " + std::to_string(i));
      }
      if (p > 0 && entries[p].col == entries[p - 1].col) {
        throw DimensionError("duplicate column " +
                             std::to_string(entries[p].col) + " in row " +
                             std::to_string(i));
      }
      if (entries[p].value == 0.0) continue;
      col_idx_.push_back(entries[p].col);
      values_.push_back(entries[p].value);
    }
    row_ptr_[i + 1] = col_idx_.size();
  }
  sparse_ = true;
  finish(normalized);
}

void ForwardOperator::finish(bool normalized) {
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError("operator entries must be finite and nonnegative");
    }
  }
  // Pick the storage layout by density.
  const std::size_t nnz = nonzeros();
  const bool want_sparse = 4 * nnz < m_ * r_;
  if (want_sparse && !sparse_) {
    std::vector<std::size_t> ptr(m_ + 1, 0);
    std::vector<std::uint32_t> idx;
    Vector val;
    idx.reserve(nnz);
    val.reserve(nnz);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < r_; ++j) {
        const double v = values_[i * r_ + j];
        if (v != 0.0) {
          idx.push_back(static_cast<std::uint32_t>(j));
          val.push_back(v);
        }
      }
      ptr[i + 1] = idx.size();
    }
    row_ptr_ = std::move(ptr);
    col_idx_ = std::move(idx);
    values_ = std::move(val);
    sparse_ = true;
  } else if (!want_sparse && sparse_) {
    Vector dense(m_ * r_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        dense[i * r_ + col_idx_[p]] = values_[p];
      }
    }
    values_ = std::move(dense);
    row_ptr_.clear();
    col_idx_.clear();
    sparse_ = false;
  }

  normalized_ = normalized;
  if (normalized_) {
    const Vector sums = column_sums();
    for (std::size_t j = 0; j < r_; ++j) {
      if (!grid_->in_fov(j)) continue;
      if (std::abs(sums[j] - 1.0) > 1e-12) {
        std::ostringstream msg;
        msg << "operator flagged normalized but column " << j << " sums to "
            << sums[j];
        throw DomainError(msg.str());
      }
    }
  }
}

std::size_t ForwardOperator::nonzeros() const {
  if (sparse_) return values_.size();
  return static_cast<std::size_t>(std::count_if(
      values_.begin(), values_.end(), [](double v) { return v != 0.0; }));
}

double ForwardOperator::at(std::size_t i, std::size_t j) const {
  if (i >= m_ || j >= r_) throw DimensionError("operator index out of range");
  if (!sparse_) return values_[i * r_ + j];
  const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
  if (it == last || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

Vector ForwardOperator::dense_row(std::size_t i) const {
  Vector row(r_, 0.0);
  for_each_in_row(i, [&](std::size_t j, double v) { row[j] = v; });
  return row;
}

std::vector<ForwardOperator::Entry> ForwardOperator::row_entries(
    std::size_t i) const {
  std::vector<Entry> out;
  for_each_in_row(i, [&](std::size_t j, double v) {
    out.push_back({static_cast<std::uint32_t>(j), v});
  });
  return out;
}

Vector ForwardOperator::column_sums() const {
  Vector sums(r_, 0.0);
  for (std::size_t i = 0; i < m_; ++i) {
    for_each_in_row(i, [&](std::size_t j, double v) { sums[j] += v; });
  }
  return sums;
}

// ---------------------------------------------------------------- DataVector

DataVector::DataVector(Vector y, std::vector<std::uint64_t> counts)
    : y_(std::move(y)), counts_(std::move(counts)) {
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (y_[i] > 0.0) support_.push_back(i);
  }
}

DataVector DataVector::from_counts(std::vector<std::uint64_t> counts) {
  if (counts.empty()) throw DimensionError("empty count vector");
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) {
    throw DomainError("all counts are zero; frequencies are undefined");
  }
  Vector y(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    y[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return DataVector(std::move(y), std::move(counts));
}

DataVector DataVector::from_frequencies(Vector y) {
  if (y.empty()) throw DimensionError("empty frequency vector");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0) || !std::isfinite(y[i])) {
      throw DomainError("frequency " + std::to_string(i) +
                        " is negative or not finite");
    }
    total += y[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "frequencies sum to " << total << ", expected 1";
    throw DomainError(msg.str());
  }
  return DataVector(std::move(y), {});
}

std::uint64_t DataVector::total_counts() const {
  std::uint64_t total = 0;
  for (auto c : counts_) total += c;
  return total;
}

// ---------------------------------------------------------------- products

Vector apply(const ForwardOperator& op, std::span<const double> weights) {
  if (weights.size() != op.cols()) {
    throw DimensionError("measure has " + std::to_string(weights.size()) +
                         " atoms, operator expects " +
                         std::to_string(op.cols()));
  }
  Vector out(op.rows(), 0.0);
  for (std::size_t i = 0; i < op.rows(); ++i) {
    double acc = 0.0;
    op.for_each_in_row(i, [&](std::size_t j, double v) { acc += v * weights[j]; });
    out[i] = acc;
  }
  return out;
}

Vector apply(const ForwardOperator& op, const Measure& mu) {
  if (!op.grid()->same_layout(*mu.grid())) {
    throw DimensionError("measure and operator live on different grids");
  }
  return apply(op, std::span<const double>(mu.weights()));
}

Vector adjoint_apply(const ForwardOperator& op, std::span<const double> w) {
  if (w.size() != op.rows()) {
    throw DimensionError("dual vector has " + std::to_string(w.size()) +
                         " entries, operator has " +
                         std::to_string(op.rows()) + " detectors");
  }
  Vector out(op.cols(), 0.0);
  for (std::size_t i = 0; i < op.rows(); ++i) {
    const double wi = w[i];
    if (wi == 0.0) continue;
    op.for_each_in_row(i, [&](std::size_t j, double v) { out[j] += wi * v; });
  }
  return out;
}

NormalizedOperator normalize_operator(const ForwardOperator& op) {
  const Grid& grid = *op.grid();
  Vector sums = op.column_sums();
  std::vector<std::uint8_t> mask(grid.size(), 0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (grid.in_fov(j) && sums[j] > 0.0) {
      mask[j] = 1;
    } else {
      sums[j] = 0.0;
    }
  }
  if (std::none_of(mask.begin(), mask.end(), [](auto v) { return v != 0; })) {
    throw EmptyFieldOfViewError(
        "no grid point is seen by any detector; the field of view is empty");
  }
  auto new_grid = grid.with_mask(mask);

  std::vector<std::vector<ForwardOperator::Entry>> rows(op.rows());
  for (std::size_t i = 0; i < op.rows(); ++i) {
    op.for_each_in_row(i, [&](std::size_t j, double v) {
      if (mask[j]) {
        rows[i].push_back({static_cast<std::uint32_t>(j), v / sums[j]});
      }
    });
  }
  return {ForwardOperator(std::move(new_grid), op.rows(), rows, true),
          std::move(sums)};
}

// ---------------------------------------------------------------- projector

double tangential_spacing(const Grid& grid, int n_tangential) {
  const double wx = grid.nx() * grid.spacing()[0];
  const double wy = grid.ny() * grid.spacing()[1];
  return std::hypot(wx, wy) / n_tangential;
}

NormalizedOperator build_parallel_beam(const GridPtr& grid,
                                       const ParallelBeamGeometry& geometry) {
  if (geometry.n_views < 1 || geometry.n_tangential < 1) {
    throw ParameterError("projector needs at least one view and one bin");
  }
  if (geometry.supersampling < 1) {
    throw ParameterError("supersampling must be at least 1");
  }
  const double ds = tangential_spacing(*grid, geometry.n_tangential);
  const double width = geometry.strip_width.value_or(ds);
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw ParameterError("strip width must be positive");
  }
  const int nv = geometry.n_views;
  const int nt = geometry.n_tangential;
  const int ss = geometry.supersampling;
  const double half_span = 0.5 * nt * ds;
  const double half_width = 0.5 * width;
  const auto [hx, hy] = grid->spacing();
  const auto c = grid->center();
  const double sample_weight = 1.0 / (ss * ss);

  std::vector<double> cos_v(nv), sin_v(nv);
  for (int v = 0; v < nv; ++v) {
    const double theta = std::numbers::pi * v / nv;
    cos_v[v] = std::cos(theta);
    sin_v[v] = std::sin(theta);
  }

  const std::size_t m = static_cast<std::size_t>(nv) * nt;
  std::vector<std::vector<ForwardOperator::Entry>> rows(m);
  std::vector<double> acc(nt, 0.0);
  for (std::size_t j = 0; j < grid->size(); ++j) {
    if (!grid->in_fov(j)) continue;
    const auto p = grid->point(j);
    for (int v = 0; v < nv; ++v) {
      std::fill(acc.begin(), acc.end(), 0.0);
      int t_lo = nt, t_hi = -1;
      for (int sx = 0; sx < ss; ++sx) {
        const double x = p[0] - c[0] + hx * ((sx + 0.5) / ss - 0.5);
        for (int sy = 0; sy < ss; ++sy) {
          const double y = p[1] - c[1] + hy * ((sy + 0.5) / ss - 0.5);
          const double s = x * cos_v[v] + y * sin_v[v] + half_span;
          // Strip t covers [(t + 0.5) ds - w/2, (t + 0.5) ds + w/2).
          const int first = std::max(
              0, static_cast<int>(std::floor((s - half_width) / ds - 0.5)) + 1);
          const int last = std::min(
              nt - 1, static_cast<int>(std::floor((s + half_width) / ds - 0.5)));
          for (int t = first; t <= last; ++t) {
            acc[t] += sample_weight;
            t_lo = std::min(t_lo, t);
            t_hi = std::max(t_hi, t);
          }
        }
      }
      for (int t = t_lo; t <= t_hi; ++t) {
        if (acc[t] > 0.0) {
          rows[static_cast<std::size_t>(v) * nt + t].push_back(
              {static_cast<std::uint32_t>(j), acc[t]});
        }
      }
    }
  }
  return normalize_operator(ForwardOperator(grid, m, rows, false));
}

// ---------------------------------------------------------------- phantoms

double GaussianBump::value(std::array<double, 2> p) const {
  const double u = (p[0] - center[0]) / sigma[0];
  const double v = (p[1] - center[1]) / sigma[1];
  return height * std::exp(-0.5 * (u * u + v * v));
}

std::array<double, 3> GaussianBump::hessian(std::array<double, 2> p) const {
  const double g = value(p);
  const double sx2 = sigma[0] * sigma[0];
  const double sy2 = sigma[1] * sigma[1];
  const double dx = p[0] - center[0];
  const double dy = p[1] - center[1];
  return {g * (dx * dx / (sx2 * sx2) - 1.0 / sx2), g * dx * dy / (sx2 * sy2),
          g * (dy * dy / (sy2 * sy2) - 1.0 / sy2)};
}

double two_bumps_value(const PhantomSpec& spec, std::array<double, 2> p) {
  return spec.base + spec.bumps[0].value(p) + spec.bumps[1].value(p);
}

std::array<double, 3> two_bumps_hessian(const PhantomSpec& spec,
                                        std::array<double, 2> p) {
  const auto a = spec.bumps[0].hessian(p);
  const auto b = spec.bumps[1].hessian(p);
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

Measure make_phantom(const GridPtr& grid, const PhantomSpec& spec) {
  Vector w(grid->size(), 0.0);
  switch (spec.kind) {
    case PhantomSpec::Kind::annulus: {
      const auto c = spec.center_set ? spec.center : grid->center();
      const double half_x = 0.5 * grid->nx() * grid->spacing()[0];
      const double half_y = 0.5 * grid->ny() * grid->spacing()[1];
      if (spec.inner_radius < 0.0 || !(spec.outer_radius > spec.inner_radius)) {
        throw ParameterError("annulus needs 0 <= inner < outer radius");
      }
      if (spec.outer_radius > std::min(half_x, half_y)) {
        throw ParameterError("annulus outer radius exceeds the grid bounds");
      }
      if (!(spec.value >= 0.0)) throw ParameterError("annulus value must be >= 0");
      for (std::size_t j = 0; j < w.size(); ++j) {
        if (!grid->in_fov(j)) continue;
        const auto p = grid->point(j);
        const double rad = std::hypot(p[0] - c[0], p[1] - c[1]);
        if (rad >= spec.inner_radius && rad <= spec.outer_radius) {
          w[j] = spec.value;
        }
      }
      break;
    }
    case PhantomSpec::Kind::uniform:
      if (!(spec.value >= 0.0)) throw ParameterError("uniform value must be >= 0");
      for (std::size_t j = 0; j < w.size(); ++j) {
        if (grid->in_fov(j)) w[j] = spec.value;
      }
      break;
    case PhantomSpec::Kind::two_bumps:
      for (const auto& b : spec.bumps) {
        if (!(b.sigma[0] > 0.0) || !(b.sigma[1] > 0.0) || !(b.height >= 0.0)) {
          throw ParameterError("bumps need positive widths and nonnegative heights");
        }
      }
      if (!(spec.base >= 0.0)) throw ParameterError("bump base must be >= 0");
      for (std::size_t j = 0; j < w.size(); ++j) {
        if (grid->in_fov(j)) w[j] = two_bumps_value(spec, grid->point(j));
      }
      break;
  }
  return Measure(grid, std::move(w));
}

std::string to_string(PhantomSpec::Kind kind) {
  switch (kind) {
    case PhantomSpec::Kind::annulus: return "annulus";
    case PhantomSpec::Kind::uniform: return "uniform";
    case PhantomSpec::Kind::two_bumps: return "two-bumps";
  }
  return "unknown";
}

PhantomSpec::Kind phantom_kind_from_string(const std::string& name) {
  if (name == "annulus") return PhantomSpec::Kind::annulus;
  if (name == "uniform") return PhantomSpec::Kind::uniform;
  if (name == "two-bumps" || name == "two_bumps") {
    return PhantomSpec::Kind::two_bumps;
  }
  throw ParameterError("unknown phantom kind '" + name + "'");
}

}  // namespace mlemsparse
