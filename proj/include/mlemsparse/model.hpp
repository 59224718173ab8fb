#pragma once

// Grid geometry, discretized measures, forward operators and phantoms.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlemsparse/errors.hpp"

namespace mlemsparse {

using Vector = std::vector<double>;

/// Regular 2D grid of quadrature nodes standing in for the compact K.
///
/// Node (ix, iy) sits at origin + (ix * spacing_x, iy * spacing_y) and has
/// flat index ix + nx * iy. The field-of-view mask marks the nodes that belong
/// to the reconstruction domain; everything else is treated as outside K.
class Grid {
 public:
  Grid(int nx, int ny, std::array<double, 2> spacing = {1.0, 1.0},
       std::array<double, 2> origin = {0.0, 0.0});
  Grid(int nx, int ny, std::array<double, 2> spacing,
       std::array<double, 2> origin, std::vector<std::uint8_t> fov_mask);

  /// A 1 x r grid, used for abstract operators given as plain matrices.
  static std::shared_ptr<const Grid> line(int r);
  /// Square grid of n x n nodes covering [0, extent)^2 cell-centred.
  static std::shared_ptr<const Grid> square(int n, double extent);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }
  std::array<double, 2> spacing() const { return spacing_; }
  std::array<double, 2> origin() const { return origin_; }
  double cell_area() const { return spacing_[0] * spacing_[1]; }

  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(ix) + static_cast<std::size_t>(nx_) * iy;
  }
  std::pair<int, int> coords(std::size_t j) const {
    return {static_cast<int>(j % nx_), static_cast<int>(j / nx_)};
  }
  std::array<double, 2> point(std::size_t j) const;
  /// Geometric centre of the node bounding box.
  std::array<double, 2> center() const;

  bool in_fov(std::size_t j) const { return fov_[j] != 0; }
  const std::vector<std::uint8_t>& fov_mask() const { return fov_; }
  std::size_t fov_count() const;

  /// Same geometry, different mask.
  std::shared_ptr<const Grid> with_mask(std::vector<std::uint8_t> mask) const;

  /// Same node layout (dims, spacing, origin); masks may differ.
  bool same_layout(const Grid& other) const;

 private:
  int nx_;
  int ny_;
  std::array<double, 2> spacing_;
  std::array<double, 2> origin_;
  std::vector<std::uint8_t> fov_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Nonnegative atom weights on the nodes of a grid.
///
/// Quadrature weights are absorbed into the atoms, so <mu, f> is exactly
/// sum_j f(x_j) * weights[j]. Weights outside the field of view are zero.
class Measure {
 public:
  Measure(GridPtr grid, Vector weights);

  static Measure zeros(GridPtr grid);
  /// Constant weight on every field-of-view node, scaled to the given mass.
  static Measure uniform(GridPtr grid, double mass = 1.0);

  const GridPtr& grid() const { return grid_; }
  const Vector& weights() const { return weights_; }
  double operator[](std::size_t j) const { return weights_[j]; }
  std::size_t size() const { return weights_.size(); }

  double mass() const;
  std::size_t support_size() const;
  bool in_support(std::size_t j) const { return weights_[j] > 0.0; }
  /// Copy rescaled to unit mass. Throws DomainError on a zero measure.
  Measure normalized() const;
  /// Weights restricted to another grid with the same layout (masked nodes
  /// are zeroed).
  Measure on_grid(GridPtr grid) const;

 private:
  GridPtr grid_;
  Vector weights_;
};

/// m x r matrix of detector samples a_i(x_j).
///
/// Rows are stored sparse when fewer than a quarter of the entries are
/// nonzero and dense otherwise; the choice is invisible to callers.
class ForwardOperator {
 public:
  struct Entry {
    std::uint32_t col;
    double value;
  };

  /// Dense constructor; rows[i][j] = a_i(x_j).
  ForwardOperator(GridPtr grid, const std::vector<Vector>& rows,
                  bool normalized = false);
  /// Sparse constructor from per-row (column, value) lists.
  ForwardOperator(GridPtr grid, std::size_t n_rows,
                  const std::vector<std::vector<Entry>>& rows,
                  bool normalized = false);

  const GridPtr& grid() const { return grid_; }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return r_; }
  bool normalized() const { return normalized_; }
  bool is_sparse() const { return sparse_; }
  std::size_t nonzeros() const;

  double at(std::size_t i, std::size_t j) const;
  Vector dense_row(std::size_t i) const;
  std::vector<Entry> row_entries(std::size_t i) const;

  /// Calls f(j, value) for every stored (nonzero) entry of row i, in
  /// increasing column order.
  template <class F>
  void for_each_in_row(std::size_t i, F&& f) const {
    if (sparse_) {
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        f(static_cast<std::size_t>(col_idx_[p]), values_[p]);
      }
    } else {
      const double* row = values_.data() + i * r_;
      for (std::size_t j = 0; j < r_; ++j) {
        if (row[j] != 0.0) f(j, row[j]);
      }
    }
  }

  /// Column sums sum_i a_i(x_j).
  Vector column_sums() const;

 private:
  void finish(bool normalized);

  GridPtr grid_;
  std::size_t m_ = 0;
  std::size_t r_ = 0;
  bool normalized_ = false;
  bool sparse_ = false;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_idx_;
  Vector values_;
};

/// Nonnegative detector counts and their normalized frequencies y.
class DataVector {
 public:
  /// From raw integer counts; y_i = n_i / sum(n). Throws DomainError if all
  /// counts are zero.
  static DataVector from_counts(std::vector<std::uint64_t> counts);
  /// From frequencies; must be nonnegative and sum to one within 1e-12
  /// (values are renormalized to remove the residual).
  static DataVector from_frequencies(Vector y);

  std::size_t size() const { return y_.size(); }
  const Vector& y() const { return y_; }
  double operator[](std::size_t i) const { return y_[i]; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  bool has_counts() const { return !counts_.empty(); }
  std::uint64_t total_counts() const;
  /// Indices i with y_i > 0.
  const std::vector<std::size_t>& support() const { return support_; }
  bool in_support(std::size_t i) const { return y_[i] > 0.0; }

 private:
  DataVector(Vector y, std::vector<std::uint64_t> counts);

  Vector y_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::size_t> support_;
};

/// (A mu)_i = sum_j a_i(x_j) weights[j].
Vector apply(const ForwardOperator& op, const Measure& mu);
/// Same product on a raw weight vector of length r.
Vector apply(const ForwardOperator& op, std::span<const double> weights);
/// (A* w)(x_j) = sum_i w_i a_i(x_j), for every node of the grid.
Vector adjoint_apply(const ForwardOperator& op, std::span<const double> w);

struct NormalizedOperator {
  ForwardOperator op;
  /// Column sums of the input operator; zero on masked nodes. A measure mu
  /// for the original operator corresponds to scale * mu for the normalized
  /// one.
  Vector scale;
};

/// Divides every column by its sum so that A* 1 = 1 on the field of view.
/// Columns with zero sum (and nodes already outside the field of view) are
/// masked out of the returned grid.
NormalizedOperator normalize_operator(const ForwardOperator& op);

struct ParallelBeamGeometry {
  int n_views = 30;
  int n_tangential = 32;
  /// Strip width in grid length units; unset selects the tangential bin
  /// spacing (contiguous strips).
  std::optional<double> strip_width;
  /// Sub-samples per pixel axis for strip overlap.
  int supersampling = 4;
};

/// Tangential bin spacing used by build_parallel_beam: the detector row
/// spans the diagonal of the grid's bounding box.
double tangential_spacing(const Grid& grid, int n_tangential);

/// Strip-integral projector for 2D parallel-beam tomography, already
/// normalized. Row index is view * n_tangential + tangential_bin. View v has
/// angle pi * v / n_views; the projected coordinate of a point p relative to
/// the grid centre c is s = (p - c) . (cos, sin). The entry for pixel j is
/// the fraction of the pixel area inside the strip, estimated by midpoint
/// sampling on a supersampling x supersampling sub-grid.
NormalizedOperator build_parallel_beam(const GridPtr& grid,
                                       const ParallelBeamGeometry& geometry);

/// Anisotropic Gaussian bump h * exp(-0.5 (x - c)^T diag(s)^-2 (x - c)).
struct GaussianBump {
  std::array<double, 2> center{0.0, 0.0};
  std::array<double, 2> sigma{1.0, 1.0};
  double height = 1.0;

  double value(std::array<double, 2> p) const;
  /// Hessian entries (xx, xy, yy).
  std::array<double, 3> hessian(std::array<double, 2> p) const;
};

struct PhantomSpec {
  enum class Kind { annulus, uniform, two_bumps };
  Kind kind = Kind::annulus;

  // annulus: value between inner and outer radius around center (defaults
  // to the grid centre when unset).
  double inner_radius = 0.0;
  double outer_radius = 1.0;
  std::array<double, 2> center{0.0, 0.0};
  bool center_set = false;
  double value = 1.0;

  // two_bumps: sum of the two Gaussian bumps plus a constant base.
  std::array<GaussianBump, 2> bumps{};
  double base = 0.0;
};

/// Evaluates a phantom at the grid nodes (values are atom weights; zero
/// outside the field of view).
Measure make_phantom(const GridPtr& grid, const PhantomSpec& spec);

/// Value of the two-bumps profile at a point (no grid involved).
double two_bumps_value(const PhantomSpec& spec, std::array<double, 2> p);
/// Hessian (xx, xy, yy) of the two-bumps profile at a point.
std::array<double, 3> two_bumps_hessian(const PhantomSpec& spec,
                                        std::array<double, 2> p);

std::string to_string(PhantomSpec::Kind kind);
PhantomSpec::Kind phantom_kind_from_string(const std::string& name);

}  // namespace mlemsparse
