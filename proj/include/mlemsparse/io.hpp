#pragma once

// Text operator format and PGM image export.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "mlemsparse/model.hpp"

namespace mlemsparse::io {

/// Writes `m r` followed by one line per detector of space-separated
/// `j:value` pairs (values printed with 17 significant digits).
void write_operator(std::ostream& os, const ForwardOperator& op);
/// Reads the format above onto the given grid (grid size must equal r).
ForwardOperator read_operator(std::istream& is, GridPtr grid,
                              bool normalized = false);

void save_operator(const std::filesystem::path& path, const ForwardOperator& op);
ForwardOperator load_operator(const std::filesystem::path& path, GridPtr grid,
                              bool normalized = false);

enum class PgmEncoding { ascii, binary };

/// Linear rescale recorded next to a PGM image.
struct PgmMeta {
  double min = 0.0;
  double max = 0.0;
  int nx = 0;
  int ny = 0;
  double spacing_x = 1.0;
  double spacing_y = 1.0;
  double mass = 0.0;
};

/// Encodes grid values as a 16-bit PGM (max value 65535, row-major with
/// row iy = 0 first). Values are mapped linearly from [min, max] to
/// [0, 65535]; a constant image maps to 0.
std::string encode_pgm(const Grid& grid, std::span<const double> values,
                       PgmEncoding encoding, PgmMeta* meta = nullptr);

/// Writes `path` and a `path.meta` JSON sidecar {min, max, grid, mass}.
void write_pgm(const std::filesystem::path& path, const Grid& grid,
               std::span<const double> values,
               PgmEncoding encoding = PgmEncoding::binary);

std::string meta_json(const PgmMeta& meta);

}  // namespace mlemsparse::io
