#include "mlemsparse/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace mlemsparse::io {

void write_operator(std::ostream& os, const ForwardOperator& op) {
  os << op.rows() << ' ' << op.cols() << '\n';
  os << std::setprecision(17);
  for (std::size_t i = 0; i < op.rows(); ++i) {
    bool first = true;
    op.for_each_in_row(i, [&](std::size_t j, double v) {
      if (!first) os << ' ';
      os << j << ':' << v;
      first = false;
    });
    os << '\n';
  }
}

ForwardOperator read_operator(std::istream& is, GridPtr grid, bool normalized) {
  std::string line;
  if (!std::getline(is, line)) throw ParameterError("operator file is empty");
  std::istringstream header(line);
  std::size_t m = 0, r = 0;
  if (!(header >> m >> r) || m == 0) {
    throw ParameterError("operator header must be 'm r'");
  }
  if (r != grid->size()) {
    throw DimensionError("operator has " + std::to_string(r) +
                         " columns but the grid has " +
                         std::to_string(grid->size()) + " nodes");
  }
  std::vector<std::vector<ForwardOperator::Entry>> rows(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::getline(is, line)) {
      throw ParameterError("operator file ends after " + std::to_string(i) +
                           " of " + std::to_string(m) + " rows");
    }
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) {
        throw ParameterError("malformed entry '" + tok + "' in row " +
                             std::to_string(i));
      }
      try {
        const unsigned long j = std::stoul(tok.substr(0, colon));
        const double v = std::stod(tok.substr(colon + 1));
        rows[i].push_back({static_cast<std::uint32_t>(j), v});
      } catch (const std::logic_error&) {
        throw ParameterError("malformed entry '" + tok + "' in row " +
                             std::to_string(i));
      }
    }
  }
  return ForwardOperator(std::move(grid), m, rows, normalized);
}

void save_operator(const std::filesystem::path& path, const ForwardOperator& op) {
  std::ofstream os(path);
  if (!os) throw ParameterError("cannot write " + path.string());
  write_operator(os, op);
}

ForwardOperator load_operator(const std::filesystem::path& path, GridPtr grid,
                              bool normalized) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot read " + path.string());
  return read_operator(is, std::move(grid), normalized);
}

std::string encode_pgm(const Grid& grid, std::span<const double> values,
                       PgmEncoding encoding, PgmMeta* meta) {
  if (values.size() != grid.size()) {
    throw DimensionError("image has " + std::to_string(values.size()) +
                         " values for a grid of " + std::to_string(grid.size()));
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double mass = 0.0;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    mass += v;
  }
  const double range = hi - lo;
  auto level = [&](double v) -> unsigned {
    if (!(range > 0.0)) return 0;
    const double q = std::round((v - lo) / range * 65535.0);
    return static_cast<unsigned>(std::clamp(q, 0.0, 65535.0));
  };

  std::ostringstream os;
  os << (encoding == PgmEncoding::ascii ? "P2" : "P5") << '\n'
     << grid.nx() << ' ' << grid.ny() << '\n'
     << 65535 << '\n';
  for (int iy = 0; iy < grid.ny(); ++iy) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      const unsigned q = level(values[grid.index(ix, iy)]);
      if (encoding == PgmEncoding::ascii) {
        os << q << (ix + 1 == grid.nx() ? '\n' : ' ');
      } else {
        // 16-bit samples are big-endian.
        os.put(static_cast<char>((q >> 8) & 0xff));
        os.put(static_cast<char>(q & 0xff));
      }
    }
  }
  if (meta) {
    *meta = PgmMeta{lo, hi, grid.nx(), grid.ny(), grid.spacing()[0],
                    grid.spacing()[1], mass};
  }
  return os.str();
}

std::string meta_json(const PgmMeta& meta) {
  nlohmann::ordered_json j;
  j["min"] = meta.min;
  j["max"] = meta.max;
  j["grid"] = {{"nx", meta.nx},
               {"ny", meta.ny},
               {"spacing", {meta.spacing_x, meta.spacing_y}}};
  j["mass"] = meta.mass;
  return j.dump(2) + "\n";
}

void write_pgm(const std::filesystem::path& path, const Grid& grid,
               std::span<const double> values, PgmEncoding encoding) {
  PgmMeta meta;
  const std::string bytes = encode_pgm(grid, values, encoding, &meta);
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParameterError("cannot write " + path.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::ofstream ms(path.string() + ".meta");
  if (!ms) throw ParameterError("cannot write " + path.string() + ".meta");
  ms << meta_json(meta);
}

}  // namespace mlemsparse::io
