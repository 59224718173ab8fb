#pragma once

#include <memory>
#include <vector>

#include "mlemsparse/model.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace mlemsparse;

inline ForwardOperator op_from(const oracle::Matrix& rows, bool normalized = true) {
  return ForwardOperator(Grid::line(static_cast<int>(rows[0].size())), rows,
                         normalized);
}

inline Measure measure_on(const ForwardOperator& op, std::vector<double> w) {
  return Measure(op.grid(), std::move(w));
}

/// The 2 x 2 instance used throughout: columns (0.8, 0.2) and (0.3, 0.7).
inline oracle::Matrix textbook() { return {{0.8, 0.3}, {0.2, 0.7}}; }

}  // namespace fixtures
