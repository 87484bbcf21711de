#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relgen/dfs.hpp"
#include "relgen/tensor.hpp"

namespace relgen {

/// Gini coefficient of a nonnegative count distribution. 0 for perfectly
/// even counts, (n-1)/n when one element holds everything, 0 on empty or
/// all-zero input.
double gini(std::span<const std::int64_t> counts);

/// Pearson correlation structure of a feature block, grouped by provenance
/// family. A column's family is its first relational hop (encoded as
/// edge * 2 + 1 for backward hops, edge * 2 for forward ones); hop-free
/// identity columns share family -1.
struct CorrelationReport {
  std::vector<std::vector<double>> corr;  ///< symmetric; 1 on non-constant diagonal
  std::vector<std::int32_t> family;       ///< per column
  std::vector<std::uint8_t> constant;     ///< per column, excluded from the means
  double within_mean_abs = 0.0;  ///< mean |rho| over same-family pairs
  double cross_mean_abs = 0.0;   ///< mean |rho| over cross-family pairs
};

std::int32_t provenance_family(const FeaturePath& path);

/// Correlations over the rows of x; entries touching constant columns are 0.
/// Throws DimensionError when provenance does not match the width and
/// DegenerateError when fewer than two columns vary.
CorrelationReport correlation_report(const Matrix& x,
                                     const std::vector<FeaturePath>& provenance);

}  // namespace relgen
