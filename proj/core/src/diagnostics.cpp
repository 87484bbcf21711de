#include "relgen/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "relgen/errors.hpp"

namespace relgen {

double gini(std::span<const std::int64_t> counts) {
  if (counts.empty()) return 0.0;
  std::vector<std::int64_t> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    total += static_cast<double>(sorted[i]);
    weighted += static_cast<double>(i + 1) * static_cast<double>(sorted[i]);
  }
  if (total <= 0.0) return 0.0;
  const double n = static_cast<double>(sorted.size());
  return (2.0 * weighted) / (n * total) - (n + 1.0) / n;
}

std::int32_t provenance_family(const FeaturePath& path) {
  if (path.hops.empty()) return -1;
  const Hop& first = path.hops.front();
  return static_cast<std::int32_t>(first.edge) * 2 +
         (first.dir == HopDirection::backward_aggregate ? 1 : 0);
}

CorrelationReport correlation_report(const Matrix& x,
                                     const std::vector<FeaturePath>& provenance) {
  const std::size_t w = x.cols();
  const std::size_t n = x.rows();
  if (provenance.size() != w) throw DimensionError("provenance does not match the width");
  if (n < 2) throw DegenerateError("need at least two rows for correlations");

  CorrelationReport report;
  report.family.resize(w);
  report.constant.assign(w, 0);
  for (std::size_t c = 0; c < w; ++c) report.family[c] = provenance_family(provenance[c]);

  std::vector<double> mean(w, 0.0), sd(w, 0.0);
  std::size_t varying = 0;
  for (std::size_t c = 0; c < w; ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < n; ++r) m += static_cast<double>(x(r, c));
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double d = static_cast<double>(x(r, c)) - m;
      v += d * d;
    }
    mean[c] = m;
    sd[c] = std::sqrt(v / static_cast<double>(n));
    if (sd[c] < 1e-12) {
      report.constant[c] = 1;
    } else {
      ++varying;
    }
  }
  if (varying < 2) throw DegenerateError("fewer than two non-constant columns");

  report.corr.assign(w, std::vector<double>(w, 0.0));
  double within_sum = 0.0, cross_sum = 0.0;
  std::size_t within_n = 0, cross_n = 0;
  for (std::size_t i = 0; i < w; ++i) {
    if (report.constant[i]) continue;
    report.corr[i][i] = 1.0;
    for (std::size_t j = i + 1; j < w; ++j) {
      if (report.constant[j]) continue;
      double cov = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        cov += (static_cast<double>(x(r, i)) - mean[i]) *
               (static_cast<double>(x(r, j)) - mean[j]);
      }
      cov /= static_cast<double>(n);
      double rho = cov / (sd[i] * sd[j]);
      report.corr[i][j] = rho;
      report.corr[j][i] = rho;
      if (report.family[i] == report.family[j]) {
        within_sum += std::abs(rho);
        ++within_n;
      } else {
        cross_sum += std::abs(rho);
        ++cross_n;
      }
    }
  }
  if (within_n > 0) report.within_mean_abs = within_sum / static_cast<double>(within_n);
  if (cross_n > 0) report.cross_mean_abs = cross_sum / static_cast<double>(cross_n);
  return report;
}

}  // namespace relgen
