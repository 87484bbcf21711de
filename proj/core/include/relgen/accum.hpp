#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace relgen {

/// Order-invariant reduction helpers. Addends are sorted by value before
/// accumulation, so any permutation of the same multiset produces the exact
/// same f64 result. Generation code relies on this to make row relabeling
/// and neighbor reordering bit-neutral.

inline double sorted_sum(std::vector<double>& scratch) {
  std::sort(scratch.begin(), scratch.end());
  double acc = 0.0;
  for (double v : scratch) acc += v;
  return acc;
}

inline double sorted_sum(std::span<const float> vals) {
  std::vector<double> s(vals.begin(), vals.end());
  return sorted_sum(s);
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // population variance
};

/// Mean and population variance, both order-invariant.
inline Moments sorted_moments(std::span<const float> vals) {
  Moments m;
  if (vals.empty()) return m;
  const double n = static_cast<double>(vals.size());
  m.mean = sorted_sum(vals) / n;
  std::vector<double> dev(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    double d = static_cast<double>(vals[i]) - m.mean;
    dev[i] = d * d;
  }
  m.var = sorted_sum(dev) / n;
  return m;
}

}  // namespace relgen
