#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "relgen/rng.hpp"

namespace relgen {

enum class TemporalKind { trend, seasonality, spike };

struct TemporalComponent {
  TemporalKind kind = TemporalKind::trend;
  double weight = 1.0;
  // trend
  double slope = 0.0;
  // seasonality
  double period = 1.0;
  double phase = 0.0;
  double amplitude = 1.0;
  // spike
  std::vector<double> spike_times;
  double spike_width = 1.0;
  double spike_magnitude = 1.0;
};

/// Weighted mixture of trend, seasonality and spike primitives. One
/// signature per table drives both event-time sampling and the temporal
/// features fed into latent initialization.
struct TemporalSignature {
  std::vector<TemporalComponent> components;
};

struct TemporalConfig {
  double window_seconds = 31557600.0;  ///< event-time window [0, W)
  double base_rate = 1.0;              ///< intensity floor offset
  std::int32_t min_components = 1;
  std::int32_t max_components = 3;
  double trend_slope_abs = 1.0;        ///< max |slope * window|
  double min_period_frac = 0.05;       ///< period bounds as window fractions
  double max_period_frac = 0.5;
  double max_amplitude = 1.0;
  std::int32_t min_spikes = 1;
  std::int32_t max_spikes = 3;
  double spike_width_frac = 0.02;
  double max_spike_magnitude = 3.0;
  double child_gap_mean = 3600.0;      ///< mean child-after-parent gap, seconds

  void validate() const;
};

/// eval_temporal channel layout.
inline constexpr std::size_t kTrendChannel = 0;
inline constexpr std::size_t kSeasonChannel = 1;
inline constexpr std::size_t kSpikeChannel = 2;
inline constexpr std::size_t kCombinedChannel = 3;
inline constexpr std::size_t kTemporalChannels = 4;

/// Per-primitive channels plus their sum. All channels are linear in the
/// component weights, so evaluating a composed signature equals the weighted
/// sum of evaluating its components separately.
std::array<double, kTemporalChannels> eval_temporal(const TemporalSignature& sig, double t);

/// Sampling intensity at t: max(eps, base_rate + combined channel).
double temporal_intensity(const TemporalSignature& sig, double t, double base_rate);

TemporalSignature sample_temporal_signature(const TemporalConfig& cfg, Rng& rng);

/// n event times on [0, window) drawn proportional to the signature's
/// intensity via a gridded inverse CDF. Constant intensity reduces to the
/// exact uniform distribution.
std::vector<double> sample_timestamps(const TemporalSignature& sig, const TemporalConfig& cfg,
                                      std::size_t n, Rng& rng);

}  // namespace relgen
