#include "relgen/temporal.hpp"

#include <algorithm>
#include <cmath>

#include "relgen/errors.hpp"

namespace relgen {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kIntensityFloor = 1e-6;
constexpr std::size_t kCdfBins = 1024;

double component_value(const TemporalComponent& c, double t) {
  switch (c.kind) {
    case TemporalKind::trend:
      return c.slope * t;
    case TemporalKind::seasonality:
      return c.amplitude * std::sin(kTwoPi * (t / c.period + c.phase));
    case TemporalKind::spike: {
      double v = 0.0;
      for (double t0 : c.spike_times) {
        double d = (t - t0) / c.spike_width;
        v += c.spike_magnitude * std::exp(-0.5 * d * d);
      }
      return v;
    }
  }
  return 0.0;
}
}  // namespace

void TemporalConfig::validate() const {
  if (window_seconds <= 0.0) throw ConfigError("temporal.window_seconds: must be positive");
  if (base_rate < 0.0) throw ConfigError("temporal.base_rate: must be nonnegative");
  if (min_components < 1 || min_components > max_components) {
    throw ConfigError("temporal.min_components/max_components: invalid range");
  }
  if (min_period_frac <= 0.0 || min_period_frac > max_period_frac) {
    throw ConfigError("temporal.min_period_frac/max_period_frac: invalid range");
  }
  if (min_spikes < 1 || min_spikes > max_spikes) {
    throw ConfigError("temporal.min_spikes/max_spikes: invalid range");
  }
  if (spike_width_frac <= 0.0) throw ConfigError("temporal.spike_width_frac: must be positive");
  if (child_gap_mean <= 0.0) throw ConfigError("temporal.child_gap_mean: must be positive");
}

std::array<double, kTemporalChannels> eval_temporal(const TemporalSignature& sig, double t) {
  std::array<double, kTemporalChannels> out{0.0, 0.0, 0.0, 0.0};
  for (const TemporalComponent& c : sig.components) {
    double v = c.weight * component_value(c, t);
    switch (c.kind) {
      case TemporalKind::trend: out[kTrendChannel] += v; break;
      case TemporalKind::seasonality: out[kSeasonChannel] += v; break;
      case TemporalKind::spike: out[kSpikeChannel] += v; break;
    }
  }
  out[kCombinedChannel] = out[kTrendChannel] + out[kSeasonChannel] + out[kSpikeChannel];
  return out;
}

double temporal_intensity(const TemporalSignature& sig, double t, double base_rate) {
  double v = base_rate + eval_temporal(sig, t)[kCombinedChannel];
  return std::max(kIntensityFloor, v);
}

TemporalSignature sample_temporal_signature(const TemporalConfig& cfg, Rng& rng) {
  cfg.validate();
  TemporalSignature sig;
  std::int32_t n = cfg.min_components +
                   static_cast<std::int32_t>(rng.uniform_int(
                       static_cast<std::uint64_t>(cfg.max_components - cfg.min_components + 1)));
  const double w = cfg.window_seconds;
  for (std::int32_t i = 0; i < n; ++i) {
    TemporalComponent c;
    c.kind = static_cast<TemporalKind>(rng.uniform_int(3));
    c.weight = rng.uniform(0.2, 1.0);
    switch (c.kind) {
      case TemporalKind::trend:
        // Slopes are scaled so |slope * t| stays within trend_slope_abs on
        // the window.
        c.slope = rng.uniform(-cfg.trend_slope_abs, cfg.trend_slope_abs) / w;
        break;
      case TemporalKind::seasonality:
        c.period = rng.uniform(cfg.min_period_frac, cfg.max_period_frac) * w;
        c.phase = rng.uniform();
        c.amplitude = rng.uniform(0.2, cfg.max_amplitude);
        break;
      case TemporalKind::spike: {
        std::int32_t spikes = cfg.min_spikes +
                              static_cast<std::int32_t>(rng.uniform_int(
                                  static_cast<std::uint64_t>(cfg.max_spikes - cfg.min_spikes + 1)));
        for (std::int32_t s = 0; s < spikes; ++s) c.spike_times.push_back(rng.uniform(0.0, w));
        c.spike_width = cfg.spike_width_frac * w * rng.uniform(0.5, 1.5);
        c.spike_magnitude = rng.uniform(0.5, cfg.max_spike_magnitude);
        break;
      }
    }
    sig.components.push_back(std::move(c));
  }
  return sig;
}

std::vector<double> sample_timestamps(const TemporalSignature& sig, const TemporalConfig& cfg,
                                      std::size_t n, Rng& rng) {
  cfg.validate();
  const double w = cfg.window_seconds;
  // Piecewise-constant inverse CDF over a fixed grid. A constant intensity
  // gives equal bin mass, so interpolation reproduces the uniform law exactly.
  std::array<double, kCdfBins> cum{};
  double total = 0.0;
  for (std::size_t b = 0; b < kCdfBins; ++b) {
    double mid = (static_cast<double>(b) + 0.5) * w / static_cast<double>(kCdfBins);
    total += temporal_intensity(sig, mid, cfg.base_rate);
    cum[b] = total;
  }
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform() * total;
    std::size_t lo = 0, hi = kCdfBins - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (cum[mid] <= u) lo = mid + 1; else hi = mid;
    }
    double prev = (lo == 0) ? 0.0 : cum[lo - 1];
    double mass = cum[lo] - prev;
    double frac = mass > 0.0 ? (u - prev) / mass : 0.5;
    double t = (static_cast<double>(lo) + frac) * w / static_cast<double>(kCdfBins);
    out.push_back(std::min(t, std::nexttoward(w, 0.0)));
  }
  return out;
}

}  // namespace relgen
