#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "secure_platoon/lti.hpp"
#include "secure_platoon/sensor_catalog.hpp"

namespace secure_platoon {

/// Direct-form-I second-order section with the a0 coefficient normalized out.
struct Biquad {
  double b0 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double u1 = 0.0;
  double u2 = 0.0;
  double y1 = 0.0;
  double y2 = 0.0;

  double step(double u) {
    const double y = b0 * u + b1 * u1 + b2 * u2 - a1 * y1 - a2 * y2;
    u2 = u1;
    u1 = u;
    y2 = y1;
    y1 = y;
    return y;
  }

  void reset() { u1 = u2 = y1 = y2 = 0.0; }
};

namespace detail {

inline Biquad normalized_biquad(double b0, double b1, double b2, double a0,
                                double a1, double a2) {
  require(a0 != 0.0, "biquad: zero leading denominator coefficient");
  return Biquad{b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
}

}  // namespace detail

/// Two-pole Butterworth high-pass, bilinear-transformed at 1/ts.
inline Biquad butterworth_highpass(double ts, double corner_hz) {
  const double wc = 2.0 * std::numbers::pi * corner_hz;
  const double q = std::numbers::sqrt2;
  return detail::normalized_biquad(
      4.0, -8.0, 4.0, ts * ts * wc * wc + 2.0 * q * ts * wc + 4.0,
      2.0 * ts * ts * wc * wc - 8.0, ts * ts * wc * wc - 2.0 * q * ts * wc + 4.0);
}

/// Two-pole Butterworth low-pass, bilinear-transformed at 1/ts.
inline Biquad butterworth_lowpass(double ts, double corner_hz) {
  const double wc = 2.0 * std::numbers::pi * corner_hz;
  const double q = std::numbers::sqrt2;
  const double k = ts * ts * wc * wc;
  return detail::normalized_biquad(k, 2.0 * k, k,
                                   k + 2.0 * q * ts * wc + 4.0, 2.0 * k - 8.0,
                                   k - 2.0 * q * ts * wc + 4.0);
}

/// Acceleration-velocity transition section w4^2 / (s^2 + w4 s / q4 + w4^2).
inline Biquad band_transition(double ts, double f4_hz, double q4) {
  const double w4 = 2.0 * std::numbers::pi * f4_hz;
  const double k = q4 * ts * ts * w4 * w4;
  return detail::normalized_biquad(k, 2.0 * k, k, k + 2.0 * ts * w4 + 4.0 * q4,
                                   2.0 * k - 8.0 * q4,
                                   k - 2.0 * ts * w4 + 4.0 * q4);
}

/// Acceleration-velocity transition with the proportional zero at -w3:
/// (1 + s / w3) * w4^2 / (s^2 + w4 s / q4 + w4^2).
inline Biquad band_transition(double ts, double f3_hz, double f4_hz, double q4) {
  const double w3 = 2.0 * std::numbers::pi * f3_hz;
  const double w4 = 2.0 * std::numbers::pi * f4_hz;
  const double k = q4 * ts * ts * w4 * w4;
  return detail::normalized_biquad(
      q4 * ts * w4 * w4 * (ts * w3 + 2.0), 2.0 * k * w3,
      q4 * ts * w4 * w4 * (ts * w3 - 2.0),
      w3 * (k + 2.0 * ts * w4 + 4.0 * q4), w3 * (2.0 * k - 8.0 * q4),
      w3 * (k - 2.0 * ts * w4 + 4.0 * q4));
}

/// Upward-step section (s^2 + w5 s / q5 + w5^2) / (s^2 + w6 s / q6 + w6^2)
/// scaled by q6/q5 groupings so the biquad keeps unit high-frequency gain.
inline Biquad upward_step(double ts, double f5_hz, double f6_hz, double q5,
                          double q6) {
  const double w5 = 2.0 * std::numbers::pi * f5_hz;
  const double w6 = 2.0 * std::numbers::pi * f6_hz;
  const double k5 = q5 * ts * ts * w5 * w5;
  const double k6 = q6 * ts * ts * w6 * w6;
  return detail::normalized_biquad(
      q6 * (k5 + 2.0 * ts * w5 + 4.0 * q5), q6 * (2.0 * k5 - 8.0 * q5),
      q6 * (k5 - 2.0 * ts * w5 + 4.0 * q5),
      q5 * (k6 + 2.0 * ts * w6 + 4.0 * q6), q5 * (2.0 * k6 - 8.0 * q6),
      q5 * (k6 - 2.0 * ts * w6 + 4.0 * q6));
}

/// Whole-body vibration weighting choice: horizontal ride comfort keeps the
/// band around 1 Hz, motion sickness keeps the band around 0.16 Hz.
enum class Weighting { kRideComfort, kMotionSickness };

struct WeightingFilter {
  std::vector<Biquad> sections;

  double step(double u) {
    for (Biquad& s : sections) u = s.step(u);
    return u;
  }

  void reset() {
    for (Biquad& s : sections) s.reset();
  }
};

/// Cascade realization of the ISO 8041 analog weighting prototypes at sample
/// time ts. Ride comfort is the horizontal W_d chain, motion sickness the
/// low-frequency W_f chain.
inline WeightingFilter make_weighting_filter(Weighting kind, double ts) {
  require(ts > 0.0, "make_weighting_filter: ts must be positive");
  if (kind == Weighting::kRideComfort) {
    return WeightingFilter{{butterworth_highpass(ts, 0.4),
                            butterworth_lowpass(ts, 100.0),
                            band_transition(ts, 2.0, 2.0, 0.63)}};
  }
  return WeightingFilter{{butterworth_highpass(ts, 0.08),
                          butterworth_lowpass(ts, 0.63),
                          band_transition(ts, 0.25, 0.86),
                          upward_step(ts, 0.0625, 0.1, 0.8, 0.8)}};
}

inline std::vector<double> weight_acceleration(std::span<const double> accel,
                                               double ts, Weighting kind) {
  WeightingFilter filter = make_weighting_filter(kind, ts);
  std::vector<double> weighted(accel.size());
  for (std::size_t k = 0; k < accel.size(); ++k) {
    weighted[k] = filter.step(accel[k]);
  }
  return weighted;
}

/// Frequency-weighted RMS; the averaging time cancels against the integral
/// step so no sample time is needed.
inline double ride_comfort(std::span<const double> weighted) {
  require(!weighted.empty(), "ride_comfort: empty series");
  double sum = 0.0;
  for (double v : weighted) sum += v * v;
  return std::sqrt(sum / static_cast<double>(weighted.size()));
}

/// Motion sickness dose: square root of the time integral of the squared
/// weighted acceleration, so it is non-decreasing in run length.
inline double msdv(std::span<const double> weighted, double ts) {
  require(!weighted.empty(), "msdv: empty series");
  require(ts > 0.0, "msdv: ts must be positive");
  double sum = 0.0;
  for (double v : weighted) sum += v * v;
  return std::sqrt(sum * ts);
}

/// Settling horizon below which the weighted statistics carry a warning: the
/// motion-sickness chain has corners down to 0.0625 Hz and needs several
/// seconds of history before its output is meaningful.
inline constexpr double kComfortSettlingSeconds = 10.0;

/// ISO 2631 multiplying factor for the longitudinal axis in the overall
/// seated-comfort index. The overall index combines the axis RMS values
/// through these factors; with only the x axis evaluated it reduces to a
/// plain scale on the weighted RMS. The dose metric takes no factor.
inline constexpr double kLongitudinalComfortFactor = 1.4;

struct ComfortReport {
  double rc = 0.0;
  double msdv_x = 0.0;
  bool short_series = false;
  std::vector<double> weighted_rc;
  std::vector<double> weighted_ms;
};

inline ComfortReport comfort_summary(std::span<const double> accel, double ts) {
  require(!accel.empty(), "comfort_summary: empty series");
  ComfortReport report;
  report.weighted_rc = weight_acceleration(accel, ts, Weighting::kRideComfort);
  report.weighted_ms =
      weight_acceleration(accel, ts, Weighting::kMotionSickness);
  report.rc = kLongitudinalComfortFactor * ride_comfort(report.weighted_rc);
  report.msdv_x = msdv(report.weighted_ms, ts);
  report.short_series =
      static_cast<double>(accel.size()) * ts < kComfortSettlingSeconds;
  return report;
}

struct SafetyReport {
  int nc = 0;
  double rms_e = 0.0;
};

/// Collisions are debounced: one count per below-zero excursion of the
/// following distance, no matter how many samples it spans.
inline SafetyReport safety_summary(std::span<const double> spacing_error,
                                   std::span<const double> following_distance) {
  require(!spacing_error.empty(), "safety_summary: empty spacing error");
  require(spacing_error.size() == following_distance.size(),
          "safety_summary: trace length mismatch");
  SafetyReport report;
  bool below = false;
  double sum = 0.0;
  for (std::size_t k = 0; k < spacing_error.size(); ++k) {
    sum += spacing_error[k] * spacing_error[k];
    if (following_distance[k] < 0.0) {
      if (!below) ++report.nc;
      below = true;
    } else {
      below = false;
    }
  }
  report.rms_e = std::sqrt(sum / static_cast<double>(spacing_error.size()));
  return report;
}

struct ReliabilityReport {
  long tp = 0;
  long fp = 0;
  long skipped = 0;
  double f1 = 1.0;
};

namespace detail {

inline std::vector<std::uint32_t> subset_masks(const SubsetCatalog& catalog) {
  std::vector<std::uint32_t> masks;
  masks.reserve(catalog.subsets.size());
  for (const std::vector<int>& subset : catalog.subsets) {
    std::uint32_t mask = 0;
    for (int sensor : subset) mask |= std::uint32_t{1} << sensor;
    masks.push_back(mask);
  }
  return masks;
}

}  // namespace detail

/// Per-step selection audit. A step scores a false positive when the picked
/// subset touches the ground-truth attacked set although some catalog subset
/// is clean; steps inside a transition grace window or with no clean subset
/// available are skipped. With the FN = FP, TP = TN bookkeeping the score
/// reduces to F1 = TP / (TP + FP), which equals precision and recall.
inline ReliabilityReport reliability_summary(
    std::span<const int> selected, std::span<const std::uint32_t> attacked,
    std::span<const std::uint8_t> grace, const SubsetCatalog& catalog) {
  require(selected.size() == attacked.size() && selected.size() == grace.size(),
          "reliability_summary: trace length mismatch");
  const std::vector<std::uint32_t> masks = detail::subset_masks(catalog);
  ReliabilityReport report;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    if (grace[k] != 0) {
      ++report.skipped;
      continue;
    }
    if (attacked[k] == 0) {
      ++report.tp;
      continue;
    }
    bool clean_exists = false;
    for (std::uint32_t mask : masks) {
      if ((mask & attacked[k]) == 0) {
        clean_exists = true;
        break;
      }
    }
    if (!clean_exists) {
      ++report.skipped;
      continue;
    }
    require(selected[k] >= 0 &&
                static_cast<std::size_t>(selected[k]) < masks.size(),
            "reliability_summary: selected index out of range");
    if ((masks[static_cast<std::size_t>(selected[k])] & attacked[k]) == 0) {
      ++report.tp;
    } else {
      ++report.fp;
    }
  }
  if (report.tp + report.fp > 0) {
    report.f1 = static_cast<double>(report.tp) /
                static_cast<double>(report.tp + report.fp);
  }
  return report;
}

/// Number of steps at which the ground-truth attacked set changes; start and
/// stop of every attack window count as one edge each.
inline int attack_edges(std::span<const std::uint32_t> attacked) {
  int edges = 0;
  std::uint32_t previous = 0;
  for (std::uint32_t mask : attacked) {
    if (mask != previous) ++edges;
    previous = mask;
  }
  return edges;
}

/// For every onset step (a sensor newly joins the attacked set), the number
/// of steps until the selection is disjoint from the attacked set; -1 when
/// that never happens before the trace ends.
inline std::vector<int> detection_latencies(
    std::span<const int> selected, std::span<const std::uint32_t> attacked,
    const SubsetCatalog& catalog) {
  require(selected.size() == attacked.size(),
          "detection_latencies: trace length mismatch");
  const std::vector<std::uint32_t> masks = detail::subset_masks(catalog);
  std::vector<int> latencies;
  std::uint32_t previous = 0;
  for (std::size_t k = 0; k < attacked.size(); ++k) {
    const bool onset = (attacked[k] & ~previous) != 0;
    previous = attacked[k];
    if (!onset) continue;
    int latency = -1;
    for (std::size_t j = k; j < attacked.size(); ++j) {
      require(selected[j] >= 0 &&
                  static_cast<std::size_t>(selected[j]) < masks.size(),
              "detection_latencies: selected index out of range");
      if ((masks[static_cast<std::size_t>(selected[j])] & attacked[j]) == 0) {
        latency = static_cast<int>(j - k);
        break;
      }
    }
    latencies.push_back(latency);
  }
  return latencies;
}

struct Spectrum {
  std::vector<double> frequency_hz;
  std::vector<double> amplitude;
};

/// Hann-windowed single-sided amplitude spectrum. Interior bins are scaled by
/// 2 / sum(window) so a sinusoid at a bin center recovers its amplitude; the
/// DC and Nyquist bins are not doubled.
inline Spectrum amplitude_spectrum(std::span<const double> series, double ts) {
  require(series.size() >= 256, "amplitude_spectrum: series shorter than 256");
  require(ts > 0.0, "amplitude_spectrum: ts must be positive");
  const std::size_t n = series.size();
  std::vector<double> windowed(n);
  double window_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                             static_cast<double>(n - 1));
    windowed[k] = w * series[k];
    window_sum += w;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> bins;
  fft.fwd(bins, windowed);
  const std::size_t half = n / 2;
  Spectrum spectrum;
  spectrum.frequency_hz.resize(half + 1);
  spectrum.amplitude.resize(half + 1);
  for (std::size_t i = 0; i <= half; ++i) {
    const bool interior = i != 0 && !(n % 2 == 0 && i == half);
    const double scale = (interior ? 2.0 : 1.0) / window_sum;
    spectrum.frequency_hz[i] =
        static_cast<double>(i) / (static_cast<double>(n) * ts);
    spectrum.amplitude[i] = scale * std::abs(bins[i]);
  }
  return spectrum;
}

}  // namespace secure_platoon
