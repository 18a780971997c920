#pragma once

#include <span>
#include <vector>

namespace hdrgs {

enum class ExposureUnit { Seconds, EV };

/// Seconds from an exposure value relative to a 1 s reference: t = 2^ev.
double ev_to_seconds(double ev);

/// Affine map of log exposure time, t' = r ln t + s, and the matching map
/// between learned irradiance E' and linear HDR radiance E.
class ExposureScaler {
 public:
  ExposureScaler() = default;
  ExposureScaler(double r, double s);

  /// Fits r = min_i 2 t_i / t_{i+1} and s = -r (ln t_max + ln t_min) / 2 over
  /// the sorted distinct times. Throws DomainError for t <= 0 and
  /// DegenerateExposureError for fewer than two distinct times. Warns when r > 1.
  static ExposureScaler fit(std::span<const double> times);

  /// r = 1, s = 0: no time scaling.
  static ExposureScaler identity() { return {}; }

  double r() const { return r_; }
  double s() const { return s_; }

  double scale_time(double t) const;
  /// E = exp((E' + s) / r). Saturates at the largest finite double.
  double hdr_from_learned(double learned) const;
  /// E' = r ln E - s. Throws DomainError for E <= 0.
  double learned_from_hdr(double hdr) const;

  bool operator==(const ExposureScaler&) const = default;

 private:
  double r_ = 1.0;
  double s_ = 0.0;
};

}  // namespace hdrgs
