#include "hdrgs/exposure.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "hdrgs/error.hpp"

namespace hdrgs {

double ev_to_seconds(double ev) { return std::exp2(ev); }

ExposureScaler::ExposureScaler(double r, double s) : r_(r), s_(s) {
  if (!(r > 0.0) || !std::isfinite(r) || !std::isfinite(s)) {
    throw DomainError("ExposureScaler: r must be positive and finite");
  }
}

ExposureScaler ExposureScaler::fit(std::span<const double> times) {
  std::vector<double> t(times.begin(), times.end());
  for (double v : t) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("fit_scaler: exposure times must be positive and finite");
    }
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  if (t.size() < 2) {
    throw DegenerateExposureError("fit_scaler: need at least two distinct exposure times");
  }
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < t.size(); ++i) r = std::min(r, 2.0 * t[i] / t[i + 1]);
  if (r > 1.0) {
    spdlog::warn("exposure scaling factor r = {:.4f} > 1 expands log time (closely spaced exposures)",
                 r);
  }
  const double s = -r * (std::log(t.back()) + std::log(t.front())) / 2.0;
  return ExposureScaler(r, s);
}

double ExposureScaler::scale_time(double t) const {
  if (!(t > 0.0)) throw DomainError("scale_time: exposure time must be positive");
  return r_ * std::log(t) + s_;
}

double ExposureScaler::hdr_from_learned(double learned) const {
  const double e = std::exp((learned + s_) / r_);
  return std::min(e, std::numeric_limits<double>::max());
}

double ExposureScaler::learned_from_hdr(double hdr) const {
  if (!(hdr > 0.0)) throw DomainError("learned_from_hdr: radiance must be positive");
  return r_ * std::log(hdr) - s_;
}

}  // namespace hdrgs
