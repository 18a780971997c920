#include "hdrgs/losses.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "hdrgs/error.hpp"

namespace hdrgs {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same(const ImageD& a, const ImageD& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": image shapes differ");
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable zero-padded "same" Gaussian filter on one plane (w x h).
// The window is symmetric, so the filter is its own adjoint.
std::vector<double> blur(const std::vector<double>& in, int w, int h) {
  static const auto taps = gaussian_taps();
  constexpr int half = kWindow / 2;
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w) acc += taps[k + half] * in[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) acc += taps[k + half] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

std::vector<double> plane(const ImageD& img, int c) {
  std::vector<double> p(static_cast<std::size_t>(img.width()) * img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) p[static_cast<std::size_t>(y) * img.width() + x] = img.at(x, y, c);
  }
  return p;
}

// Mean SSIM over all pixels and channels; fills grad (d mean / d pred) when given.
double ssim_impl(const ImageD& pred, const ImageD& target, ImageD* grad) {
  require_same(pred, target, "ssim");
  if (pred.width() < kWindow || pred.height() < kWindow) {
    throw ShapeError("ssim: image smaller than the 11x11 window");
  }
  const int w = pred.width();
  const int h = pred.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  const double count = static_cast<double>(n) * pred.channels();
  double total = 0.0;
  for (int c = 0; c < pred.channels(); ++c) {
    const auto x = plane(pred, c);
    const auto y = plane(target, c);
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = blur(x, w, h);
    const auto my = blur(y, w, h);
    const auto exx = blur(xx, w, h);
    const auto eyy = blur(yy, w, h);
    const auto exy = blur(xy, w, h);

    std::vector<double> g_mu, g_sxx, g_sxy;
    if (grad) {
      g_mu.resize(n);
      g_sxx.resize(n);
      g_sxy.resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double sxx = exx[i] - mx[i] * mx[i];
      const double syy = eyy[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      const double a1 = 2.0 * mx[i] * my[i] + kC1;
      const double a2 = 2.0 * sxy + kC2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + kC1;
      const double b2 = sxx + syy + kC2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (grad) {
        const double d_mu = 2.0 * my[i] * a2 / (b1 * b2) - s * 2.0 * mx[i] / b1;
        const double d_sxx = -s / b2;
        const double d_sxy = 2.0 * a1 / (b1 * b2);
        // sxx and sxy also depend on the means.
        g_mu[i] = d_mu - 2.0 * mx[i] * d_sxx - my[i] * d_sxy;
        g_sxx[i] = d_sxx;
        g_sxy[i] = d_sxy;
      }
    }
    if (grad) {
      const auto b_mu = blur(g_mu, w, h);
      const auto b_sxx = blur(g_sxx, w, h);
      const auto b_sxy = blur(g_sxy, w, h);
      for (int py = 0; py < h; ++py) {
        for (int px = 0; px < w; ++px) {
          const std::size_t i = static_cast<std::size_t>(py) * w + px;
          grad->at(px, py, c) = (b_mu[i] + 2.0 * x[i] * b_sxx[i] + y[i] * b_sxy[i]) / count;
        }
      }
    }
  }
  return total / count;
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) throw ConfigError("loss: lambda1 must lie in [0, 1]");
  if (!(lambda2 >= 0.0) || !(lambda3 >= 0.0)) {
    throw ConfigError("loss: lambda2 and lambda3 must be non-negative");
  }
}

ImageLoss l1_loss(const ImageD& pred, const ImageD& target) {
  require_same(pred, target, "l1_loss");
  ImageLoss out{0.0, ImageD(pred.width(), pred.height(), pred.channels())};
  const double inv = pred.size() ? 1.0 / static_cast<double>(pred.size()) : 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    out.value += std::abs(d);
    out.grad[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  out.value *= inv;
  return out;
}

double ssim(const ImageD& pred, const ImageD& target) { return ssim_impl(pred, target, nullptr); }

ImageLoss dssim_loss(const ImageD& pred, const ImageD& target) {
  ImageLoss out{0.0, ImageD(pred.width(), pred.height(), pred.channels())};
  const double s = ssim_impl(pred, target, &out.grad);
  out.value = 0.5 * (1.0 - s);
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] *= -0.5;
  return out;
}

TotalLoss total_loss(const ImageD& pred, const ImageD& target, const AsymmetricGrid* grid,
                     const LossConfig& cfg) {
  cfg.validate();
  TotalLoss out;
  const ImageLoss l1 = l1_loss(pred, target);
  out.l1 = l1.value;
  out.grad_pred = ImageD(pred.width(), pred.height(), pred.channels());
  for (std::size_t i = 0; i < pred.size(); ++i) out.grad_pred[i] = (1.0 - cfg.lambda1) * l1.grad[i];
  if (cfg.lambda1 > 0.0) {
    const ImageLoss ds = dssim_loss(pred, target);
    out.dssim = ds.value;
    for (std::size_t i = 0; i < pred.size(); ++i) out.grad_pred[i] += cfg.lambda1 * ds.grad[i];
  }
  out.total = (1.0 - cfg.lambda1) * out.l1 + cfg.lambda1 * out.dssim;

  if (grid) {
    out.grad_grid = GridGradients(grid->node_count());
    if (cfg.lambda2 > 0.0) {
      GridLoss sm = smoothness_loss(*grid, 1.0 / grid->layout().dense_density);
      out.smooth = sm.value;
      sm.grad *= cfg.lambda2;
      out.grad_grid += sm.grad;
    }
    if (cfg.lambda3 > 0.0) {
      GridLoss un = unit_exposure_loss(*grid);
      out.unit = un.value;
      un.grad *= cfg.lambda3;
      out.grad_grid += un.grad;
    }
    out.total += cfg.lambda2 * out.smooth + cfg.lambda3 * out.unit;
  }
  return out;
}

double psnr(const ImageD& pred, const ImageD& target) {
  require_same(pred, target, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    mse += d * d;
  }
  mse /= static_cast<double>(pred.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

LogRmse hdr_log_rmse(const ImageD& pred_hdr, const ImageD& gt_hdr) {
  require_same(pred_hdr, gt_hdr, "hdr_log_rmse");
  LogRmse out;
  std::vector<double> diff;
  diff.reserve(pred_hdr.size());
  for (std::size_t i = 0; i < pred_hdr.size(); ++i) {
    const double p = pred_hdr[i];
    const double g = gt_hdr[i];
    if (p > 0.0 && g > 0.0 && std::isfinite(p) && std::isfinite(g)) {
      diff.push_back(std::log(p) - std::log(g));
    } else {
      ++out.excluded;
    }
  }
  out.used = diff.size();
  if (diff.empty()) {
    out.rmse = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= static_cast<double>(diff.size());
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  out.offset = -mean;
  out.rmse = std::sqrt(ss / static_cast<double>(diff.size()));
  return out;
}

}  // namespace hdrgs
