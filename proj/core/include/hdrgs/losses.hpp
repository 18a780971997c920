#pragma once

#include <cstddef>

#include "hdrgs/image.hpp"
#include "hdrgs/tone_mapping.hpp"

namespace hdrgs {

struct LossConfig {
  /// D-SSIM mixing weight.
  double lambda1 = 0.2;
  /// Grid smoothness weight.
  double lambda2 = 0.3;
  /// Unit-exposure weight.
  double lambda3 = 0.5;

  void validate() const;
};

struct ImageLoss {
  double value = 0.0;
  ImageD grad;
};

/// Mean absolute error; the subgradient at exact ties is 0.
ImageLoss l1_loss(const ImageD& pred, const ImageD& target);

/// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), zero-padded
/// "same" filtering, C1 = 0.01^2, C2 = 0.03^2, averaged over pixels and
/// channels. Images must be at least 11x11.
double ssim(const ImageD& pred, const ImageD& target);

/// (1 - SSIM) / 2 and its gradient with respect to pred.
ImageLoss dssim_loss(const ImageD& pred, const ImageD& target);

struct TotalLoss {
  double l1 = 0.0;
  double dssim = 0.0;
  double smooth = 0.0;
  double unit = 0.0;
  double total = 0.0;
  ImageD grad_pred;
  /// Empty when no grid is active.
  GridGradients grad_grid;
};

/// (1 - l1) L1 + l1 D-SSIM + l2 L_smooth + l3 L_u. L_smooth measures second
/// derivatives in units of the dense node spacing. Pass grid == nullptr in
/// the coarse phase; the grid terms are then skipped.
TotalLoss total_loss(const ImageD& pred, const ImageD& target, const AsymmetricGrid* grid,
                     const LossConfig& cfg);

inline constexpr double kPsnrCap = 99.0;

/// -10 log10(MSE) on [0, 1] images; identical images report kPsnrCap.
double psnr(const ImageD& pred, const ImageD& target);

struct LogRmse {
  double rmse = 0.0;
  /// Log offset added to ln(pred) before the comparison.
  double offset = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

/// RMSE of ln(pred) - ln(gt) after removing the optimal constant log offset.
/// Samples where either value is not strictly positive are excluded.
LogRmse hdr_log_rmse(const ImageD& pred_hdr, const ImageD& gt_hdr);

}  // namespace hdrgs
