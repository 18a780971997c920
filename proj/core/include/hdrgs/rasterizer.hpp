#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hdrgs/geometry.hpp"
#include "hdrgs/image.hpp"

namespace hdrgs {

struct RasterConfig {
  int tile_size = 16;
  /// Compositing stops before a Gaussian would push transmittance below this.
  double min_transmittance = 1e-4;
};

/// Learned irradiance E' (3 channels, log domain, may be negative) plus the
/// transmittance left after the last composited Gaussian.
struct IrradianceImage {
  ImageD values;
  ImageD final_transmittance;

  IrradianceImage() = default;
  IrradianceImage(int width, int height)
      : values(width, height, 3, 0.0), final_transmittance(width, height, 1, 1.0) {}
};

/// Per-Gaussian running max of alpha * transmittance, reset by pruning.
class ContributionScores {
 public:
  ContributionScores() = default;
  explicit ContributionScores(std::size_t n) : scores_(n, 0.0) {}

  std::size_t size() const { return scores_.size(); }
  double operator[](std::size_t i) const { return scores_[i]; }
  std::span<const double> values() const { return scores_; }

  void update(std::size_t i, double contribution) {
    if (contribution > scores_[i]) scores_[i] = contribution;
  }
  void reset() { std::fill(scores_.begin(), scores_.end(), 0.0); }
  void resize(std::size_t n) { scores_.assign(n, 0.0); }
  /// Keeps entries whose mask is true, in order.
  void compact(std::span<const std::uint8_t> keep);

 private:
  std::vector<double> scores_;
};

/// Everything the backward pass needs from a forward pass.
struct RenderState {
  int width = 0;
  int height = 0;
  int tiles_x = 0;
  int tiles_y = 0;
  int tile_size = 16;
  /// Indexed like the scene; `visible[i]` false means culled.
  std::vector<ProjectedGaussian> projected;
  std::vector<std::uint8_t> visible;
  /// Scene indices per tile, front to back.
  std::vector<std::vector<std::uint32_t>> tile_lists;
  /// Number of tile-list entries composited for each pixel.
  std::vector<std::uint32_t> contributors;
  ImageD final_transmittance;
  /// Max alpha*T per Gaussian over this view.
  std::vector<double> max_contribution;
};

struct RenderOutput {
  IrradianceImage image;
  RenderState state;
};

/// Tiled front-to-back compositing E'(p) = sum_i L'_i a_i prod_{j<i}(1 - a_j).
/// Deterministic: tiles are independent and each pixel composites in a fixed
/// order (depth, ties by scene index).
RenderOutput render_irradiance(std::span<const Gaussian3D> scene, const Camera& cam,
                               const RasterConfig& cfg = {});

/// Brute-force oracle: per-pixel full sort, no tiles, no early termination.
IrradianceImage render_irradiance_reference(std::span<const Gaussian3D> scene,
                                            const Camera& cam);

/// Gradients of sum_p <grad(p), E'(p)> with respect to every Gaussian
/// parameter. `grad` must be width x height x 3. Culled Gaussians get zero.
std::vector<GaussianGradient> render_backward(std::span<const Gaussian3D> scene,
                                              const Camera& cam, const RenderState& state,
                                              const ImageD& grad);

/// Convenience overload that recomputes the forward state.
std::vector<GaussianGradient> render_backward(std::span<const Gaussian3D> scene,
                                              const Camera& cam, const ImageD& grad,
                                              const RasterConfig& cfg = {});

/// scores[i] = max(scores[i], max over pixels of a_i * T_i) for this view.
void accumulate_contribution_scores(std::span<const Gaussian3D> scene, const Camera& cam,
                                    ContributionScores& scores, const RasterConfig& cfg = {});

/// Same update from an existing forward pass.
void accumulate_contribution_scores(const RenderState& state, ContributionScores& scores);

}  // namespace hdrgs
