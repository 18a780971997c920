#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hdrgs/dataset.hpp"
#include "hdrgs/losses.hpp"
#include "hdrgs/model.hpp"
#include "hdrgs/rasterizer.hpp"
#include "hdrgs/tone_mapping.hpp"

namespace hdrgs {

struct LearningRates {
  /// Means decay exponentially from init to final over the whole run and
  /// are multiplied by the scene extent.
  double means_init = 1.6e-4;
  double means_final = 1.6e-6;
  double opacity = 0.05;
  double scale = 5e-3;
  double rotation = 1e-3;
  double radiance = 2.5e-3;
  /// Grid decays exponentially from init to final over the fine phase.
  double grid_init = 0.02;
  double grid_final = 5e-6;
};

struct TrainConfig {
  int coarse_iters = 6000;
  int fine_iters = 17000;
  LearningRates lr;
  LossConfig loss;
  GridLayout grid;

  double prune_threshold = 0.02;
  int prune_start = 500;
  int prune_interval = 200;
  int opacity_reset_interval = 3000;
  /// Resets fire only on iterations strictly below this.
  int opacity_reset_until = 15000;
  double opacity_reset_ceiling = 0.01;

  bool densify_enabled = false;
  double densify_grad_threshold = 2e-4;
  int densify_from = 500;
  int densify_until = 15000;
  int densify_interval = 100;
  std::size_t max_points = 20000;

  /// Ablations: skip the sigmoid phase, force (r, s) = (1, 0), use the dense
  /// density on both grid regions.
  bool coarse_enabled = true;
  bool time_scaling = true;
  bool symmetric_grid = false;

  /// Exposure indices used for training; empty means every exposure present
  /// in the train split.
  std::vector<int> train_exposures;

  double init_opacity = 0.1;
  /// Used only when the dataset has no init points.
  int random_init_points = 2000;
  RasterConfig raster;
  int log_interval = 100;
  std::uint64_t seed = 0;

  int total_iters() const { return (coarse_enabled ? coarse_iters : 0) + fine_iters; }
  /// Throws ConfigError on non-positive counts or rates, or a schedule that
  /// can never prune.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Adam

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
};

/// Moments for a group of `rows` parameter rows of `dim` values each.
struct AdamState {
  int dim = 1;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t rows, int dim) : dim(dim), m(rows * dim, 0.0), v(rows * dim, 0.0) {}
  std::size_t rows() const { return m.size() / static_cast<std::size_t>(dim); }
  /// Keeps rows whose mask entry is nonzero.
  void compact(std::span<const std::uint8_t> keep);
  /// Appends a zero-moment copy slot for each index in `sources`.
  void append_rows(std::size_t count);
};

/// Bias-corrected Adam. Returns false and leaves params and state untouched
/// when any gradient is non-finite.
bool adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamParams& hp = {});

/// exp(lerp(ln init, ln final, clamp(step / steps, 0, 1))).
double exponential_lr(double init, double final, std::int64_t step, std::int64_t steps);

// ---------------------------------------------------------------------------
// Scheduling and scene maintenance

/// Pruning and opacity reset on global 1-based iterations.
class Schedule {
 public:
  explicit Schedule(const TrainConfig& cfg) : cfg_(cfg) {}

  bool is_reset(int iter) const;
  /// Regular prune slots, minus any within one prune interval after a reset.
  bool is_prune(int iter) const;
  bool is_densify(int iter) const;
  /// Most recent reset iteration <= iter, or -1.
  int last_reset(int iter) const;

 private:
  TrainConfig cfg_;
};

/// Removes Gaussians with score < threshold; returns the keep mask.
std::vector<std::uint8_t> prune(std::vector<Gaussian3D>& scene, ContributionScores& scores,
                                double threshold);

/// Sets every opacity to min(current, ceiling) in sigmoid space.
void reset_opacity(std::vector<Gaussian3D>& scene, double ceiling = 0.01);

/// Clones each Gaussian whose mean accumulated positional gradient norm
/// exceeds the threshold, jittering the clone's mean by N(0, scale / 2).
/// Returns the source index of every clone (appended in order). Skipped
/// with a warning when the clones would exceed max_points.
std::vector<std::size_t> densify(std::vector<Gaussian3D>& scene,
                                 std::span<const double> grad_norm_sum,
                                 std::span<const int> grad_count, double threshold,
                                 std::size_t max_points, std::mt19937_64& rng);

/// Isotropic Gaussians at the points: scale from the mean squared distance
/// to the 3 nearest neighbours, identity rotation, zero radiance.
std::vector<Gaussian3D> init_gaussians(std::span<const InitPoint> points, double init_opacity);

// ---------------------------------------------------------------------------
// Training

struct LogRow {
  int iter = 0;
  Phase phase = Phase::Coarse;
  double l1 = 0.0;
  double dssim = 0.0;
  double smooth = 0.0;
  double unit = 0.0;
  double total = 0.0;
  std::size_t points = 0;
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  std::vector<LogRow> log;
};

/// Header: iter,phase,l1,dssim,smooth,unit,total,points
void write_train_log(const std::vector<LogRow>& log, const std::filesystem::path& path);

/// Frames of the train split restricted to cfg.train_exposures.
std::vector<std::size_t> training_frames(const MultiExposureDataset& ds, const TrainConfig& cfg);

/// Coarse phase C = sigmoid(E' + t') over Gaussian parameters, then the grid
/// is seeded from the sigmoid and the fine phase C = g_leaky(E' + t') trains
/// Gaussians and grid jointly. Throws NumericalAbort on a non-finite loss.
TrainResult train(const MultiExposureDataset& ds, const TrainConfig& cfg);

/// Flat JSON text of the configuration (stored in checkpoints).
std::string config_json(const TrainConfig& cfg);

}  // namespace hdrgs
