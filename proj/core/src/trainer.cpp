#include "hdrgs/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hdrgs/config.hpp"
#include "hdrgs/error.hpp"

namespace hdrgs {

void TrainConfig::validate() const {
  if (coarse_iters <= 0 || fine_iters <= 0) throw ConfigError("train: iteration counts must be positive");
  for (double v : {lr.means_init, lr.means_final, lr.opacity, lr.scale, lr.rotation, lr.radiance,
                   lr.grid_init, lr.grid_final}) {
    if (!(v > 0.0)) throw ConfigError("train: learning rates must be positive");
  }
  loss.validate();
  GridLayout l = grid;
  if (symmetric_grid) l.sparse_density = l.dense_density;
  l.validate();
  if (prune_start <= 0 || prune_interval <= 0) throw ConfigError("train: prune schedule must be positive");
  if (opacity_reset_interval <= 0) throw ConfigError("train: opacity reset interval must be positive");
  if (!(opacity_reset_ceiling > 0.0 && opacity_reset_ceiling < 1.0)) {
    throw ConfigError("train: opacity reset ceiling must lie in (0, 1)");
  }
  if (!(prune_threshold >= 0.0)) throw ConfigError("train: prune threshold must be non-negative");
  if (densify_interval <= 0) throw ConfigError("train: densify interval must be positive");
  if (!(init_opacity > 0.0 && init_opacity < 1.0)) throw ConfigError("train: init opacity must lie in (0, 1)");
  if (log_interval <= 0) throw ConfigError("train: log interval must be positive");
  if (raster.tile_size <= 0) throw ConfigError("train: tile size must be positive");
}

// ---------------------------------------------------------------------------
// Adam

void AdamState::compact(std::span<const std::uint8_t> keep) {
  if (keep.size() != rows()) throw ShapeError("AdamState::compact: mask size mismatch");
  std::size_t out = 0;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    if (!keep[r]) continue;
    for (int d = 0; d < dim; ++d) {
      m[out * dim + d] = m[r * dim + d];
      v[out * dim + d] = v[r * dim + d];
    }
    ++out;
  }
  m.resize(out * dim);
  v.resize(out * dim);
}

void AdamState::append_rows(std::size_t count) {
  m.resize(m.size() + count * dim, 0.0);
  v.resize(v.size() + count * dim, 0.0);
}

bool adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
               const AdamParams& hp) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter, gradient and state sizes differ");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) return false;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grads[i];
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
  return true;
}

double exponential_lr(double init, double final, std::int64_t step, std::int64_t steps) {
  const double t = steps > 0 ? std::clamp(static_cast<double>(step) / steps, 0.0, 1.0) : 1.0;
  return std::exp((1.0 - t) * std::log(init) + t * std::log(final));
}

// ---------------------------------------------------------------------------
// Schedule

bool Schedule::is_reset(int iter) const {
  return iter > 0 && iter < cfg_.opacity_reset_until && iter % cfg_.opacity_reset_interval == 0;
}

int Schedule::last_reset(int iter) const {
  if (iter <= 0) return -1;
  const int capped = std::min(iter, cfg_.opacity_reset_until - 1);
  if (capped < cfg_.opacity_reset_interval) return -1;
  return capped - capped % cfg_.opacity_reset_interval;
}

bool Schedule::is_prune(int iter) const {
  if (iter < cfg_.prune_start || (iter - cfg_.prune_start) % cfg_.prune_interval != 0) return false;
  const int r = last_reset(iter);
  return r < 0 || iter - r >= cfg_.prune_interval;
}

bool Schedule::is_densify(int iter) const {
  return cfg_.densify_enabled && iter >= cfg_.densify_from && iter < cfg_.densify_until &&
         iter % cfg_.densify_interval == 0;
}

std::vector<std::uint8_t> prune(std::vector<Gaussian3D>& scene, ContributionScores& scores,
                                double threshold) {
  if (scores.size() != scene.size()) throw ShapeError("prune: scores not sized to the scene");
  std::vector<std::uint8_t> keep(scene.size(), 0);
  std::size_t out = 0;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    keep[i] = scores[i] >= threshold ? 1 : 0;
    if (keep[i]) scene[out++] = scene[i];
  }
  scene.resize(out);
  scores.resize(out);
  return keep;
}

void reset_opacity(std::vector<Gaussian3D>& scene, double ceiling) {
  const double ceiling_logit = logit(ceiling);
  for (Gaussian3D& g : scene) g.opacity_logit = std::min(g.opacity_logit, ceiling_logit);
}

std::vector<std::size_t> densify(std::vector<Gaussian3D>& scene, std::span<const double> grad_norm_sum,
                                 std::span<const int> grad_count, double threshold,
                                 std::size_t max_points, std::mt19937_64& rng) {
  if (grad_norm_sum.size() != scene.size() || grad_count.size() != scene.size()) {
    throw ShapeError("densify: statistics not sized to the scene");
  }
  std::vector<std::size_t> sources;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (grad_count[i] > 0 && grad_norm_sum[i] / grad_count[i] > threshold) sources.push_back(i);
  }
  if (sources.empty()) return sources;
  if (scene.size() + sources.size() > max_points) {
    spdlog::warn("densify skipped: {} clones would exceed the point cap {}", sources.size(), max_points);
    return {};
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i : sources) {
    Gaussian3D clone = scene[i];
    const Vec3 s = clone.scale();
    for (int k = 0; k < 3; ++k) clone.mean[k] += 0.5 * s.maxCoeff() * normal(rng);
    scene.push_back(clone);
  }
  return sources;
}

std::vector<Gaussian3D> init_gaussians(std::span<const InitPoint> points, double init_opacity) {
  std::vector<Gaussian3D> out;
  out.reserve(points.size());
  const double opacity_logit = logit(init_opacity);
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::array<double, 3> best{std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity(),
                               std::numeric_limits<double>::infinity()};
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      const double d2 = (points[i].position - points[j].position).squaredNorm();
      if (d2 < best[2]) {
        best[2] = d2;
        std::sort(best.begin(), best.end());
      }
    }
    double mean_d2 = 0.0;
    int n = 0;
    for (double d2 : best) {
      if (std::isfinite(d2)) {
        mean_d2 += d2;
        ++n;
      }
    }
    mean_d2 = n > 0 ? std::max(mean_d2 / n, 1e-7) : 1.0;
    Gaussian3D g;
    g.mean = points[i].position;
    g.log_scale = Vec3::Constant(std::log(std::sqrt(mean_d2)));
    g.opacity_logit = opacity_logit;
    out.push_back(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

void write_train_log(const std::vector<LogRow>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "iter,phase,l1,dssim,smooth,unit,total,points\n";
  for (const LogRow& r : log) {
    out << r.iter << ',' << (r.phase == Phase::Coarse ? "coarse" : "fine") << ',' << r.l1 << ','
        << r.dssim << ',' << r.smooth << ',' << r.unit << ',' << r.total << ',' << r.points << '\n';
  }
}

std::vector<std::size_t> training_frames(const MultiExposureDataset& ds, const TrainConfig& cfg) {
  const std::set<int> wanted(cfg.train_exposures.begin(), cfg.train_exposures.end());
  for (int e : wanted) {
    if (e < 0 || e >= static_cast<int>(ds.exposure_values.size())) {
      throw ConfigError("train: exposure index " + std::to_string(e) + " not in the dataset");
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const Frame& f = ds.frames[i];
    if (f.split != Split::Train) continue;
    if (!wanted.empty() && !wanted.count(f.exposure)) continue;
    out.push_back(i);
  }
  return out;
}

std::string config_json(const TrainConfig& cfg) { return to_flat_json(cfg).dump(); }

namespace {

constexpr int kMeanDim = 3;
constexpr int kScaleDim = 3;
constexpr int kRotDim = 4;
constexpr int kOpacityDim = 1;
constexpr int kRadianceDim = 3;

struct GaussianOptimizer {
  AdamState mean, scale, rot, opacity, radiance;

  explicit GaussianOptimizer(std::size_t n)
      : mean(n, kMeanDim), scale(n, kScaleDim), rot(n, kRotDim), opacity(n, kOpacityDim),
        radiance(n, kRadianceDim) {}

  void compact(std::span<const std::uint8_t> keep) {
    for (AdamState* s : {&mean, &scale, &rot, &opacity, &radiance}) s->compact(keep);
  }
  void append(std::size_t count) {
    for (AdamState* s : {&mean, &scale, &rot, &opacity, &radiance}) s->append_rows(count);
  }
};

// Gathers one parameter block of every Gaussian into a flat buffer, runs
// Adam and scatters the result back.
template <int Dim, typename Get>
void step_group(std::vector<Gaussian3D>& scene, const std::vector<GaussianGradient>& grads,
                AdamState& state, double lr, Get get, const char* name, int iter) {
  const std::size_t n = scene.size();
  std::vector<double> p(n * Dim), g(n * Dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto [pv, gv] = get(scene[i], grads[i]);
    for (int d = 0; d < Dim; ++d) {
      p[i * Dim + d] = pv[d];
      g[i * Dim + d] = gv[d];
    }
  }
  if (!adam_step(p, g, state, lr)) {
    spdlog::warn("iteration {}: non-finite {} gradient, group skipped", iter, name);
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto [pv, gv] = get(scene[i], grads[i]);
    for (int d = 0; d < Dim; ++d) pv[d] = p[i * Dim + d];
  }
}

struct ScalarRef {
  double* p;
  double& operator[](int) { return *p; }
};
struct ConstScalarRef {
  const double* p;
  double operator[](int) const { return *p; }
};

double scene_extent(const MultiExposureDataset& ds) {
  Vec3 centroid = Vec3::Zero();
  for (std::size_t v = 0; v < ds.views.size(); ++v) centroid += ds.camera(static_cast<int>(v), 0).center();
  centroid /= static_cast<double>(ds.views.size());
  double radius = 0.0;
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    radius = std::max(radius, (ds.camera(static_cast<int>(v), 0).center() - centroid).norm());
  }
  return std::max(1.1 * radius, 1e-3);
}

std::vector<Gaussian3D> random_init(const MultiExposureDataset& ds, const TrainConfig& cfg,
                                    std::mt19937_64& rng) {
  Vec3 centroid = Vec3::Zero();
  for (std::size_t v = 0; v < ds.views.size(); ++v) centroid += ds.camera(static_cast<int>(v), 0).center();
  centroid /= static_cast<double>(ds.views.size());
  const double half = 3.0 * std::max(scene_extent(ds), 1.0);
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<InitPoint> pts(static_cast<std::size_t>(cfg.random_init_points));
  for (InitPoint& p : pts) p.position = centroid + Vec3(u(rng), u(rng), u(rng));
  return init_gaussians(pts, cfg.init_opacity);
}

std::string diagnostic(int iter, Phase phase, const TotalLoss& loss, const std::vector<Gaussian3D>& scene) {
  std::size_t bad = 0;
  for (const Gaussian3D& g : scene) {
    if (!g.mean.allFinite() || !g.log_scale.allFinite() || !g.rotation.allFinite() ||
        !std::isfinite(g.opacity_logit) || !g.radiance.allFinite()) {
      ++bad;
    }
  }
  std::ostringstream os;
  os << "non-finite loss at iteration " << iter << " (" << (phase == Phase::Coarse ? "coarse" : "fine")
     << " phase): l1=" << loss.l1 << " dssim=" << loss.dssim << " smooth=" << loss.smooth
     << " unit=" << loss.unit << " total=" << loss.total << "; " << bad << " of " << scene.size()
     << " Gaussians have non-finite parameters";
  return os.str();
}

}  // namespace

TrainResult train(const MultiExposureDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  ds.validate();
  const std::vector<std::size_t> frames = training_frames(ds, cfg);
  if (frames.empty()) throw ConfigError("train: no training frames selected");

  std::set<int> used_exposures;
  for (std::size_t f : frames) used_exposures.insert(ds.frames[f].exposure);
  std::vector<double> train_times;
  for (int e : used_exposures) train_times.push_back(ds.exposure_seconds(e));
  if (train_times.size() < 2) {
    throw DegenerateExposureError("train: need at least two distinct training exposure times");
  }

  const ExposureScaler scaler = cfg.time_scaling ? ExposureScaler::fit(train_times) : ExposureScaler::identity();
  GridLayout layout = cfg.grid;
  if (cfg.symmetric_grid) layout.sparse_density = layout.dense_density;
  AsymmetricGrid grid(layout);

  std::mt19937_64 rng(cfg.seed);
  std::vector<Gaussian3D> scene =
      ds.init_points.empty() ? random_init(ds, cfg, rng) : init_gaussians(ds.init_points, cfg.init_opacity);

  std::vector<ImageD> targets(ds.frames.size());
  for (std::size_t f : frames) targets[f] = to_unit(ds.frames[f].ldr);

  GaussianOptimizer opt(scene.size());
  AdamState grid_state(static_cast<std::size_t>(AsymmetricGrid::kChannels) * grid.node_count(), 1);
  ContributionScores scores(scene.size());
  std::vector<double> densify_norm(scene.size(), 0.0);
  std::vector<int> densify_count(scene.size(), 0);

  const Schedule schedule(cfg);
  const int total = cfg.total_iters();
  const int coarse = cfg.coarse_enabled ? cfg.coarse_iters : 0;
  const double extent = scene_extent(ds);
  Phase phase = Phase::Coarse;
  if (!cfg.coarse_enabled) {
    init_grid_from_sigmoid(grid);
    phase = Phase::Fine;
  }
  std::uniform_int_distribution<std::size_t> pick(0, frames.size() - 1);

  TrainResult result;
  for (int iter = 1; iter <= total; ++iter) {
    if (phase == Phase::Coarse && iter > coarse) {
      init_grid_from_sigmoid(grid);
      phase = Phase::Fine;
    }
    const bool fine = phase == Phase::Fine;
    const std::size_t frame_index = frames[pick(rng)];
    const Frame& frame = ds.frames[frame_index];
    const Camera cam = ds.camera(frame);
    const ImageD& target = targets[frame_index];

    const RenderOutput fwd = render_irradiance(scene, cam, cfg.raster);
    const double t_scaled = scaler.scale_time(cam.exposure_time);
    const ToneMapper mapper = fine ? ToneMapper::grid(grid) : ToneMapper::sigmoid();
    const ImageD pred = tone_map(fwd.image, mapper, t_scaled);

    TotalLoss loss = total_loss(pred, target, fine ? &grid : nullptr, cfg.loss);
    if (!std::isfinite(loss.total)) {
      throw NumericalAbort(diagnostic(iter, phase, loss, scene));
    }

    // Chain through the tone mapper.
    ImageD grad_irr(pred.width(), pred.height(), 3);
    GridGradients grid_grad = fine ? std::move(loss.grad_grid) : GridGradients{};
    for (int y = 0; y < pred.height(); ++y) {
      for (int x = 0; x < pred.width(); ++x) {
        for (int c = 0; c < 3; ++c) {
          const double up = loss.grad_pred.at(x, y, c);
          const double xin = fwd.image.values.at(x, y, c) + t_scaled;
          if (fine) {
            const GridEvalGrad gg = grid.backward(xin, c, up);
            grad_irr.at(x, y, c) = gg.dx;
            for (int k = 0; k < gg.count; ++k) grid_grad.channels[c][gg.nodes[k].first] += gg.nodes[k].second;
          } else {
            grad_irr.at(x, y, c) = sigmoid_backward(xin, up);
          }
        }
      }
    }

    const std::vector<GaussianGradient> grads = render_backward(scene, cam, fwd.state, grad_irr);

    const double lr_mean = exponential_lr(cfg.lr.means_init * extent, cfg.lr.means_final * extent, iter, total);
    step_group<kMeanDim>(scene, grads, opt.mean, lr_mean,
                         [](Gaussian3D& g, const GaussianGradient& d) {
                           return std::pair<Vec3&, const Vec3&>(g.mean, d.mean);
                         }, "mean", iter);
    step_group<kScaleDim>(scene, grads, opt.scale, cfg.lr.scale,
                          [](Gaussian3D& g, const GaussianGradient& d) {
                            return std::pair<Vec3&, const Vec3&>(g.log_scale, d.log_scale);
                          }, "scale", iter);
    step_group<kRotDim>(scene, grads, opt.rot, cfg.lr.rotation,
                        [](Gaussian3D& g, const GaussianGradient& d) {
                          return std::pair<Vec4&, const Vec4&>(g.rotation, d.rotation);
                        }, "rotation", iter);
    step_group<kOpacityDim>(scene, grads, opt.opacity, cfg.lr.opacity,
                            [](Gaussian3D& g, const GaussianGradient& d) {
                              return std::pair<ScalarRef, ConstScalarRef>({&g.opacity_logit}, {&d.opacity_logit});
                            }, "opacity", iter);
    step_group<kRadianceDim>(scene, grads, opt.radiance, cfg.lr.radiance,
                             [](Gaussian3D& g, const GaussianGradient& d) {
                               return std::pair<Vec3&, const Vec3&>(g.radiance, d.radiance);
                             }, "radiance", iter);

    if (fine) {
      const std::size_t nodes = grid.node_count();
      std::vector<double> p(3 * nodes), g(3 * nodes);
      for (int c = 0; c < 3; ++c) {
        const auto v = grid.values(c);
        std::copy(v.begin(), v.end(), p.begin() + c * nodes);
        std::copy(grid_grad.channels[c].begin(), grid_grad.channels[c].end(), g.begin() + c * nodes);
      }
      const double lr_grid = exponential_lr(cfg.lr.grid_init, cfg.lr.grid_final, iter - coarse - 1, cfg.fine_iters);
      if (adam_step(p, g, grid_state, lr_grid)) {
        for (int c = 0; c < 3; ++c) {
          auto v = grid.mutable_values(c);
          std::copy(p.begin() + c * nodes, p.begin() + (c + 1) * nodes, v.begin());
        }
        grid.pin_boundaries();
      } else {
        spdlog::warn("iteration {}: non-finite grid gradient, group skipped", iter);
      }
    }

    accumulate_contribution_scores(fwd.state, scores);
    if (cfg.densify_enabled) {
      for (std::size_t i = 0; i < scene.size(); ++i) {
        if (fwd.state.visible[i]) {
          densify_norm[i] += grads[i].mean.norm();
          ++densify_count[i];
        }
      }
    }

    if (schedule.is_densify(iter)) {
      const auto sources = densify(scene, densify_norm, densify_count, cfg.densify_grad_threshold,
                                   cfg.max_points, rng);
      opt.append(sources.size());
      ContributionScores grown(scene.size());
      for (std::size_t i = 0; i < scores.size(); ++i) grown.update(i, scores[i]);
      for (std::size_t k = 0; k < sources.size(); ++k) grown.update(scores.size() + k, scores[sources[k]]);
      scores = grown;
      densify_norm.assign(scene.size(), 0.0);
      densify_count.assign(scene.size(), 0);
    }
    if (schedule.is_reset(iter)) {
      reset_opacity(scene, cfg.opacity_reset_ceiling);
      std::fill(opt.opacity.m.begin(), opt.opacity.m.end(), 0.0);
      std::fill(opt.opacity.v.begin(), opt.opacity.v.end(), 0.0);
    } else if (schedule.is_prune(iter)) {
      const auto keep = prune(scene, scores, cfg.prune_threshold);
      opt.compact(keep);
      std::size_t out = 0;
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        densify_norm[out] = densify_norm[i];
        densify_count[out] = densify_count[i];
        ++out;
      }
      densify_norm.resize(out);
      densify_count.resize(out);
      if (scene.empty()) throw NumericalAbort("pruning removed every Gaussian at iteration " + std::to_string(iter));
    }

    if (iter == 1 || iter % cfg.log_interval == 0 || iter == total) {
      result.log.push_back({iter, phase, loss.l1, loss.dssim, loss.smooth, loss.unit, loss.total, scene.size()});
    }
  }

  ModelCheckpoint& ck = result.checkpoint;
  ck.gaussians = std::move(scene);
  ck.grid = std::move(grid);
  ck.scaler = scaler;
  ck.phase = phase;
  ck.iteration = total;
  ck.config_json = config_json(cfg);
  ck.config_hash = fnv1a(ck.config_json);
  ck.width = ds.width;
  ck.height = ds.height;
  ck.views = ds.views;
  ck.exposures = ds.exposure_times();
  ck.train_exposures.assign(used_exposures.begin(), used_exposures.end());

  const auto bad = non_monotone_segments(ck.grid);
  if (!bad.empty() && phase == Phase::Fine) {
    spdlog::info("learned tone curve has {} non-monotone segments", bad.size());
  }
  return result;
}

}  // namespace hdrgs
