#include "hdrgs/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hdrgs/error.hpp"
#include "hdrgs/parallel.hpp"

namespace hdrgs {

void ContributionScores::compact(std::span<const std::uint8_t> keep) {
  if (keep.size() != scores_.size()) {
    throw ShapeError("ContributionScores::compact: mask size mismatch");
  }
  std::size_t out = 0;
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    if (keep[i]) scores_[out++] = scores_[i];
  }
  scores_.resize(out);
}

namespace {

struct AlphaEval {
  double alpha;
  double gauss;   // exp(power)
  bool clamped;
};

inline AlphaEval alpha_at(const ProjectedGaussian& pg, double px, double py) {
  const double dx = px - pg.mean2d.x();
  const double dy = py - pg.mean2d.y();
  const double power =
      -0.5 * (pg.conic(0, 0) * dx * dx + pg.conic(1, 1) * dy * dy) - pg.conic(0, 1) * dx * dy;
  const double gauss = std::exp(power);
  const double raw = pg.opacity * gauss;
  if (raw > kAlphaMax) return {kAlphaMax, gauss, true};
  return {raw, gauss, false};
}

inline bool covers(const ProjectedGaussian& pg, double px, double py) {
  return std::abs(px - pg.mean2d.x()) <= pg.radius && std::abs(py - pg.mean2d.y()) <= pg.radius;
}

// Visible indices sorted front to back, ties broken by scene index.
std::vector<std::uint32_t> depth_order(const std::vector<ProjectedGaussian>& projected,
                                       const std::vector<std::uint8_t>& visible) {
  std::vector<std::uint32_t> order;
  order.reserve(projected.size());
  for (std::uint32_t i = 0; i < projected.size(); ++i) {
    if (visible[i]) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return projected[a].depth < projected[b].depth;
  });
  return order;
}

void project_all(std::span<const Gaussian3D> scene, const Camera& cam,
                 std::vector<ProjectedGaussian>& projected, std::vector<std::uint8_t>& visible) {
  projected.assign(scene.size(), ProjectedGaussian{});
  visible.assign(scene.size(), 0);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (auto pg = project_gaussian(scene[i], cam)) {
      projected[i] = *pg;
      visible[i] = 1;
    }
  }
}

}  // namespace

RenderOutput render_irradiance(std::span<const Gaussian3D> scene, const Camera& cam,
                               const RasterConfig& cfg) {
  cam.validate();
  if (cfg.tile_size <= 0) throw ConfigError("raster: tile size must be positive");

  RenderOutput out;
  out.image = IrradianceImage(cam.width, cam.height);
  RenderState& st = out.state;
  st.width = cam.width;
  st.height = cam.height;
  st.tile_size = cfg.tile_size;
  st.tiles_x = (cam.width + cfg.tile_size - 1) / cfg.tile_size;
  st.tiles_y = (cam.height + cfg.tile_size - 1) / cfg.tile_size;
  project_all(scene, cam, st.projected, st.visible);
  st.max_contribution.assign(scene.size(), 0.0);
  st.contributors.assign(static_cast<std::size_t>(cam.width) * cam.height, 0);

  const int ts = cfg.tile_size;
  st.tile_lists.assign(static_cast<std::size_t>(st.tiles_x) * st.tiles_y, {});
  for (std::uint32_t idx : depth_order(st.projected, st.visible)) {
    const auto& pg = st.projected[idx];
    const int x0 = std::max(0, static_cast<int>(std::floor((pg.mean2d.x() - pg.radius) / ts)));
    const int x1 = std::min(st.tiles_x - 1,
                            static_cast<int>(std::floor((pg.mean2d.x() + pg.radius) / ts)));
    const int y0 = std::max(0, static_cast<int>(std::floor((pg.mean2d.y() - pg.radius) / ts)));
    const int y1 = std::min(st.tiles_y - 1,
                            static_cast<int>(std::floor((pg.mean2d.y() + pg.radius) / ts)));
    for (int ty = y0; ty <= y1; ++ty) {
      for (int tx = x0; tx <= x1; ++tx) {
        st.tile_lists[static_cast<std::size_t>(ty) * st.tiles_x + tx].push_back(idx);
      }
    }
  }

  // Per-tile contribution maxima, merged afterwards in tile order.
  const std::size_t num_tiles = st.tile_lists.size();
  std::vector<std::vector<double>> tile_max(num_tiles);

  auto& values = out.image.values;
  auto& trans = out.image.final_transmittance;
  parallel_for(num_tiles, [&](std::size_t t) {
    const auto& list = st.tile_lists[t];
    auto& local_max = tile_max[t];
    local_max.assign(list.size(), 0.0);
    const int tx = static_cast<int>(t) % st.tiles_x;
    const int ty = static_cast<int>(t) / st.tiles_x;
    for (int y = ty * ts; y < std::min((ty + 1) * ts, st.height); ++y) {
      for (int x = tx * ts; x < std::min((tx + 1) * ts, st.width); ++x) {
        double T = 1.0;
        double e[3] = {0.0, 0.0, 0.0};
        std::uint32_t n = 0;
        for (std::size_t k = 0; k < list.size(); ++k) {
          const auto& pg = st.projected[list[k]];
          if (!covers(pg, x, y)) {
            n = static_cast<std::uint32_t>(k + 1);
            continue;
          }
          const double a = alpha_at(pg, x, y).alpha;
          const double next_t = T * (1.0 - a);
          if (next_t < cfg.min_transmittance) break;
          const double w = a * T;
          for (int c = 0; c < 3; ++c) e[c] += pg.radiance[c] * w;
          local_max[k] = std::max(local_max[k], w);
          T = next_t;
          n = static_cast<std::uint32_t>(k + 1);
        }
        for (int c = 0; c < 3; ++c) values.at(x, y, c) = e[c];
        trans.at(x, y, 0) = T;
        st.contributors[static_cast<std::size_t>(y) * st.width + x] = n;
      }
    }
  });

  for (std::size_t t = 0; t < num_tiles; ++t) {
    const auto& list = st.tile_lists[t];
    for (std::size_t k = 0; k < list.size(); ++k) {
      st.max_contribution[list[k]] = std::max(st.max_contribution[list[k]], tile_max[t][k]);
    }
  }
  st.final_transmittance = trans;
  return out;
}

IrradianceImage render_irradiance_reference(std::span<const Gaussian3D> scene,
                                            const Camera& cam) {
  cam.validate();
  IrradianceImage img(cam.width, cam.height);
  std::vector<ProjectedGaussian> projected;
  std::vector<std::uint8_t> visible;
  project_all(scene, cam, projected, visible);

  std::vector<std::uint32_t> hits;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      hits.clear();
      for (std::uint32_t i = 0; i < projected.size(); ++i) {
        if (visible[i] && covers(projected[i], x, y)) hits.push_back(i);
      }
      std::sort(hits.begin(), hits.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (projected[a].depth != projected[b].depth) return projected[a].depth < projected[b].depth;
        return a < b;
      });
      double T = 1.0;
      for (std::uint32_t i : hits) {
        const double a = evaluate_alpha(projected[i], Vec2(x, y));
        for (int c = 0; c < 3; ++c) img.values.at(x, y, c) += projected[i].radiance[c] * a * T;
        T *= 1.0 - a;
      }
      img.final_transmittance.at(x, y, 0) = T;
    }
  }
  return img;
}

std::vector<GaussianGradient> render_backward(std::span<const Gaussian3D> scene,
                                              const Camera& cam, const RenderState& st,
                                              const ImageD& grad) {
  if (grad.width() != st.width || grad.height() != st.height || grad.channels() != 3) {
    throw ShapeError("render_backward: gradient image does not match the render");
  }
  if (st.projected.size() != scene.size()) {
    throw ShapeError("render_backward: render state does not match the scene");
  }
  const int ts = st.tile_size;
  const std::size_t num_tiles = st.tile_lists.size();
  std::vector<std::vector<ProjectedGradient>> tile_grads(num_tiles);

  parallel_for(num_tiles, [&](std::size_t t) {
    const auto& list = st.tile_lists[t];
    auto& local = tile_grads[t];
    local.assign(list.size(), ProjectedGradient{});
    const int tx = static_cast<int>(t) % st.tiles_x;
    const int ty = static_cast<int>(t) / st.tiles_x;
    for (int y = ty * ts; y < std::min((ty + 1) * ts, st.height); ++y) {
      for (int x = tx * ts; x < std::min((tx + 1) * ts, st.width); ++x) {
        const double dl[3] = {grad.at(x, y, 0), grad.at(x, y, 1), grad.at(x, y, 2)};
        if (dl[0] == 0.0 && dl[1] == 0.0 && dl[2] == 0.0) continue;
        const std::uint32_t n = st.contributors[static_cast<std::size_t>(y) * st.width + x];
        double T = st.final_transmittance.at(x, y, 0);
        // Radiance behind the current layer, normalized to the transmittance
        // just past it.
        double behind[3] = {0.0, 0.0, 0.0};
        for (std::uint32_t k = n; k-- > 0;) {
          const auto& pg = st.projected[list[k]];
          if (!covers(pg, x, y)) continue;
          const AlphaEval ae = alpha_at(pg, x, y);
          const double a = ae.alpha;
          T /= (1.0 - a);
          const double w = a * T;
          ProjectedGradient& g = local[k];
          double dl_da = 0.0;
          for (int c = 0; c < 3; ++c) {
            g.radiance[c] += dl[c] * w;
            dl_da += dl[c] * T * (pg.radiance[c] - behind[c]);
            behind[c] = a * pg.radiance[c] + (1.0 - a) * behind[c];
          }
          if (ae.clamped) continue;
          g.opacity += dl_da * ae.gauss;
          const double dl_dpower = dl_da * a;
          const double dx = x - pg.mean2d.x();
          const double dy = y - pg.mean2d.y();
          // power = -0.5 d^T Q d
          g.mean2d.x() += dl_dpower * (pg.conic(0, 0) * dx + pg.conic(0, 1) * dy);
          g.mean2d.y() += dl_dpower * (pg.conic(0, 1) * dx + pg.conic(1, 1) * dy);
          g.conic(0, 0) += -0.5 * dl_dpower * dx * dx;
          g.conic(0, 1) += -0.5 * dl_dpower * dx * dy;
          g.conic(1, 0) += -0.5 * dl_dpower * dx * dy;
          g.conic(1, 1) += -0.5 * dl_dpower * dy * dy;
        }
      }
    }
  });

  std::vector<ProjectedGradient> screen(scene.size());
  for (std::size_t t = 0; t < num_tiles; ++t) {
    const auto& list = st.tile_lists[t];
    for (std::size_t k = 0; k < list.size(); ++k) screen[list[k]] += tile_grads[t][k];
  }

  std::vector<GaussianGradient> out(scene.size());
  parallel_for(scene.size(), [&](std::size_t i) {
    if (st.visible[i]) out[i] = project_backward(scene[i], cam, screen[i]);
  });
  return out;
}

std::vector<GaussianGradient> render_backward(std::span<const Gaussian3D> scene,
                                              const Camera& cam, const ImageD& grad,
                                              const RasterConfig& cfg) {
  const RenderOutput fwd = render_irradiance(scene, cam, cfg);
  return render_backward(scene, cam, fwd.state, grad);
}

void accumulate_contribution_scores(const RenderState& state, ContributionScores& scores) {
  if (scores.size() != state.max_contribution.size()) {
    throw ShapeError("accumulate_contribution_scores: scores not sized to the scene");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) scores.update(i, state.max_contribution[i]);
}

void accumulate_contribution_scores(std::span<const Gaussian3D> scene, const Camera& cam,
                                    ContributionScores& scores, const RasterConfig& cfg) {
  if (scores.size() != scene.size()) {
    throw ShapeError("accumulate_contribution_scores: scores not sized to the scene");
  }
  accumulate_contribution_scores(render_irradiance(scene, cam, cfg).state, scores);
}

}  // namespace hdrgs
