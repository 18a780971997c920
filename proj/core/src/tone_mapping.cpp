#include "hdrgs/tone_mapping.hpp"

#include <algorithm>
#include <cmath>

#include "hdrgs/error.hpp"
#include "hdrgs/geometry.hpp"

namespace hdrgs {

namespace {

long whole_cells(double width, double density, const char* what) {
  const double cells = width * density;
  const double rounded = std::round(cells);
  if (std::abs(cells - rounded) > 1e-9) {
    throw ConfigError(std::string("grid: ") + what + " region is not a whole number of cells");
  }
  return static_cast<long>(rounded);
}

}  // namespace

void GridLayout::validate() const {
  if (!(x_lo < x_hi) || x_mid < x_lo || x_mid > x_hi) {
    throw ConfigError("grid: require x_lo <= x_mid <= x_hi and x_lo < x_hi");
  }
  if (!(dense_density > 0.0) || !(sparse_density > 0.0)) {
    throw ConfigError("grid: node densities must be positive");
  }
  if (!(leak_beta > 0.0)) {
    throw ConfigError("grid: leak beta must be positive");
  }
  whole_cells(x_mid - x_lo, dense_density, "dense");
  whole_cells(x_hi - x_mid, sparse_density, "sparse");
}

GridGradients& GridGradients::operator+=(const GridGradients& o) {
  for (int c = 0; c < 3; ++c) {
    auto& dst = channels[c];
    const auto& src = o.channels[c];
    if (dst.empty()) {
      dst = src;
      continue;
    }
    if (src.empty()) continue;
    if (dst.size() != src.size()) throw ShapeError("GridGradients: size mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return *this;
}

GridGradients& GridGradients::operator*=(double s) {
  for (auto& c : channels) {
    for (double& v : c) v *= s;
  }
  return *this;
}

AsymmetricGrid::AsymmetricGrid(const GridLayout& layout) : layout_(layout) {
  layout_.validate();
  const long dense = whole_cells(layout_.x_mid - layout_.x_lo, layout_.dense_density, "dense");
  const long sparse = whole_cells(layout_.x_hi - layout_.x_mid, layout_.sparse_density, "sparse");
  positions_.reserve(static_cast<std::size_t>(dense + sparse + 1));
  for (long i = 0; i <= dense; ++i) {
    positions_.push_back(layout_.x_lo + static_cast<double>(i) / layout_.dense_density);
  }
  for (long j = 1; j <= sparse; ++j) {
    positions_.push_back(layout_.x_mid + static_cast<double>(j) / layout_.sparse_density);
  }
  positions_.front() = layout_.x_lo;
  positions_.back() = layout_.x_hi;

  // Linear ramp between the pinned end values.
  for (auto& v : values_) {
    v.resize(positions_.size());
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      v[i] = (positions_[i] - layout_.x_lo) / (layout_.x_hi - layout_.x_lo);
    }
  }
  pin_boundaries();
}

void AsymmetricGrid::set_value(int channel, std::size_t node, double v) {
  if (!is_learnable(node)) {
    throw ConfigError("grid: boundary nodes are fixed");
  }
  values_[channel][node] = v;
}

void AsymmetricGrid::pin_boundaries() {
  for (auto& v : values_) {
    v.front() = 0.0;
    v.back() = 1.0;
  }
}

std::size_t AsymmetricGrid::segment(double x) const {
  const std::size_t last = positions_.size() - 2;
  const std::size_t dense_cells = static_cast<std::size_t>(
      std::llround((layout_.x_mid - layout_.x_lo) * layout_.dense_density));
  double guess;
  if (x < layout_.x_mid) {
    guess = std::floor((x - layout_.x_lo) * layout_.dense_density);
  } else {
    guess = static_cast<double>(dense_cells) +
            std::floor((x - layout_.x_mid) * layout_.sparse_density);
  }
  std::size_t i = static_cast<std::size_t>(std::clamp(guess, 0.0, static_cast<double>(last)));
  while (i > 0 && x < positions_[i]) --i;
  while (i < last && x >= positions_[i + 1]) ++i;
  return i;
}

double AsymmetricGrid::eval(double x, int channel) const {
  const double beta = layout_.leak_beta;
  if (x < layout_.x_lo) {
    return beta * (x - layout_.x_lo);
  }
  if (x > layout_.x_hi) {
    return -beta / std::sqrt(x - layout_.x_hi + 1.0) + beta + 1.0;
  }
  const std::size_t i = segment(x);
  const double h = positions_[i + 1] - positions_[i];
  const double w = (x - positions_[i]) / h;
  const auto& v = values_[channel];
  return (1.0 - w) * v[i] + w * v[i + 1];
}

GridEvalGrad AsymmetricGrid::backward(double x, int channel, double upstream) const {
  GridEvalGrad out;
  const double beta = layout_.leak_beta;
  if (x < layout_.x_lo) {
    out.dx = beta * upstream;
    return out;
  }
  if (x > layout_.x_hi) {
    out.dx = 0.5 * beta * std::pow(x - layout_.x_hi + 1.0, -1.5) * upstream;
    return out;
  }
  const std::size_t i = segment(x);
  const double h = positions_[i + 1] - positions_[i];
  const double w = (x - positions_[i]) / h;
  const auto& v = values_[channel];
  out.dx = (v[i + 1] - v[i]) / h * upstream;
  if (is_learnable(i)) out.nodes[out.count++] = {i, (1.0 - w) * upstream};
  if (is_learnable(i + 1)) out.nodes[out.count++] = {i + 1, w * upstream};
  return out;
}

double sigmoid_eval(double x) { return sigmoid(x); }

double sigmoid_backward(double x, double upstream) {
  const double s = sigmoid(x);
  return s * (1.0 - s) * upstream;
}

GridLoss smoothness_loss(const AsymmetricGrid& grid, double length_unit) {
  const std::size_t n = grid.node_count();
  if (n < 3) throw ConfigError("smoothness_loss: needs at least three nodes");
  if (!(length_unit > 0.0)) throw ConfigError("smoothness_loss: length unit must be positive");
  GridLoss out{0.0, GridGradients(n)};
  const auto p = grid.positions();
  const double u2 = length_unit * length_unit;
  for (int c = 0; c < AsymmetricGrid::kChannels; ++c) {
    const auto v = grid.values(c);
    auto& g = out.grad.channels[c];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double hm = p[i] - p[i - 1];
      const double hp = p[i + 1] - p[i];
      const double k = u2 * 2.0 / (hm + hp);
      const double d2 = k * ((v[i + 1] - v[i]) / hp - (v[i] - v[i - 1]) / hm);
      out.value += d2 * d2;
      const double up = 2.0 * d2;
      g[i + 1] += up * k / hp;
      g[i] += up * k * (-1.0 / hp - 1.0 / hm);
      g[i - 1] += up * k / hm;
    }
    g.front() = 0.0;
    g.back() = 0.0;
  }
  return out;
}

GridLoss unit_exposure_loss(const AsymmetricGrid& grid) {
  const auto& layout = grid.layout();
  if (0.0 < layout.x_lo || 0.0 > layout.x_hi) {
    throw ConfigError("unit_exposure_loss: 0 lies outside the grid domain");
  }
  GridLoss out{0.0, GridGradients(grid.node_count())};
  for (int c = 0; c < AsymmetricGrid::kChannels; ++c) {
    const double r = grid.eval(0.0, c) - kUnitExposureTarget;
    out.value += r * r;
    const GridEvalGrad gg = grid.backward(0.0, c, 2.0 * r);
    for (int k = 0; k < gg.count; ++k) out.grad.channels[c][gg.nodes[k].first] += gg.nodes[k].second;
  }
  return out;
}

AsymmetricGrid& init_grid_from_sigmoid(AsymmetricGrid& grid) {
  for (int c = 0; c < AsymmetricGrid::kChannels; ++c) {
    auto v = grid.mutable_values(c);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = sigmoid(grid.node_position(i));
  }
  grid.pin_boundaries();
  return grid;
}

std::vector<std::pair<int, std::size_t>> non_monotone_segments(const AsymmetricGrid& grid) {
  std::vector<std::pair<int, std::size_t>> out;
  for (int c = 0; c < AsymmetricGrid::kChannels; ++c) {
    const auto v = grid.values(c);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      if (v[i + 1] < v[i]) out.emplace_back(c, i);
    }
  }
  return out;
}

}  // namespace hdrgs
