#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace hdrgs {

inline constexpr double kUnitExposureTarget = 0.73;

/// Node layout of the asymmetric grid. Nodes are spaced 1/dense_density on
/// [x_lo, x_mid] and 1/sparse_density on [x_mid, x_hi].
struct GridLayout {
  double x_lo = -6.0;
  double x_mid = 0.0;
  double x_hi = 3.0;
  double dense_density = 128.0;
  double sparse_density = 64.0;
  double leak_beta = 0.01;

  /// Throws ConfigError unless x_lo <= x_mid <= x_hi, x_lo < x_hi, both
  /// densities divide their region into a whole number of cells, and beta > 0.
  void validate() const;
};

/// Sparse gradient of one grid evaluation.
struct GridEvalGrad {
  double dx = 0.0;
  /// (node index, d output / d node value * upstream); unused slots have
  /// weight 0. Pinned boundary nodes never appear.
  std::array<std::pair<std::size_t, double>, 2> nodes{};
  int count = 0;
};

/// Dense gradient over all nodes of every channel.
struct GridGradients {
  std::array<std::vector<double>, 3> channels;

  GridGradients() = default;
  explicit GridGradients(std::size_t nodes) {
    for (auto& c : channels) c.assign(nodes, 0.0);
  }
  GridGradients& operator+=(const GridGradients& o);
  GridGradients& operator*=(double s);
};

/// Per-channel piecewise-linear tone curve with dense/sparse node regions,
/// boundary values pinned to g(x_lo) = 0 and g(x_hi) = 1, and leaky
/// analytic tails outside [x_lo, x_hi].
class AsymmetricGrid {
 public:
  static constexpr int kChannels = 3;

  explicit AsymmetricGrid(const GridLayout& layout = {});

  const GridLayout& layout() const { return layout_; }
  std::size_t node_count() const { return positions_.size(); }
  std::span<const double> positions() const { return positions_; }
  double node_position(std::size_t i) const { return positions_[i]; }

  std::span<const double> values(int channel) const { return values_[channel]; }
  /// Mutable view for optimizers; call pin_boundaries() after writing.
  std::span<double> mutable_values(int channel) { return values_[channel]; }
  void set_value(int channel, std::size_t node, double v);
  void pin_boundaries();

  bool is_learnable(std::size_t node) const { return node > 0 && node + 1 < node_count(); }

  /// Index i of the segment [p_i, p_{i+1}] containing x (clamped to the domain).
  std::size_t segment(double x) const;

  double eval(double x, int channel) const;
  GridEvalGrad backward(double x, int channel, double upstream) const;

 private:
  GridLayout layout_;
  std::vector<double> positions_;
  std::array<std::vector<double>, kChannels> values_;
};

double sigmoid_eval(double x);
/// d sigmoid / dx times upstream.
double sigmoid_backward(double x, double upstream);

struct GridLoss {
  double value = 0.0;
  GridGradients grad;
};

/// Sum over channels and interior nodes of the squared discrete second
/// derivative (nonuniform three-point formula where the spacing changes).
/// Derivatives are taken with respect to x / length_unit, so the default
/// measures them per unit of x and length_unit = node spacing gives plain
/// second differences.
GridLoss smoothness_loss(const AsymmetricGrid& grid, double length_unit = 1.0);

/// sum over channels of (g(0) - 0.73)^2. Throws ConfigError when 0 lies
/// outside the grid domain.
GridLoss unit_exposure_loss(const AsymmetricGrid& grid);

/// Sets every learnable node to sigmoid(position); boundaries stay 0 and 1.
AsymmetricGrid& init_grid_from_sigmoid(AsymmetricGrid& grid);

/// Segments whose value decreases: (channel, segment index) pairs.
std::vector<std::pair<int, std::size_t>> non_monotone_segments(const AsymmetricGrid& grid);

/// Coarse phase uses a fixed sigmoid, fine phase an AsymmetricGrid.
class ToneMapper {
 public:
  enum class Kind { Sigmoid, Grid };

  static ToneMapper sigmoid() { return ToneMapper(); }
  static ToneMapper grid(AsymmetricGrid g) {
    ToneMapper m;
    m.kind_ = Kind::Grid;
    m.grid_ = std::move(g);
    return m;
  }

  Kind kind() const { return kind_; }
  bool is_grid() const { return kind_ == Kind::Grid; }
  const AsymmetricGrid& grid() const { return grid_; }
  AsymmetricGrid& grid() { return grid_; }

  double eval(double x, int channel) const {
    return is_grid() ? grid_.eval(x, channel) : sigmoid_eval(x);
  }

 private:
  ToneMapper() = default;
  Kind kind_ = Kind::Sigmoid;
  AsymmetricGrid grid_;
};

}  // namespace hdrgs
