#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hdrgs/exposure.hpp"
#include "hdrgs/geometry.hpp"
#include "hdrgs/image.hpp"

namespace hdrgs {

inline constexpr int kDatasetVersion = 1;

enum class Split { Train, Test };

struct View {
  Intrinsics intrinsics;
  Mat4 world_to_camera = Mat4::Identity();
};

/// One LDR capture of `view` at exposure index `exposure`.
struct Frame {
  int view = 0;
  int exposure = 0;
  Split split = Split::Train;
  ImageU8 ldr;
};

struct InitPoint {
  Vec3 position = Vec3::Zero();
  Vec3 color = Vec3::Zero();
};

/// Ground-truth response sample: x = ln(E t) and the LDR value per channel.
struct CrfSample {
  double x = 0.0;
  std::array<double, 3> value{};
};

struct MultiExposureDataset {
  int width = 0;
  int height = 0;
  ExposureUnit exposure_unit = ExposureUnit::Seconds;
  /// Exposure levels as recorded, in `exposure_unit`, ascending.
  std::vector<double> exposure_values;
  std::vector<View> views;
  std::vector<Frame> frames;
  /// Either empty or one linear HDR image per view.
  std::vector<ImageF> gt_hdr;
  std::vector<CrfSample> gt_crf;
  std::vector<InitPoint> init_points;

  double exposure_seconds(int index) const;
  std::vector<double> exposure_times() const;
  Camera camera(int view, int exposure) const;
  Camera camera(const Frame& f) const { return camera(f.view, f.exposure); }

  /// Throws DimensionError / ConfigError on broken invariants: frame sizes,
  /// indices in range, at least two distinct training exposure times.
  void validate() const;
};

// Image files.
ImageU8 read_png(const std::filesystem::path& path);
void write_png(const ImageU8& img, const std::filesystem::path& path);

/// Color PFM ("PF"), little-endian (scale -1.0), rows stored bottom to top.
ImageF read_pfm(const std::filesystem::path& path);
void write_pfm(const ImageF& img, const std::filesystem::path& path);

/// Directory layout: meta.json, ldr/{view}_{exp}.png, hdr/{view}.pfm, crf.csv.
MultiExposureDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const MultiExposureDataset& ds, const std::filesystem::path& dir);

enum class CrfKind { Gamma, Logistic };

/// Oracle camera response applied by the generator to exposure E t.
struct OracleCrf {
  CrfKind kind = CrfKind::Gamma;
  /// Gamma: C = gain (E t)^(1/gamma).
  double gamma = 2.2;
  double gain = 0.73;
  /// Logistic: C = 1 / (1 + exp(-slope (ln(E t) - center))).
  double slope = 1.0;
  double center = 0.0;

  /// Unclamped response.
  double operator()(double exposure) const;
};

/// Parameters of the synthetic multi-exposure scene: a ring of cameras
/// inside a cylindrical wall of flattened Gaussians with a smooth radiance
/// field.
struct SceneSpec {
  int num_gaussians = 300;
  double wall_radius = 3.0;
  double wall_half_height = 2.5;
  /// Natural-log radiance range of the wall.
  double log_radiance_min = -3.0;
  double log_radiance_max = 3.0;
  int num_views = 9;
  double ring_radius = 0.5;
  Vec3 look_at = Vec3::Zero();
  double fov_degrees = 60.0;
  int width = 64;
  int height = 64;
  ExposureUnit exposure_unit = ExposureUnit::Seconds;
  std::vector<double> exposures = {1.0 / 16.0, 1.0 / 4.0, 1.0};
  OracleCrf crf;
  /// Every k-th view (k > 0) is tagged test; 0 keeps all views in train.
  int test_view_stride = 0;
  /// Std-dev of the noise added to init point positions.
  double init_jitter = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic per seed.
MultiExposureDataset generate_synthetic(const SceneSpec& spec);

/// The Gaussians generate_synthetic renders, with linear radiance.
std::vector<Gaussian3D> synthetic_scene(const SceneSpec& spec);

}  // namespace hdrgs
