#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hdrgs/dataset.hpp"
#include "hdrgs/exposure.hpp"
#include "hdrgs/geometry.hpp"
#include "hdrgs/rasterizer.hpp"
#include "hdrgs/tone_mapping.hpp"

namespace hdrgs {

enum class Phase : std::uint8_t { Coarse = 0, Fine = 1 };

/// A trained (or in-training) model plus what is needed to render it
/// without the dataset.
struct ModelCheckpoint {
  std::vector<Gaussian3D> gaussians;
  AsymmetricGrid grid;
  ExposureScaler scaler;
  Phase phase = Phase::Coarse;
  std::int64_t iteration = 0;
  std::uint64_t config_hash = 0;
  /// Resolved training configuration as flat JSON text.
  std::string config_json;

  int width = 0;
  int height = 0;
  std::vector<View> views;
  /// Exposure times (seconds) of the dataset and the indices trained on.
  std::vector<double> exposures;
  std::vector<int> train_exposures;

  /// Sigmoid before the fine phase, the grid afterwards.
  ToneMapper tone_mapper() const;
  Camera camera(int view, double exposure_time) const;
};

inline constexpr char kCheckpointMagic[7] = {'H', 'D', 'R', 'G', 'S', '1', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic, u32 version, then tagged length-prefixed
/// little-endian sections. Written to a temporary file and renamed.
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// C = mapper(E' + t') per channel, not clamped.
ImageD tone_map(const IrradianceImage& irr, const ToneMapper& mapper, double scaled_time);

/// Unclamped LDR prediction for `cam` (uses cam.exposure_time).
ImageD render_ldr(const ModelCheckpoint& ckpt, const Camera& cam, const RasterConfig& raster = {});

/// Linear HDR radiance E = exp((E' + s) / r); independent of exposure time.
ImageD render_hdr(const ModelCheckpoint& ckpt, const Camera& cam, const RasterConfig& raster = {});

/// Fixed Reinhard operator L / (1 + L) with gamma 2.2, for previews only.
ImageU8 reinhard_preview(const ImageD& hdr);

/// One row per x: x, g_red, g_green, g_blue. Endpoints are included.
struct CrfRow {
  double x = 0.0;
  std::array<double, 3> value{};
};
std::vector<CrfRow> export_crf(const ToneMapper& mapper, double lo, double hi, double step);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text);

}  // namespace hdrgs
