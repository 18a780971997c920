#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "hdrgs/error.hpp"
#include "hdrgs/model.hpp"
#include "test_util.hpp"

namespace hdrgs {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  std::random_device rd;
  return fs::temp_directory_path() / ("hdrgs_" + std::to_string(rd()) + "_" + name);
}

ModelCheckpoint sample_checkpoint(std::mt19937_64& rng) {
  const Camera cam = testing::axis_camera(24, 20, 22.0);
  ModelCheckpoint ckpt;
  ckpt.gaussians = testing::random_scene(rng, 25, cam);
  init_grid_from_sigmoid(ckpt.grid);
  std::normal_distribution<double> n(0.0, 0.01);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 1; i + 1 < ckpt.grid.node_count(); ++i) {
      ckpt.grid.set_value(c, i, ckpt.grid.values(c)[i] + n(rng));
    }
  }
  ckpt.scaler = ExposureScaler(0.5, std::log(2.0));
  ckpt.phase = Phase::Fine;
  ckpt.iteration = 1234;
  ckpt.config_json = R"({"seed":3})";
  ckpt.config_hash = fnv1a(ckpt.config_json);
  ckpt.width = cam.width;
  ckpt.height = cam.height;
  ckpt.views.push_back({cam.intrinsics, cam.world_to_camera});
  ckpt.views.push_back({cam.intrinsics, look_at(Vec3(0.3, 0, -0.5), Vec3(0, 0, 4), Vec3(0, 1, 0))});
  ckpt.exposures = {1.0 / 16.0, 0.25, 1.0};
  ckpt.train_exposures = {0, 2};
  return ckpt;
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  std::mt19937_64 rng(71);
  const ModelCheckpoint ckpt = sample_checkpoint(rng);
  const fs::path p = temp_file("a.ckpt");
  save_checkpoint(ckpt, p);
  const ModelCheckpoint back = load_checkpoint(p);
  fs::remove(p);

  ASSERT_EQ(back.gaussians.size(), ckpt.gaussians.size());
  for (std::size_t i = 0; i < ckpt.gaussians.size(); ++i) {
    EXPECT_EQ(back.gaussians[i].mean, ckpt.gaussians[i].mean);
    EXPECT_EQ(back.gaussians[i].log_scale, ckpt.gaussians[i].log_scale);
    EXPECT_EQ(back.gaussians[i].rotation, ckpt.gaussians[i].rotation);
    EXPECT_EQ(back.gaussians[i].opacity_logit, ckpt.gaussians[i].opacity_logit);
    EXPECT_EQ(back.gaussians[i].radiance, ckpt.gaussians[i].radiance);
  }
  for (int c = 0; c < 3; ++c) {
    EXPECT_TRUE(std::equal(back.grid.values(c).begin(), back.grid.values(c).end(),
                           ckpt.grid.values(c).begin(), ckpt.grid.values(c).end()));
  }
  EXPECT_EQ(back.scaler, ckpt.scaler);
  EXPECT_EQ(back.phase, ckpt.phase);
  EXPECT_EQ(back.iteration, ckpt.iteration);
  EXPECT_EQ(back.config_hash, ckpt.config_hash);
  EXPECT_EQ(back.config_json, ckpt.config_json);
  EXPECT_EQ(back.exposures, ckpt.exposures);
  EXPECT_EQ(back.train_exposures, ckpt.train_exposures);
  ASSERT_EQ(back.views.size(), 2u);
  EXPECT_EQ(back.views[1].world_to_camera, ckpt.views[1].world_to_camera);

  for (int v = 0; v < 2; ++v) {
    EXPECT_EQ(render_ldr(back, back.camera(v, 0.25)), render_ldr(ckpt, ckpt.camera(v, 0.25)));
    EXPECT_EQ(render_hdr(back, back.camera(v, 1.0)), render_hdr(ckpt, ckpt.camera(v, 1.0)));
  }
}

TEST(Checkpoint, RejectsCorruptFiles) {
  std::mt19937_64 rng(72);
  const fs::path p = temp_file("b.ckpt");
  EXPECT_THROW(load_checkpoint(p), MissingFileError);
  save_checkpoint(sample_checkpoint(rng), p);
  std::string bytes;
  {
    std::ifstream in(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 100));
  }
  EXPECT_THROW(load_checkpoint(p), IoError);
  {
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  EXPECT_THROW(load_checkpoint(p), IoError);
  {
    std::string bad = bytes;
    bad[7] = 9;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  EXPECT_THROW(load_checkpoint(p), VersionError);
  fs::remove(p);
}

TEST(ToneMap, AppliesMapperToShiftedIrradiance) {
  IrradianceImage irr(3, 2);
  for (std::size_t i = 0; i < irr.values.size(); ++i) irr.values[i] = -1.0 + 0.1 * static_cast<double>(i);
  const ImageD out = tone_map(irr, ToneMapper::sigmoid(), 0.4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(out[i], 1.0 / (1.0 + std::exp(-(irr.values[i] + 0.4))), 1e-15);
  }
}

TEST(RenderHdr, InvertsTheLogMapping) {
  std::mt19937_64 rng(73);
  const ModelCheckpoint ckpt = sample_checkpoint(rng);
  const Camera cam = ckpt.camera(0, 1.0);
  const RenderOutput fwd = render_irradiance(ckpt.gaussians, cam);
  const ImageD hdr = render_hdr(ckpt, cam);
  for (std::size_t i = 0; i < hdr.size(); ++i) {
    EXPECT_NEAR(hdr[i], std::exp((fwd.image.values[i] + ckpt.scaler.s()) / ckpt.scaler.r()), 1e-12 * hdr[i]);
  }
  // Exposure time does not change the HDR estimate.
  EXPECT_EQ(render_hdr(ckpt, ckpt.camera(0, 0.01)), hdr);
}

TEST(RenderLdr, MatchesGridOfScaledExposure) {
  std::mt19937_64 rng(74);
  const ModelCheckpoint ckpt = sample_checkpoint(rng);
  const Camera cam = ckpt.camera(1, 1.0 / 16.0);
  const RenderOutput fwd = render_irradiance(ckpt.gaussians, cam);
  const ImageD ldr = render_ldr(ckpt, cam);
  const double tp = ckpt.scaler.scale_time(1.0 / 16.0);
  for (std::size_t i = 0; i < ldr.size(); ++i) {
    EXPECT_EQ(ldr[i], ckpt.grid.eval(fwd.image.values[i] + tp, static_cast<int>(i % 3)));
  }
}

TEST(ExportCrf, RowsAndEndpoints) {
  AsymmetricGrid grid;
  init_grid_from_sigmoid(grid);
  const auto rows = export_crf(ToneMapper::grid(grid), -6.0, 3.0, 0.01);
  ASSERT_EQ(rows.size(), 901u);
  EXPECT_EQ(rows.front().x, -6.0);
  EXPECT_EQ(rows.back().x, 3.0);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(rows.front().value[c], 0.0);
    EXPECT_EQ(rows.back().value[c], 1.0);
  }
  EXPECT_THROW(export_crf(ToneMapper::grid(grid), 1.0, 0.0, 0.1), ConfigError);
}

TEST(ReinhardPreview, KnownValues) {
  ImageD hdr(2, 1, 3);
  for (int c = 0; c < 3; ++c) {
    hdr.at(0, 0, c) = 0.0;
    hdr.at(1, 0, c) = 1.0;
  }
  const ImageU8 out = reinhard_preview(hdr);
  EXPECT_EQ(out.at(0, 0, 0), 0);
  EXPECT_EQ(out.at(1, 0, 1), static_cast<int>(std::nearbyint(255.0 * std::pow(0.5, 1.0 / 2.2))));
}

TEST(Fnv1a, ReferenceValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ull);
}

}  // namespace
}  // namespace hdrgs
