#include "hdrgs/dataset.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "hdrgs/error.hpp"
#include "hdrgs/rasterizer.hpp"

namespace hdrgs {

using nlohmann::json;
namespace fs = std::filesystem;

double MultiExposureDataset::exposure_seconds(int index) const {
  const double v = exposure_values.at(static_cast<std::size_t>(index));
  return exposure_unit == ExposureUnit::EV ? ev_to_seconds(v) : v;
}

std::vector<double> MultiExposureDataset::exposure_times() const {
  std::vector<double> t;
  for (std::size_t i = 0; i < exposure_values.size(); ++i) t.push_back(exposure_seconds(static_cast<int>(i)));
  return t;
}

Camera MultiExposureDataset::camera(int view, int exposure) const {
  const View& v = views.at(static_cast<std::size_t>(view));
  Camera cam;
  cam.intrinsics = v.intrinsics;
  cam.world_to_camera = v.world_to_camera;
  cam.width = width;
  cam.height = height;
  cam.exposure_time = exposure_seconds(exposure);
  return cam;
}

void MultiExposureDataset::validate() const {
  if (width <= 0 || height <= 0) throw DimensionError("dataset: image size must be positive");
  if (views.empty() || frames.empty()) throw ConfigError("dataset: no views or frames");
  for (std::size_t i = 0; i < exposure_values.size(); ++i) {
    if (!(exposure_seconds(static_cast<int>(i)) > 0.0)) {
      throw ConfigError("dataset: exposure times must be positive");
    }
    if (i > 0 && !(exposure_values[i] > exposure_values[i - 1])) {
      throw ConfigError("dataset: exposure levels must be strictly increasing");
    }
  }
  std::set<int> train_exposures;
  for (const Frame& f : frames) {
    if (f.view < 0 || f.view >= static_cast<int>(views.size()) || f.exposure < 0 ||
        f.exposure >= static_cast<int>(exposure_values.size())) {
      throw ConfigError("dataset: frame references an unknown view or exposure");
    }
    if (f.ldr.width() != width || f.ldr.height() != height || f.ldr.channels() != 3) {
      throw DimensionError("dataset: frame image size does not match the dataset");
    }
    if (f.split == Split::Train) train_exposures.insert(f.exposure);
  }
  if (train_exposures.size() < 2) {
    throw ConfigError("dataset: train split needs at least two distinct exposure times");
  }
  if (!gt_hdr.empty()) {
    if (gt_hdr.size() != views.size()) throw DimensionError("dataset: one HDR image per view expected");
    for (const ImageF& h : gt_hdr) {
      if (h.width() != width || h.height() != height) {
        throw DimensionError("dataset: HDR image size does not match the dataset");
      }
    }
  }
}

namespace {

json mat4_json(const Mat4& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  }
  return rows;
}

Mat4 mat4_from_json(const json& j) {
  Mat4 m;
  if (!j.is_array() || j.size() != 4) throw IoError("meta.json: malformed 4x4 matrix");
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw IoError("meta.json: malformed 4x4 matrix");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

std::string ldr_name(const Frame& f) {
  return "ldr/" + std::to_string(f.view) + "_" + std::to_string(f.exposure) + ".png";
}

std::string hdr_name(std::size_t view) { return "hdr/" + std::to_string(view) + ".pfm"; }

}  // namespace

void save_dataset(const MultiExposureDataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir / "ldr");
  json meta;
  meta["version"] = kDatasetVersion;
  meta["width"] = ds.width;
  meta["height"] = ds.height;
  meta["exposure_unit"] = ds.exposure_unit == ExposureUnit::EV ? "ev" : "seconds";
  meta["exposures"] = ds.exposure_values;
  json views = json::array();
  for (const View& v : ds.views) {
    views.push_back({{"fx", v.intrinsics.fx},
                     {"fy", v.intrinsics.fy},
                     {"cx", v.intrinsics.cx},
                     {"cy", v.intrinsics.cy},
                     {"world_to_camera", mat4_json(v.world_to_camera)}});
  }
  meta["views"] = views;
  json frames = json::array();
  for (const Frame& f : ds.frames) {
    const std::string name = ldr_name(f);
    write_png(f.ldr, dir / name);
    frames.push_back({{"view", f.view},
                      {"exposure", f.exposure},
                      {"split", f.split == Split::Train ? "train" : "test"},
                      {"file", name}});
  }
  meta["frames"] = frames;
  if (!ds.gt_hdr.empty()) {
    fs::create_directories(dir / "hdr");
    json hdr = json::array();
    for (std::size_t v = 0; v < ds.gt_hdr.size(); ++v) {
      write_pfm(ds.gt_hdr[v], dir / hdr_name(v));
      hdr.push_back(hdr_name(v));
    }
    meta["hdr"] = hdr;
  }
  if (!ds.gt_crf.empty()) {
    std::ofstream crf(dir / "crf.csv", std::ios::trunc);
    crf.precision(17);
    crf << "x,red,green,blue\n";
    for (const CrfSample& s : ds.gt_crf) {
      crf << s.x << ',' << s.value[0] << ',' << s.value[1] << ',' << s.value[2] << '\n';
    }
    meta["crf"] = "crf.csv";
  }
  json points = json::array();
  for (const InitPoint& p : ds.init_points) {
    points.push_back({p.position.x(), p.position.y(), p.position.z(), p.color.x(), p.color.y(),
                      p.color.z()});
  }
  meta["init_points"] = points;

  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

MultiExposureDataset load_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw MissingFileError("missing dataset metadata: " + meta_path.string());
  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + meta_path.string() + ": " + e.what());
  }
  if (!meta.contains("version") || !meta["version"].is_number_integer() ||
      meta["version"].get<int>() != kDatasetVersion) {
    throw VersionError("unsupported dataset version in " + meta_path.string() + " (expected " +
                       std::to_string(kDatasetVersion) + ")");
  }

  MultiExposureDataset ds;
  try {
    ds.width = meta.at("width").get<int>();
    ds.height = meta.at("height").get<int>();
    const std::string unit = meta.at("exposure_unit").get<std::string>();
    if (unit == "ev") {
      ds.exposure_unit = ExposureUnit::EV;
    } else if (unit == "seconds") {
      ds.exposure_unit = ExposureUnit::Seconds;
    } else {
      throw IoError("meta.json: unknown exposure unit '" + unit + "'");
    }
    ds.exposure_values = meta.at("exposures").get<std::vector<double>>();
    for (const json& v : meta.at("views")) {
      View view;
      view.intrinsics = {v.at("fx").get<double>(), v.at("fy").get<double>(), v.at("cx").get<double>(),
                         v.at("cy").get<double>()};
      view.world_to_camera = mat4_from_json(v.at("world_to_camera"));
      ds.views.push_back(view);
    }
    for (const json& f : meta.at("frames")) {
      Frame frame;
      frame.view = f.at("view").get<int>();
      frame.exposure = f.at("exposure").get<int>();
      const std::string split = f.at("split").get<std::string>();
      if (split != "train" && split != "test") throw IoError("meta.json: unknown split '" + split + "'");
      frame.split = split == "train" ? Split::Train : Split::Test;
      frame.ldr = read_png(dir / f.at("file").get<std::string>());
      if (frame.ldr.width() != ds.width || frame.ldr.height() != ds.height) {
        throw DimensionError("image " + f.at("file").get<std::string>() +
                             " does not match the dataset size");
      }
      ds.frames.push_back(std::move(frame));
    }
    if (meta.contains("hdr")) {
      for (const json& h : meta["hdr"]) {
        ImageF img = read_pfm(dir / h.get<std::string>());
        if (img.width() != ds.width || img.height() != ds.height) {
          throw DimensionError("HDR image " + h.get<std::string>() + " does not match the dataset size");
        }
        ds.gt_hdr.push_back(std::move(img));
      }
    }
    if (meta.contains("crf")) {
      const fs::path crf_path = dir / meta["crf"].get<std::string>();
      std::ifstream crf(crf_path);
      if (!crf) throw MissingFileError("missing CRF file: " + crf_path.string());
      std::string line;
      std::getline(crf, line);
      while (std::getline(crf, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        CrfSample s;
        if (!(row >> s.x >> s.value[0] >> s.value[1] >> s.value[2])) {
          throw IoError("malformed row in " + crf_path.string());
        }
        ds.gt_crf.push_back(s);
      }
    }
    if (meta.contains("init_points")) {
      for (const json& p : meta["init_points"]) {
        const auto v = p.get<std::vector<double>>();
        if (v.size() != 6) throw IoError("meta.json: init point needs 6 values");
        ds.init_points.push_back({Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])});
      }
    }
  } catch (const json::exception& e) {
    throw IoError("malformed " + meta_path.string() + ": " + e.what());
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic generator

double OracleCrf::operator()(double exposure) const {
  if (kind == CrfKind::Gamma) {
    return exposure > 0.0 ? gain * std::pow(exposure, 1.0 / gamma) : 0.0;
  }
  if (!(exposure > 0.0)) return 0.0;
  return 1.0 / (1.0 + std::exp(-slope * (std::log(exposure) - center)));
}

void SceneSpec::validate() const {
  if (num_gaussians <= 0) throw ConfigError("scene: need at least one Gaussian");
  if (!(wall_radius > ring_radius) || !(wall_half_height > 0.0)) {
    throw ConfigError("scene: cameras must sit inside the wall");
  }
  if (!(log_radiance_max >= log_radiance_min)) throw ConfigError("scene: empty radiance range");
  if (num_views <= 0 || width <= 0 || height <= 0) throw ConfigError("scene: bad camera ring");
  if (!(fov_degrees > 0.0 && fov_degrees < 180.0)) throw ConfigError("scene: bad field of view");
  if (exposures.size() < 2) throw ConfigError("scene: need at least two exposures");
  for (std::size_t i = 0; i < exposures.size(); ++i) {
    const double t = exposure_unit == ExposureUnit::EV ? ev_to_seconds(exposures[i]) : exposures[i];
    if (!(t > 0.0)) throw ConfigError("scene: exposure times must be positive");
    if (i > 0 && !(exposures[i] > exposures[i - 1])) {
      throw ConfigError("scene: exposures must be distinct and ascending");
    }
  }
  if (crf.kind == CrfKind::Gamma && (!(crf.gamma > 0.0) || !(crf.gain > 0.0))) {
    throw ConfigError("scene: gamma CRF needs positive gamma and gain");
  }
  if (crf.kind == CrfKind::Logistic && !(crf.slope > 0.0)) {
    throw ConfigError("scene: logistic CRF needs a positive slope");
  }
  if (test_view_stride < 0) throw ConfigError("scene: test view stride must be >= 0");
}

namespace {

struct WallSample {
  Gaussian3D gaussian;
  Vec3 log_radiance;
};

std::vector<WallSample> build_wall(const SceneSpec& spec, std::mt19937_64& rng) {
  const int n = spec.num_gaussians;
  const double two_pi = 2.0 * std::numbers::pi;
  const double area = two_pi * spec.wall_radius * 2.0 * spec.wall_half_height;
  const double spacing = std::sqrt(area / n);
  const double plane_scale = 0.9 * spacing;

  std::uniform_real_distribution<double> phase(0.0, two_pi);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  std::normal_distribution<double> noise(0.0, 0.05);
  const double p1 = phase(rng), p2 = phase(rng), p3 = phase(rng);
  std::array<double, 3> tint{};
  for (double& t : tint) t = 0.6 * jitter(rng);

  std::vector<WallSample> out;
  out.reserve(static_cast<std::size_t>(n));
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < n; ++i) {
    const double u = std::fmod(i * golden + jitter(rng) * 0.2 / n, 1.0);
    const double theta = two_pi * (u < 0.0 ? u + 1.0 : u);
    const double y = spec.wall_half_height * (2.0 * (i + 0.5 + jitter(rng)) / n - 1.0);

    WallSample s;
    Gaussian3D& g = s.gaussian;
    const Vec3 normal(std::cos(theta), 0.0, std::sin(theta));
    const Vec3 up(0.0, 1.0, 0.0);
    const Vec3 tangent = up.cross(normal);
    g.mean = spec.wall_radius * normal + Vec3(0.0, y, 0.0);
    Mat3 axes;
    axes.col(0) = tangent;
    axes.col(1) = up;
    axes.col(2) = normal;
    const Eigen::Quaterniond q(axes);
    g.rotation = Vec4(q.w(), q.x(), q.y(), q.z());
    g.log_scale = Vec3(std::log(plane_scale), std::log(plane_scale), std::log(0.2 * plane_scale));
    g.opacity_logit = logit(0.98);

    // Smooth field in [-1, 1] over (theta, y).
    const double f = 0.5 * std::sin(theta + p1) + 0.3 * std::sin(3.0 * theta + p2) * std::cos(0.7 * y) +
                     0.2 * std::sin(1.1 * y + p3);
    const double mid = 0.5 * (spec.log_radiance_min + spec.log_radiance_max);
    const double half = 0.5 * (spec.log_radiance_max - spec.log_radiance_min);
    for (int c = 0; c < 3; ++c) {
      const double v = mid + half * f + half * 0.25 * tint[c] + noise(rng);
      s.log_radiance[c] = std::clamp(v, spec.log_radiance_min, spec.log_radiance_max);
    }
    g.radiance = s.log_radiance.array().exp();
    out.push_back(s);
  }
  return out;
}

std::vector<View> build_views(const SceneSpec& spec) {
  std::vector<View> views;
  const double f = 0.5 * spec.width / std::tan(0.5 * spec.fov_degrees * std::numbers::pi / 180.0);
  for (int v = 0; v < spec.num_views; ++v) {
    const double a = 2.0 * std::numbers::pi * v / spec.num_views;
    const Vec3 eye(spec.ring_radius * std::cos(a), 0.0, spec.ring_radius * std::sin(a));
    Vec3 target = spec.look_at;
    if ((target - eye).norm() < 1e-9) target = eye - Vec3(std::cos(a), 0.0, std::sin(a));
    View view;
    view.intrinsics = {f, f, 0.5 * (spec.width - 1), 0.5 * (spec.height - 1)};
    view.world_to_camera = look_at(eye, target, Vec3(0.0, 1.0, 0.0));
    views.push_back(view);
  }
  return views;
}

}  // namespace

std::vector<Gaussian3D> synthetic_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::vector<Gaussian3D> scene;
  for (const WallSample& s : build_wall(spec, rng)) scene.push_back(s.gaussian);
  return scene;
}

MultiExposureDataset generate_synthetic(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::vector<WallSample> wall = build_wall(spec, rng);
  std::vector<Gaussian3D> scene;
  for (const WallSample& s : wall) scene.push_back(s.gaussian);

  MultiExposureDataset ds;
  ds.width = spec.width;
  ds.height = spec.height;
  ds.exposure_unit = spec.exposure_unit;
  ds.exposure_values = spec.exposures;
  ds.views = build_views(spec);

  const std::size_t mid_exposure = spec.exposures.size() / 2;
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    const Split split = (spec.test_view_stride > 0 && (v + 1) % spec.test_view_stride == 0)
                            ? Split::Test
                            : Split::Train;
    const Camera cam0 = ds.camera(static_cast<int>(v), 0);
    const IrradianceImage irr = render_irradiance_reference(scene, cam0);
    ImageF hdr(spec.width, spec.height, 3);
    for (std::size_t i = 0; i < hdr.size(); ++i) hdr[i] = static_cast<float>(irr.values[i]);
    for (std::size_t e = 0; e < spec.exposures.size(); ++e) {
      const double t = ds.exposure_seconds(static_cast<int>(e));
      ImageD ldr(spec.width, spec.height, 3);
      for (std::size_t i = 0; i < ldr.size(); ++i) ldr[i] = spec.crf(irr.values[i] * t);
      Frame f;
      f.view = static_cast<int>(v);
      f.exposure = static_cast<int>(e);
      f.split = split;
      f.ldr = quantize8(ldr);
      ds.frames.push_back(std::move(f));
    }
    ds.gt_hdr.push_back(std::move(hdr));
  }

  for (double x = -10.0; x <= 4.0 + 1e-9; x += 0.01) {
    CrfSample s;
    s.x = x;
    const double c = std::clamp(spec.crf(std::exp(x)), 0.0, 1.0);
    s.value = {c, c, c};
    ds.gt_crf.push_back(s);
  }

  std::normal_distribution<double> jitter(0.0, spec.init_jitter);
  const double t_mid = ds.exposure_seconds(static_cast<int>(mid_exposure));
  for (const WallSample& s : wall) {
    InitPoint p;
    p.position = s.gaussian.mean + Vec3(jitter(rng), jitter(rng), jitter(rng));
    for (int c = 0; c < 3; ++c) p.color[c] = std::clamp(spec.crf(s.gaussian.radiance[c] * t_mid), 0.0, 1.0);
    ds.init_points.push_back(p);
  }
  ds.validate();
  return ds;
}

}  // namespace hdrgs
