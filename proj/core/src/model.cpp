#include "hdrgs/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hdrgs/error.hpp"

namespace hdrgs {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

ToneMapper ModelCheckpoint::tone_mapper() const {
  return phase == Phase::Fine ? ToneMapper::grid(grid) : ToneMapper::sigmoid();
}

Camera ModelCheckpoint::camera(int view, double exposure_time) const {
  const View& v = views.at(static_cast<std::size_t>(view));
  Camera cam;
  cam.intrinsics = v.intrinsics;
  cam.world_to_camera = v.world_to_camera;
  cam.width = width;
  cam.height = height;
  cam.exposure_time = exposure_time;
  return cam;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size, std::string what)
      : data_(data), size_(size), what_(std::move(what)) {}

  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > size_ - pos_) throw IoError("checkpoint: truncated " + what_ + " section");
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string what_;
};

void put_vec(Writer& w, const auto& v) {
  for (int i = 0; i < v.size(); ++i) w.put<double>(v[i]);
}

template <typename V>
V get_vec(Reader& r) {
  V v;
  for (int i = 0; i < v.size(); ++i) v[i] = r.get<double>();
  return v;
}

void write_section(std::ofstream& out, const char (&tag)[5], const Writer& w) {
  out.write(tag, 4);
  const std::uint64_t n = w.bytes().size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(w.bytes().data(), static_cast<std::streamsize>(n));
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  Writer gaus;
  gaus.put<std::uint64_t>(ckpt.gaussians.size());
  for (const Gaussian3D& g : ckpt.gaussians) {
    put_vec(gaus, g.mean);
    put_vec(gaus, g.log_scale);
    put_vec(gaus, g.rotation);
    gaus.put<double>(g.opacity_logit);
    put_vec(gaus, g.radiance);
  }

  Writer grid;
  const GridLayout& l = ckpt.grid.layout();
  for (double v : {l.x_lo, l.x_mid, l.x_hi, l.dense_density, l.sparse_density, l.leak_beta}) grid.put(v);
  grid.put<std::uint64_t>(ckpt.grid.node_count());
  for (int c = 0; c < AsymmetricGrid::kChannels; ++c) {
    for (double v : ckpt.grid.values(c)) grid.put(v);
  }

  Writer scal;
  scal.put(ckpt.scaler.r());
  scal.put(ckpt.scaler.s());

  Writer stat;
  stat.put<std::uint8_t>(static_cast<std::uint8_t>(ckpt.phase));
  stat.put<std::int64_t>(ckpt.iteration);
  stat.put<std::uint64_t>(ckpt.config_hash);

  Writer conf;
  conf.put_string(ckpt.config_json);

  Writer cams;
  cams.put<std::int32_t>(ckpt.width);
  cams.put<std::int32_t>(ckpt.height);
  cams.put<std::uint64_t>(ckpt.views.size());
  for (const View& v : ckpt.views) {
    for (double x : {v.intrinsics.fx, v.intrinsics.fy, v.intrinsics.cx, v.intrinsics.cy}) cams.put(x);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) cams.put<double>(v.world_to_camera(r, c));
    }
  }
  cams.put<std::uint64_t>(ckpt.exposures.size());
  for (double t : ckpt.exposures) cams.put(t);
  cams.put<std::uint64_t>(ckpt.train_exposures.size());
  for (int i : ckpt.train_exposures) cams.put<std::int32_t>(i);

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    write_section(out, "GAUS", gaus);
    write_section(out, "GRID", grid);
    write_section(out, "SCAL", scal);
    write_section(out, "STAT", stat);
    write_section(out, "CONF", conf);
    write_section(out, "CAMS", cams);
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("missing checkpoint: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader head(bytes.data(), bytes.size(), "header");
  char magic[sizeof(kCheckpointMagic)];
  for (char& c : magic) c = head.get<char>();
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("not a checkpoint (bad magic): " + path.string());
  }
  if (head.get<std::uint32_t>() != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint version: " + path.string());
  }

  ModelCheckpoint ckpt;
  bool have_gaus = false, have_grid = false, have_scal = false, have_stat = false;
  std::size_t offset = bytes.size() - head.remaining();
  while (offset < bytes.size()) {
    if (bytes.size() - offset < 12) throw IoError("checkpoint: truncated section header");
    const std::string tag(bytes.data() + offset, 4);
    std::uint64_t len;
    std::memcpy(&len, bytes.data() + offset + 4, sizeof(len));
    offset += 12;
    if (len > bytes.size() - offset) throw IoError("checkpoint: truncated " + tag + " section");
    Reader r(bytes.data() + offset, len, tag);
    offset += len;

    if (tag == "GAUS") {
      const auto n = r.get<std::uint64_t>();
      ckpt.gaussians.resize(n);
      for (Gaussian3D& g : ckpt.gaussians) {
        g.mean = get_vec<Vec3>(r);
        g.log_scale = get_vec<Vec3>(r);
        g.rotation = get_vec<Vec4>(r);
        g.opacity_logit = r.get<double>();
        g.radiance = get_vec<Vec3>(r);
      }
      have_gaus = true;
    } else if (tag == "GRID") {
      GridLayout l;
      l.x_lo = r.get<double>();
      l.x_mid = r.get<double>();
      l.x_hi = r.get<double>();
      l.dense_density = r.get<double>();
      l.sparse_density = r.get<double>();
      l.leak_beta = r.get<double>();
      ckpt.grid = AsymmetricGrid(l);
      if (r.get<std::uint64_t>() != ckpt.grid.node_count()) {
        throw IoError("checkpoint: grid node count does not match its layout");
      }
      for (int c = 0; c < AsymmetricGrid::kChannels; ++c) {
        for (double& v : ckpt.grid.mutable_values(c)) v = r.get<double>();
      }
      have_grid = true;
    } else if (tag == "SCAL") {
      const double rr = r.get<double>();
      const double ss = r.get<double>();
      ckpt.scaler = ExposureScaler(rr, ss);
      have_scal = true;
    } else if (tag == "STAT") {
      const auto phase = r.get<std::uint8_t>();
      if (phase > 1) throw IoError("checkpoint: unknown phase marker");
      ckpt.phase = static_cast<Phase>(phase);
      ckpt.iteration = r.get<std::int64_t>();
      ckpt.config_hash = r.get<std::uint64_t>();
      have_stat = true;
    } else if (tag == "CONF") {
      ckpt.config_json = r.get_string();
    } else if (tag == "CAMS") {
      ckpt.width = r.get<std::int32_t>();
      ckpt.height = r.get<std::int32_t>();
      ckpt.views.resize(r.get<std::uint64_t>());
      for (View& v : ckpt.views) {
        v.intrinsics.fx = r.get<double>();
        v.intrinsics.fy = r.get<double>();
        v.intrinsics.cx = r.get<double>();
        v.intrinsics.cy = r.get<double>();
        for (int row = 0; row < 4; ++row) {
          for (int c = 0; c < 4; ++c) v.world_to_camera(row, c) = r.get<double>();
        }
      }
      ckpt.exposures.resize(r.get<std::uint64_t>());
      for (double& t : ckpt.exposures) t = r.get<double>();
      ckpt.train_exposures.resize(r.get<std::uint64_t>());
      for (int& i : ckpt.train_exposures) i = r.get<std::int32_t>();
    }
    // unknown tags are skipped
  }
  if (!(have_gaus && have_grid && have_scal && have_stat)) {
    throw IoError("checkpoint: missing required section in " + path.string());
  }
  return ckpt;
}

ImageD tone_map(const IrradianceImage& irr, const ToneMapper& mapper, double scaled_time) {
  const ImageD& e = irr.values;
  ImageD out(e.width(), e.height(), e.channels());
  for (int y = 0; y < e.height(); ++y) {
    for (int x = 0; x < e.width(); ++x) {
      for (int c = 0; c < e.channels(); ++c) out.at(x, y, c) = mapper.eval(e.at(x, y, c) + scaled_time, c);
    }
  }
  return out;
}

ImageD render_ldr(const ModelCheckpoint& ckpt, const Camera& cam, const RasterConfig& raster) {
  const RenderOutput r = render_irradiance(ckpt.gaussians, cam, raster);
  return tone_map(r.image, ckpt.tone_mapper(), ckpt.scaler.scale_time(cam.exposure_time));
}

ImageD render_hdr(const ModelCheckpoint& ckpt, const Camera& cam, const RasterConfig& raster) {
  const RenderOutput r = render_irradiance(ckpt.gaussians, cam, raster);
  ImageD out = r.image.values;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ckpt.scaler.hdr_from_learned(out[i]);
  return out;
}

ImageU8 reinhard_preview(const ImageD& hdr) {
  ImageD mapped(hdr.width(), hdr.height(), hdr.channels());
  for (std::size_t i = 0; i < hdr.size(); ++i) {
    const double l = std::max(0.0, hdr[i]);
    mapped[i] = std::pow(l / (1.0 + l), 1.0 / 2.2);
  }
  return quantize8(mapped);
}

std::vector<CrfRow> export_crf(const ToneMapper& mapper, double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("export_crf: need lo <= hi and step > 0");
  const auto count = static_cast<std::size_t>(std::llround(std::floor((hi - lo) / step + 1e-9))) + 1;
  std::vector<CrfRow> rows(count);
  for (std::size_t i = 0; i < count; ++i) {
    double x = lo + static_cast<double>(i) * step;
    if (i + 1 == count && std::abs(x - hi) < 1e-6 * step) x = hi;
    rows[i].x = x;
    for (int c = 0; c < 3; ++c) rows[i].value[c] = mapper.eval(x, c);
  }
  return rows;
}

}  // namespace hdrgs
