#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "hdrgs/config.hpp"
#include "hdrgs/dataset.hpp"
#include "hdrgs/error.hpp"
#include "hdrgs/losses.hpp"
#include "hdrgs/model.hpp"
#include "hdrgs/trainer.hpp"

namespace hdrgs::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

// One string option per flat config key; values are parsed against the
// key's current type once the config file has been applied.
struct KeyFlags {
  std::map<std::string, std::string> values;

  void add(CLI::App& app, const std::vector<std::string>& keys) {
    for (const std::string& k : keys) {
      app.add_option("--" + k, values[k], "override config key " + k)->group("Config keys");
    }
  }

  json overrides(const json& base, const CLI::App& app) const {
    json out = json::object();
    for (const auto& [key, text] : values) {
      if (app.get_option("--" + key)->count() == 0) continue;
      try {
        out[key] = parse_flag_value(base.at(key), text);
      } catch (const ConfigError& e) {
        throw UsageError("--" + key + ": " + e.what());
      }
    }
    return out;
  }
};

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

double parse_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError("invalid " + what + " '" + text + "'");
  }
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string spec_file;
  std::string out;
  bool force = false;
  bool dump = false;
  KeyFlags keys;
};

int cmd_generate(const GenerateArgs& a, const CLI::App& app) {
  SceneSpec spec;
  if (!a.spec_file.empty()) apply_flat_json(spec, read_json_file(a.spec_file));
  apply_flat_json(spec, a.keys.overrides(to_flat_json(spec), app));
  spec.validate();
  if (a.dump) {
    print_json(to_flat_json(spec));
    return kExitOk;
  }
  if (a.out.empty()) throw UsageError("generate: --out is required");
  if (fs::exists(a.out) && !fs::is_empty(a.out)) {
    if (!a.force) throw UsageError("generate: output directory '" + a.out + "' is not empty (use --force)");
    fs::remove_all(a.out);
  }
  const MultiExposureDataset ds = generate_synthetic(spec);
  save_dataset(ds, a.out);
  std::cout << "wrote " << a.out << ": " << ds.views.size() << " views, " << ds.exposure_values.size()
            << " exposures, " << ds.frames.size() << " frames, " << ds.init_points.size() << " init points\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string out;
  std::string log;
  std::string config_file;
  bool ldr_oe = false;
  bool ldr_ne = false;
  bool no_coarse = false;
  bool no_time_scaling = false;
  bool symmetric_grid = false;
  bool dump = false;
  KeyFlags keys;
};

// Exposure indices of the two splits over a five-level stack.
const std::vector<int> kOeExposures{0, 2, 4};
const std::vector<int> kNeExposures{1, 3};

TrainConfig resolve_train_config(const TrainArgs& a, const CLI::App& app) {
  TrainConfig cfg;
  if (!a.config_file.empty()) apply_flat_json(cfg, read_json_file(a.config_file));
  apply_flat_json(cfg, a.keys.overrides(to_flat_json(cfg), app));
  if (a.ldr_oe) cfg.train_exposures = kOeExposures;
  if (a.ldr_ne) cfg.train_exposures = kNeExposures;
  if (a.no_coarse) cfg.coarse_enabled = false;
  if (a.no_time_scaling) cfg.time_scaling = false;
  if (a.symmetric_grid) cfg.symmetric_grid = true;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, const CLI::App& app) {
  const TrainConfig cfg = resolve_train_config(a, app);
  if (a.dump) {
    print_json(to_flat_json(cfg));
    return kExitOk;
  }
  if (a.data.empty() || a.out.empty()) throw UsageError("train: --data and --out are required");
  const MultiExposureDataset ds = load_dataset(a.data);
  if ((a.ldr_oe || a.ldr_ne) && ds.exposure_values.size() != 5) {
    throw UsageError("train: --ldr-oe/--ldr-ne need a dataset with five exposure levels");
  }
  const TrainResult result = train(ds, cfg);
  save_checkpoint(result.checkpoint, a.out);
  const std::string log = a.log.empty() ? a.out + ".log.csv" : a.log;
  write_train_log(result.log, log);
  const LogRow& last = result.log.back();
  std::cout << "trained " << last.iter << " iterations, " << last.points << " Gaussians, final loss "
            << last.total << "\nwrote " << a.out << " and " << log << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
  std::string ckpt;
  std::string pose;
  double exposure = 1.0;
  bool hdr = false;
  std::string out;
  std::string preview;
};

Camera pose_camera(const ModelCheckpoint& ckpt, const std::string& pose, double exposure) {
  if (ckpt.views.empty()) throw UsageError("render: checkpoint has no cameras");
  const bool is_index = !pose.empty() && std::all_of(pose.begin(), pose.end(), ::isdigit);
  if (is_index) {
    const int view = std::stoi(pose);
    if (view >= static_cast<int>(ckpt.views.size())) {
      throw UsageError("render: pose index " + pose + " out of range (" + std::to_string(ckpt.views.size()) +
                       " views)");
    }
    return ckpt.camera(view, exposure);
  }
  std::ifstream in(pose);
  if (!in) throw UsageError("render: pose '" + pose + "' is neither a view index nor a readable file");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!(in >> m(r, c))) throw UsageError("render: pose file '" + pose + "' needs 16 numbers");
    }
  }
  Camera cam = ckpt.camera(0, exposure);
  cam.world_to_camera = m;
  try {
    cam.validate();
  } catch (const ConfigError& e) {
    throw UsageError(std::string("render: bad pose: ") + e.what());
  }
  return cam;
}

int cmd_render(const RenderArgs& a) {
  if (!(a.exposure > 0.0)) throw UsageError("render: --exposure must be positive");
  const ModelCheckpoint ckpt = load_checkpoint(a.ckpt);
  const Camera cam = pose_camera(ckpt, a.pose, a.exposure);
  if (a.hdr) {
    const ImageD hdr = render_hdr(ckpt, cam);
    ImageF out(hdr.width(), hdr.height(), 3);
    for (std::size_t i = 0; i < hdr.size(); ++i) out[i] = static_cast<float>(hdr[i]);
    write_pfm(out, a.out);
    if (!a.preview.empty()) write_png(reinhard_preview(hdr), a.preview);
  } else {
    write_png(quantize8(render_ldr(ckpt, cam)), a.out);
  }
  std::cout << "wrote " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string out;
};

ImageD clamp01(ImageD img) {
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

int cmd_eval(const EvalArgs& a) {
  const ModelCheckpoint ckpt = load_checkpoint(a.ckpt);
  const MultiExposureDataset ds = load_dataset(a.data);
  if (ds.width != ckpt.width || ds.height != ckpt.height) {
    throw DimensionError("eval: dataset and checkpoint image sizes differ");
  }
  std::vector<std::optional<double>> view_rmse(ds.views.size());
  if (!ds.gt_hdr.empty()) {
    for (std::size_t v = 0; v < ds.views.size(); ++v) {
      const ImageD pred = render_hdr(ckpt, ds.camera(static_cast<int>(v), 0));
      ImageD gt(ds.width, ds.height, 3);
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = ds.gt_hdr[v][i];
      view_rmse[v] = hdr_log_rmse(pred, gt).rmse;
    }
  }
  std::ofstream out(a.out);
  if (!out) throw IoError("eval: cannot write '" + a.out + "'");
  out << std::setprecision(10) << "view,exposure,exposure_time,split,psnr,ssim,hdr_log_rmse\n";
  struct Mean {
    double psnr = 0, ssim = 0;
    int n = 0;
  };
  std::map<std::string, Mean> means;
  for (const Frame& f : ds.frames) {
    const Camera cam = ds.camera(f);
    const ImageD pred = clamp01(render_ldr(ckpt, cam));
    const ImageD target = to_unit(f.ldr);
    const double p = psnr(pred, target);
    const double s = ssim(pred, target);
    const std::string split = f.split == Split::Train ? "train" : "test";
    out << f.view << ',' << f.exposure << ',' << cam.exposure_time << ',' << split << ',' << p << ',' << s << ',';
    if (view_rmse[f.view]) out << *view_rmse[f.view];
    out << '\n';
    for (const std::string& key : {split, std::string("all")}) {
      Mean& m = means[key];
      m.psnr += p;
      m.ssim += s;
      ++m.n;
    }
  }
  for (const auto& [key, m] : means) {
    out << "mean_" << key << ",,,," << m.psnr / m.n << ',' << m.ssim / m.n << ",\n";
    std::cout << key << ": " << m.n << " images, PSNR " << m.psnr / m.n << " dB, SSIM " << m.ssim / m.n << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// export-crf

struct ExportArgs {
  std::string ckpt;
  std::string out;
  std::string range;
};

int cmd_export_crf(const ExportArgs& a) {
  const ModelCheckpoint ckpt = load_checkpoint(a.ckpt);
  const GridLayout& l = ckpt.grid.layout();
  double lo = l.x_lo, hi = l.x_hi, step = 0.01;
  if (!a.range.empty()) {
    std::vector<std::string> parts;
    std::stringstream ss(a.range);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw UsageError("export-crf: --range must be lo:hi:step");
    lo = parse_double(parts[0], "range start");
    hi = parse_double(parts[1], "range end");
    step = parse_double(parts[2], "range step");
  }
  const auto rows = export_crf(ckpt.tone_mapper(), lo, hi, step);
  std::ofstream out(a.out);
  if (!out) throw IoError("export-crf: cannot write '" + a.out + "'");
  out << std::setprecision(17) << "x,g_red,g_green,g_blue\n";
  for (const CrfRow& r : rows) out << r.x << ',' << r.value[0] << ',' << r.value[1] << ',' << r.value[2] << '\n';
  std::cout << "wrote " << rows.size() << " rows to " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"HDR Gaussian splatting with a learned asymmetric-grid tone curve", "hdrgs"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* g = app.add_subcommand("generate", "Generate a synthetic multi-exposure dataset");
  g->add_option("--spec", gen.spec_file, "Scene spec JSON (flat keys)")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output dataset directory");
  g->add_flag("--force", gen.force, "Replace a non-empty output directory");
  g->add_flag("--dump-config", gen.dump, "Print the resolved scene spec and exit");
  gen.keys.add(*g, config_keys(SceneSpec{}));

  TrainArgs tr;
  CLI::App* t = app.add_subcommand("train", "Train a model on a dataset");
  t->add_option("--data", tr.data, "Dataset directory");
  t->add_option("--out", tr.out, "Checkpoint path");
  t->add_option("--log", tr.log, "Training log CSV (default <out>.log.csv)");
  t->add_option("--config", tr.config_file, "Training config JSON (flat keys)")->check(CLI::ExistingFile);
  auto* oe = t->add_flag("--ldr-oe", tr.ldr_oe, "Train on exposures t1, t3, t5");
  t->add_flag("--ldr-ne", tr.ldr_ne, "Train on exposures t2, t4")->excludes(oe);
  t->add_flag("--no-coarse", tr.no_coarse, "Skip the sigmoid phase");
  t->add_flag("--no-time-scaling", tr.no_time_scaling, "Fix the exposure scaler to r = 1, s = 0");
  t->add_flag("--symmetric-grid", tr.symmetric_grid, "Use the dense node density everywhere");
  t->add_flag("--dump-config", tr.dump, "Print the resolved training config and exit");
  tr.keys.add(*t, config_keys(TrainConfig{}));

  RenderArgs re;
  CLI::App* r = app.add_subcommand("render", "Render an LDR (PNG) or HDR (PFM) image");
  r->add_option("--ckpt", re.ckpt, "Checkpoint")->required();
  r->add_option("--pose", re.pose, "View index or a file with a 4x4 world-to-camera matrix")->required();
  r->add_option("--exposure", re.exposure, "Exposure time in seconds (LDR only)");
  r->add_flag("--hdr", re.hdr, "Write linear HDR radiance instead of LDR");
  r->add_option("--out", re.out, "Output image")->required();
  r->add_option("--preview", re.preview, "With --hdr, also write a Reinhard tone-mapped PNG");

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "Per-image PSNR/SSIM and HDR error against a dataset");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Metrics CSV")->required();

  ExportArgs ex;
  CLI::App* x = app.add_subcommand("export-crf", "Write the learned tone curve as CSV");
  x->add_option("--ckpt", ex.ckpt, "Checkpoint")->required();
  x->add_option("--out", ex.out, "CSV path")->required();
  x->add_option("--range", ex.range, "lo:hi:step (default: grid domain, step 0.01)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, *g);
    if (t->parsed()) return cmd_train(tr, *t);
    if (r->parsed()) return cmd_render(re);
    if (e->parsed()) return cmd_eval(ev);
    if (x->parsed()) return cmd_export_crf(ex);
  } catch (const NumericalAbort& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace hdrgs::cli
