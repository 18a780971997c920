#include "hdrgs/config.hpp"

#include <functional>
#include <map>
#include <type_traits>

#include "hdrgs/error.hpp"

namespace hdrgs {

using nlohmann::json;

namespace {

template <typename T>
struct Field {
  std::function<json(const T&)> get;
  std::function<void(T&, const json&)> set;
};

template <typename T>
using FieldMap = std::map<std::string, Field<T>>;

// Binds a key to a member reachable through `access`.
template <typename T, typename V, typename A>
void bind(FieldMap<T>& m, const std::string& key, A access) {
  m[key] = Field<T>{[access](const T& t) { return json(access(const_cast<T&>(t))); },
                    [access](T& t, const json& j) {
                      if constexpr (std::is_integral_v<V> && !std::is_same_v<V, bool>) {
                        if (!j.is_number_integer()) throw ConfigError("expected an integer");
                        if constexpr (std::is_unsigned_v<V>) {
                          if (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0) {
                            throw ConfigError("expected a non-negative integer");
                          }
                        }
                      }
                      access(t) = j.get<V>();
                    }};
}

#define HDRGS_BIND(map, type, key, expr) \
  bind<type, std::decay_t<decltype(std::declval<type&>().expr)>>(map, key, [](type& c) -> auto& { return c.expr; })

const FieldMap<TrainConfig>& train_fields() {
  static const FieldMap<TrainConfig> fields = [] {
    FieldMap<TrainConfig> m;
    HDRGS_BIND(m, TrainConfig, "coarse_iters", coarse_iters);
    HDRGS_BIND(m, TrainConfig, "fine_iters", fine_iters);
    HDRGS_BIND(m, TrainConfig, "lr.means_init", lr.means_init);
    HDRGS_BIND(m, TrainConfig, "lr.means_final", lr.means_final);
    HDRGS_BIND(m, TrainConfig, "lr.opacity", lr.opacity);
    HDRGS_BIND(m, TrainConfig, "lr.scale", lr.scale);
    HDRGS_BIND(m, TrainConfig, "lr.rotation", lr.rotation);
    HDRGS_BIND(m, TrainConfig, "lr.radiance", lr.radiance);
    HDRGS_BIND(m, TrainConfig, "lr.grid_init", lr.grid_init);
    HDRGS_BIND(m, TrainConfig, "lr.grid_final", lr.grid_final);
    HDRGS_BIND(m, TrainConfig, "loss.lambda1", loss.lambda1);
    HDRGS_BIND(m, TrainConfig, "loss.lambda2", loss.lambda2);
    HDRGS_BIND(m, TrainConfig, "loss.lambda3", loss.lambda3);
    HDRGS_BIND(m, TrainConfig, "grid.x_lo", grid.x_lo);
    HDRGS_BIND(m, TrainConfig, "grid.x_mid", grid.x_mid);
    HDRGS_BIND(m, TrainConfig, "grid.x_hi", grid.x_hi);
    HDRGS_BIND(m, TrainConfig, "grid.dense_density", grid.dense_density);
    HDRGS_BIND(m, TrainConfig, "grid.sparse_density", grid.sparse_density);
    HDRGS_BIND(m, TrainConfig, "grid.leak_beta", grid.leak_beta);
    HDRGS_BIND(m, TrainConfig, "prune_threshold", prune_threshold);
    HDRGS_BIND(m, TrainConfig, "prune_start", prune_start);
    HDRGS_BIND(m, TrainConfig, "prune_interval", prune_interval);
    HDRGS_BIND(m, TrainConfig, "opacity_reset_interval", opacity_reset_interval);
    HDRGS_BIND(m, TrainConfig, "opacity_reset_until", opacity_reset_until);
    HDRGS_BIND(m, TrainConfig, "opacity_reset_ceiling", opacity_reset_ceiling);
    HDRGS_BIND(m, TrainConfig, "densify_enabled", densify_enabled);
    HDRGS_BIND(m, TrainConfig, "densify_grad_threshold", densify_grad_threshold);
    HDRGS_BIND(m, TrainConfig, "densify_from", densify_from);
    HDRGS_BIND(m, TrainConfig, "densify_until", densify_until);
    HDRGS_BIND(m, TrainConfig, "densify_interval", densify_interval);
    HDRGS_BIND(m, TrainConfig, "max_points", max_points);
    HDRGS_BIND(m, TrainConfig, "coarse_enabled", coarse_enabled);
    HDRGS_BIND(m, TrainConfig, "time_scaling", time_scaling);
    HDRGS_BIND(m, TrainConfig, "symmetric_grid", symmetric_grid);
    HDRGS_BIND(m, TrainConfig, "train_exposures", train_exposures);
    HDRGS_BIND(m, TrainConfig, "init_opacity", init_opacity);
    HDRGS_BIND(m, TrainConfig, "random_init_points", random_init_points);
    HDRGS_BIND(m, TrainConfig, "raster.tile_size", raster.tile_size);
    HDRGS_BIND(m, TrainConfig, "raster.min_transmittance", raster.min_transmittance);
    HDRGS_BIND(m, TrainConfig, "log_interval", log_interval);
    HDRGS_BIND(m, TrainConfig, "seed", seed);
    return m;
  }();
  return fields;
}

const FieldMap<SceneSpec>& scene_fields() {
  static const FieldMap<SceneSpec> fields = [] {
    FieldMap<SceneSpec> m;
    HDRGS_BIND(m, SceneSpec, "num_gaussians", num_gaussians);
    HDRGS_BIND(m, SceneSpec, "wall_radius", wall_radius);
    HDRGS_BIND(m, SceneSpec, "wall_half_height", wall_half_height);
    HDRGS_BIND(m, SceneSpec, "log_radiance_min", log_radiance_min);
    HDRGS_BIND(m, SceneSpec, "log_radiance_max", log_radiance_max);
    HDRGS_BIND(m, SceneSpec, "num_views", num_views);
    HDRGS_BIND(m, SceneSpec, "ring_radius", ring_radius);
    HDRGS_BIND(m, SceneSpec, "fov_degrees", fov_degrees);
    HDRGS_BIND(m, SceneSpec, "width", width);
    HDRGS_BIND(m, SceneSpec, "height", height);
    HDRGS_BIND(m, SceneSpec, "exposures", exposures);
    HDRGS_BIND(m, SceneSpec, "crf.gamma", crf.gamma);
    HDRGS_BIND(m, SceneSpec, "crf.gain", crf.gain);
    HDRGS_BIND(m, SceneSpec, "crf.slope", crf.slope);
    HDRGS_BIND(m, SceneSpec, "crf.center", crf.center);
    HDRGS_BIND(m, SceneSpec, "test_view_stride", test_view_stride);
    HDRGS_BIND(m, SceneSpec, "init_jitter", init_jitter);
    HDRGS_BIND(m, SceneSpec, "seed", seed);
    m["look_at"] = Field<SceneSpec>{
        [](const SceneSpec& s) { return json::array({s.look_at.x(), s.look_at.y(), s.look_at.z()}); },
        [](SceneSpec& s, const json& j) {
          const auto v = j.get<std::vector<double>>();
          if (v.size() != 3) throw ConfigError("look_at needs three values");
          s.look_at = Vec3(v[0], v[1], v[2]);
        }};
    m["exposure_unit"] = Field<SceneSpec>{
        [](const SceneSpec& s) { return json(s.exposure_unit == ExposureUnit::EV ? "ev" : "seconds"); },
        [](SceneSpec& s, const json& j) {
          const auto v = j.get<std::string>();
          if (v != "ev" && v != "seconds") throw ConfigError("exposure_unit must be 'ev' or 'seconds'");
          s.exposure_unit = v == "ev" ? ExposureUnit::EV : ExposureUnit::Seconds;
        }};
    m["crf.kind"] = Field<SceneSpec>{
        [](const SceneSpec& s) { return json(s.crf.kind == CrfKind::Gamma ? "gamma" : "logistic"); },
        [](SceneSpec& s, const json& j) {
          const auto v = j.get<std::string>();
          if (v != "gamma" && v != "logistic") throw ConfigError("crf.kind must be 'gamma' or 'logistic'");
          s.crf.kind = v == "gamma" ? CrfKind::Gamma : CrfKind::Logistic;
        }};
    return m;
  }();
  return fields;
}

#undef HDRGS_BIND

template <typename T>
json to_flat(const T& cfg, const FieldMap<T>& fields) {
  json out = json::object();
  for (const auto& [key, f] : fields) out[key] = f.get(cfg);
  return out;
}

template <typename T>
void apply_flat(T& cfg, const json& flat, const FieldMap<T>& fields) {
  if (!flat.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : flat.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown configuration key '" + key + "'");
    try {
      it->second.set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("configuration key '" + key + "': " + e.what());
    } catch (const json::exception&) {
      throw ConfigError("wrong type for configuration key '" + key + "'");
    }
  }
}

template <typename T>
std::vector<std::string> keys(const FieldMap<T>& fields) {
  std::vector<std::string> out;
  for (const auto& [key, f] : fields) out.push_back(key);
  return out;
}

}  // namespace

json to_flat_json(const TrainConfig& cfg) { return to_flat(cfg, train_fields()); }
json to_flat_json(const SceneSpec& spec) { return to_flat(spec, scene_fields()); }
void apply_flat_json(TrainConfig& cfg, const json& flat) { apply_flat(cfg, flat, train_fields()); }
void apply_flat_json(SceneSpec& spec, const json& flat) { apply_flat(spec, flat, scene_fields()); }
std::vector<std::string> config_keys(const TrainConfig&) { return keys(train_fields()); }
std::vector<std::string> config_keys(const SceneSpec&) { return keys(scene_fields()); }

json parse_flag_value(const json& current, const std::string& text) {
  try {
    if (current.is_string()) return json(text);
    if (current.is_boolean()) {
      if (text == "true" || text == "1" || text == "on") return true;
      if (text == "false" || text == "0" || text == "off") return false;
      throw ConfigError("expected a boolean, got '" + text + "'");
    }
    if (current.is_array()) {
      // comma-separated list, or a JSON array
      if (!text.empty() && text.front() == '[') return json::parse(text);
      json arr = json::array();
      std::size_t start = 0;
      while (start <= text.size() && !text.empty()) {
        const std::size_t comma = text.find(',', start);
        const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        arr.push_back(json::parse(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return arr;
    }
    const json v = json::parse(text);
    if (!v.is_number()) throw ConfigError("expected a number, got '" + text + "'");
    if (current.is_number_integer() && !v.is_number_integer()) {
      throw ConfigError("expected an integer, got '" + text + "'");
    }
    if (current.is_number_unsigned() && v.is_number_integer() && v.get<std::int64_t>() < 0) {
      throw ConfigError("expected a non-negative integer, got '" + text + "'");
    }
    return v;
  } catch (const json::exception&) {
    throw ConfigError("cannot parse value '" + text + "'");
  }
}

}  // namespace hdrgs
