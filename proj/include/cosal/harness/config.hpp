// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cosal/core/error.hpp"
#include "cosal/network/losses.hpp"
#include "cosal/network/network.hpp"

namespace cosal::harness {

/// One run, fully described. The default profile mirrors the reference
/// training recipe (sum-reduced losses, lr 1e-10, momentum 0.9, weight decay
/// 0.0005, 50 epochs, batch 2); desk() switches to the CPU-scale profile
/// (tiny backbone, mean reduction, lr 1e-3).
struct RunConfig {
  std::string scale = "full";  // full | tiny
  int input_side = 256;
  int seed = 1;
  int epochs = 50;
  int batch_size = 2;
  int steps_per_epoch = 0;  // 0 = one full pass over the split per epoch
  double lr = 1e-10;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::string reduction = "sum";
  LossWeights weights;
  AblationToggles toggles;
  bool augment = true;
  bool invert_depth = false;
  std::string data_root;
  std::string out_dir;

  static RunConfig desk() {
    RunConfig c;
    c.scale = "tiny";
    c.input_side = 64;
    c.epochs = 2;
    c.lr = 1e-3;
    c.reduction = "mean";
    return c;
  }

  NetworkConfig network_config() const {
    NetworkConfig nc =
        scale == "tiny" ? NetworkConfig::tiny(input_side) : NetworkConfig::full(input_side);
    nc.toggles = toggles;
    return nc;
  }

  void validate() const {
    check<ConfigError>(scale == "full" || scale == "tiny",
                       "config: scale must be full or tiny, got '", scale, "'");
    check<ConfigError>(input_side > 0, "config: input_side must be positive");
    check<ConfigError>(epochs > 0 && batch_size > 0, "config: epochs and batch_size must be positive");
    check<ConfigError>(steps_per_epoch >= 0, "config: steps_per_epoch must be >= 0");
    check<ConfigError>(lr > 0 && momentum >= 0 && weight_decay >= 0,
                       "config: optimizer settings out of range");
    reduction_from_string(reduction);
    weights.validate();
    toggles.validate();
    network_config().validate();
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError(msg("config: key '", key, "' expects a boolean, got '", v, "'"));
}

inline int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    check<ConfigError>(pos == v.size(), "");
    return out;
  } catch (...) {
    throw ConfigError(msg("config: key '", key, "' expects an integer, got '", v, "'"));
  }
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    check<ConfigError>(pos == v.size(), "");
    return out;
  } catch (...) {
    throw ConfigError(msg("config: key '", key, "' expects a number, got '", v, "'"));
  }
}

struct ConfigKey {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Single source of truth for the flat key=value format: parser, canonical
/// serializer and the env-override loop all walk this table in order.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"scale", [](RunConfig& c, const std::string& v) { c.scale = v; },
       [](const RunConfig& c) { return c.scale; }},
      {"input_side", [](RunConfig& c, const std::string& v) { c.input_side = parse_int("input_side", v); },
       [](const RunConfig& c) { return std::to_string(c.input_side); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_int("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.epochs = parse_int("epochs", v); },
       [](const RunConfig& c) { return std::to_string(c.epochs); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = parse_int("batch_size", v); },
       [](const RunConfig& c) { return std::to_string(c.batch_size); }},
      {"steps_per_epoch",
       [](RunConfig& c, const std::string& v) { c.steps_per_epoch = parse_int("steps_per_epoch", v); },
       [](const RunConfig& c) { return std::to_string(c.steps_per_epoch); }},
      {"lr", [](RunConfig& c, const std::string& v) { c.lr = parse_double("lr", v); },
       [](const RunConfig& c) { return fmt_double(c.lr); }},
      {"momentum", [](RunConfig& c, const std::string& v) { c.momentum = parse_double("momentum", v); },
       [](const RunConfig& c) { return fmt_double(c.momentum); }},
      {"weight_decay",
       [](RunConfig& c, const std::string& v) { c.weight_decay = parse_double("weight_decay", v); },
       [](const RunConfig& c) { return fmt_double(c.weight_decay); }},
      {"reduction", [](RunConfig& c, const std::string& v) { c.reduction = v; },
       [](const RunConfig& c) { return c.reduction; }},
      {"w_edge", [](RunConfig& c, const std::string& v) { c.weights.edge = parse_double("w_edge", v); },
       [](const RunConfig& c) { return fmt_double(c.weights.edge); }},
      {"w_sal", [](RunConfig& c, const std::string& v) { c.weights.sal = parse_double("w_sal", v); },
       [](const RunConfig& c) { return fmt_double(c.weights.sal); }},
      {"w_depth", [](RunConfig& c, const std::string& v) { c.weights.depth = parse_double("w_depth", v); },
       [](const RunConfig& c) { return fmt_double(c.weights.depth); }},
      {"w_final",
       [](RunConfig& c, const std::string& v) { c.weights.final_map = parse_double("w_final", v); },
       [](const RunConfig& c) { return fmt_double(c.weights.final_map); }},
      {"use_ggm", [](RunConfig& c, const std::string& v) { c.toggles.use_ggm = parse_bool("use_ggm", v); },
       [](const RunConfig& c) { return std::string(c.toggles.use_ggm ? "1" : "0"); }},
      {"use_edge", [](RunConfig& c, const std::string& v) { c.toggles.use_edge = parse_bool("use_edge", v); },
       [](const RunConfig& c) { return std::string(c.toggles.use_edge ? "1" : "0"); }},
      {"use_coarse_sal",
       [](RunConfig& c, const std::string& v) { c.toggles.use_coarse_sal = parse_bool("use_coarse_sal", v); },
       [](const RunConfig& c) { return std::string(c.toggles.use_coarse_sal ? "1" : "0"); }},
      {"use_mutual_sa_ca",
       [](RunConfig& c, const std::string& v) {
         c.toggles.use_mutual_sa_ca = parse_bool("use_mutual_sa_ca", v);
       },
       [](const RunConfig& c) { return std::string(c.toggles.use_mutual_sa_ca ? "1" : "0"); }},
      {"use_kc", [](RunConfig& c, const std::string& v) { c.toggles.use_kc = parse_bool("use_kc", v); },
       [](const RunConfig& c) { return std::string(c.toggles.use_kc ? "1" : "0"); }},
      {"kc_use_att_edge",
       [](RunConfig& c, const std::string& v) {
         c.toggles.kc_use_att_edge = parse_bool("kc_use_att_edge", v);
       },
       [](const RunConfig& c) { return std::string(c.toggles.kc_use_att_edge ? "1" : "0"); }},
      {"kc_use_att_sal",
       [](RunConfig& c, const std::string& v) { c.toggles.kc_use_att_sal = parse_bool("kc_use_att_sal", v); },
       [](const RunConfig& c) { return std::string(c.toggles.kc_use_att_sal ? "1" : "0"); }},
      {"kc_use_att_depth",
       [](RunConfig& c, const std::string& v) {
         c.toggles.kc_use_att_depth = parse_bool("kc_use_att_depth", v);
       },
       [](const RunConfig& c) { return std::string(c.toggles.kc_use_att_depth ? "1" : "0"); }},
      {"augment", [](RunConfig& c, const std::string& v) { c.augment = parse_bool("augment", v); },
       [](const RunConfig& c) { return std::string(c.augment ? "1" : "0"); }},
      {"invert_depth",
       [](RunConfig& c, const std::string& v) { c.invert_depth = parse_bool("invert_depth", v); },
       [](const RunConfig& c) { return std::string(c.invert_depth ? "1" : "0"); }},
      {"data_root", [](RunConfig& c, const std::string& v) { c.data_root = v; },
       [](const RunConfig& c) { return c.data_root; }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }},
  };
  return keys;
}

inline const ConfigKey& find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (name == k.name) return k;
  throw ConfigError(msg("config: unknown key '", name, "'"));
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace detail

inline constexpr const char* kEnvPrefix = "COSAL_";

/// Applies `COSAL_<KEY>` environment overrides (key upper-cased) on top of
/// whatever the config file set.
inline void apply_env_overrides(RunConfig& cfg) {
  for (const auto& key : detail::config_keys()) {
    std::string env_name = kEnvPrefix;
    for (const char* p = key.name; *p; ++p)
      env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    if (const char* v = std::getenv(env_name.c_str())) key.set(cfg, v);
  }
}

/// Flat `key=value` text, one pair per line, '#' comments. Unknown keys are
/// rejected so typos fail loudly.
inline RunConfig parse_config_text(const std::string& text, bool env_overrides = true) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    check<ConfigError>(eq != std::string::npos, "config line ", line_no,
                       ": expected key=value, got '", t, "'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    detail::find_key(key).set(cfg, value);
  }
  if (env_overrides) apply_env_overrides(cfg);
  return cfg;
}

inline RunConfig load_config(const std::string& path, bool env_overrides = true) {
  std::ifstream is(path);
  check<ConfigError>(is.good(), "cannot open config file: ", path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), env_overrides);
}

/// Canonical serialization: fixed key order, %.17g numerics. Round-trips
/// exactly through parse_config_text.
inline std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& key : detail::config_keys()) {
    out += key.name;
    out += '=';
    out += key.get(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace cosal::harness
