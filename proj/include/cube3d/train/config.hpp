#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cube3d/binary_io.hpp"
#include "cube3d/error.hpp"

namespace cube3d::train {

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  double momentum = 0.09;
  std::size_t plateau_patience_epochs = 3;
  double plateau_factor = 0.1;
  double plateau_threshold = 1e-4;
  std::size_t max_epochs = 10;
  std::uint64_t seed = 0;
  double dropout_rate = 0.6;
  double init_std = 0.01;
  std::string init = "normal";  // normal (init_std) | he (fan-in scaled)

  void validate() const {
    if (batch_size < 1) fail(ErrorKind::config, "batch_size must be >= 1");
    if (!(learning_rate > 0.0)) fail(ErrorKind::config, "learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorKind::config, "momentum must lie in [0, 1)");
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) fail(ErrorKind::config, "plateau_factor must lie in (0, 1)");
    if (plateau_patience_epochs < 1) fail(ErrorKind::config, "plateau_patience_epochs must be >= 1");
    if (!(plateau_threshold >= 0.0)) fail(ErrorKind::config, "plateau_threshold must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(ErrorKind::config, "dropout_rate must lie in [0, 1)");
    if (!(init_std > 0.0)) fail(ErrorKind::config, "init_std must be > 0");
    if (init != "normal" && init != "he") fail(ErrorKind::config, "init must be normal or he");
  }
};

// "key = value" lines; '#' starts a comment. Later keys win.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::config, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorKind::config, "config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

namespace detail {

template <typename V>
V parse_number(const std::string& key, const std::string& text) {
  V v{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
    fail(ErrorKind::config, key + ": '" + text + "' is not a valid value");
  return v;
}

}  // namespace detail

// Applies one TrainConfig field by name; false when the key is not a
// TrainConfig field.
inline bool set_train_field(TrainConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
  else if (key == "momentum") c.momentum = parse_number<double>(key, value);
  else if (key == "plateau_patience_epochs") c.plateau_patience_epochs = parse_number<std::size_t>(key, value);
  else if (key == "plateau_factor") c.plateau_factor = parse_number<double>(key, value);
  else if (key == "plateau_threshold") c.plateau_threshold = parse_number<double>(key, value);
  else if (key == "max_epochs") c.max_epochs = parse_number<std::size_t>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "dropout_rate") c.dropout_rate = parse_number<double>(key, value);
  else if (key == "init_std") c.init_std = parse_number<double>(key, value);
  else if (key == "init") c.init = value;
  else return false;
  return true;
}

inline TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  for (const auto& [k, v] : parse_key_values(text))
    if (!set_train_field(c, k, v)) fail(ErrorKind::config, "unknown config key '" + k + "'");
  c.validate();
  return c;
}

// CUBE3D_SEED, when set, overrides the seed from files and flags.
inline void apply_seed_env(TrainConfig& c) {
  if (const char* s = std::getenv("CUBE3D_SEED"); s && *s) c.seed = detail::parse_number<std::uint64_t>("CUBE3D_SEED", s);
}

inline std::string format_train_config(const TrainConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "batch_size = " << c.batch_size << "\n"
    << "learning_rate = " << c.learning_rate << "\n"
    << "momentum = " << c.momentum << "\n"
    << "plateau_patience_epochs = " << c.plateau_patience_epochs << "\n"
    << "plateau_factor = " << c.plateau_factor << "\n"
    << "plateau_threshold = " << c.plateau_threshold << "\n"
    << "max_epochs = " << c.max_epochs << "\n"
    << "seed = " << c.seed << "\n"
    << "dropout_rate = " << c.dropout_rate << "\n"
    << "init_std = " << c.init_std << "\n"
    << "init = " << c.init << "\n";
  return o.str();
}

}  // namespace cube3d::train
