#include "sconv/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sconv/errors.hpp"

namespace sconv {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for '" + key + "': " + value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("config: bad boolean value for '" + key + "': " + value);
}

}  // namespace

void PipelineConfig::validate() const {
  if (expansion_radius < 1) throw ConfigError("config: expansion radius k must be >= 1");
  if (!(expansion_threshold > 0.0f)) throw ConfigError("config: expansion threshold must be > 0");
  if (!(canny.sigma > 0.0f)) throw ConfigError("config: canny sigma must be > 0");
  if (!(0.0f < canny.low && canny.low < canny.high)) {
    throw ConfigError("config: canny thresholds must satisfy 0 < low < high");
  }
  if (alpha < 0.0) throw ConfigError("config: alpha must be >= 0");
  if (lambda_content < 0.0 || lambda_perceptual < 0.0 || lambda_adversarial < 0.0) {
    throw ConfigError("config: loss weights must be >= 0");
  }
  if (eval_stride < 1) throw ConfigError("config: eval stride must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("config: learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("config: batch size must be >= 1");
  if (train_steps < 0) throw ConfigError("config: train steps must be >= 0");
  if (!std::isfinite(disparity_gain) || !std::isfinite(disparity_shift)) {
    throw ConfigError("config: disparity gain/shift must be finite");
  }
}

void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "disparity_gain") cfg.disparity_gain = static_cast<float>(parse_number(key, value));
  else if (key == "disparity_shift") cfg.disparity_shift = static_cast<float>(parse_number(key, value));
  else if (key == "expansion_radius") cfg.expansion_radius = static_cast<int>(parse_number(key, value));
  else if (key == "expansion_threshold") cfg.expansion_threshold = static_cast<float>(parse_number(key, value));
  else if (key == "expansion_mirror") cfg.expansion_mirror = parse_bool(key, value);
  else if (key == "canny_sigma") cfg.canny.sigma = static_cast<float>(parse_number(key, value));
  else if (key == "canny_low") cfg.canny.low = static_cast<float>(parse_number(key, value));
  else if (key == "canny_high") cfg.canny.high = static_cast<float>(parse_number(key, value));
  else if (key == "canny_relative") cfg.canny.relative = parse_bool(key, value);
  else if (key == "branch_poly") cfg.branch_poly = parse_bool(key, value);
  else if (key == "branch_de") cfg.branch_de = parse_bool(key, value);
  else if (key == "branch_dl") cfg.branch_dl = parse_bool(key, value);
  else if (key == "branch_fallback") cfg.branch_fallback = parse_bool(key, value);
  else if (key == "weights_path") cfg.weights_path = value;
  else if (key == "alpha") cfg.alpha = parse_number(key, value);
  else if (key == "lambda_content") cfg.lambda_content = parse_number(key, value);
  else if (key == "lambda_perceptual") cfg.lambda_perceptual = parse_number(key, value);
  else if (key == "lambda_adversarial") cfg.lambda_adversarial = parse_number(key, value);
  else if (key == "learning_rate") cfg.learning_rate = parse_number(key, value);
  else if (key == "adam_beta1") cfg.adam_beta1 = parse_number(key, value);
  else if (key == "adam_beta2") cfg.adam_beta2 = parse_number(key, value);
  else if (key == "train_steps") cfg.train_steps = static_cast<int>(parse_number(key, value));
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_number(key, value));
  else if (key == "adversarial") cfg.adversarial = parse_bool(key, value);
  else if (key == "eval_stride") cfg.eval_stride = static_cast<int>(parse_number(key, value));
  else throw ConfigError("config: unknown key '" + key + "'");
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());

  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: missing '=' at " + path.string() + ":" + std::to_string(lineno));
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

}  // namespace sconv
