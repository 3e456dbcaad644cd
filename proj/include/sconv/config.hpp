#pragma once

#include <filesystem>
#include <string>

namespace sconv {

/// Edge-detector parameters. Thresholds are fractions of the maximum
/// gradient magnitude when `relative` is set (the default), otherwise raw
/// gradient units.
struct CannyParams {
  float sigma = 1.4f;
  float low = 0.1f;
  float high = 0.3f;
  bool relative = true;
};

/// Every tunable of the conversion pipeline in one place. Defaults follow
/// the reference configuration: alpha = 10, loss weights (10, 2, 0.1),
/// Adam lr 1e-4 with beta1 0.5 / beta2 0.999, evaluation stride 20.
struct PipelineConfig {
  // depth -> disparity conversion: d = clamp(gain / depth + shift, 0, width)
  float disparity_gain = 1.0f;
  float disparity_shift = 0.0f;

  // disparity expansion
  int expansion_radius = 2;          // k, px
  float expansion_threshold = 2.0f;  // lambda, disparity units
  bool expansion_mirror = false;     // opt-in mirrored polarity

  CannyParams canny;

  // inpainting branch toggles
  bool branch_poly = true;
  bool branch_de = true;
  bool branch_dl = true;       // external adapter when a directory is given
  bool branch_fallback = true; // deterministic diffusion stand-in

  std::string weights_path;

  // loss weights
  double alpha = 10.0;
  double lambda_content = 10.0;
  double lambda_perceptual = 2.0;
  double lambda_adversarial = 0.1;

  // trainer
  double learning_rate = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int train_steps = 2000;
  int batch_size = 4;
  bool adversarial = true;

  int eval_stride = 20;

  /// Throws ConfigError on any violated invariant (k >= 1, lambda > 0,
  /// 0 < low < high, non-negative loss weights, stride >= 1, ...).
  void validate() const;
};

/// Applies one `key = value` assignment; throws ConfigError on unknown keys
/// or unparsable values.
void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Loads a plain-text config file: one `key = value` per line, `#` comments,
/// blank lines ignored. The result is validated.
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace sconv
