#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sconv/config.hpp"
#include "sconv/image.hpp"

namespace sconv {

/// Ablation configurations of the conversion pipeline.
enum class Variant { poly, dl, dl_de, full };

Variant parse_variant(const std::string& name);
const char* variant_name(Variant v);

struct PipelineOptions {
  int jobs = 1;
  bool emit_sbs = false;
  bool emit_anaglyph = false;
  /// Re-runs every frame with poisoned hole pixels and demands identical
  /// output: no stage may read content from under the occlusion mask.
  bool poison_check = false;
  std::filesystem::path external_dir;  // DL-branch frames; empty -> fallback fill
  std::filesystem::path weights_path;  // required for Variant::full
};

struct FrameReport {
  int index = 0;
  long hole_pixels = 0;
  int largest_hole_run = 0;
  double seconds = 0.0;
};

struct PipelineReport {
  std::vector<FrameReport> frames;
  double total_seconds = 0.0;
  std::string summary() const;
};

struct RefinerWeights;

/// Converts one frame to its right view under the requested variant.
/// Exposed for tests; `poison` flips the warped-frame poisoning on, and a
/// preloaded weight bundle skips the per-frame file read for Variant::full.
Frame convert_frame(const Frame& frame, const DisparityMap& disparity, Variant variant,
                    const PipelineConfig& cfg, const PipelineOptions& opts, int index,
                    bool poison = false, const RefinerWeights* weights = nullptr);

/// Full directory driver: frames_dir holds %06d frames, disparity_dir holds
/// %06d.pfm maps; right views (plus optional composites) land in out_dir.
/// Frames are processed by a bounded worker pool; outputs and the report are
/// ordered by index regardless of job count.
PipelineReport run_pipeline(const PipelineConfig& cfg,
                            const std::filesystem::path& frames_dir,
                            const std::filesystem::path& disparity_dir,
                            const std::filesystem::path& out_dir, Variant variant,
                            const PipelineOptions& opts);

/// Deterministic train/test split manifest: seeded shuffle of the sorted
/// video directory names under `root`, then `train_count` + `test_count`
/// entries labeled in order. Lines are "<split>\t<relative path>".
void make_manifest(const std::filesystem::path& root, int train_count, int test_count,
                   std::uint64_t seed, const std::filesystem::path& out_path);

}  // namespace sconv
