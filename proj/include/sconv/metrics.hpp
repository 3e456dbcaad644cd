#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sconv/image.hpp"

namespace sconv {

/// Mean absolute error over all pixels and channels.
double mae(const Frame& a, const Frame& b);

/// Peak signal-to-noise ratio in dB with peak 1.0, capped at 99.0 (the cap
/// value is reported for identical frames).
double psnr(const Frame& a, const Frame& b);

/// Single-scale SSIM on Rec. 601 luminance: 11x11 Gaussian window with
/// sigma 1.5 over fully-interior positions, C1 = 0.01^2, C2 = 0.03^2.
/// Requires both dimensions >= 11.
double ssim(const Frame& a, const Frame& b);

struct FrameScore {
  int index = 0;
  double mae = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct SequenceScore {
  std::vector<FrameScore> frames;
  double mean_mae = 0.0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

/// Evaluates prediction/ground-truth directories aligned by zero-padded
/// index at frames 0, stride, 2*stride, ...
SequenceScore evaluate_sequence(const std::filesystem::path& pred_dir,
                                const std::filesystem::path& gt_dir, int stride);

/// Renders the per-frame table in the machine-readable line format
/// "frame_index mae psnr ssim" followed by the means.
std::string format_sequence_report(const SequenceScore& score);

}  // namespace sconv
