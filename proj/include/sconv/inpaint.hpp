#pragma once

#include <filesystem>

#include "sconv/config.hpp"
#include "sconv/image.hpp"
#include "sconv/warp.hpp"

namespace sconv {

/// Polyline inpainting: each row's samples (x - d(x), color(x)) form a
/// polyline that is rasterized onto integer targets, linearly interpolating
/// colors across spans (stretching background over occlusions). Where the
/// polyline folds over itself, the larger interpolated disparity wins (ties
/// to the earlier sample). Uncovered border columns clamp to the nearest
/// covered column. Produces a complete hole-free view.
Frame inpaint_poly(const Frame& frame, const DisparityMap& disparity);

/// Disparity-expansion inpainting: warps with the expanded disparity so that
/// background pixels reach the disocclusion band, then fills residual holes
/// by copying the nearest non-hole pixel to the right (background side),
/// falling back to the left neighbor at row ends.
Frame inpaint_de(const Frame& frame, const DisparityMap& disparity, const PipelineConfig& cfg);

/// Hole fill used when no external result is available: synchronous Jacobi
/// sweeps averaging the 4-neighbors of every hole pixel until the largest
/// per-sweep change drops below 1e-4. Known pixels never change, and hole
/// pixels start from black regardless of the sentinel content under the mask.
Frame inpaint_fallback(const Frame& warped, const OcclusionMask& mask);

/// Loads an externally inpainted frame (files named by zero-padded 6-digit
/// index, .png or .ppm) and validates its dimensions.
Frame load_external_inpaint(const std::filesystem::path& dir, int frame_index,
                            int expected_width, int expected_height);

}  // namespace sconv
