#pragma once

#include <utility>
#include <vector>

#include "sconv/image.hpp"

namespace sconv {

/// Z-buffer sentinel for targets that received no splat.
inline constexpr float kNoSplat = -1.0f;

/// Output of forward warping: the right-view raster, the hole mask, and the
/// winning disparity per target pixel (kNoSplat where nothing landed).
/// Hole pixels in `warped` are black; the mask is the authoritative record.
struct WarpResult {
  Frame warped;
  OcclusionMask mask;
  PlaneF zbuffer;
};

/// Forward-splats `frame` into the right view: each source pixel (x, y) lands
/// on round(x - d(x, y)) (half away from zero). Collisions resolve to the
/// largest disparity; ties to the smallest source x. Off-raster targets are
/// dropped; unreached targets are masked as holes.
WarpResult forward_warp(const Frame& frame, const DisparityMap& disparity);

/// Hole diagnostics for CLI reports.
struct HoleStats {
  long count = 0;        // total hole pixels
  int largest_run = 0;   // longest horizontal run over the whole mask
  std::vector<int> row_largest;  // longest run per row
};

HoleStats hole_stats(const OcclusionMask& mask);

/// Left and right concatenated horizontally, bit-exact halves.
Frame compose_sbs(const Frame& left, const Frame& right);

/// Red/cyan composite: R from the left view, G and B from the right.
Frame compose_anaglyph(const Frame& left, const Frame& right);

/// Exact inverse of compose_sbs; requires even width.
std::pair<Frame, Frame> split_sbs(const Frame& sbs);

}  // namespace sconv
