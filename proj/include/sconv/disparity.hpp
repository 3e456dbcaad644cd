#pragma once

#include "sconv/config.hpp"
#include "sconv/image.hpp"

namespace sconv {

/// Converts a positive depth field to disparity:
///   d(x, y) = clamp(gain / depth(x, y) + shift, 0, width).
/// Throws InputError on non-positive or non-finite depth values.
DisparityMap depth_to_disparity(const PlaneF& depth, float gain, float shift);

/// Canny edge detection on the raw disparity field: Gaussian blur (kernel
/// truncated at 3*sigma, replicated borders), 3x3 Sobel gradients,
/// non-maximum suppression quantized to four directions, and double-threshold
/// hysteresis with 8-connectivity. With params.relative set, low/high are
/// fractions of the maximum gradient magnitude; otherwise raw gradient units.
EdgeMap canny_edges(const DisparityMap& disparity, const CannyParams& params);

/// Disparity expansion around depth edges. Starting from a copy of the
/// input, every edge pixel (i, j) with k <= j < cols-k is visited in
/// row-major order; when I(i,j-1) - I(i,j+1) > lambda and k <= i < rows-k,
/// the 2k x 2k block at rows [i-k, i+k) x cols [j-k, j+k) is overwritten
/// with I(i,j-1). Later writes win. With `mirror` set, the flipped polarity
/// I(i,j+1) - I(i,j-1) > lambda additionally writes I(i,j+1).
///
/// When `edges` is null the edge map comes from canny_edges(disparity, canny).
DisparityMap expand_disparity(const DisparityMap& disparity, int k, float lambda,
                              const EdgeMap* edges = nullptr,
                              const CannyParams& canny = {}, bool mirror = false);

}  // namespace sconv
