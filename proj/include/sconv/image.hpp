#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>

#include "sconv/errors.hpp"

namespace sconv {

/// Single dense raster channel, row-major so each image row is contiguous.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PlaneF = Plane<float>;
using PlaneB = Plane<bool>;

/// RGB raster with normalized [0,1] channel values. Channel-planar storage;
/// value semantics throughout (copies never alias).
struct Frame {
  std::array<PlaneF, 3> ch;  // r, g, b

  Frame() = default;
  Frame(int width, int height) {
    for (auto& p : ch) p = PlaneF::Zero(height, width);
  }

  /// Validating constructor path: rejects mismatched or out-of-range channels.
  static Frame from_channels(PlaneF r, PlaneF g, PlaneF b);

  int width() const { return static_cast<int>(ch[0].cols()); }
  int height() const { return static_cast<int>(ch[0].rows()); }
  bool empty() const { return ch[0].size() == 0; }

  float& at(int c, int y, int x) { return ch[static_cast<std::size_t>(c)](y, x); }
  float at(int c, int y, int x) const { return ch[static_cast<std::size_t>(c)](y, x); }

  void fill(float r, float g, float b) {
    ch[0].setConstant(r);
    ch[1].setConstant(g);
    ch[2].setConstant(b);
  }

  /// Throws InputError unless every channel value is finite and in [0,1].
  void check() const;

  bool equals(const Frame& other) const {
    return width() == other.width() && height() == other.height() &&
           (ch[0] == other.ch[0]).all() && (ch[1] == other.ch[1]).all() &&
           (ch[2] == other.ch[2]).all();
  }
};

/// Horizontal pixel offsets (px), non-negative, capped at frame width.
/// Convention: the right-view position of source pixel x is x - d.
struct DisparityMap {
  PlaneF values;

  DisparityMap() = default;
  DisparityMap(int width, int height) : values(PlaneF::Zero(height, width)) {}

  static DisparityMap from_plane(PlaneF v);

  int width() const { return static_cast<int>(values.cols()); }
  int height() const { return static_cast<int>(values.rows()); }

  void check() const;
};

/// Binary field marking warp holes (true = occluded).
struct OcclusionMask {
  PlaneB bits;

  OcclusionMask() = default;
  OcclusionMask(int width, int height) : bits(PlaneB::Constant(height, width, false)) {}

  int width() const { return static_cast<int>(bits.cols()); }
  int height() const { return static_cast<int>(bits.rows()); }
};

/// Binary field marking disparity edges (true = edge pixel).
struct EdgeMap {
  PlaneB bits;

  EdgeMap() = default;
  EdgeMap(int width, int height) : bits(PlaneB::Constant(height, width, false)) {}

  int width() const { return static_cast<int>(bits.cols()); }
  int height() const { return static_cast<int>(bits.rows()); }
};

/// Succeeds iff the frame and disparity agree in size and the disparity
/// satisfies its invariants (finite, >= 0, <= width).
void validate_pair(const Frame& frame, const DisparityMap& disparity);

/// 8-bit quantization used by all image I/O: round(v*255) out, v/255 in.
inline std::uint8_t quantize8(float v) {
  float scaled = v * 255.0f + 0.5f;
  if (scaled < 0.0f) scaled = 0.0f;
  if (scaled > 255.0f) scaled = 255.0f;
  return static_cast<std::uint8_t>(scaled);
}

inline float dequantize8(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

}  // namespace sconv
