#include "sconv/disparity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "sconv/errors.hpp"

namespace sconv {

DisparityMap depth_to_disparity(const PlaneF& depth, float gain, float shift) {
  if (depth.size() == 0) throw InputError("depth_to_disparity: empty depth field");
  if (!depth.isFinite().all() || (depth <= 0.0f).any()) {
    throw InputError("depth_to_disparity: depth values must be finite and > 0");
  }
  const float w = static_cast<float>(depth.cols());
  DisparityMap out;
  out.values = (gain * depth.inverse() + shift).cwiseMax(0.0f).cwiseMin(w);
  return out;
}

namespace {

PlaneF gaussian_blur(const PlaneF& src, float sigma) {
  const int radius = static_cast<int>(std::ceil(3.0f * sigma));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  float norm = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    float v = std::exp(-static_cast<float>(i * i) / (2.0f * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = v;
    norm += v;
  }
  for (auto& v : kernel) v /= norm;

  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  PlaneF tmp(h, w), out(h, w);
  // horizontal pass, replicated borders
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        int xx = std::clamp(x + i, 0, w - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * src(y, xx);
      }
      tmp(y, x) = acc;
    }
  }
  // vertical pass
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        int yy = std::clamp(y + i, 0, h - 1);
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp(yy, x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

inline float at_clamped(const PlaneF& p, int y, int x) {
  y = std::clamp(y, 0, static_cast<int>(p.rows()) - 1);
  x = std::clamp(x, 0, static_cast<int>(p.cols()) - 1);
  return p(y, x);
}

}  // namespace

EdgeMap canny_edges(const DisparityMap& disparity, const CannyParams& params) {
  if (!(params.sigma > 0.0f)) throw ConfigError("canny: sigma must be > 0");
  if (!(0.0f < params.low && params.low < params.high)) {
    throw ConfigError("canny: thresholds must satisfy 0 < low < high");
  }
  disparity.check();

  const int h = disparity.height();
  const int w = disparity.width();
  const PlaneF blurred = gaussian_blur(disparity.values, params.sigma);

  PlaneF gx(h, w), gy(h, w), mag(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float tl = at_clamped(blurred, y - 1, x - 1), tc = at_clamped(blurred, y - 1, x),
                  tr = at_clamped(blurred, y - 1, x + 1), ml = at_clamped(blurred, y, x - 1),
                  mr = at_clamped(blurred, y, x + 1), bl = at_clamped(blurred, y + 1, x - 1),
                  bc = at_clamped(blurred, y + 1, x), br = at_clamped(blurred, y + 1, x + 1);
      gx(y, x) = (tr + 2.0f * mr + br) - (tl + 2.0f * ml + bl);
      gy(y, x) = (bl + 2.0f * bc + br) - (tl + 2.0f * tc + tr);
      mag(y, x) = std::sqrt(gx(y, x) * gx(y, x) + gy(y, x) * gy(y, x));
    }
  }

  const float max_mag = mag.maxCoeff();
  const float low_t = params.relative ? params.low * max_mag : params.low;
  const float high_t = params.relative ? params.high * max_mag : params.high;

  // Non-maximum suppression with the gradient direction quantized to
  // {0, 45, 90, 135} degrees. The comparison is >= along +dir and > along
  // -dir so exactly one pixel of an equal-magnitude pair survives.
  static constexpr int kDir[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};  // (dx, dy)
  PlaneF thin = PlaneF::Zero(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mag(y, x) <= 0.0f) continue;
      float angle = std::atan2(gy(y, x), gx(y, x));
      if (angle < 0.0f) angle += std::numbers::pi_v<float>;
      int dir = static_cast<int>(std::lround(angle / (std::numbers::pi_v<float> / 4.0f))) % 4;
      const int dx = kDir[dir][0], dy = kDir[dir][1];
      const float fwd = at_clamped(mag, y + dy, x + dx);
      const float bwd = at_clamped(mag, y - dy, x - dx);
      if (mag(y, x) >= fwd && mag(y, x) > bwd) thin(y, x) = mag(y, x);
    }
  }

  // Hysteresis: seed from strong pixels, grow through weak ones (8-connected).
  EdgeMap edges(w, h);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (thin(y, x) > high_t && !edges.bits(y, x)) {
        edges.bits(y, x) = true;
        stack.emplace_back(y, x);
        while (!stack.empty()) {
          auto [cy, cx] = stack.back();
          stack.pop_back();
          for (int ny = cy - 1; ny <= cy + 1; ++ny) {
            for (int nx = cx - 1; nx <= cx + 1; ++nx) {
              if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
              if (edges.bits(ny, nx) || thin(ny, nx) <= low_t) continue;
              edges.bits(ny, nx) = true;
              stack.emplace_back(ny, nx);
            }
          }
        }
      }
    }
  }
  return edges;
}

DisparityMap expand_disparity(const DisparityMap& disparity, int k, float lambda,
                              const EdgeMap* edges, const CannyParams& canny, bool mirror) {
  if (k < 1) throw ConfigError("expand_disparity: k must be >= 1");
  if (!(lambda > 0.0f)) throw ConfigError("expand_disparity: lambda must be > 0");
  disparity.check();

  EdgeMap computed;
  if (edges == nullptr) {
    computed = canny_edges(disparity, canny);
    edges = &computed;
  } else if (edges->width() != disparity.width() || edges->height() != disparity.height()) {
    throw InputError("expand_disparity: edge map dimension mismatch");
  }

  const int rows = disparity.height();
  const int cols = disparity.width();
  const PlaneF& src = disparity.values;

  DisparityMap out;
  out.values = src;
  // Row-major visit over edge pixels; later writes overwrite earlier ones.
  // Column-range misses are skipped, not clamped.
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (!edges->bits(i, j)) continue;
      if (!(k <= j && j < cols - k)) continue;
      if (!(k <= i && i < rows - k)) continue;
      if (src(i, j - 1) - src(i, j + 1) > lambda) {
        out.values.block(i - k, j - k, 2 * k, 2 * k).setConstant(src(i, j - 1));
      } else if (mirror && src(i, j + 1) - src(i, j - 1) > lambda) {
        out.values.block(i - k, j - k, 2 * k, 2 * k).setConstant(src(i, j + 1));
      }
    }
  }
  return out;
}

}  // namespace sconv
