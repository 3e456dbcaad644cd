#include "sconv/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "sconv/disparity.hpp"
#include "sconv/errors.hpp"
#include "sconv/imageio.hpp"

namespace sconv {

Frame inpaint_poly(const Frame& frame, const DisparityMap& disparity) {
  validate_pair(frame, disparity);
  const int w = frame.width();
  const int h = frame.height();
  Frame out(w, h);

  std::vector<double> zbuf(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    std::fill(zbuf.begin(), zbuf.end(), -1.0);

    if (w == 1) {
      for (int c = 0; c < 3; ++c) out.at(c, y, 0) = frame.at(c, y, 0);
      continue;
    }
    for (int x = 0; x + 1 < w; ++x) {
      const double d0 = disparity.values(y, x);
      const double d1 = disparity.values(y, x + 1);
      const double t0 = static_cast<double>(x) - d0;
      const double t1 = static_cast<double>(x + 1) - d1;
      const double lo = std::min(t0, t1);
      const double hi = std::max(t0, t1);
      int c_lo = static_cast<int>(std::ceil(lo));
      int c_hi = static_cast<int>(std::floor(hi));
      c_lo = std::max(c_lo, 0);
      c_hi = std::min(c_hi, w - 1);
      for (int col = c_lo; col <= c_hi; ++col) {
        const double alpha = (t1 != t0) ? (static_cast<double>(col) - t0) / (t1 - t0) : 0.0;
        const double dd = (1.0 - alpha) * d0 + alpha * d1;
        if (dd > zbuf[static_cast<std::size_t>(col)]) {
          zbuf[static_cast<std::size_t>(col)] = dd;
          for (int c = 0; c < 3; ++c) {
            const double v = (1.0 - alpha) * frame.at(c, y, x) + alpha * frame.at(c, y, x + 1);
            out.at(c, y, col) = static_cast<float>(v);
          }
        }
      }
    }

    // Clamp-fill the uncovered border columns from the nearest covered one.
    int first = -1, last = -1;
    for (int col = 0; col < w; ++col) {
      if (zbuf[static_cast<std::size_t>(col)] >= 0.0) {
        if (first < 0) first = col;
        last = col;
      }
    }
    if (first < 0) {
      // The polyline missed the raster entirely; keep the source row.
      for (int c = 0; c < 3; ++c) out.ch[c].row(y) = frame.ch[c].row(y);
      continue;
    }
    for (int col = 0; col < first; ++col) {
      for (int c = 0; c < 3; ++c) out.at(c, y, col) = out.at(c, y, first);
    }
    for (int col = last + 1; col < w; ++col) {
      for (int c = 0; c < 3; ++c) out.at(c, y, col) = out.at(c, y, last);
    }
  }
  return out;
}

namespace {

/// Fills holes row-wise from the nearest non-hole pixel to the right; rows
/// that run out of right-side context fall back to the nearest left pixel.
void fill_from_right(Frame& img, const OcclusionMask& mask) {
  const int w = img.width();
  const int h = img.height();
  for (int y = 0; y < h; ++y) {
    for (int x = w - 1; x >= 0; --x) {
      if (!mask.bits(y, x)) continue;
      int src = -1;
      for (int xx = x + 1; xx < w; ++xx) {
        if (!mask.bits(y, xx)) { src = xx; break; }
      }
      if (src < 0) {
        for (int xx = x - 1; xx >= 0; --xx) {
          if (!mask.bits(y, xx)) { src = xx; break; }
        }
      }
      if (src < 0) continue;  // whole row is holes; leave black
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = img.at(c, y, src);
    }
  }
}

}  // namespace

Frame inpaint_de(const Frame& frame, const DisparityMap& disparity, const PipelineConfig& cfg) {
  validate_pair(frame, disparity);
  DisparityMap expanded = expand_disparity(disparity, cfg.expansion_radius,
                                           cfg.expansion_threshold, nullptr, cfg.canny,
                                           cfg.expansion_mirror);
  WarpResult wr = forward_warp(frame, expanded);
  Frame out = std::move(wr.warped);
  fill_from_right(out, wr.mask);
  return out;
}

Frame inpaint_fallback(const Frame& warped, const OcclusionMask& mask) {
  if (warped.width() != mask.width() || warped.height() != mask.height()) {
    throw InputError("inpaint_fallback: dimension mismatch");
  }
  const int w = warped.width();
  const int h = warped.height();

  Frame cur = warped;
  // Seed holes from a fixed value so the sentinel content under the mask
  // can never leak into the result.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.bits(y, x)) {
        for (int c = 0; c < 3; ++c) cur.at(c, y, x) = 0.0f;
      }
    }
  }

  std::vector<std::pair<int, int>> holes;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.bits(y, x)) holes.emplace_back(y, x);
    }
  }
  if (holes.empty()) return cur;

  constexpr float kTol = 1e-4f;
  constexpr int kMaxSweeps = 100000;
  Frame next = cur;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    float max_change = 0.0f;
    for (const auto& [y, x] : holes) {
      for (int c = 0; c < 3; ++c) {
        float acc = 0.0f;
        int n = 0;
        if (y > 0) { acc += cur.at(c, y - 1, x); ++n; }
        if (y + 1 < h) { acc += cur.at(c, y + 1, x); ++n; }
        if (x > 0) { acc += cur.at(c, y, x - 1); ++n; }
        if (x + 1 < w) { acc += cur.at(c, y, x + 1); ++n; }
        const float v = acc / static_cast<float>(n);
        max_change = std::max(max_change, std::abs(v - cur.at(c, y, x)));
        next.at(c, y, x) = v;
      }
    }
    for (const auto& [y, x] : holes) {
      for (int c = 0; c < 3; ++c) cur.at(c, y, x) = next.at(c, y, x);
    }
    if (max_change < kTol) break;
  }
  return cur;
}

Frame load_external_inpaint(const std::filesystem::path& dir, int frame_index,
                            int expected_width, int expected_height) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06d", frame_index);
  std::filesystem::path base = dir / name;
  std::filesystem::path path;
  for (const char* ext : {".png", ".ppm"}) {
    std::filesystem::path candidate = base;
    candidate += ext;
    if (std::filesystem::exists(candidate)) { path = candidate; break; }
  }
  if (path.empty()) {
    throw InputError("external inpaint: no frame " + std::string(name) + " under " + dir.string());
  }
  Frame f = read_frame(path);
  if (f.width() != expected_width || f.height() != expected_height) {
    throw InputError("external inpaint: frame " + path.string() + " is " +
                     std::to_string(f.width()) + "x" + std::to_string(f.height()) +
                     ", expected " + std::to_string(expected_width) + "x" +
                     std::to_string(expected_height));
  }
  return f;
}

}  // namespace sconv
