#include "sconv/warp.hpp"

#include <algorithm>
#include <cmath>

namespace sconv {

WarpResult forward_warp(const Frame& frame, const DisparityMap& disparity) {
  validate_pair(frame, disparity);
  const int w = frame.width();
  const int h = frame.height();

  WarpResult result;
  result.warped = Frame(w, h);
  result.mask = OcclusionMask(w, h);
  result.zbuffer = PlaneF::Constant(h, w, kNoSplat);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float d = disparity.values(y, x);
      const long tx = std::lround(static_cast<double>(x) - static_cast<double>(d));
      if (tx < 0 || tx >= w) continue;
      // Largest disparity wins; on ties the first (smallest x) write stays.
      if (d > result.zbuffer(y, tx)) {
        result.zbuffer(y, tx) = d;
        for (int c = 0; c < 3; ++c) {
          result.warped.at(c, y, static_cast<int>(tx)) = frame.at(c, y, x);
        }
      }
    }
  }
  result.mask.bits = result.zbuffer == kNoSplat;
  return result;
}

HoleStats hole_stats(const OcclusionMask& mask) {
  HoleStats stats;
  const int w = mask.width();
  const int h = mask.height();
  stats.row_largest.assign(static_cast<std::size_t>(h), 0);
  for (int y = 0; y < h; ++y) {
    int run = 0;
    int best = 0;
    for (int x = 0; x < w; ++x) {
      if (mask.bits(y, x)) {
        ++stats.count;
        ++run;
        best = std::max(best, run);
      } else {
        run = 0;
      }
    }
    stats.row_largest[static_cast<std::size_t>(y)] = best;
    stats.largest_run = std::max(stats.largest_run, best);
  }
  return stats;
}

Frame compose_sbs(const Frame& left, const Frame& right) {
  if (left.width() != right.width() || left.height() != right.height()) {
    throw InputError("compose_sbs: dimension mismatch");
  }
  const int w = left.width();
  Frame out(2 * w, left.height());
  for (int c = 0; c < 3; ++c) {
    out.ch[c].leftCols(w) = left.ch[c];
    out.ch[c].rightCols(w) = right.ch[c];
  }
  return out;
}

Frame compose_anaglyph(const Frame& left, const Frame& right) {
  if (left.width() != right.width() || left.height() != right.height()) {
    throw InputError("compose_anaglyph: dimension mismatch");
  }
  Frame out(left.width(), left.height());
  out.ch[0] = left.ch[0];
  out.ch[1] = right.ch[1];
  out.ch[2] = right.ch[2];
  return out;
}

std::pair<Frame, Frame> split_sbs(const Frame& sbs) {
  if (sbs.width() % 2 != 0) throw InputError("split_sbs: width must be even");
  const int w = sbs.width() / 2;
  Frame left(w, sbs.height());
  Frame right(w, sbs.height());
  for (int c = 0; c < 3; ++c) {
    left.ch[c] = sbs.ch[c].leftCols(w);
    right.ch[c] = sbs.ch[c].rightCols(w);
  }
  return {std::move(left), std::move(right)};
}

}  // namespace sconv
