#include "sconv/image.hpp"

#include <cmath>
#include <string>

namespace sconv {

namespace {

bool all_finite(const PlaneF& p) { return p.isFinite().all(); }

}  // namespace

Frame Frame::from_channels(PlaneF r, PlaneF g, PlaneF b) {
  if (r.rows() == 0 || r.cols() == 0) {
    throw InputError("frame: width and height must be at least 1");
  }
  if (r.rows() != g.rows() || r.cols() != g.cols() || r.rows() != b.rows() ||
      r.cols() != b.cols()) {
    throw InputError("frame: channel dimensions differ");
  }
  Frame f;
  f.ch = {std::move(r), std::move(g), std::move(b)};
  f.check();
  return f;
}

void Frame::check() const {
  if (width() < 1 || height() < 1) {
    throw InputError("frame: width and height must be at least 1");
  }
  for (const auto& p : ch) {
    if (!all_finite(p)) throw InputError("frame: non-finite channel value");
    if ((p < 0.0f).any() || (p > 1.0f).any()) {
      throw InputError("frame: channel value outside [0,1]");
    }
  }
}

DisparityMap DisparityMap::from_plane(PlaneF v) {
  DisparityMap d;
  d.values = std::move(v);
  d.check();
  return d;
}

void DisparityMap::check() const {
  if (width() < 1 || height() < 1) {
    throw InputError("disparity: width and height must be at least 1");
  }
  if (!all_finite(values)) throw InputError("disparity: non-finite value");
  if ((values < 0.0f).any()) throw InputError("disparity: negative value");
  if ((values > static_cast<float>(width())).any()) {
    throw InputError("disparity: value exceeds frame width");
  }
}

void validate_pair(const Frame& frame, const DisparityMap& disparity) {
  frame.check();
  if (frame.width() != disparity.width() || frame.height() != disparity.height()) {
    throw InputError("frame/disparity dimension mismatch: " +
                     std::to_string(frame.width()) + "x" + std::to_string(frame.height()) +
                     " vs " + std::to_string(disparity.width()) + "x" +
                     std::to_string(disparity.height()));
  }
  disparity.check();
}

}  // namespace sconv
