#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oracle {

using sconv::Frame;
using sconv::PlaneF;

Grid to_grid(const PlaneF& p) {
  Grid g(static_cast<std::size_t>(p.rows()), std::vector<float>(static_cast<std::size_t>(p.cols())));
  for (Eigen::Index y = 0; y < p.rows(); ++y) {
    for (Eigen::Index x = 0; x < p.cols(); ++x) {
      g[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = p(y, x);
    }
  }
  return g;
}

PlaneF to_plane(const Grid& g) {
  PlaneF p(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g[0].size()));
  for (std::size_t y = 0; y < g.size(); ++y) {
    for (std::size_t x = 0; x < g[0].size(); ++x) {
      p(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = g[y][x];
    }
  }
  return p;
}

Grid expand_disparity_naive(const Grid& disparity, const std::vector<std::vector<bool>>& edges,
                            int k, float lambda) {
  const int rows = static_cast<int>(disparity.size());
  const int cols = static_cast<int>(disparity[0].size());
  Grid out = disparity;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (!edges[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
      if (!(k <= j && j < cols - k)) continue;
      const float left = disparity[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - 1)];
      const float right = disparity[static_cast<std::size_t>(i)][static_cast<std::size_t>(j + 1)];
      if (left - right > lambda && k <= i && i < rows - k) {
        for (int bi = i - k; bi < i + k; ++bi) {
          for (int bj = j - k; bj < j + k; ++bj) {
            out[static_cast<std::size_t>(bi)][static_cast<std::size_t>(bj)] = left;
          }
        }
      }
    }
  }
  return out;
}

std::vector<std::vector<bool>> canny_naive(const Grid& disparity, float sigma, float low,
                                           float high, bool relative) {
  const int rows = static_cast<int>(disparity.size());
  const int cols = static_cast<int>(disparity[0].size());
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  auto at = [&](const Grid& g, int y, int x) {
    return g[static_cast<std::size_t>(clampi(y, 0, rows - 1))]
            [static_cast<std::size_t>(clampi(x, 0, cols - 1))];
  };

  // Gaussian blur, kernel truncated at ceil(3*sigma), replicated borders.
  const int radius = static_cast<int>(std::ceil(3.0f * sigma));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  float norm = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] =
        std::exp(-static_cast<float>(i * i) / (2.0f * sigma * sigma));
    norm += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (auto& v : kernel) v /= norm;
  Grid tmp(static_cast<std::size_t>(rows), std::vector<float>(static_cast<std::size_t>(cols)));
  Grid blur = tmp;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * at(disparity, y, x + i);
      }
      tmp[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = acc;
    }
  }
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * at(tmp, y + i, x);
      }
      blur[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = acc;
    }
  }

  // Sobel, magnitude, max.
  Grid gx = tmp, gy = tmp, mag = tmp;
  float max_mag = 0.0f;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      const float sx = (at(blur, y - 1, x + 1) + 2.0f * at(blur, y, x + 1) + at(blur, y + 1, x + 1)) -
                       (at(blur, y - 1, x - 1) + 2.0f * at(blur, y, x - 1) + at(blur, y + 1, x - 1));
      const float sy = (at(blur, y + 1, x - 1) + 2.0f * at(blur, y + 1, x) + at(blur, y + 1, x + 1)) -
                       (at(blur, y - 1, x - 1) + 2.0f * at(blur, y - 1, x) + at(blur, y - 1, x + 1));
      gx[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = sx;
      gy[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = sy;
      const float m = std::sqrt(sx * sx + sy * sy);
      mag[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = m;
      max_mag = std::max(max_mag, m);
    }
  }
  const float low_t = relative ? low * max_mag : low;
  const float high_t = relative ? high * max_mag : high;

  // NMS, quantized to 4 directions; >= forward, > backward.
  static constexpr int dirs[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  Grid thin = tmp;
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      thin[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = 0.0f;
      const float m = mag[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
      if (m <= 0.0f) continue;
      float angle = std::atan2(gy[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)],
                               gx[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]);
      if (angle < 0.0f) angle += std::numbers::pi_v<float>;
      const int dir =
          static_cast<int>(std::lround(angle / (std::numbers::pi_v<float> / 4.0f))) % 4;
      const float fwd = at(mag, y + dirs[dir][1], x + dirs[dir][0]);
      const float bwd = at(mag, y - dirs[dir][1], x - dirs[dir][0]);
      if (m >= fwd && m > bwd) thin[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = m;
    }
  }

  // Hysteresis by iterating to a fixed point (the lazy but obviously
  // correct formulation).
  std::vector<std::vector<bool>> edges(static_cast<std::size_t>(rows),
                                       std::vector<bool>(static_cast<std::size_t>(cols), false));
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      edges[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] =
          thin[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] > high_t;
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) {
        if (edges[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]) continue;
        if (thin[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] <= low_t) continue;
        bool near = false;
        for (int dy = -1; dy <= 1 && !near; ++dy) {
          for (int dx = -1; dx <= 1 && !near; ++dx) {
            if (dy == 0 && dx == 0) continue;
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= rows || nx < 0 || nx >= cols) continue;
            near = edges[static_cast<std::size_t>(ny)][static_cast<std::size_t>(nx)];
          }
        }
        if (near) {
          edges[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = true;
          changed = true;
        }
      }
    }
  }
  return edges;
}

SplatResult forward_warp_naive(const Frame& frame, const sconv::DisparityMap& disparity) {
  const int w = frame.width();
  const int h = frame.height();
  SplatResult r;
  r.warped = Frame(w, h);
  r.holes.assign(static_cast<std::size_t>(h), std::vector<bool>(static_cast<std::size_t>(w), true));
  r.zbuffer.assign(static_cast<std::size_t>(h),
                   std::vector<float>(static_cast<std::size_t>(w), -1.0f));
  for (int y = 0; y < h; ++y) {
    for (int t = 0; t < w; ++t) {
      float best_d = -1.0f;
      int best_x = -1;
      for (int x = 0; x < w; ++x) {
        const float d = disparity.values(y, x);
        if (std::lround(static_cast<double>(x) - static_cast<double>(d)) != t) continue;
        if (d > best_d) {
          best_d = d;
          best_x = x;
        }
        // equal disparity: keep the smaller x, which arrived first
      }
      if (best_x >= 0) {
        r.holes[static_cast<std::size_t>(y)][static_cast<std::size_t>(t)] = false;
        r.zbuffer[static_cast<std::size_t>(y)][static_cast<std::size_t>(t)] = best_d;
        for (int c = 0; c < 3; ++c) r.warped.at(c, y, t) = frame.at(c, y, best_x);
      }
    }
  }
  return r;
}

Frame inpaint_poly_naive(const Frame& frame, const sconv::DisparityMap& disparity) {
  const int w = frame.width();
  const int h = frame.height();
  Frame out(w, h);
  for (int y = 0; y < h; ++y) {
    std::vector<double> zbuf(static_cast<std::size_t>(w), -1.0);
    if (w == 1) {
      for (int c = 0; c < 3; ++c) out.at(c, y, 0) = frame.at(c, y, 0);
      continue;
    }
    for (int col = 0; col < w; ++col) {
      // every segment covering this column competes
      for (int x = 0; x + 1 < w; ++x) {
        const double d0 = disparity.values(y, x);
        const double d1 = disparity.values(y, x + 1);
        const double t0 = static_cast<double>(x) - d0;
        const double t1 = static_cast<double>(x + 1) - d1;
        if (col < std::min(t0, t1) || col > std::max(t0, t1)) continue;
        const double alpha = (t1 != t0) ? (static_cast<double>(col) - t0) / (t1 - t0) : 0.0;
        const double dd = (1.0 - alpha) * d0 + alpha * d1;
        if (dd > zbuf[static_cast<std::size_t>(col)]) {
          zbuf[static_cast<std::size_t>(col)] = dd;
          for (int c = 0; c < 3; ++c) {
            out.at(c, y, col) = static_cast<float>((1.0 - alpha) * frame.at(c, y, x) +
                                                   alpha * frame.at(c, y, x + 1));
          }
        }
      }
    }
    int first = -1, last = -1;
    for (int col = 0; col < w; ++col) {
      if (zbuf[static_cast<std::size_t>(col)] >= 0.0) {
        if (first < 0) first = col;
        last = col;
      }
    }
    if (first < 0) {
      for (int c = 0; c < 3; ++c) {
        for (int col = 0; col < w; ++col) out.at(c, y, col) = frame.at(c, y, col);
      }
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

sconv::FeatureMap conv_naive(const sconv::FeatureMap& in, const sconv::ConvLayer<double>& layer) {
  const int k = layer.ksize;
  const int pad = (k - 1) / 2;
  const int out_h = (in.height + 2 * pad - k) / layer.stride + 1;
  const int out_w = (in.width + 2 * pad - k) / layer.stride + 1;
  sconv::FeatureMap out(layer.out_channels, out_h, out_w);
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        double acc = layer.bias(o);
        for (int ci = 0; ci < layer.in_channels; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * layer.stride - pad + ky;
              const int ix = ox * layer.stride - pad + kx;
              if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
              acc += layer.kernel_t((static_cast<Eigen::Index>(ci) * k + ky) * k + kx, o) *
                     in.at(ci, iy, ix);
            }
          }
        }
        out.at(o, oy, ox) = acc;
      }
    }
  }
  return out;
}

double ssim_naive(const Frame& a, const Frame& b) {
  const int w = a.width(), h = a.height();
  constexpr int win = 11;
  constexpr double sigma = 1.5;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  std::vector<std::vector<double>> la(static_cast<std::size_t>(h),
                                      std::vector<double>(static_cast<std::size_t>(w)));
  auto lb = la;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      la[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] =
          0.299 * a.at(0, y, x) + 0.587 * a.at(1, y, x) + 0.114 * a.at(2, y, x);
      lb[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] =
          0.299 * b.at(0, y, x) + 0.587 * b.at(1, y, x) + 0.114 * b.at(2, y, x);
    }
  }
  double weights[win][win];
  double norm = 0.0;
  for (int i = 0; i < win; ++i) {
    for (int j = 0; j < win; ++j) {
      const double dy = i - win / 2, dx = j - win / 2;
      weights[i][j] = std::exp(-(dx * dx) / (2 * sigma * sigma)) *
                      std::exp(-(dy * dy) / (2 * sigma * sigma));
      norm += weights[i][j];
    }
  }
  for (int i = 0; i < win; ++i) {
    for (int j = 0; j < win; ++j) weights[i][j] /= norm;
  }

  double total = 0.0;
  long count = 0;
  for (int y = 0; y + win <= h; ++y) {
    for (int x = 0; x + win <= w; ++x) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < win; ++i) {
        for (int j = 0; j < win; ++j) {
          const double va = la[static_cast<std::size_t>(y + i)][static_cast<std::size_t>(x + j)];
          const double vb = lb[static_cast<std::size_t>(y + i)][static_cast<std::size_t>(x + j)];
          mx += weights[i][j] * va;
          my += weights[i][j] * vb;
          xx += weights[i][j] * va * va;
          yy += weights[i][j] * vb * vb;
          xy += weights[i][j] * va * vb;
        }
      }
      const double sx = xx - mx * mx, sy = yy - my * my, sxy = xy - mx * my;
      total += ((2 * mx * my + c1) * (2 * sxy + c2)) /
               ((mx * mx + my * my + c1) * (sx + sy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

Frame random_frame(sconv::Rng& rng, int w, int h) {
  Frame f(w, h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) f.at(c, y, x) = static_cast<float>(rng.uniform());
    }
  }
  return f;
}

sconv::DisparityMap random_disparity(sconv::Rng& rng, int w, int h, float max_d) {
  sconv::DisparityMap d(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      d.values(y, x) = static_cast<float>(rng.uniform() * max_d);
    }
  }
  return d;
}

sconv::EdgeMap random_edges(sconv::Rng& rng, int w, int h, double density) {
  sconv::EdgeMap e(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) e.bits(y, x) = rng.uniform() < density;
  }
  return e;
}

BarScene make_bar_scene(BarTexture texture, int w, int h) {
  BarScene scene;
  scene.bar_x0 = w * 5 / 12;
  scene.bar_x1 = scene.bar_x0 + w / 6;
  scene.bar_y0 = h / 4;
  scene.bar_y1 = h * 3 / 4;
  constexpr float kBarDisparity = 8.0f;

  scene.fg_palette = {{0.80f, 0.10f, 0.10f}, {0.72f, 0.14f, 0.12f}};
  scene.bg_palette = {{0.10f, 0.55f, 0.20f},
                      {0.16f, 0.48f, 0.28f},
                      {0.12f, 0.62f, 0.16f},
                      {0.20f, 0.52f, 0.24f}};

  auto bg_color = [&](int y, int x) -> std::array<float, 3> {
    if (texture == BarTexture::palette) {
      return scene.bg_palette[static_cast<std::size_t>((x / 4 + y / 4) % 4)];
    }
    // gentle large-period gradient so displaced background stays close in color
    const float t = 0.5f + 0.15f * std::sin(2.0f * std::numbers::pi_v<float> *
                                            (static_cast<float>(x) + 0.35f * y) / 384.0f);
    return {0.10f, t, 0.25f};
  };
  auto fg_color = [&](int y, int x) -> std::array<float, 3> {
    if (texture == BarTexture::palette) {
      return scene.fg_palette[static_cast<std::size_t>((x + y) % 2)];
    }
    return scene.fg_palette[0];
  };
  auto in_bar = [&](int y, int x) {
    return y >= scene.bar_y0 && y < scene.bar_y1 && x >= scene.bar_x0 && x < scene.bar_x1;
  };

  scene.left = Frame(w, h);
  scene.disparity = sconv::DisparityMap(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto col = in_bar(y, x) ? fg_color(y, x) : bg_color(y, x);
      for (int c = 0; c < 3; ++c) scene.left.at(c, y, x) = col[static_cast<std::size_t>(c)];
      scene.disparity.values(y, x) = in_bar(y, x) ? kBarDisparity : 0.0f;
    }
  }

  // Analytic right view: the bar lands shifted left by its disparity and
  // occludes; the band it vacates has no source.
  const int d = static_cast<int>(kBarDisparity);
  scene.right_gt = Frame(w, h);
  scene.holes.assign(static_cast<std::size_t>(h),
                     std::vector<bool>(static_cast<std::size_t>(w), false));
  for (int y = 0; y < h; ++y) {
    const bool bar_row = y >= scene.bar_y0 && y < scene.bar_y1;
    for (int x = 0; x < w; ++x) {
      std::array<float, 3> col{0.0f, 0.0f, 0.0f};
      bool hole = false;
      if (bar_row && x >= scene.bar_x0 - d && x < scene.bar_x1 - d) {
        col = fg_color(y, x + d);
      } else if (bar_row && x >= std::max(scene.bar_x1 - d, scene.bar_x0) && x < scene.bar_x1) {
        hole = true;
      } else {
        col = bg_color(y, x);
      }
      for (int c = 0; c < 3; ++c) scene.right_gt.at(c, y, x) = col[static_cast<std::size_t>(c)];
      scene.holes[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = hole;
    }
  }
  return scene;
}

double mean_palette_distance(const Frame& img, const std::vector<std::vector<bool>>& marked,
                             const std::vector<std::array<float, 3>>& palette) {
  double total = 0.0;
  long count = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!marked[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]) continue;
      double best = 1e30;
      for (const auto& p : palette) {
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double diff = img.at(c, y, x) - p[static_cast<std::size_t>(c)];
          d2 += diff * diff;
        }
        best = std::min(best, std::sqrt(d2));
      }
      total += best;
      ++count;
    }
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

}  // namespace oracle
