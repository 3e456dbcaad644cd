#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sconv/imageio.hpp"
#include "sconv/inpaint.hpp"
#include "sconv/warp.hpp"

using namespace sconv;

TEST_CASE("poly: zero disparity reproduces the frame") {
  Rng rng(3);
  const Frame f = oracle::random_frame(rng, 14, 6);
  const DisparityMap d(14, 6);
  CHECK(inpaint_poly(f, d).equals(f));
}

TEST_CASE("poly: 1x5 span blends across the gap") {
  // white, white, black, black, black with disparity [2,2,0,0,0]
  Frame f(5, 1);
  for (int x = 0; x < 2; ++x) {
    for (int c = 0; c < 3; ++c) f.at(c, 0, x) = 1.0f;
  }
  DisparityMap d(5, 1);
  d.values << 2.0f, 2.0f, 0.0f, 0.0f, 0.0f;

  const Frame out = inpaint_poly(f, d);
  const Frame expect = oracle::inpaint_poly_naive(f, d);
  for (int x = 0; x < 5; ++x) {
    for (int c = 0; c < 3; ++c) REQUIRE(out.at(c, 0, x) == expect.at(c, 0, x));
  }
  // target 1 sits a third of the way along the (-1 -> 2) span: 2/3 white
  CHECK(out.at(0, 0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
  // spans reach every column: hole-free output
  for (int x = 0; x < 5; ++x) CHECK(out.at(1, 0, x) >= 0.0f);
}

TEST_CASE("poly: constant disparity is a translation with right-edge clamp") {
  Rng rng(7);
  const int w = 20, h = 4, shift = 3;
  const Frame f = oracle::random_frame(rng, w, h);
  DisparityMap d(w, h);
  d.values.setConstant(static_cast<float>(shift));
  const Frame out = inpaint_poly(f, d);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int src = std::min(x + shift, w - 1);
      for (int c = 0; c < 3; ++c) {
        REQUIRE(out.at(c, y, x) == doctest::Approx(f.at(c, y, src)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("poly matches the row oracle on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 15; ++trial) {
    const int w = 6 + static_cast<int>(rng.below(20));
    const int h = 1 + static_cast<int>(rng.below(4));
    const Frame f = oracle::random_frame(rng, w, h);
    const DisparityMap d = oracle::random_disparity(rng, w, h, 5.0f);
    const Frame out = inpaint_poly(f, d);
    const Frame expect = oracle::inpaint_poly_naive(f, d);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) REQUIRE(out.at(c, y, x) == expect.at(c, y, x));
      }
    }
  }
}

TEST_CASE("fallback: empty mask returns the input") {
  Rng rng(13);
  const Frame f = oracle::random_frame(rng, 8, 8);
  const OcclusionMask none(8, 8);
  CHECK(inpaint_fallback(f, none).equals(f));
}

TEST_CASE("fallback: single hole with equal neighbors converges to that color") {
  Frame f(3, 3);
  f.fill(0.25f, 0.5f, 0.75f);
  OcclusionMask m(3, 3);
  m.bits(1, 1) = true;
  const Frame out = inpaint_fallback(f, m);
  CHECK(out.at(0, 1, 1) == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(out.at(1, 1, 1) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(out.at(2, 1, 1) == doctest::Approx(0.75).epsilon(1e-3));
}

TEST_CASE("fallback: 1x3 row hole converges to the neighbor mean") {
  Frame f(3, 1);
  f.at(0, 0, 0) = 0.2f;
  f.at(0, 0, 2) = 0.8f;
  OcclusionMask m(3, 1);
  m.bits(0, 1) = true;
  const Frame out = inpaint_fallback(f, m);
  // 1-D Laplace: the interior point is the mean of its boundary
  CHECK(out.at(0, 0, 1) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(out.at(0, 0, 0) == 0.2f);  // known pixels never change
  CHECK(out.at(0, 0, 2) == 0.8f);
}

TEST_CASE("fallback ignores sentinel content under the mask") {
  Rng rng(17);
  Frame f = oracle::random_frame(rng, 10, 10);
  OcclusionMask m(10, 10);
  for (int i = 3; i < 7; ++i) {
    for (int j = 3; j < 7; ++j) m.bits(i, j) = true;
  }
  Frame poisoned = f;
  for (int i = 3; i < 7; ++i) {
    for (int j = 3; j < 7; ++j) {
      poisoned.at(0, i, j) = 1.0f;
      poisoned.at(1, i, j) = 0.0f;
      poisoned.at(2, i, j) = 1.0f;
    }
  }
  CHECK(inpaint_fallback(f, m).equals(inpaint_fallback(poisoned, m)));
}

TEST_CASE("de: zero disparity is the identity") {
  Rng rng(19);
  const Frame f = oracle::random_frame(rng, 16, 8);
  const DisparityMap d(16, 8);
  PipelineConfig cfg;
  CHECK(inpaint_de(f, d, cfg).equals(f));
}

TEST_CASE("de: expansion feeds background into the disocclusion band") {
  const auto scene = oracle::make_bar_scene(oracle::BarTexture::palette);
  PipelineConfig cfg;
  cfg.expansion_radius = 2;
  cfg.expansion_threshold = 4.0f;

  const Frame de = inpaint_de(scene.left, scene.disparity, cfg);
  const double de_bg = oracle::mean_palette_distance(de, scene.holes, scene.bg_palette);
  const double de_fg = oracle::mean_palette_distance(de, scene.holes, scene.fg_palette);
  CHECK(de_bg < de_fg);

  const WarpResult wr = forward_warp(scene.left, scene.disparity);
  const Frame fb = inpaint_fallback(wr.warped, wr.mask);
  const double fb_bg = oracle::mean_palette_distance(fb, scene.holes, scene.bg_palette);
  CHECK(de_bg < fb_bg);
}

TEST_CASE("de: huge threshold degenerates to warp plus right-propagation") {
  const auto scene = oracle::make_bar_scene(oracle::BarTexture::palette);
  PipelineConfig cfg;
  cfg.expansion_threshold = 1000.0f;

  const Frame de = inpaint_de(scene.left, scene.disparity, cfg);
  // expansion is an identity here, so every hole must carry a color copied
  // from the same row's right side
  const WarpResult wr = forward_warp(scene.left, scene.disparity);
  for (int y = 0; y < de.height(); ++y) {
    for (int x = 0; x < de.width(); ++x) {
      if (!wr.mask.bits(y, x)) {
        for (int c = 0; c < 3; ++c) REQUIRE(de.at(c, y, x) == wr.warped.at(c, y, x));
      }
    }
  }
}

TEST_CASE("branches produce hole-free output on the bar scene") {
  const auto scene = oracle::make_bar_scene(oracle::BarTexture::palette);
  PipelineConfig cfg;
  const WarpResult wr = forward_warp(scene.left, scene.disparity);

  const Frame poly = inpaint_poly(scene.left, scene.disparity);
  const Frame de = inpaint_de(scene.left, scene.disparity, cfg);
  const Frame fb = inpaint_fallback(wr.warped, wr.mask);
  // no output pixel equals the black sentinel inside the hole band
  for (int y = scene.bar_y0; y < scene.bar_y1; ++y) {
    for (int x = 0; x < scene.left.width(); ++x) {
      if (!scene.holes[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]) continue;
      auto bright = [&](const Frame& f) {
        return f.at(0, y, x) + f.at(1, y, x) + f.at(2, y, x) > 0.05f;
      };
      CHECK(bright(poly));
      CHECK(bright(de));
      CHECK(bright(fb));
    }
  }
}

TEST_CASE("external inpaint adapter validates presence and dimensions") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "sconv_ext_test";
  fs::create_directories(dir);
  Rng rng(23);
  const Frame f = oracle::random_frame(rng, 6, 4);
  write_frame(f, dir / "000000.png");

  const Frame r = load_external_inpaint(dir, 0, 6, 4);
  CHECK(r.width() == 6);
  CHECK_THROWS_AS(load_external_inpaint(dir, 1, 6, 4), InputError);   // missing index
  CHECK_THROWS_AS(load_external_inpaint(dir, 0, 8, 4), InputError);   // wrong size
  fs::remove_all(dir);
}
