#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sconv/losses.hpp"

using namespace sconv;

namespace {

FeatureMap random_feature(Rng& rng, int c, int h, int w, double lo = 0.0, double hi = 1.0) {
  FeatureMap t(c, h, w);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data(i) = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("content loss: zero for identical images") {
  Rng rng(3);
  const FeatureMap a = random_feature(rng, 3, 4, 4);
  const OcclusionMask occ(4, 4);
  CHECK(content_loss(a, a, occ, 10.0) == 0.0);
}

TEST_CASE("content loss: hand-derived 1x2 example equals 1.65") {
  // per-channel diff 0.1 at both pixels, one occluded, alpha = 10:
  // (10*0.3 + 0.3) / 2 = 1.65
  FeatureMap pred(3, 1, 2), gt(3, 1, 2);
  for (int c = 0; c < 3; ++c) {
    pred.at(c, 0, 0) = 0.5;
    gt.at(c, 0, 0) = 0.6;
    pred.at(c, 0, 1) = 0.3;
    gt.at(c, 0, 1) = 0.2;
  }
  OcclusionMask occ(2, 1);
  occ.bits(0, 0) = true;
  CHECK(std::abs(content_loss(pred, gt, occ, 10.0) - 1.65) < 1e-12);
}

TEST_CASE("content loss: empty mask makes alpha irrelevant") {
  Rng rng(5);
  const FeatureMap a = random_feature(rng, 3, 5, 6);
  const FeatureMap b = random_feature(rng, 3, 5, 6);
  const OcclusionMask occ(6, 5);
  CHECK(content_loss(a, b, occ, 10.0) == doctest::Approx(content_loss(a, b, occ, 1.0)));
}

TEST_CASE("content loss: monotone in alpha when occluded error exists") {
  Rng rng(7);
  const FeatureMap a = random_feature(rng, 3, 5, 6);
  const FeatureMap b = random_feature(rng, 3, 5, 6);
  OcclusionMask occ(6, 5);
  occ.bits(2, 3) = true;
  CHECK(content_loss(a, b, occ, 10.0) > content_loss(a, b, occ, 5.0));
}

TEST_CASE("content loss gradient matches finite differences") {
  Rng rng(9);
  FeatureMap pred = random_feature(rng, 3, 3, 4);
  const FeatureMap gt = random_feature(rng, 3, 3, 4);
  OcclusionMask occ(4, 3);
  occ.bits(1, 1) = true;
  occ.bits(2, 2) = true;
  const FeatureMap g = content_loss_grad(pred, gt, occ, 10.0);
  const double eps = 1e-7;
  for (Eigen::Index i = 0; i < pred.data.size(); ++i) {
    const double keep = pred.data(i);
    pred.data(i) = keep + eps;
    const double up = content_loss(pred, gt, occ, 10.0);
    pred.data(i) = keep - eps;
    const double down = content_loss(pred, gt, occ, 10.0);
    pred.data(i) = keep;
    CHECK(g.data(i) == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-4));
  }
}

TEST_CASE("perceptual loss: identity extractor equals plain L1") {
  Rng rng(11);
  const FeatureMap a = random_feature(rng, 3, 6, 6);
  const FeatureMap b = random_feature(rng, 3, 6, 6);
  IdentityExtractor id;
  const double expect = (a.data - b.data).array().abs().sum() / static_cast<double>(a.data.size());
  CHECK(perceptual_loss(a, b, id) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(perceptual_loss(a, a, id) == 0.0);
  // symmetric in its arguments
  CHECK(perceptual_loss(a, b, id) == doctest::Approx(perceptual_loss(b, a, id)));
}

TEST_CASE("perceptual loss: conv extractor matches a scalar re-evaluation") {
  Rng rng(13);
  const FeatureMap a = random_feature(rng, 3, 16, 16);
  const FeatureMap b = random_feature(rng, 3, 16, 16);
  const ConvPyramidExtractor ext(1234, 3, 4);
  const double fast = perceptual_loss(a, b, ext);

  const FeaturePyramid pa = ext.forward(a);
  const FeaturePyramid pb = ext.forward(b);
  double slow = 0.0;
  for (std::size_t j = 0; j < pa.size(); ++j) {
    double level = 0.0;
    for (Eigen::Index i = 0; i < pa[j].data.size(); ++i) {
      level += std::abs(pb[j].data(i) - pa[j].data(i));
    }
    slow += level / static_cast<double>(pa[j].data.size());
  }
  CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
  CHECK(perceptual_loss(a, a, ext) == 0.0);
}

TEST_CASE("perceptual gradient matches finite differences through the extractor") {
  Rng rng(17);
  FeatureMap pred = random_feature(rng, 3, 8, 8);
  const FeatureMap gt = random_feature(rng, 3, 8, 8);
  const ConvPyramidExtractor ext(99, 2, 4);
  const auto [loss, grad] = perceptual_loss_with_grad(pred, gt, ext);
  CHECK(loss == doctest::Approx(perceptual_loss(pred, gt, ext)));
  const double eps = 1e-7;
  for (Eigen::Index i = 0; i < pred.data.size(); i += 7) {
    const double keep = pred.data(i);
    pred.data(i) = keep + eps;
    const double up = perceptual_loss(pred, gt, ext);
    pred.data(i) = keep - eps;
    const double down = perceptual_loss(pred, gt, ext);
    pred.data(i) = keep;
    CHECK(grad.data(i) == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-3));
  }
}

TEST_CASE("adversarial loss is the difference of batch means") {
  Eigen::VectorXd fake(2), real(2);
  fake << 1.0, 1.0;
  real << 0.0, 0.0;
  CHECK(adversarial_loss(fake, real) == 1.0);
  CHECK(adversarial_loss(real, real) == 0.0);

  Rng rng(19);
  Eigen::VectorXd f(5), r(7);
  for (int i = 0; i < 5; ++i) f(i) = rng.uniform(-2.0, 2.0);
  for (int i = 0; i < 7; ++i) r(i) = rng.uniform(-2.0, 2.0);
  double mf = 0, mr = 0;
  for (int i = 0; i < 5; ++i) mf += f(i) / 5.0;
  for (int i = 0; i < 7; ++i) mr += r(i) / 7.0;
  CHECK(adversarial_loss(f, r) == doctest::Approx(mf - mr).epsilon(1e-12));

  Eigen::VectorXd empty;
  CHECK_THROWS_AS(adversarial_loss(empty, real), InputError);
}

TEST_CASE("total loss weighting") {
  CHECK(total_loss(0, 0, 0, 10, 2, 0.1) == 0.0);
  CHECK(std::abs(total_loss(1, 1, 1, 10, 2, 0.1) - 12.1) < 1e-12);
  Rng rng(23);
  for (int i = 0; i < 10; ++i) {
    const double lc = rng.uniform(), lp = rng.uniform(), la = rng.uniform();
    const double w1 = rng.uniform(0, 5), w2 = rng.uniform(0, 5), w3 = rng.uniform(0, 5);
    CHECK(total_loss(lc, lp, la, w1, w2, w3) ==
          doctest::Approx(w1 * lc + w2 * lp + w3 * la).epsilon(1e-12));
  }
  // linear in each term
  CHECK(total_loss(2, 0, 0, 10, 2, 0.1) == doctest::Approx(2 * total_loss(1, 0, 0, 10, 2, 0.1)));
}

TEST_CASE("discriminator input gradient matches finite differences") {
  Rng rng(29);
  FeatureMap img = random_feature(rng, 3, 8, 8);
  const Discriminator d = Discriminator::init(7);
  std::vector<FeatureMap> trace;
  d.forward(img, &trace);
  const FeatureMap g = d.backward(trace, 1.0);
  const double eps = 1e-6;
  for (Eigen::Index i = 0; i < img.data.size(); i += 11) {
    const double keep = img.data(i);
    img.data(i) = keep + eps;
    const double up = d.forward(img);
    img.data(i) = keep - eps;
    const double down = d.forward(img);
    img.data(i) = keep;
    CHECK(g.data(i) == doctest::Approx((up - down) / (2 * eps)).epsilon(1e-4));
  }
}
