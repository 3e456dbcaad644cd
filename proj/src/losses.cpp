#include "sconv/losses.hpp"

#include <cmath>

#include "sconv/errors.hpp"

namespace sconv {

namespace {

void require_same_shape(const FeatureMap& a, const FeatureMap& b, const char* who) {
  if (!a.same_shape(b)) throw InputError(std::string(who) + ": dimension mismatch");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double content_loss(const FeatureMap& pred, const FeatureMap& gt, const OcclusionMask& occ,
                    double alpha) {
  require_same_shape(pred, gt, "content_loss");
  if (occ.width() != pred.width || occ.height() != pred.height) {
    throw InputError("content_loss: mask dimension mismatch");
  }
  double occluded = 0.0, known = 0.0;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      double per_pixel = 0.0;
      for (int c = 0; c < pred.channels; ++c) {
        per_pixel += std::abs(gt.at(c, y, x) - pred.at(c, y, x));
      }
      (occ.bits(y, x) ? occluded : known) += per_pixel;
    }
  }
  const double n = static_cast<double>(pred.pixels());
  return (alpha * occluded + known) / n;
}

FeatureMap content_loss_grad(const FeatureMap& pred, const FeatureMap& gt,
                             const OcclusionMask& occ, double alpha) {
  require_same_shape(pred, gt, "content_loss");
  const double n = static_cast<double>(pred.pixels());
  FeatureMap g(pred.channels, pred.height, pred.width);
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      const double w = (occ.bits(y, x) ? alpha : 1.0) / n;
      for (int c = 0; c < pred.channels; ++c) {
        g.at(c, y, x) = w * sign(pred.at(c, y, x) - gt.at(c, y, x));
      }
    }
  }
  return g;
}

FeaturePyramid IdentityExtractor::forward(const FeatureMap& image,
                                          std::vector<FeatureMap>* trace) const {
  if (trace) trace->clear();
  return {image};
}

FeatureMap IdentityExtractor::backward(const std::vector<FeatureMap>&,
                                       const FeaturePyramid& d_pyramid) const {
  return d_pyramid.at(0);
}

ConvPyramidExtractor::ConvPyramidExtractor(std::uint64_t seed, int levels, int feature_width) {
  Rng rng(seed);
  int in_ch = 3;
  for (int i = 0; i < levels; ++i) {
    layers_.push_back(ConvLayer<double>::init(in_ch, feature_width, 3, 2, rng));
    in_ch = feature_width;
  }
}

FeaturePyramid ConvPyramidExtractor::forward(const FeatureMap& image,
                                             std::vector<FeatureMap>* trace) const {
  if (trace) {
    trace->clear();
    trace->push_back(image);
  }
  FeaturePyramid pyramid;
  FeatureMap cur = image;
  for (const auto& layer : layers_) {
    cur = conv_forward(cur, layer);
    leaky_relu_inplace(cur, 0.2);
    pyramid.push_back(cur);
    if (trace) trace->push_back(cur);
  }
  return pyramid;
}

FeatureMap ConvPyramidExtractor::backward(const std::vector<FeatureMap>& trace,
                                          const FeaturePyramid& d_pyramid) const {
  // trace = {input, act_0, ..., act_{L-1}}; d_pyramid aligns with act_i.
  const std::size_t levels = layers_.size();
  FeatureMap d_cur;
  for (std::size_t i = levels; i-- > 0;) {
    FeatureMap d_level = d_pyramid.at(i);
    if (d_cur.channels != 0) d_level.data += d_cur.data;
    FeatureMap d_pre = leaky_relu_backward(trace.at(i + 1), d_level, 0.2);
    d_cur = conv_backward(trace.at(i), layers_.at(i), d_pre).d_in;
  }
  return d_cur;
}

double perceptual_loss(const FeatureMap& pred, const FeatureMap& gt,
                       const PerceptualExtractor& extractor) {
  require_same_shape(pred, gt, "perceptual_loss");
  const FeaturePyramid pp = extractor.forward(pred);
  const FeaturePyramid pg = extractor.forward(gt);
  if (pp.size() != pg.size()) throw InputError("perceptual_loss: pyramid shape mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < pp.size(); ++j) {
    if (!pp[j].same_shape(pg[j])) throw InputError("perceptual_loss: pyramid shape mismatch");
    loss += (pg[j].data - pp[j].data).array().abs().sum() /
            static_cast<double>(pg[j].data.size());
  }
  return loss;
}

std::pair<double, FeatureMap> perceptual_loss_with_grad(const FeatureMap& pred,
                                                        const FeatureMap& gt,
                                                        const PerceptualExtractor& extractor) {
  require_same_shape(pred, gt, "perceptual_loss");
  std::vector<FeatureMap> trace;
  const FeaturePyramid pp = extractor.forward(pred, &trace);
  const FeaturePyramid pg = extractor.forward(gt);
  if (pp.size() != pg.size()) throw InputError("perceptual_loss: pyramid shape mismatch");

  double loss = 0.0;
  FeaturePyramid d_pyramid;
  d_pyramid.reserve(pp.size());
  for (std::size_t j = 0; j < pp.size(); ++j) {
    if (!pp[j].same_shape(pg[j])) throw InputError("perceptual_loss: pyramid shape mismatch");
    const double n = static_cast<double>(pg[j].data.size());
    loss += (pg[j].data - pp[j].data).array().abs().sum() / n;
    FeatureMap d = pp[j];
    for (Eigen::Index i = 0; i < d.data.size(); ++i) {
      d.data(i) = sign(pp[j].data(i) - pg[j].data(i)) / n;
    }
    d_pyramid.push_back(std::move(d));
  }
  return {loss, extractor.backward(trace, d_pyramid)};
}

double adversarial_loss(const Eigen::VectorXd& d_fake, const Eigen::VectorXd& d_real) {
  if (d_fake.size() == 0 || d_real.size() == 0) {
    throw InputError("adversarial_loss: empty batch");
  }
  return d_fake.mean() - d_real.mean();
}

double total_loss(double content, double perceptual, double adversarial, double lambda1,
                  double lambda2, double lambda3) {
  return lambda1 * content + lambda2 * perceptual + lambda3 * adversarial;
}

Discriminator Discriminator::init(std::uint64_t seed) {
  Rng rng(seed);
  Discriminator d;
  d.c1 = ConvLayer<double>::init(3, 8, 3, 2, rng);
  d.c2 = ConvLayer<double>::init(8, 1, 3, 2, rng);
  return d;
}

double Discriminator::forward(const FeatureMap& image, std::vector<FeatureMap>* trace) const {
  FeatureMap a1 = conv_forward(image, c1);
  leaky_relu_inplace(a1, 0.2);
  FeatureMap a2 = conv_forward(a1, c2);
  if (trace) *trace = {image, a1, a2};
  return a2.data.mean();
}

FeatureMap Discriminator::backward(const std::vector<FeatureMap>& trace, double d_score,
                                   Discriminator* param_grads) const {
  const FeatureMap& image = trace.at(0);
  const FeatureMap& a1 = trace.at(1);
  const FeatureMap& a2 = trace.at(2);

  FeatureMap d_a2 = a2;
  d_a2.data.setConstant(d_score / static_cast<double>(a2.data.size()));
  auto g2 = conv_backward(a1, c2, d_a2);
  FeatureMap d_a1 = leaky_relu_backward(a1, g2.d_in, 0.2);
  auto g1 = conv_backward(image, c1, d_a1);
  if (param_grads) {
    param_grads->c1.accumulate(g1.d_kernel_t, g1.d_bias);
    param_grads->c2.accumulate(g2.d_kernel_t, g2.d_bias);
  }
  return g1.d_in;
}

}  // namespace sconv
