#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "sconv/image.hpp"
#include "sconv/tensor.hpp"

namespace sconv {

/// Occlusion-weighted L1 content loss:
///   (alpha * sum_{x in O} |gt - pred|_1 + sum_{x not in O} |gt - pred|_1) / (W*H).
/// The sum runs over pixels and channels; normalization is by pixel count.
double content_loss(const FeatureMap& pred, const FeatureMap& gt, const OcclusionMask& occ,
                    double alpha);

/// dL/dpred of content_loss (sign convention: sign(pred - gt)).
FeatureMap content_loss_grad(const FeatureMap& pred, const FeatureMap& gt,
                             const OcclusionMask& occ, double alpha);

using FeaturePyramid = std::vector<FeatureMap>;

/// Pluggable feature-pyramid extractor for the perceptual loss. `trace`
/// caches whatever the concrete extractor needs to run backward.
class PerceptualExtractor {
 public:
  virtual ~PerceptualExtractor() = default;
  virtual FeaturePyramid forward(const FeatureMap& image,
                                 std::vector<FeatureMap>* trace = nullptr) const = 0;
  virtual FeatureMap backward(const std::vector<FeatureMap>& trace,
                              const FeaturePyramid& d_pyramid) const = 0;
};

/// One-level pyramid equal to the image itself; perceptual loss degenerates
/// to plain per-element L1.
class IdentityExtractor final : public PerceptualExtractor {
 public:
  FeaturePyramid forward(const FeatureMap& image,
                         std::vector<FeatureMap>* trace = nullptr) const override;
  FeatureMap backward(const std::vector<FeatureMap>& trace,
                      const FeaturePyramid& d_pyramid) const override;
};

/// Fixed-seed stack of stride-2 leaky convolutions standing in for a
/// pretrained backbone; the pyramid collects the activation after each layer.
class ConvPyramidExtractor final : public PerceptualExtractor {
 public:
  explicit ConvPyramidExtractor(std::uint64_t seed = 0x9e3e5eedULL, int levels = 3,
                                int feature_width = 8);
  FeaturePyramid forward(const FeatureMap& image,
                         std::vector<FeatureMap>* trace = nullptr) const override;
  FeatureMap backward(const std::vector<FeatureMap>& trace,
                      const FeaturePyramid& d_pyramid) const override;

 private:
  std::vector<ConvLayer<double>> layers_;
};

/// sum_j ||phi_j(gt) - phi_j(pred)||_1, each level normalized by its element
/// count. Symmetric in its image arguments.
double perceptual_loss(const FeatureMap& pred, const FeatureMap& gt,
                       const PerceptualExtractor& extractor);

/// Loss value plus dL/dpred.
std::pair<double, FeatureMap> perceptual_loss_with_grad(const FeatureMap& pred,
                                                        const FeatureMap& gt,
                                                        const PerceptualExtractor& extractor);

/// mean(d_fake) - mean(d_real); throws InputError on empty batches.
double adversarial_loss(const Eigen::VectorXd& d_fake, const Eigen::VectorXd& d_real);

/// lambda1 * Lc + lambda2 * Lper + lambda3 * Ladv.
double total_loss(double content, double perceptual, double adversarial, double lambda1,
                  double lambda2, double lambda3);

/// Two-layer toy critic: stride-2 conv, leaky, stride-2 conv, global mean.
struct Discriminator {
  ConvLayer<double> c1;
  ConvLayer<double> c2;

  static Discriminator init(std::uint64_t seed);

  double forward(const FeatureMap& image, std::vector<FeatureMap>* trace = nullptr) const;

  /// Gradient of the score with respect to the input image; when
  /// `param_grads` is non-null the layer gradients are accumulated into it.
  FeatureMap backward(const std::vector<FeatureMap>& trace, double d_score,
                      Discriminator* param_grads = nullptr) const;

  Eigen::Index param_count() const { return c1.param_count() + c2.param_count(); }

  template <typename F>
  void visit_params(F&& f) {
    c1.visit_params(f);
    c2.visit_params(f);
  }
};

}  // namespace sconv
