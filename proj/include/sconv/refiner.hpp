#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "sconv/config.hpp"
#include "sconv/image.hpp"
#include "sconv/losses.hpp"
#include "sconv/rng.hpp"
#include "sconv/tensor.hpp"

namespace sconv {

/// Gated feature-update unit: three convolutions over the channel
/// concatenation of the level's encoder feature and the upsampled coarser
/// feature, combined as q*z + (1-z)*r.
struct FuuWeights {
  ConvLayer<double> gate;    // z, sigmoid
  ConvLayer<double> cand_q;  // q, tanh
  ConvLayer<double> cand_r;  // r, tanh

  template <typename F>
  void visit_layers(F&& f) {
    f(gate);
    f(cand_q);
    f(cand_r);
  }
};

/// Full weight bundle of the refiner. `plan` lists the channel widths
/// starting at the 9-channel input, one entry per encoder level after that;
/// level 0 is full resolution and each deeper level halves the grid.
///
/// Serialized layout (little-endian): magic "MHFU", u32 version, u32 kernel
/// size, u32 plan length, the plan entries, then every parameter as f32 in
/// declaration order (encoder, feature-update units, decoder, heads).
struct RefinerWeights {
  std::vector<int> plan;
  int ksize = 3;
  std::vector<ConvLayer<double>> encoder;  // encoder[0] stride 1, rest stride 2
  std::vector<FuuWeights> fuu;             // fuu[m] updates level m, m < levels-1
  std::vector<ConvLayer<double>> decoder;  // decoder[i] emits the level-i feature
  ConvLayer<double> head_m1, head_m2, head_m3, head_content;

  int levels() const { return static_cast<int>(plan.size()) - 1; }

  /// Channel width of the decoder feature at level i.
  int decoder_channels(int i) const {
    return i == levels() - 1 ? plan[static_cast<std::size_t>(levels() - 1)]
                             : plan[static_cast<std::size_t>(i + 1)];
  }

  static std::vector<int> default_plan() { return {9, 16, 32, 64}; }

  /// Builds a zero-initialized bundle with the right shapes.
  static RefinerWeights make(const std::vector<int>& plan, int ksize);

  /// Xavier-initialized bundle (values snapped to f32).
  static RefinerWeights init(const std::vector<int>& plan, int ksize, Rng& rng);

  /// Saturates the mask heads so fusion selects the first branch; useful as
  /// a no-training passthrough.
  void bias_masks_to_one(double bias = 12.0);

  template <typename F>
  void visit_layers(F&& f) {
    for (auto& l : encoder) f(l);
    for (auto& u : fuu) u.visit_layers(f);
    for (auto& l : decoder) f(l);
    f(head_m1);
    f(head_m2);
    f(head_m3);
    f(head_content);
  }

  template <typename F>
  void visit_params(F&& f) {
    visit_layers([&](ConvLayer<double>& l) { l.visit_params(f); });
  }

  Eigen::Index param_count() const;

  void add_scaled(const RefinerWeights& other, double scale);
  void set_zero();
};

/// Byte-exact weight file round trip; throws InputError on bad magic,
/// version mismatch, or truncation.
void save_weights(const RefinerWeights& w, const std::filesystem::path& path);
RefinerWeights load_weights(const std::filesystem::path& path);

/// Test hook: pins any subset of the masks to a constant before fusion.
struct MaskOverride {
  std::optional<double> m1, m2, m3;
};

struct RefinerOutput {
  FeatureMap m1, m2, m3;   // single-channel attention masks in (0,1)
  FeatureMap content;      // 3-channel generated content in (0,1)
  FeatureMap fused;        // final right view
};

/// Everything the backward pass needs from a forward evaluation.
struct RefinerTrace {
  FeatureMap input;                 // 9-channel concatenation
  FeatureMap ip, ie, il;
  std::vector<FeatureMap> enc;      // post-activation encoder features
  std::vector<FeatureMap> fuu_in;   // concatenated FUU inputs per level
  std::vector<FeatureMap> fuu_z, fuu_q, fuu_r;
  std::vector<FeatureMap> updated;  // u[m]
  std::vector<FeatureMap> dec_in;   // decoder inputs (concat except coarsest)
  std::vector<FeatureMap> dec;      // post-activation decoder features
  RefinerOutput out;
  MaskOverride overrides;
};

/// Single feature-update step (exposed for unit tests): upsamples the
/// coarser feature, runs the three gated convolutions, and blends.
FeatureMap fuu_update(const FeatureMap& fine, const FeatureMap& coarse, const FuuWeights& w);

/// Elementwise mask fusion of the three branch images and generated content:
/// f1 = m1*ip + (1-m1)*ie; f2 = m2*f1 + (1-m2)*il; out = m3*f2 + (1-m3)*c.
/// Masks are single-channel and broadcast across RGB.
FeatureMap fuse_branches(const FeatureMap& ip, const FeatureMap& ie, const FeatureMap& il,
                         const FeatureMap& content, const FeatureMap& m1, const FeatureMap& m2,
                         const FeatureMap& m3, FeatureMap* f1_out = nullptr,
                         FeatureMap* f2_out = nullptr);

RefinerOutput refiner_forward(const FeatureMap& ip, const FeatureMap& ie, const FeatureMap& il,
                              const RefinerWeights& w, RefinerTrace* trace = nullptr,
                              const MaskOverride& overrides = {});

/// Convenience wrapper over [0,1] frames.
RefinerOutput refiner_forward(const Frame& ip, const Frame& ie, const Frame& il,
                              const RefinerWeights& w);

struct RefinerGrads {
  RefinerWeights params;  // same shapes as the weights, holding gradients
  FeatureMap d_ip, d_ie, d_il;
};

/// Analytic gradients for every parameter and input given dL/d(fused).
RefinerGrads refiner_backward(const RefinerTrace& trace, const RefinerWeights& w,
                              const FeatureMap& d_fused);

// ------------------------------------------------------------------ train

struct TrainSample {
  Frame ip, ie, il, gt;
  OcclusionMask occ;
};

struct StepLoss {
  double total = 0.0;
  double content = 0.0;
  double perceptual = 0.0;
  double adversarial = 0.0;
};

struct TrainResult {
  RefinerWeights weights;
  std::vector<StepLoss> trace;
};

/// Adam training loop (lr/betas from cfg; deterministic given the seed).
/// Batches cycle through the dataset in index order; per-sample gradients
/// are summed in sample order so the result is independent of `jobs`.
/// With cfg.adversarial the bundled critic is trained alternately.
TrainResult train_refiner(const std::vector<TrainSample>& dataset, const PipelineConfig& cfg,
                          std::uint64_t seed, int jobs = 1,
                          const RefinerWeights* initial = nullptr);

}  // namespace sconv
