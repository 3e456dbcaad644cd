#include "sconv/refiner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "sconv/errors.hpp"

namespace sconv {

namespace {

constexpr double kLeakySlope = 0.2;

void check_plan(const std::vector<int>& plan, int ksize) {
  if (plan.size() < 3) throw ConfigError("refiner: need at least 2 levels");
  if (plan[0] != 9) throw ConfigError("refiner: input plan entry must be 9 channels");
  for (int c : plan) {
    if (c < 1) throw ConfigError("refiner: channel plan entries must be >= 1");
  }
  if (ksize < 1 || ksize % 2 == 0) throw ConfigError("refiner: kernel size must be odd");
}

}  // namespace

RefinerWeights RefinerWeights::make(const std::vector<int>& plan, int ksize) {
  check_plan(plan, ksize);
  RefinerWeights w;
  w.plan = plan;
  w.ksize = ksize;
  const int levels = w.levels();

  w.encoder.push_back(ConvLayer<double>::make(plan[0], plan[1], ksize, 1));
  for (int i = 1; i < levels; ++i) {
    w.encoder.push_back(ConvLayer<double>::make(plan[i], plan[i + 1], ksize, 2));
  }
  for (int m = 0; m + 1 < levels; ++m) {
    const int in_ch = plan[m + 1] + plan[m + 2];
    FuuWeights u;
    u.gate = ConvLayer<double>::make(in_ch, plan[m + 1], ksize, 1);
    u.cand_q = ConvLayer<double>::make(in_ch, plan[m + 1], ksize, 1);
    u.cand_r = ConvLayer<double>::make(in_ch, plan[m + 1], ksize, 1);
    w.fuu.push_back(std::move(u));
  }
  w.decoder.resize(static_cast<std::size_t>(levels));
  w.decoder[static_cast<std::size_t>(levels - 1)] =
      ConvLayer<double>::make(plan[levels], plan[levels - 1], ksize, 1);
  for (int i = levels - 2; i >= 0; --i) {
    const int in_ch = w.decoder_channels(i + 1) + plan[i + 1];
    w.decoder[static_cast<std::size_t>(i)] =
        ConvLayer<double>::make(in_ch, w.decoder_channels(i), ksize, 1);
  }
  const int head_in = w.decoder_channels(0);
  w.head_m1 = ConvLayer<double>::make(head_in, 1, ksize, 1);
  w.head_m2 = ConvLayer<double>::make(head_in, 1, ksize, 1);
  w.head_m3 = ConvLayer<double>::make(head_in, 1, ksize, 1);
  w.head_content = ConvLayer<double>::make(head_in, 3, ksize, 1);
  return w;
}

RefinerWeights RefinerWeights::init(const std::vector<int>& plan, int ksize, Rng& rng) {
  RefinerWeights w = make(plan, ksize);
  w.visit_layers([&](ConvLayer<double>& l) {
    l = ConvLayer<double>::init(l.in_channels, l.out_channels, l.ksize, l.stride, rng);
  });
  return w;
}

void RefinerWeights::bias_masks_to_one(double bias) {
  head_m1.bias.setConstant(bias);
  head_m2.bias.setConstant(bias);
  head_m3.bias.setConstant(bias);
}

Eigen::Index RefinerWeights::param_count() const {
  Eigen::Index n = 0;
  const_cast<RefinerWeights*>(this)->visit_layers(
      [&](ConvLayer<double>& l) { n += l.param_count(); });
  return n;
}

void RefinerWeights::add_scaled(const RefinerWeights& other, double scale) {
  auto* o = const_cast<RefinerWeights*>(&other);
  std::vector<ConvLayer<double>*> mine, theirs;
  visit_layers([&](ConvLayer<double>& l) { mine.push_back(&l); });
  o->visit_layers([&](ConvLayer<double>& l) { theirs.push_back(&l); });
  for (std::size_t i = 0; i < mine.size(); ++i) {
    mine[i]->kernel_t += scale * theirs[i]->kernel_t;
    mine[i]->bias += scale * theirs[i]->bias;
  }
}

void RefinerWeights::set_zero() {
  visit_layers([](ConvLayer<double>& l) {
    l.kernel_t.setZero();
    l.bias.setZero();
  });
}

// --------------------------------------------------------------- serialize

namespace {

constexpr char kMagic[4] = {'M', 'H', 'F', 'U'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw InputError(std::string("weights: truncated file (") + what + ")");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in, "parameters");
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_weights(const RefinerWeights& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("weights: cannot write " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(w.ksize));
  put_u32(out, static_cast<std::uint32_t>(w.plan.size()));
  for (int c : w.plan) put_u32(out, static_cast<std::uint32_t>(c));
  const_cast<RefinerWeights&>(w).visit_params(
      [&](double& v) { put_f32(out, static_cast<float>(v)); });
  if (!out) throw InputError("weights: short write to " + path.string());
}

RefinerWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("weights: cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4)) throw InputError("weights: truncated file (magic)");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw InputError("weights: bad magic in " + path.string());
  }
  const std::uint32_t version = get_u32(in, "version");
  if (version != kVersion) {
    throw InputError("weights: unsupported version " + std::to_string(version));
  }
  const std::uint32_t ksize = get_u32(in, "kernel size");
  const std::uint32_t plan_len = get_u32(in, "plan length");
  if (plan_len < 3 || plan_len > 64) throw InputError("weights: implausible channel plan");
  std::vector<int> plan(plan_len);
  for (auto& c : plan) c = static_cast<int>(get_u32(in, "plan"));

  RefinerWeights w = RefinerWeights::make(plan, static_cast<int>(ksize));
  w.visit_params([&](double& v) { v = static_cast<double>(get_f32(in)); });
  // Demand exact length: trailing bytes indicate a foreign or damaged file.
  in.peek();
  if (!in.eof()) throw InputError("weights: trailing bytes in " + path.string());
  return w;
}

// ----------------------------------------------------------------- forward

FeatureMap fuu_update(const FeatureMap& fine, const FeatureMap& coarse, const FuuWeights& w) {
  if (coarse.height != (fine.height + 1) / 2 || coarse.width != (fine.width + 1) / 2) {
    throw InputError("fuu_update: coarse level must be the ceil-halved grid");
  }
  FeatureMap up = upsample_nearest(coarse, fine.height, fine.width);
  FeatureMap joined = concat_channels(fine, up);
  FeatureMap z = conv_forward(joined, w.gate);
  sigmoid_inplace(z);
  FeatureMap q = conv_forward(joined, w.cand_q);
  tanh_inplace(q);
  FeatureMap r = conv_forward(joined, w.cand_r);
  tanh_inplace(r);
  FeatureMap out = q;
  out.data = (q.data.array() * z.data.array() +
              (1.0 - z.data.array()) * r.data.array()).matrix();
  return out;
}

namespace {

/// out += mask (1ch) * img (3ch), or the complementary weighting.
void broadcast_blend(FeatureMap& out, const FeatureMap& mask, const FeatureMap& a,
                     const FeatureMap& b) {
  for (int c = 0; c < a.channels; ++c) {
    out.data.col(c) = (mask.data.col(0).array() * a.data.col(c).array() +
                       (1.0 - mask.data.col(0).array()) * b.data.col(c).array()).matrix();
  }
}

}  // namespace

FeatureMap fuse_branches(const FeatureMap& ip, const FeatureMap& ie, const FeatureMap& il,
                         const FeatureMap& content, const FeatureMap& m1, const FeatureMap& m2,
                         const FeatureMap& m3, FeatureMap* f1_out, FeatureMap* f2_out) {
  FeatureMap f1(ip.channels, ip.height, ip.width);
  broadcast_blend(f1, m1, ip, ie);
  FeatureMap f2(ip.channels, ip.height, ip.width);
  broadcast_blend(f2, m2, f1, il);
  FeatureMap g(ip.channels, ip.height, ip.width);
  broadcast_blend(g, m3, f2, content);
  if (f1_out) *f1_out = std::move(f1);
  if (f2_out) *f2_out = std::move(f2);
  return g;
}

RefinerOutput refiner_forward(const FeatureMap& ip, const FeatureMap& ie, const FeatureMap& il,
                              const RefinerWeights& w, RefinerTrace* trace,
                              const MaskOverride& overrides) {
  if (!ip.same_shape(ie) || !ip.same_shape(il)) {
    throw InputError("refiner: the three branch inputs must share dimensions");
  }
  if (ip.channels != 3) throw InputError("refiner: branch inputs must have 3 channels");
  const int levels = w.levels();
  if (levels < 2) throw InputError("refiner: weight plan has fewer than 2 levels");

  FeatureMap x = concat_channels(concat_channels(ip, ie), il);

  std::vector<FeatureMap> enc;
  enc.reserve(static_cast<std::size_t>(levels));
  {
    FeatureMap cur = x;
    for (int i = 0; i < levels; ++i) {
      cur = conv_forward(cur, w.encoder[static_cast<std::size_t>(i)]);
      leaky_relu_inplace(cur, kLeakySlope);
      enc.push_back(cur);
    }
  }

  // Coarse-to-fine feature updates; the deepest level passes through.
  std::vector<FeatureMap> updated(static_cast<std::size_t>(levels));
  std::vector<FeatureMap> fuu_in(static_cast<std::size_t>(levels - 1));
  std::vector<FeatureMap> fuu_z(static_cast<std::size_t>(levels - 1));
  std::vector<FeatureMap> fuu_q(static_cast<std::size_t>(levels - 1));
  std::vector<FeatureMap> fuu_r(static_cast<std::size_t>(levels - 1));
  updated[static_cast<std::size_t>(levels - 1)] = enc[static_cast<std::size_t>(levels - 1)];
  for (int m = levels - 2; m >= 0; --m) {
    const FeatureMap& fine = enc[static_cast<std::size_t>(m)];
    const FeatureMap& coarse = updated[static_cast<std::size_t>(m + 1)];
    FeatureMap up = upsample_nearest(coarse, fine.height, fine.width);
    FeatureMap joined = concat_channels(fine, up);
    const FuuWeights& u = w.fuu[static_cast<std::size_t>(m)];
    FeatureMap z = conv_forward(joined, u.gate);
    sigmoid_inplace(z);
    FeatureMap q = conv_forward(joined, u.cand_q);
    tanh_inplace(q);
    FeatureMap r = conv_forward(joined, u.cand_r);
    tanh_inplace(r);
    FeatureMap out = q;
    out.data = (q.data.array() * z.data.array() +
                (1.0 - z.data.array()) * r.data.array()).matrix();
    updated[static_cast<std::size_t>(m)] = std::move(out);
    fuu_in[static_cast<std::size_t>(m)] = std::move(joined);
    fuu_z[static_cast<std::size_t>(m)] = std::move(z);
    fuu_q[static_cast<std::size_t>(m)] = std::move(q);
    fuu_r[static_cast<std::size_t>(m)] = std::move(r);
  }

  // Decoder with skip connections from the updated features.
  std::vector<FeatureMap> dec(static_cast<std::size_t>(levels));
  std::vector<FeatureMap> dec_in(static_cast<std::size_t>(levels));
  dec_in[static_cast<std::size_t>(levels - 1)] = updated[static_cast<std::size_t>(levels - 1)];
  {
    FeatureMap cur = conv_forward(dec_in[static_cast<std::size_t>(levels - 1)],
                                  w.decoder[static_cast<std::size_t>(levels - 1)]);
    leaky_relu_inplace(cur, kLeakySlope);
    dec[static_cast<std::size_t>(levels - 1)] = std::move(cur);
  }
  for (int i = levels - 2; i >= 0; --i) {
    const FeatureMap& skip = updated[static_cast<std::size_t>(i)];
    FeatureMap up = upsample_nearest(dec[static_cast<std::size_t>(i + 1)], skip.height, skip.width);
    FeatureMap joined = concat_channels(up, skip);
    FeatureMap cur = conv_forward(joined, w.decoder[static_cast<std::size_t>(i)]);
    leaky_relu_inplace(cur, kLeakySlope);
    dec[static_cast<std::size_t>(i)] = std::move(cur);
    dec_in[static_cast<std::size_t>(i)] = std::move(joined);
  }

  const FeatureMap& head_src = dec[0];
  RefinerOutput out;
  out.m1 = conv_forward(head_src, w.head_m1);
  sigmoid_inplace(out.m1);
  out.m2 = conv_forward(head_src, w.head_m2);
  sigmoid_inplace(out.m2);
  out.m3 = conv_forward(head_src, w.head_m3);
  sigmoid_inplace(out.m3);
  out.content = conv_forward(head_src, w.head_content);
  sigmoid_inplace(out.content);

  if (overrides.m1) out.m1.data.setConstant(*overrides.m1);
  if (overrides.m2) out.m2.data.setConstant(*overrides.m2);
  if (overrides.m3) out.m3.data.setConstant(*overrides.m3);

  out.fused = fuse_branches(ip, ie, il, out.content, out.m1, out.m2, out.m3);

  if (trace) {
    trace->input = std::move(x);
    trace->ip = ip;
    trace->ie = ie;
    trace->il = il;
    trace->enc = std::move(enc);
    trace->fuu_in = std::move(fuu_in);
    trace->fuu_z = std::move(fuu_z);
    trace->fuu_q = std::move(fuu_q);
    trace->fuu_r = std::move(fuu_r);
    trace->updated = std::move(updated);
    trace->dec_in = std::move(dec_in);
    trace->dec = std::move(dec);
    trace->out = out;
    trace->overrides = overrides;
  }
  return out;
}

RefinerOutput refiner_forward(const Frame& ip, const Frame& ie, const Frame& il,
                              const RefinerWeights& w) {
  return refiner_forward(frame_to_feature(ip), frame_to_feature(ie), frame_to_feature(il), w);
}

// ---------------------------------------------------------------- backward

RefinerGrads refiner_backward(const RefinerTrace& trace, const RefinerWeights& w,
                              const FeatureMap& d_fused) {
  const int levels = w.levels();

  RefinerGrads grads;
  grads.params = RefinerWeights::make(w.plan, w.ksize);

  const RefinerOutput& out = trace.out;
  const FeatureMap& ip = trace.ip;
  const FeatureMap& ie = trace.ie;
  const FeatureMap& il = trace.il;

  // Recompute the fusion intermediates (cheap relative to storing them).
  FeatureMap f1(3, ip.height, ip.width), f2(3, ip.height, ip.width);
  fuse_branches(ip, ie, il, out.content, out.m1, out.m2, out.m3, &f1, &f2);

  FeatureMap d_m1(1, ip.height, ip.width), d_m2(1, ip.height, ip.width),
      d_m3(1, ip.height, ip.width);
  FeatureMap d_f2(3, ip.height, ip.width), d_f1(3, ip.height, ip.width);
  FeatureMap d_content(3, ip.height, ip.width);
  grads.d_ip = FeatureMap(3, ip.height, ip.width);
  grads.d_ie = FeatureMap(3, ip.height, ip.width);
  grads.d_il = FeatureMap(3, ip.height, ip.width);

  for (int c = 0; c < 3; ++c) {
    d_m3.data.col(0) += (d_fused.data.col(c).array() *
                         (f2.data.col(c) - out.content.data.col(c)).array()).matrix();
    d_f2.data.col(c) = (d_fused.data.col(c).array() * out.m3.data.col(0).array()).matrix();
    d_content.data.col(c) =
        (d_fused.data.col(c).array() * (1.0 - out.m3.data.col(0).array())).matrix();
  }
  for (int c = 0; c < 3; ++c) {
    d_m2.data.col(0) += (d_f2.data.col(c).array() *
                         (f1.data.col(c) - il.data.col(c)).array()).matrix();
    d_f1.data.col(c) = (d_f2.data.col(c).array() * out.m2.data.col(0).array()).matrix();
    grads.d_il.data.col(c) =
        (d_f2.data.col(c).array() * (1.0 - out.m2.data.col(0).array())).matrix();
  }
  for (int c = 0; c < 3; ++c) {
    d_m1.data.col(0) += (d_f1.data.col(c).array() *
                         (ip.data.col(c) - ie.data.col(c)).array()).matrix();
    grads.d_ip.data.col(c) = (d_f1.data.col(c).array() * out.m1.data.col(0).array()).matrix();
    grads.d_ie.data.col(c) =
        (d_f1.data.col(c).array() * (1.0 - out.m1.data.col(0).array())).matrix();
  }

  // Heads (overridden masks are constants: no gradient flows through them).
  const FeatureMap& head_src = trace.dec[0];
  FeatureMap d_head_src(head_src.channels, head_src.height, head_src.width);
  auto head_back = [&](const FeatureMap& mask_out, const FeatureMap& d_mask,
                       const ConvLayer<double>& layer, ConvLayer<double>& g_layer,
                       bool active) {
    if (!active) return;
    FeatureMap d_pre = sigmoid_backward(mask_out, d_mask);
    auto g = conv_backward(head_src, layer, d_pre);
    g_layer.accumulate(g.d_kernel_t, g.d_bias);
    d_head_src.data += g.d_in.data;
  };
  head_back(out.m1, d_m1, w.head_m1, grads.params.head_m1, !trace.overrides.m1.has_value());
  head_back(out.m2, d_m2, w.head_m2, grads.params.head_m2, !trace.overrides.m2.has_value());
  head_back(out.m3, d_m3, w.head_m3, grads.params.head_m3, !trace.overrides.m3.has_value());
  head_back(out.content, d_content, w.head_content, grads.params.head_content, true);

  // Decoder, finest to coarsest; each level feeds d into the one above it.
  std::vector<FeatureMap> d_dec(static_cast<std::size_t>(levels));
  std::vector<FeatureMap> d_updated(static_cast<std::size_t>(levels));
  d_dec[0] = std::move(d_head_src);
  for (int i = 0; i < levels; ++i) {
    const auto si = static_cast<std::size_t>(i);
    FeatureMap d_pre = leaky_relu_backward(trace.dec[si], d_dec[si], kLeakySlope);
    auto g = conv_backward(trace.dec_in[si], w.decoder[si], d_pre);
    grads.params.decoder[si].accumulate(g.d_kernel_t, g.d_bias);
    if (i == levels - 1) {
      d_updated[si] = std::move(g.d_in);
    } else {
      const int up_ch = w.decoder_channels(i + 1);
      const FeatureMap& skip = trace.updated[si];
      FeatureMap d_up = slice_channels(g.d_in, 0, up_ch);
      d_updated[si] = slice_channels(g.d_in, up_ch, skip.channels);
      const FeatureMap& above = trace.dec[si + 1];
      FeatureMap d_above = upsample_nearest_backward(d_up, above.height, above.width);
      if (d_dec[si + 1].channels == 0) {
        d_dec[si + 1] = std::move(d_above);
      } else {
        d_dec[si + 1].data += d_above.data;
      }
    }
  }

  // Feature-update units, finest to coarsest; each adds gradient to the
  // coarser updated feature it consumed.
  std::vector<FeatureMap> d_enc(static_cast<std::size_t>(levels));
  for (int m = 0; m < levels - 1; ++m) {
    const auto sm = static_cast<std::size_t>(m);
    const FeatureMap& g_u = d_updated[sm];
    const FeatureMap& z = trace.fuu_z[sm];
    const FeatureMap& q = trace.fuu_q[sm];
    const FeatureMap& r = trace.fuu_r[sm];

    FeatureMap d_q = g_u;
    d_q.data.array() *= z.data.array();
    FeatureMap d_z = g_u;
    d_z.data.array() *= (q.data.array() - r.data.array());
    FeatureMap d_r = g_u;
    d_r.data.array() *= (1.0 - z.data.array());

    FeatureMap d_pre_z = sigmoid_backward(z, d_z);
    FeatureMap d_pre_q = tanh_backward(q, d_q);
    FeatureMap d_pre_r = tanh_backward(r, d_r);

    const FeatureMap& joined = trace.fuu_in[sm];
    const FuuWeights& u = w.fuu[sm];
    auto gz = conv_backward(joined, u.gate, d_pre_z);
    auto gq = conv_backward(joined, u.cand_q, d_pre_q);
    auto gr = conv_backward(joined, u.cand_r, d_pre_r);
    grads.params.fuu[sm].gate.accumulate(gz.d_kernel_t, gz.d_bias);
    grads.params.fuu[sm].cand_q.accumulate(gq.d_kernel_t, gq.d_bias);
    grads.params.fuu[sm].cand_r.accumulate(gr.d_kernel_t, gr.d_bias);

    FeatureMap d_joined = gz.d_in;
    d_joined.data += gq.d_in.data;
    d_joined.data += gr.d_in.data;

    const FeatureMap& fine = trace.enc[sm];
    d_enc[sm] = slice_channels(d_joined, 0, fine.channels);
    FeatureMap d_up = slice_channels(d_joined, fine.channels, d_joined.channels - fine.channels);
    const FeatureMap& coarse = trace.updated[sm + 1];
    FeatureMap d_coarse = upsample_nearest_backward(d_up, coarse.height, coarse.width);
    d_updated[sm + 1].data += d_coarse.data;
  }
  // Deepest level: updated feature is the encoder feature.
  if (d_enc[static_cast<std::size_t>(levels - 1)].channels == 0) {
    d_enc[static_cast<std::size_t>(levels - 1)] = d_updated[static_cast<std::size_t>(levels - 1)];
  } else {
    d_enc[static_cast<std::size_t>(levels - 1)].data +=
        d_updated[static_cast<std::size_t>(levels - 1)].data;
  }

  // Encoder, coarsest to finest.
  FeatureMap d_x;
  for (int i = levels - 1; i >= 0; --i) {
    const auto si = static_cast<std::size_t>(i);
    FeatureMap d_pre = leaky_relu_backward(trace.enc[si], d_enc[si], kLeakySlope);
    const FeatureMap& in = (i == 0) ? trace.input : trace.enc[si - 1];
    auto g = conv_backward(in, w.encoder[si], d_pre);
    grads.params.encoder[si].accumulate(g.d_kernel_t, g.d_bias);
    if (i == 0) {
      d_x = std::move(g.d_in);
    } else {
      d_enc[si - 1].data += g.d_in.data;
    }
  }

  grads.d_ip.data += d_x.data.leftCols(3);
  grads.d_ie.data += d_x.data.middleCols(3, 3);
  grads.d_il.data += d_x.data.rightCols(3);
  return grads;
}

// ------------------------------------------------------------------- train

namespace {

struct SampleFeatures {
  FeatureMap ip, ie, il, gt;
  OcclusionMask occ;
  FeaturePyramid gt_pyramid;
};

struct SampleGrads {
  RefinerWeights params;
  StepLoss loss;
  FeatureMap fused;                 // detached output for the critic step
  std::vector<FeatureMap> d_trace;  // critic trace on the fake
};

}  // namespace

TrainResult train_refiner(const std::vector<TrainSample>& dataset, const PipelineConfig& cfg,
                          std::uint64_t seed, int jobs, const RefinerWeights* initial) {
  if (dataset.empty()) throw InputError("train: dataset is empty");
  cfg.validate();

  const int n = static_cast<int>(dataset.size());
  for (const auto& s : dataset) {
    if (s.ip.width() != s.gt.width() || s.ip.height() != s.gt.height() ||
        s.ie.width() != s.gt.width() || s.il.width() != s.gt.width() ||
        s.occ.width() != s.gt.width() || s.occ.height() != s.gt.height()) {
      throw InputError("train: sample dimensions are inconsistent");
    }
  }

  Rng rng(seed);
  RefinerWeights weights = initial ? *initial
                                   : RefinerWeights::init(RefinerWeights::default_plan(), 3, rng);

  const ConvPyramidExtractor extractor;
  Discriminator critic = Discriminator::init(seed ^ 0xD15C0000u);

  std::vector<SampleFeatures> samples;
  samples.reserve(dataset.size());
  for (const auto& s : dataset) {
    SampleFeatures f;
    f.ip = frame_to_feature(s.ip);
    f.ie = frame_to_feature(s.ie);
    f.il = frame_to_feature(s.il);
    f.gt = frame_to_feature(s.gt);
    f.occ = s.occ;
    f.gt_pyramid = extractor.forward(f.gt);
    samples.push_back(std::move(f));
  }

  const Eigen::Index n_params = weights.param_count();
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(n_params);
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(n_params);
  const Eigen::Index n_critic = critic.param_count();
  Eigen::VectorXd critic_m = Eigen::VectorXd::Zero(n_critic);
  Eigen::VectorXd critic_v = Eigen::VectorXd::Zero(n_critic);
  constexpr double kAdamEps = 1e-8;

  const int batch = std::min(cfg.batch_size, n);
  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(cfg.train_steps));

  for (int step = 0; step < cfg.train_steps; ++step) {
    std::vector<int> idx(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
      idx[static_cast<std::size_t>(b)] = (step * batch + b) % n;
    }

    std::vector<SampleGrads> per_sample(static_cast<std::size_t>(batch));
    auto run_sample = [&](int b) {
      const SampleFeatures& s = samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
      SampleGrads& out = per_sample[static_cast<std::size_t>(b)];

      RefinerTrace trace;
      RefinerOutput ro = refiner_forward(s.ip, s.ie, s.il, weights, &trace);

      const double lc = content_loss(ro.fused, s.gt, s.occ, cfg.alpha);
      FeatureMap d_fused = content_loss_grad(ro.fused, s.gt, s.occ, cfg.alpha);
      d_fused.data *= cfg.lambda_content / batch;

      std::vector<FeatureMap> ext_trace;
      const FeaturePyramid pp = extractor.forward(ro.fused, &ext_trace);
      double lper = 0.0;
      {
        FeaturePyramid d_pyr;
        d_pyr.reserve(pp.size());
        for (std::size_t j = 0; j < pp.size(); ++j) {
          const double nj = static_cast<double>(pp[j].data.size());
          lper += (s.gt_pyramid[j].data - pp[j].data).array().abs().sum() / nj;
          FeatureMap d = pp[j];
          for (Eigen::Index i = 0; i < d.data.size(); ++i) {
            const double diff = pp[j].data(i) - s.gt_pyramid[j].data(i);
            d.data(i) = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / nj;
          }
          d_pyr.push_back(std::move(d));
        }
        FeatureMap d_from_per = extractor.backward(ext_trace, d_pyr);
        d_fused.data += (cfg.lambda_perceptual / batch) * d_from_per.data;
      }

      double d_fake = 0.0;
      if (cfg.adversarial) {
        std::vector<FeatureMap> critic_trace;
        d_fake = critic.forward(ro.fused, &critic_trace);
        FeatureMap d_from_adv =
            critic.backward(critic_trace, cfg.lambda_adversarial / batch);
        d_fused.data += d_from_adv.data;
        out.d_trace = std::move(critic_trace);
      }

      RefinerGrads rg = refiner_backward(trace, weights, d_fused);
      out.params = std::move(rg.params);
      out.loss.content = lc;
      out.loss.perceptual = lper;
      out.loss.adversarial = d_fake;  // completed below with the real term
      out.fused = std::move(ro.fused);
    };

    const int workers = std::max(1, std::min(jobs, batch));
    if (workers == 1) {
      for (int b = 0; b < batch; ++b) run_sample(b);
    } else {
      std::vector<std::thread> pool;
      std::atomic<int> next{0};
      for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&]() {
          for (int b = next.fetch_add(1); b < batch; b = next.fetch_add(1)) run_sample(b);
        });
      }
      for (auto& t : pool) t.join();
    }

    StepLoss loss;
    RefinerWeights grad_sum = RefinerWeights::make(weights.plan, weights.ksize);
    double mean_fake = 0.0;
    for (int b = 0; b < batch; ++b) {
      const SampleGrads& sg = per_sample[static_cast<std::size_t>(b)];
      grad_sum.add_scaled(sg.params, 1.0);
      loss.content += sg.loss.content / batch;
      loss.perceptual += sg.loss.perceptual / batch;
      mean_fake += sg.loss.adversarial / batch;
    }
    if (cfg.adversarial) {
      double mean_real = 0.0;
      for (int b = 0; b < batch; ++b) {
        const SampleFeatures& s =
            samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
        mean_real += critic.forward(s.gt) / batch;
      }
      loss.adversarial = mean_fake - mean_real;
    }
    loss.total = total_loss(loss.content, loss.perceptual, loss.adversarial,
                            cfg.lambda_content, cfg.lambda_perceptual,
                            cfg.adversarial ? cfg.lambda_adversarial : 0.0);
    if (!std::isfinite(loss.total)) {
      throw NumericError("train: non-finite loss at step " + std::to_string(step));
    }
    result.trace.push_back(loss);

    // Adam update of the refiner.
    {
      const double t = static_cast<double>(step + 1);
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
      Eigen::Index i = 0;
      std::vector<double*> grad_ptrs;
      grad_ptrs.reserve(static_cast<std::size_t>(n_params));
      grad_sum.visit_params([&](double& g) { grad_ptrs.push_back(&g); });
      weights.visit_params([&](double& p) {
        const double g = *grad_ptrs[static_cast<std::size_t>(i)];
        adam_m(i) = cfg.adam_beta1 * adam_m(i) + (1.0 - cfg.adam_beta1) * g;
        adam_v(i) = cfg.adam_beta2 * adam_v(i) + (1.0 - cfg.adam_beta2) * g * g;
        const double mhat = adam_m(i) / bc1;
        const double vhat = adam_v(i) / bc2;
        p -= cfg.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
        ++i;
      });
    }

    // Alternating critic step: ascend the adversarial objective so the
    // critic opposes the generator's descent direction.
    if (cfg.adversarial) {
      Discriminator critic_grads = critic;
      critic_grads.c1.kernel_t.setZero();
      critic_grads.c1.bias.setZero();
      critic_grads.c2.kernel_t.setZero();
      critic_grads.c2.bias.setZero();
      for (int b = 0; b < batch; ++b) {
        const SampleGrads& sg = per_sample[static_cast<std::size_t>(b)];
        critic.backward(sg.d_trace, 1.0 / batch, &critic_grads);
        const SampleFeatures& s =
            samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
        std::vector<FeatureMap> real_trace;
        critic.forward(s.gt, &real_trace);
        critic.backward(real_trace, -1.0 / batch, &critic_grads);
      }
      const double t = static_cast<double>(step + 1);
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
      Eigen::Index i = 0;
      std::vector<double*> grad_ptrs;
      critic_grads.visit_params([&](double& g) { grad_ptrs.push_back(&g); });
      critic.visit_params([&](double& p) {
        const double g = *grad_ptrs[static_cast<std::size_t>(i)];
        critic_m(i) = cfg.adam_beta1 * critic_m(i) + (1.0 - cfg.adam_beta1) * g;
        critic_v(i) = cfg.adam_beta2 * critic_v(i) + (1.0 - cfg.adam_beta2) * g * g;
        const double mhat = critic_m(i) / bc1;
        const double vhat = critic_v(i) / bc2;
        p += cfg.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
        ++i;
      });
    }
  }

  result.weights = std::move(weights);
  return result;
}

}  // namespace sconv
