#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "sconv/errors.hpp"
#include "sconv/image.hpp"
#include "sconv/rng.hpp"

namespace sconv {

/// Dense C x H x W tensor. Storage is (H*W) rows by C columns, column-major,
/// so each channel is one contiguous column; spatial index is y*width + x.
template <typename Scalar>
struct Tensor {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  int channels = 0;
  int height = 0;
  int width = 0;
  Mat data;

  Tensor() = default;
  Tensor(int channels_, int height_, int width_)
      : channels(channels_), height(height_), width(width_),
        data(Mat::Zero(static_cast<Eigen::Index>(height_) * width_, channels_)) {}

  static Tensor zeros(int c, int h, int w) { return Tensor(c, h, w); }

  Eigen::Index pixels() const { return static_cast<Eigen::Index>(height) * width; }

  Scalar& at(int c, int y, int x) { return data(static_cast<Eigen::Index>(y) * width + x, c); }
  Scalar at(int c, int y, int x) const { return data(static_cast<Eigen::Index>(y) * width + x, c); }

  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  void check() const {
    if (channels < 1) throw InputError("tensor: channels must be >= 1");
    if (!data.array().isFinite().all()) throw InputError("tensor: non-finite value");
  }
};

using FeatureMap = Tensor<double>;

/// 2-D convolution with square odd kernel, zero same-padding and stride 1
/// or 2. Kernel storage is (in*k*k) x out so the forward pass is one GEMM
/// against the im2col patch matrix; logical declaration order of the kernel
/// is out-major (out, in, ky, kx), followed by the bias.
template <typename Scalar>
struct ConvLayer {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  int in_channels = 0;
  int out_channels = 0;
  int ksize = 3;
  int stride = 1;
  Mat kernel_t;  // (in*k*k) x out, row index (ci*k + ky)*k + kx
  Vec bias;      // out

  static ConvLayer make(int in_ch, int out_ch, int ksize_, int stride_) {
    if (ksize_ % 2 == 0 || ksize_ < 1) throw ConfigError("conv: kernel size must be odd");
    ConvLayer l;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.ksize = ksize_;
    l.stride = stride_;
    l.kernel_t = Mat::Zero(static_cast<Eigen::Index>(in_ch) * ksize_ * ksize_, out_ch);
    l.bias = Vec::Zero(out_ch);
    return l;
  }

  /// Xavier-uniform init; values snapped to f32 so the on-disk representation
  /// round-trips exactly.
  static ConvLayer init(int in_ch, int out_ch, int ksize_, int stride_, Rng& rng) {
    ConvLayer l = make(in_ch, out_ch, ksize_, stride_);
    const double fan_in = static_cast<double>(in_ch) * ksize_ * ksize_;
    const double fan_out = static_cast<double>(out_ch) * ksize_ * ksize_;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index o = 0; o < l.kernel_t.cols(); ++o) {
      for (Eigen::Index i = 0; i < l.kernel_t.rows(); ++i) {
        l.kernel_t(i, o) = static_cast<Scalar>(
            static_cast<float>(rng.uniform(-limit, limit)));
      }
    }
    return l;
  }

  Eigen::Index param_count() const { return kernel_t.size() + bias.size(); }

  /// Accumulates gradients when this layer instance holds gradient storage.
  void accumulate(const Mat& d_kernel_t, const Vec& d_bias) {
    kernel_t += d_kernel_t;
    bias += d_bias;
  }

  /// Visits every parameter in declaration order: kernel (out, in, ky, kx),
  /// then bias. The order defines the serialized layout and the optimizer's
  /// flat indexing.
  template <typename F>
  void visit_params(F&& f) {
    for (Eigen::Index o = 0; o < kernel_t.cols(); ++o) {
      for (Eigen::Index i = 0; i < kernel_t.rows(); ++i) f(kernel_t(i, o));
    }
    for (Eigen::Index o = 0; o < bias.size(); ++o) f(bias(o));
  }
  template <typename F>
  void visit_params(F&& f) const {
    for (Eigen::Index o = 0; o < kernel_t.cols(); ++o) {
      for (Eigen::Index i = 0; i < kernel_t.rows(); ++i) f(kernel_t(i, o));
    }
    for (Eigen::Index o = 0; o < bias.size(); ++o) f(bias(o));
  }
};

template <typename Scalar>
inline int conv_out_extent(int in, int ksize, int stride) {
  const int pad = (ksize - 1) / 2;
  return (in + 2 * pad - ksize) / stride + 1;
}

/// Builds the im2col patch matrix: one row per output pixel, one column per
/// (in-channel, ky, kx) tap; out-of-raster taps contribute zero.
template <typename Scalar>
typename Tensor<Scalar>::Mat im2col(const Tensor<Scalar>& in, int ksize, int stride) {
  const int pad = (ksize - 1) / 2;
  const int out_h = conv_out_extent<Scalar>(in.height, ksize, stride);
  const int out_w = conv_out_extent<Scalar>(in.width, ksize, stride);
  typename Tensor<Scalar>::Mat patches =
      Tensor<Scalar>::Mat::Zero(static_cast<Eigen::Index>(out_h) * out_w,
                                static_cast<Eigen::Index>(in.channels) * ksize * ksize);
  for (int ci = 0; ci < in.channels; ++ci) {
    for (int ky = 0; ky < ksize; ++ky) {
      for (int kx = 0; kx < ksize; ++kx) {
        const Eigen::Index col = (static_cast<Eigen::Index>(ci) * ksize + ky) * ksize + kx;
        Eigen::Index p = 0;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in.height) { p += out_w; continue; }
          for (int ox = 0; ox < out_w; ++ox, ++p) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= in.width) continue;
            patches(p, col) = in.data(static_cast<Eigen::Index>(iy) * in.width + ix, ci);
          }
        }
      }
    }
  }
  return patches;
}

template <typename Scalar>
Tensor<Scalar> conv_forward(const Tensor<Scalar>& in, const ConvLayer<Scalar>& layer) {
  if (in.channels != layer.in_channels) {
    throw InputError("conv: channel-plan mismatch (" + std::to_string(in.channels) + " vs " +
                     std::to_string(layer.in_channels) + ")");
  }
  const int out_h = conv_out_extent<Scalar>(in.height, layer.ksize, layer.stride);
  const int out_w = conv_out_extent<Scalar>(in.width, layer.ksize, layer.stride);
  Tensor<Scalar> out(layer.out_channels, out_h, out_w);
  out.data.noalias() = im2col(in, layer.ksize, layer.stride) * layer.kernel_t;
  out.data.rowwise() += layer.bias.transpose();
  return out;
}

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> d_in;
  typename ConvLayer<Scalar>::Mat d_kernel_t;
  typename ConvLayer<Scalar>::Vec d_bias;
};

template <typename Scalar>
ConvGrads<Scalar> conv_backward(const Tensor<Scalar>& in, const ConvLayer<Scalar>& layer,
                                const Tensor<Scalar>& d_out) {
  const int ksize = layer.ksize;
  const int stride = layer.stride;
  const int pad = (ksize - 1) / 2;
  auto patches = im2col(in, ksize, stride);

  ConvGrads<Scalar> g;
  g.d_kernel_t.noalias() = patches.transpose() * d_out.data;
  g.d_bias = d_out.data.colwise().sum().transpose();

  typename Tensor<Scalar>::Mat d_patches;
  d_patches.noalias() = d_out.data * layer.kernel_t.transpose();

  g.d_in = Tensor<Scalar>(in.channels, in.height, in.width);
  for (int ci = 0; ci < in.channels; ++ci) {
    for (int ky = 0; ky < ksize; ++ky) {
      for (int kx = 0; kx < ksize; ++kx) {
        const Eigen::Index col = (static_cast<Eigen::Index>(ci) * ksize + ky) * ksize + kx;
        Eigen::Index p = 0;
        for (int oy = 0; oy < d_out.height; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in.height) { p += d_out.width; continue; }
          for (int ox = 0; ox < d_out.width; ++ox, ++p) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= in.width) continue;
            g.d_in.data(static_cast<Eigen::Index>(iy) * in.width + ix, ci) += d_patches(p, col);
          }
        }
      }
    }
  }
  return g;
}

// ------------------------------------------------------------- activations

template <typename Scalar>
void leaky_relu_inplace(Tensor<Scalar>& t, Scalar slope) {
  t.data = t.data.array().max(t.data.array() * slope).matrix();
}

/// Derivative keyed off the forward output: out >= 0 selects the identity
/// branch (slope > 0 keeps the sign of the pre-activation).
template <typename Scalar>
Tensor<Scalar> leaky_relu_backward(const Tensor<Scalar>& out, const Tensor<Scalar>& d_out,
                                   Scalar slope) {
  Tensor<Scalar> g = d_out;
  g.data.array() *=
      (out.data.array() >= Scalar(0)).template cast<Scalar>() * (Scalar(1) - slope) + slope;
  return g;
}

template <typename Scalar>
void sigmoid_inplace(Tensor<Scalar>& t) {
  t.data = (Scalar(1) / (Scalar(1) + (-t.data.array()).exp())).matrix();
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& out, const Tensor<Scalar>& d_out) {
  Tensor<Scalar> g = d_out;
  g.data.array() *= out.data.array() * (Scalar(1) - out.data.array());
  return g;
}

template <typename Scalar>
void tanh_inplace(Tensor<Scalar>& t) {
  t.data = t.data.array().tanh().matrix();
}

template <typename Scalar>
Tensor<Scalar> tanh_backward(const Tensor<Scalar>& out, const Tensor<Scalar>& d_out) {
  Tensor<Scalar> g = d_out;
  g.data.array() *= Scalar(1) - out.data.array().square();
  return g;
}

// -------------------------------------------------------------- resampling

/// Nearest-neighbor upsample to (out_h, out_w); requires the input to be the
/// ceil-halved grid, out(y, x) = in(y/2, x/2).
template <typename Scalar>
Tensor<Scalar> upsample_nearest(const Tensor<Scalar>& in, int out_h, int out_w) {
  if (in.height != (out_h + 1) / 2 || in.width != (out_w + 1) / 2) {
    throw InputError("upsample: input must be the ceil-halved grid of the target");
  }
  Tensor<Scalar> out(in.channels, out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      out.data.row(static_cast<Eigen::Index>(y) * out_w + x) =
          in.data.row(static_cast<Eigen::Index>(y / 2) * in.width + x / 2);
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest_backward(const Tensor<Scalar>& d_out, int in_h, int in_w) {
  Tensor<Scalar> g(d_out.channels, in_h, in_w);
  for (int y = 0; y < d_out.height; ++y) {
    for (int x = 0; x < d_out.width; ++x) {
      g.data.row(static_cast<Eigen::Index>(y / 2) * in_w + x / 2) +=
          d_out.data.row(static_cast<Eigen::Index>(y) * d_out.width + x);
    }
  }
  return g;
}

// ------------------------------------------------------------ channel glue

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.height != b.height || a.width != b.width) {
    throw InputError("concat: spatial dimensions differ");
  }
  Tensor<Scalar> out(a.channels + b.channels, a.height, a.width);
  out.data.leftCols(a.channels) = a.data;
  out.data.rightCols(b.channels) = b.data;
  return out;
}

template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& t, int first, int count) {
  Tensor<Scalar> out(count, t.height, t.width);
  out.data = t.data.middleCols(first, count);
  return out;
}

// ------------------------------------------------------- frame conversion

inline FeatureMap frame_to_feature(const Frame& f) {
  FeatureMap t(3, f.height(), f.width());
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) t.at(c, y, x) = static_cast<double>(f.at(c, y, x));
    }
  }
  return t;
}

inline Frame feature_to_frame(const FeatureMap& t) {
  if (t.channels != 3) throw InputError("feature_to_frame: need 3 channels");
  Frame f(t.width, t.height);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < t.height; ++y) {
      for (int x = 0; x < t.width; ++x) {
        const double v = std::clamp(t.at(c, y, x), 0.0, 1.0);
        f.at(c, y, x) = static_cast<float>(v);
      }
    }
  }
  return f;
}

}  // namespace sconv
