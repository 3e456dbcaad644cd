#include "sconv/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "sconv/errors.hpp"
#include "sconv/imageio.hpp"

namespace sconv {

namespace {

void require_same_dims(const Frame& a, const Frame& b, const char* who) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InputError(std::string(who) + ": dimension mismatch");
  }
}

using PlaneD = Plane<double>;

PlaneD luminance(const Frame& f) {
  return 0.299 * f.ch[0].cast<double>() + 0.587 * f.ch[1].cast<double>() +
         0.114 * f.ch[2].cast<double>();
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

/// Valid-region separable Gaussian filter: output(y, x) is the weighted sum
/// over the window anchored at (y, x), defined for anchors where the window
/// is fully interior.
PlaneD window_filter(const PlaneD& src, const Eigen::VectorXd& kernel) {
  const int r = static_cast<int>(kernel.size());
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  PlaneD horiz(h, w - r + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + r <= w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < r; ++i) acc += kernel(i) * src(y, x + i);
      horiz(y, x) = acc;
    }
  }
  PlaneD out(h - r + 1, w - r + 1);
  for (int y = 0; y + r <= h; ++y) {
    for (int x = 0; x < horiz.cols(); ++x) {
      double acc = 0.0;
      for (int i = 0; i < r; ++i) acc += kernel(i) * horiz(y + i, x);
      out(y, x) = acc;
    }
  }
  return out;
}

}  // namespace

double mae(const Frame& a, const Frame& b) {
  require_same_dims(a, b, "mae");
  double acc = 0.0;
  for (int c = 0; c < 3; ++c) {
    acc += (a.ch[c].cast<double>() - b.ch[c].cast<double>()).abs().sum();
  }
  return acc / (3.0 * a.width() * a.height());
}

double psnr(const Frame& a, const Frame& b) {
  require_same_dims(a, b, "psnr");
  double acc = 0.0;
  for (int c = 0; c < 3; ++c) {
    acc += (a.ch[c].cast<double>() - b.ch[c].cast<double>()).square().sum();
  }
  const double mse = acc / (3.0 * a.width() * a.height());
  constexpr double kCap = 99.0;
  if (mse <= 0.0) return kCap;
  return std::min(10.0 * std::log10(1.0 / mse), kCap);
}

double ssim(const Frame& a, const Frame& b) {
  require_same_dims(a, b, "ssim");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw InputError("ssim: frame smaller than the 11x11 window");
  }

  Eigen::VectorXd kernel(kSsimWindow);
  const int half = kSsimWindow / 2;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i - half);
    kernel(i) = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
  }
  kernel /= kernel.sum();

  const PlaneD x = luminance(a);
  const PlaneD y = luminance(b);
  const PlaneD mu_x = window_filter(x, kernel);
  const PlaneD mu_y = window_filter(y, kernel);
  const PlaneD xx = window_filter(x * x, kernel);
  const PlaneD yy = window_filter(y * y, kernel);
  const PlaneD xy = window_filter(x * y, kernel);

  const PlaneD sigma_x = xx - mu_x * mu_x;
  const PlaneD sigma_y = yy - mu_y * mu_y;
  const PlaneD sigma_xy = xy - mu_x * mu_y;

  const PlaneD numer = (2.0 * mu_x * mu_y + kC1) * (2.0 * sigma_xy + kC2);
  const PlaneD denom = (mu_x * mu_x + mu_y * mu_y + kC1) * (sigma_x + sigma_y + kC2);
  return (numer / denom).mean();
}

SequenceScore evaluate_sequence(const std::filesystem::path& pred_dir,
                                const std::filesystem::path& gt_dir, int stride) {
  if (stride < 1) throw ConfigError("evaluate_sequence: stride must be >= 1");
  const auto gt_files = list_frame_sequence(gt_dir);
  const auto pred_files = list_frame_sequence(pred_dir);
  if (gt_files.empty()) throw InputError("evaluate_sequence: no frames in " + gt_dir.string());

  SequenceScore score;
  for (std::size_t i = 0; i < gt_files.size(); i += static_cast<std::size_t>(stride)) {
    if (i >= pred_files.size()) {
      throw InputError("evaluate_sequence: prediction missing frame " + std::to_string(i));
    }
    const Frame gt = read_frame(gt_files[i]);
    const Frame pred = read_frame(pred_files[i]);
    if (gt.width() != pred.width() || gt.height() != pred.height()) {
      throw InputError("evaluate_sequence: dimension mismatch at frame " + std::to_string(i));
    }
    FrameScore fs;
    fs.index = static_cast<int>(i);
    fs.mae = mae(pred, gt);
    fs.psnr = psnr(pred, gt);
    fs.ssim = ssim(pred, gt);
    score.frames.push_back(fs);
  }
  const double n = static_cast<double>(score.frames.size());
  for (const auto& fs : score.frames) {
    score.mean_mae += fs.mae / n;
    score.mean_psnr += fs.psnr / n;
    score.mean_ssim += fs.ssim / n;
  }
  return score;
}

std::string format_sequence_report(const SequenceScore& score) {
  std::ostringstream out;
  out << "frame_index mae psnr ssim\n";
  char line[128];
  for (const auto& fs : score.frames) {
    std::snprintf(line, sizeof(line), "%06d %.6f %.4f %.6f\n", fs.index, fs.mae, fs.psnr,
                  fs.ssim);
    out << line;
  }
  std::snprintf(line, sizeof(line), "mean %.6f %.4f %.6f over %zu frames\n", score.mean_mae,
                score.mean_psnr, score.mean_ssim, score.frames.size());
  out << line;
  return out.str();
}

}  // namespace sconv
