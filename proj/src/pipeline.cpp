#include "sconv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "sconv/errors.hpp"
#include "sconv/imageio.hpp"
#include "sconv/inpaint.hpp"
#include "sconv/refiner.hpp"
#include "sconv/rng.hpp"
#include "sconv/warp.hpp"

namespace sconv {

Variant parse_variant(const std::string& name) {
  if (name == "poly") return Variant::poly;
  if (name == "dl") return Variant::dl;
  if (name == "dl+de" || name == "dl_de") return Variant::dl_de;
  if (name == "full") return Variant::full;
  throw ConfigError("unknown variant '" + name + "' (expected poly|dl|dl+de|full)");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::poly: return "poly";
    case Variant::dl: return "dl";
    case Variant::dl_de: return "dl+de";
    case Variant::full: return "full";
  }
  return "?";
}

namespace {

void poison_holes(Frame& warped, const OcclusionMask& mask) {
  for (int y = 0; y < warped.height(); ++y) {
    for (int x = 0; x < warped.width(); ++x) {
      if (!mask.bits(y, x)) continue;
      warped.at(0, y, x) = 1.0f;
      warped.at(1, y, x) = 0.0f;
      warped.at(2, y, x) = 1.0f;
    }
  }
}

/// DL-branch result: external frames when a directory is configured,
/// otherwise the deterministic diffusion fill of the warped frame.
Frame dl_branch(const Frame& frame, const DisparityMap& disparity,
                const PipelineOptions& opts, int index, bool poison) {
  WarpResult wr = forward_warp(frame, disparity);
  if (poison) poison_holes(wr.warped, wr.mask);
  if (!opts.external_dir.empty()) {
    return load_external_inpaint(opts.external_dir, index, frame.width(), frame.height());
  }
  return inpaint_fallback(wr.warped, wr.mask);
}

}  // namespace

Frame convert_frame(const Frame& frame, const DisparityMap& disparity, Variant variant,
                    const PipelineConfig& cfg, const PipelineOptions& opts, int index,
                    bool poison, const RefinerWeights* weights) {
  validate_pair(frame, disparity);
  switch (variant) {
    case Variant::poly:
      return inpaint_poly(frame, disparity);
    case Variant::dl:
      return dl_branch(frame, disparity, opts, index, poison);
    case Variant::dl_de:
      return inpaint_de(frame, disparity, cfg);
    case Variant::full: {
      RefinerWeights loaded;
      if (weights == nullptr) {
        if (opts.weights_path.empty()) {
          throw ConfigError("variant full requires refiner weights");
        }
        loaded = load_weights(opts.weights_path);
        weights = &loaded;
      }
      Frame ip = inpaint_poly(frame, disparity);
      Frame ie = inpaint_de(frame, disparity, cfg);
      Frame il = dl_branch(frame, disparity, opts, index, poison);
      RefinerOutput out = refiner_forward(ip, ie, il, *weights);
      return feature_to_frame(out.fused);
    }
  }
  throw ConfigError("unreachable variant");
}

std::string PipelineReport::summary() const {
  std::ostringstream out;
  out << "frame holes largest_run seconds\n";
  char line[128];
  for (const auto& fr : frames) {
    std::snprintf(line, sizeof(line), "%06d %ld %d %.4f\n", fr.index, fr.hole_pixels,
                  fr.largest_hole_run, fr.seconds);
    out << line;
  }
  std::snprintf(line, sizeof(line), "total %.4f s over %zu frames\n", total_seconds,
                frames.size());
  out << line;
  return out.str();
}

PipelineReport run_pipeline(const PipelineConfig& cfg,
                            const std::filesystem::path& frames_dir,
                            const std::filesystem::path& disparity_dir,
                            const std::filesystem::path& out_dir, Variant variant,
                            const PipelineOptions& opts) {
  cfg.validate();
  const auto frame_files = list_frame_sequence(frames_dir);
  const auto disp_files = list_frame_sequence(disparity_dir, ".pfm");
  if (frame_files.empty()) throw InputError("pipeline: no input frames in " + frames_dir.string());
  if (frame_files.size() != disp_files.size()) {
    throw InputError("pipeline: frame/disparity counts differ (" +
                     std::to_string(frame_files.size()) + " vs " +
                     std::to_string(disp_files.size()) + ")");
  }
  if (variant == Variant::full && opts.weights_path.empty()) {
    throw ConfigError("variant full requires --weights");
  }
  RefinerWeights loaded_weights;
  const RefinerWeights* weights = nullptr;
  if (variant == Variant::full) {
    loaded_weights = load_weights(opts.weights_path);
    weights = &loaded_weights;
  }

  std::filesystem::create_directories(out_dir / "right");
  if (opts.emit_sbs) std::filesystem::create_directories(out_dir / "sbs");
  if (opts.emit_anaglyph) std::filesystem::create_directories(out_dir / "anaglyph");

  const int n = static_cast<int>(frame_files.size());
  struct Slot {
    Frame right;
    FrameReport report;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(n));

  const auto t_start = std::chrono::steady_clock::now();
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < n && !failed.load(); i = next.fetch_add(1)) {
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const Frame frame = read_frame(frame_files[static_cast<std::size_t>(i)]);
        const DisparityMap disparity = read_disparity(disp_files[static_cast<std::size_t>(i)]);
        Frame right = convert_frame(frame, disparity, variant, cfg, opts, i, false, weights);
        if (opts.poison_check) {
          const Frame poisoned =
              convert_frame(frame, disparity, variant, cfg, opts, i, true, weights);
          if (!right.equals(poisoned)) {
            throw NumericError("poison check failed at frame " + std::to_string(i) +
                               ": output depends on masked content");
          }
        }
        Slot& s = slots[static_cast<std::size_t>(i)];
        const WarpResult wr = forward_warp(frame, disparity);
        const HoleStats hs = hole_stats(wr.mask);
        s.report.index = i;
        s.report.hole_pixels = hs.count;
        s.report.largest_hole_run = hs.largest_run;
        s.right = std::move(right);
        s.report.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(failure_mutex);
          try { throw; } catch (const std::exception& e) { failure = e.what(); }
        }
        failed.store(true);
      }
    }
  };

  const int workers = std::max(1, std::min(opts.jobs, n));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw InputError("pipeline: " + failure);

  // Ordered output writing keeps reruns byte-identical.
  PipelineReport report;
  char name[32];
  for (int i = 0; i < n; ++i) {
    Slot& s = slots[static_cast<std::size_t>(i)];
    std::snprintf(name, sizeof(name), "%06d.png", i);
    write_frame(s.right, out_dir / "right" / name);
    if (opts.emit_sbs || opts.emit_anaglyph) {
      const Frame left = read_frame(frame_files[static_cast<std::size_t>(i)]);
      if (opts.emit_sbs) write_frame(compose_sbs(left, s.right), out_dir / "sbs" / name);
      if (opts.emit_anaglyph) {
        write_frame(compose_anaglyph(left, s.right), out_dir / "anaglyph" / name);
      }
    }
    report.frames.push_back(s.report);
  }
  report.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  std::ofstream rep(out_dir / "report.txt");
  rep << "variant " << variant_name(variant) << "\n" << report.summary();
  return report;
}

void make_manifest(const std::filesystem::path& root, int train_count, int test_count,
                   std::uint64_t seed, const std::filesystem::path& out_path) {
  if (!std::filesystem::is_directory(root)) {
    throw InputError("manifest: not a directory: " + root.string());
  }
  std::vector<std::string> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path().filename().string());
  }
  std::sort(dirs.begin(), dirs.end());
  if (static_cast<int>(dirs.size()) < train_count + test_count) {
    throw InputError("manifest: need " + std::to_string(train_count + test_count) +
                     " videos, found " + std::to_string(dirs.size()));
  }
  Rng rng(seed);
  rng.shuffle(dirs);

  std::ofstream out(out_path);
  if (!out) throw InputError("manifest: cannot write " + out_path.string());
  for (int i = 0; i < train_count; ++i) out << "train\t" << dirs[static_cast<std::size_t>(i)] << "\n";
  for (int i = 0; i < test_count; ++i) {
    out << "test\t" << dirs[static_cast<std::size_t>(train_count + i)] << "\n";
  }
}

}  // namespace sconv
