// stereoconv: convert monocular frame sequences plus disparity maps into
// right-view stereo frames, with every pipeline stage exposed as a
// subcommand.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "sconv/config.hpp"
#include "sconv/disparity.hpp"
#include "sconv/errors.hpp"
#include "sconv/imageio.hpp"
#include "sconv/inpaint.hpp"
#include "sconv/metrics.hpp"
#include "sconv/pipeline.hpp"
#include "sconv/refiner.hpp"
#include "sconv/warp.hpp"

namespace fs = std::filesystem;
using namespace sconv;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<std::string> overrides;  // key=value pairs

  PipelineConfig load() const {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
      apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

std::vector<TrainSample> load_train_dataset(const fs::path& dir) {
  std::vector<TrainSample> dataset;
  for (int i = 0;; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%06d_ip.png", i);
    if (!fs::exists(dir / name)) break;
    auto piece = [&](const char* suffix) {
      std::snprintf(name, sizeof(name), "%06d_%s.png", i, suffix);
      return read_frame(dir / name);
    };
    TrainSample s;
    s.ip = piece("ip");
    s.ie = piece("ie");
    s.il = piece("il");
    s.gt = piece("gt");
    std::snprintf(name, sizeof(name), "%06d_mask.png", i);
    OcclusionMask occ;
    occ.bits = read_mask(dir / name);
    s.occ = std::move(occ);
    dataset.push_back(std::move(s));
  }
  if (dataset.empty()) {
    throw InputError("train: no samples (expected %06d_{ip,ie,il,gt,mask}.png) in " +
                     dir.string());
  }
  return dataset;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stereo conversion pipeline"};
  app.require_subcommand(1);

  GlobalArgs global;
  app.add_option("--config", global.config_path, "pipeline config file (key = value lines)");
  app.add_option("--seed", global.seed, "deterministic seed")->capture_default_str();
  app.add_option("--jobs", global.jobs, "worker threads")->capture_default_str();
  app.add_option("--set", global.overrides, "config override key=value (repeatable)");

  // ---------------------------------------------------------------- warp
  auto* warp_cmd = app.add_subcommand("warp", "forward-warp one frame");
  std::string warp_frame, warp_disp, warp_out, warp_mask_out;
  warp_cmd->add_option("--frame", warp_frame)->required();
  warp_cmd->add_option("--disparity", warp_disp)->required();
  warp_cmd->add_option("--out", warp_out)->required();
  warp_cmd->add_option("--mask-out", warp_mask_out);
  warp_cmd->callback([&]() {
    const Frame frame = read_frame(warp_frame);
    const DisparityMap disparity = read_disparity(warp_disp);
    WarpResult wr = forward_warp(frame, disparity);
    write_frame(wr.warped, warp_out);
    if (!warp_mask_out.empty()) write_mask(wr.mask.bits, warp_mask_out);
    const HoleStats hs = hole_stats(wr.mask);
    std::printf("holes %ld largest_run %d\n", hs.count, hs.largest_run);
  });

  // ----------------------------------------------------- expand-disparity
  auto* expand_cmd = app.add_subcommand("expand-disparity", "disparity expansion (PFM in/out)");
  std::string exp_in, exp_out;
  int exp_k = -1;
  float exp_lambda = -1.0f, exp_sigma = -1.0f, exp_low = -1.0f, exp_high = -1.0f;
  expand_cmd->add_option("--in", exp_in)->required();
  expand_cmd->add_option("--out", exp_out)->required();
  expand_cmd->add_option("--k", exp_k, "expansion radius (px)");
  expand_cmd->add_option("--lambda", exp_lambda, "disparity contrast threshold");
  expand_cmd->add_option("--canny-sigma", exp_sigma);
  expand_cmd->add_option("--canny-low", exp_low);
  expand_cmd->add_option("--canny-high", exp_high);
  expand_cmd->callback([&]() {
    PipelineConfig cfg = global.load();
    if (exp_k > 0) cfg.expansion_radius = exp_k;
    if (exp_lambda > 0) cfg.expansion_threshold = exp_lambda;
    if (exp_sigma > 0) cfg.canny.sigma = exp_sigma;
    if (exp_low > 0) cfg.canny.low = exp_low;
    if (exp_high > 0) cfg.canny.high = exp_high;
    cfg.validate();
    const DisparityMap in = read_disparity(exp_in);
    const DisparityMap out = expand_disparity(in, cfg.expansion_radius, cfg.expansion_threshold,
                                              nullptr, cfg.canny, cfg.expansion_mirror);
    write_disparity(out, exp_out);
  });

  // -------------------------------------------------------------- inpaint
  auto* inpaint_cmd = app.add_subcommand("inpaint", "run one inpainting branch");
  std::string inp_frame, inp_disp, inp_out, inp_branch = "poly", inp_external;
  int inp_index = 0;
  inpaint_cmd->add_option("--frame", inp_frame)->required();
  inpaint_cmd->add_option("--disparity", inp_disp)->required();
  inpaint_cmd->add_option("--out", inp_out)->required();
  inpaint_cmd->add_option("--branch", inp_branch, "poly|de|fallback|external");
  inpaint_cmd->add_option("--external-dir", inp_external);
  inpaint_cmd->add_option("--index", inp_index, "frame index for --branch external");
  inpaint_cmd->callback([&]() {
    const PipelineConfig cfg = global.load();
    const Frame frame = read_frame(inp_frame);
    const DisparityMap disparity = read_disparity(inp_disp);
    Frame out;
    if (inp_branch == "poly") {
      out = inpaint_poly(frame, disparity);
    } else if (inp_branch == "de") {
      out = inpaint_de(frame, disparity, cfg);
    } else if (inp_branch == "fallback") {
      WarpResult wr = forward_warp(frame, disparity);
      out = inpaint_fallback(wr.warped, wr.mask);
    } else if (inp_branch == "external") {
      if (inp_external.empty()) throw ConfigError("--branch external requires --external-dir");
      out = load_external_inpaint(inp_external, inp_index, frame.width(), frame.height());
    } else {
      throw ConfigError("unknown branch '" + inp_branch + "'");
    }
    write_frame(out, inp_out);
  });

  // --------------------------------------------------------------- refine
  auto* refine_cmd = app.add_subcommand("refine", "fuse three branch outputs");
  std::string ref_ip, ref_ie, ref_il, ref_weights, ref_out, ref_masks_dir;
  refine_cmd->add_option("--ip", ref_ip)->required();
  refine_cmd->add_option("--ie", ref_ie)->required();
  refine_cmd->add_option("--il", ref_il)->required();
  refine_cmd->add_option("--weights", ref_weights)->required();
  refine_cmd->add_option("--out", ref_out)->required();
  refine_cmd->add_option("--emit-masks", ref_masks_dir, "also write M1-M3 and content");
  refine_cmd->callback([&]() {
    const RefinerWeights w = load_weights(ref_weights);
    const RefinerOutput out =
        refiner_forward(read_frame(ref_ip), read_frame(ref_ie), read_frame(ref_il), w);
    write_frame(feature_to_frame(out.fused), ref_out);
    if (!ref_masks_dir.empty()) {
      fs::create_directories(ref_masks_dir);
      auto write_gray = [&](const FeatureMap& m, const char* name) {
        Frame g(m.width, m.height);
        for (int y = 0; y < m.height; ++y) {
          for (int x = 0; x < m.width; ++x) {
            const float v = static_cast<float>(std::clamp(m.at(0, y, x), 0.0, 1.0));
            g.at(0, y, x) = g.at(1, y, x) = g.at(2, y, x) = v;
          }
        }
        write_frame(g, fs::path(ref_masks_dir) / name);
      };
      write_gray(out.m1, "m1.png");
      write_gray(out.m2, "m2.png");
      write_gray(out.m3, "m3.png");
      write_frame(feature_to_frame(out.content), fs::path(ref_masks_dir) / "content.png");
    }
  });

  // ---------------------------------------------------------------- train
  auto* train_cmd = app.add_subcommand("train", "overfit the refiner on a sample directory");
  std::string train_dir, train_out, train_trace;
  int train_steps_flag = -1;
  bool train_no_adv = false;
  train_cmd->add_option("--data", train_dir, "directory of %06d_{ip,ie,il,gt,mask}.png")->required();
  train_cmd->add_option("--out", train_out, "weights output path")->required();
  train_cmd->add_option("--steps", train_steps_flag);
  train_cmd->add_option("--trace-out", train_trace, "loss trace file");
  train_cmd->add_flag("--no-adversarial", train_no_adv);
  train_cmd->callback([&]() {
    PipelineConfig cfg = global.load();
    if (train_steps_flag >= 0) cfg.train_steps = train_steps_flag;
    if (train_no_adv) cfg.adversarial = false;
    cfg.validate();
    const auto dataset = load_train_dataset(train_dir);
    const TrainResult result = train_refiner(dataset, cfg, global.seed, global.jobs);
    save_weights(result.weights, train_out);
    if (!train_trace.empty()) {
      std::ofstream out(train_trace);
      out << "step total content perceptual adversarial\n";
      out.precision(12);
      for (std::size_t i = 0; i < result.trace.size(); ++i) {
        const StepLoss& l = result.trace[i];
        out << i << " " << l.total << " " << l.content << " " << l.perceptual << " "
            << l.adversarial << "\n";
      }
    }
    if (!result.trace.empty()) {
      std::printf("steps %zu first_loss %.6f last_loss %.6f\n", result.trace.size(),
                  result.trace.front().total, result.trace.back().total);
    }
  });

  // -------------------------------------------------------------- metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "MAE/PSNR/SSIM over two directories");
  std::string met_pred, met_gt, met_out;
  int met_stride = -1;
  metrics_cmd->add_option("--pred", met_pred)->required();
  metrics_cmd->add_option("--gt", met_gt)->required();
  metrics_cmd->add_option("--stride", met_stride, "evaluate every Nth frame");
  metrics_cmd->add_option("--out", met_out, "also write the table to a file");
  metrics_cmd->callback([&]() {
    PipelineConfig cfg = global.load();
    if (met_stride > 0) cfg.eval_stride = met_stride;
    cfg.validate();
    const SequenceScore score = evaluate_sequence(met_pred, met_gt, cfg.eval_stride);
    const std::string report = format_sequence_report(score);
    std::fputs(report.c_str(), stdout);
    if (!met_out.empty()) {
      std::ofstream out(met_out);
      out << report;
    }
  });

  // -------------------------------------------------------------- compose
  auto* compose_cmd = app.add_subcommand("compose", "compose SBS or anaglyph");
  std::string comp_left, comp_right, comp_out, comp_mode = "sbs";
  compose_cmd->add_option("--left", comp_left)->required();
  compose_cmd->add_option("--right", comp_right)->required();
  compose_cmd->add_option("--out", comp_out)->required();
  compose_cmd->add_option("--mode", comp_mode, "sbs|anaglyph");
  compose_cmd->callback([&]() {
    const Frame left = read_frame(comp_left);
    const Frame right = read_frame(comp_right);
    if (comp_mode == "sbs") {
      write_frame(compose_sbs(left, right), comp_out);
    } else if (comp_mode == "anaglyph") {
      write_frame(compose_anaglyph(left, right), comp_out);
    } else {
      throw ConfigError("unknown compose mode '" + comp_mode + "'");
    }
  });

  // ------------------------------------------------------------ split-sbs
  auto* split_cmd = app.add_subcommand("split-sbs", "split a side-by-side frame");
  std::string split_in, split_left, split_right;
  split_cmd->add_option("--in", split_in)->required();
  split_cmd->add_option("--left-out", split_left)->required();
  split_cmd->add_option("--right-out", split_right)->required();
  split_cmd->callback([&]() {
    const auto [left, right] = split_sbs(read_frame(split_in));
    write_frame(left, split_left);
    write_frame(right, split_right);
  });

  // ------------------------------------------------------------- manifest
  auto* manifest_cmd = app.add_subcommand("manifest", "deterministic train/test split");
  std::string man_root, man_out;
  int man_train = 955, man_test = 45;
  manifest_cmd->add_option("--root", man_root)->required();
  manifest_cmd->add_option("--out", man_out)->required();
  manifest_cmd->add_option("--train", man_train)->capture_default_str();
  manifest_cmd->add_option("--test", man_test)->capture_default_str();
  manifest_cmd->callback([&]() {
    make_manifest(man_root, man_train, man_test, global.seed, man_out);
  });

  // -------------------------------------------------------------- convert
  auto* convert_cmd = app.add_subcommand("convert", "full pipeline over a frame directory");
  std::string conv_frames, conv_disp, conv_out, conv_variant = "full", conv_weights,
              conv_external;
  bool conv_sbs = false, conv_anaglyph = false, conv_poison = false;
  convert_cmd->add_option("--frames", conv_frames)->required();
  convert_cmd->add_option("--disparities", conv_disp)->required();
  convert_cmd->add_option("--out", conv_out)->required();
  convert_cmd->add_option("--variant", conv_variant, "poly|dl|dl+de|full");
  convert_cmd->add_option("--weights", conv_weights);
  convert_cmd->add_option("--external-dir", conv_external);
  convert_cmd->add_flag("--sbs", conv_sbs, "also write side-by-side composites");
  convert_cmd->add_flag("--anaglyph", conv_anaglyph, "also write anaglyph composites");
  convert_cmd->add_flag("--poison-check", conv_poison,
                        "verify no stage reads content under the occlusion mask");
  convert_cmd->callback([&]() {
    const PipelineConfig cfg = global.load();
    PipelineOptions opts;
    opts.jobs = global.jobs;
    opts.emit_sbs = conv_sbs;
    opts.emit_anaglyph = conv_anaglyph;
    opts.poison_check = conv_poison;
    opts.external_dir = conv_external;
    opts.weights_path = conv_weights;
    const PipelineReport report = run_pipeline(cfg, conv_frames, conv_disp, conv_out,
                                               parse_variant(conv_variant), opts);
    std::fputs(report.summary().c_str(), stdout);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
