// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mcdk/cli/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <regex>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcdk/core/tns.hpp"
#include "mcdk/io/image.hpp"
#include "mcdk/nn/metrics.hpp"
#include "mcdk/render/dataset.hpp"
#include "mcdk/train/trainer.hpp"

namespace mcdk::cli {
namespace fs = std::filesystem;
namespace {

render::ImageSize parse_size(const std::string& text) {
  static const std::regex pattern(R"((\d+)x(\d+))");
  std::smatch match;
  if (!std::regex_match(text, match, pattern)) {
    throw ConfigError("--size must look like HxW, got '" + text + "'");
  }
  return render::ImageSize{std::stoll(match[1]), std::stoll(match[2])};
}

bool all_finite(const Tensor<float>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

// Drops the leading batch axis of a [1,C,H,W] tensor.
Tensor<float> unbatched(const Tensor<float>& t) {
  return Tensor<float>(Shape{t.dim(1), t.dim(2), t.dim(3)},
                       std::vector<float>(t.data().begin(), t.data().end()));
}

std::vector<fs::path> frame_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("missing directory " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && e.path().filename().string().rfind("frame_", 0) == 0) {
      dirs.push_back(e.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("no frame directories in " + root.string());
  return dirs;
}

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(8) << v;
  return s.str();
}

struct RenderArgs {
  std::string scene;
  int frames = 5;
  std::string size = "128x128";
  std::uint64_t seed = 0;
  int ref_spp = 1024;
  std::string out;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  render::DatasetSettings settings;
  settings.size = parse_size(a.size);
  settings.frames = a.frames;
  settings.seed = a.seed;
  settings.reference_spp = a.ref_spp;
  const render::Scene scene = render::resolve_scene(a.scene);
  const render::Renderer renderer(scene);
  const auto poses = render::interpolate_trajectory(scene.key_nodes, settings.frames);
  for (std::size_t f = 0; f < poses.size(); ++f) {
    const auto bundle = render::render_bundle(renderer, poses[f], static_cast<int>(f), settings);
    render::save_bundle(fs::path(a.out) / render::frame_dir_name(static_cast<int>(f)), bundle);
    out << "rendered frame " << f + 1 << "/" << poses.size() << '\n' << std::flush;
  }
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string val;
  std::string config;
  std::string out;
  int epochs = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  train::TrainConfig config = a.config.empty() ? train::TrainConfig{}
                                               : train::load_train_config(a.config);
  if (a.epochs > 0) config.epochs = a.epochs;
  const auto sequences = render::load_sequences(a.data);
  const auto validation =
      a.val.empty() ? std::vector<train::Sequence>{} : render::load_sequences(a.val);
  train::Trainer trainer(config);
  out << "training " << nn::model_kind_name(config.model) << " model with "
      << trainer.model().parameter_count() << " parameters on " << sequences.size()
      << " sequence(s)\n";
  const auto result = trainer.fit(sequences, validation, a.out, &out);
  out << "best epoch " << result.best_epoch + 1 << " validation loss " << result.best_val_loss
      << '\n';
  return kExitOk;
}

struct DenoiseArgs {
  std::string data;
  std::string ckpt;
  double budget = 0;
  std::string out;
};

int cmd_denoise(const DenoiseArgs& a, std::ostream& out, std::ostream& err) {
  auto loaded = train::load_checkpoint(a.ckpt);
  double budget = a.budget;
  if (budget <= 0) budget = loaded.manifest.value("budget", 4.0);
  const auto bundles = render::load_dataset(a.data);
  const fs::path root(a.out);
  fs::create_directories(root);
  NoGradScope<float> no_grad;
  nn::DenoiserState<float> state;
  for (const auto& bundle : bundles) {
    const auto frame = nn::prepare_frame<float>(bundle);
    const auto result = loaded.model->forward(frame, state, budget);
    const Tensor<float> d = unbatched(result.d);
    if (!all_finite(d)) {
      err << "mcdk: non-finite output in frame " << bundle.frame_index << '\n';
      return kExitNumeric;
    }
    const fs::path dir = root / render::frame_dir_name(bundle.frame_index);
    fs::create_directories(dir);
    Tensor<float> m(Shape{1, bundle.height(), bundle.width()});
    for (Index p = 0; p < m.size(); ++p) m[p] = static_cast<float>(result.map.m[static_cast<std::size_t>(p)]);
    Tensor<float> m_preview = m.clone();
    for (float& v : m_preview.mutable_data()) v /= static_cast<float>(sampling::kMaxSpp);
    save_tns(dir / "m.tns", m);
    save_tns(dir / "i.tns", unbatched(result.i));
    save_tns(dir / "ibar.tns", unbatched(result.ibar));
    save_tns(dir / "d.tns", d);
    save_ppm(dir / "m.ppm", m_preview);
    save_ppm(dir / "i.ppm", tone_map(unbatched(result.i)));
    save_ppm(dir / "ibar.ppm", tone_map(unbatched(result.ibar)));
    save_ppm(dir / "d.ppm", tone_map(d));
    out << "denoised frame " << bundle.frame_index << '\n';
  }
  nlohmann::json manifest = {{"checkpoint", fs::absolute(a.ckpt).string()},
                             {"dataset", fs::absolute(a.data).string()},
                             {"budget", budget},
                             {"model", loaded.manifest.value("model", "")},
                             {"config_hash", loaded.manifest.value("config_hash", "")},
                             {"frames", bundles.size()}};
  std::ofstream(root / "manifest.json") << manifest.dump(2) << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string pred;
  std::string ref;
  std::string out;
};

Tensor<float> load_prediction(const fs::path& dir) {
  if (fs::exists(dir / "d.tns")) return load_tns(dir / "d.tns");
  if (fs::exists(dir / "ref.tns")) return load_tns(dir / "ref.tns");
  throw DataError("no d.tns or ref.tns in " + dir.string());
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto pred_dirs = frame_dirs(a.pred);
  std::vector<Tensor<float>> preds, refs;
  std::vector<std::string> names;
  for (const auto& dir : pred_dirs) {
    const fs::path ref_dir = fs::path(a.ref) / dir.filename();
    if (!fs::exists(ref_dir / "ref.tns")) {
      throw DataError("missing reference " + (ref_dir / "ref.tns").string());
    }
    preds.push_back(tone_map(load_prediction(dir)));
    refs.push_back(tone_map(load_tns(ref_dir / "ref.tns")));
    names.push_back(dir.filename().string());
  }
  std::ofstream csv(a.out);
  if (!csv) throw DataError("cannot write " + a.out);
  csv << "frame,psnr,ssim,rmse,temporal_l1\n";
  double psnr_sum = 0, ssim_sum = 0, rmse_sum = 0, tl1_sum = 0;
  for (std::size_t f = 0; f < preds.size(); ++f) {
    const auto m = nn::image_metrics(preds[f], refs[f]);
    const double tl1 = f == 0 ? std::numeric_limits<double>::quiet_NaN()
                              : nn::temporal_l1(preds[f], preds[f - 1], refs[f], refs[f - 1]);
    csv << names[f] << ',' << format_metric(m.psnr) << ',' << format_metric(m.ssim) << ','
        << format_metric(m.rmse) << ',' << format_metric(tl1) << '\n';
    psnr_sum += m.psnr;
    ssim_sum += m.ssim;
    rmse_sum += m.rmse;
    if (f > 0) tl1_sum += tl1;
  }
  const double n = static_cast<double>(preds.size());
  const double tl1_mean =
      preds.size() > 1 ? tl1_sum / (n - 1) : std::numeric_limits<double>::quiet_NaN();
  csv << "mean," << format_metric(psnr_sum / n) << ',' << format_metric(ssim_sum / n) << ','
      << format_metric(rmse_sum / n) << ',' << format_metric(tl1_mean) << '\n';
  out << "mean PSNR " << format_metric(psnr_sum / n) << " SSIM " << format_metric(ssim_sum / n)
      << " rMSE " << format_metric(rmse_sum / n) << '\n';
  return kExitOk;
}

struct AssembleArgs {
  std::string frame;
  std::string map;
  std::string out;
};

int cmd_assemble(const AssembleArgs& a, std::ostream& out) {
  const auto bundle = render::load_bundle(a.frame);
  const Tensor<float> map = load_tns(a.map);
  if (map.size() != bundle.height() * bundle.width()) {
    throw DimensionError("sample map " + shape_string(map.shape()) + " does not match the " +
                         std::to_string(bundle.height()) + "x" + std::to_string(bundle.width()) +
                         " frame");
  }
  std::vector<int> m(static_cast<std::size_t>(map.size()));
  for (Index p = 0; p < map.size(); ++p) {
    const float v = map[p];
    if (v != std::floor(v)) throw DataError("sample map holds non-integer value " + std::to_string(v));
    m[static_cast<std::size_t>(p)] = static_cast<int>(v);
  }
  const Tensor<float> image = sampling::assemble_adaptive(bundle.spp_stack, m);
  save_tns(a.out, image);
  out << "assembled " << shape_string(image.shape()) << " image\n";
  return kExitOk;
}

struct KernelArgs {
  std::string ckpt;
  std::string dump_pool;
  std::string visualize;
};

int cmd_kernels(const KernelArgs& a, std::ostream& out) {
  auto loaded = train::load_checkpoint(a.ckpt);
  const auto* model = dynamic_cast<const nn::TwoStageDenoiser<float>*>(loaded.model.get());
  if (model == nullptr) throw ConfigError("checkpoint " + a.ckpt + " has no kernel pool");
  const Tensor<float>& pi = model->sampling.pool.pi;
  if (!a.dump_pool.empty()) {
    save_tns(a.dump_pool, pi);
    out << "wrote pool " << shape_string(pi.shape()) << " to " << a.dump_pool << '\n';
  }
  if (!a.visualize.empty()) {
    const Index q = pi.dim(0), l = pi.dim(1), taps = l * l;
    const Index cols = 16, rows = (q + cols - 1) / cols, cell = l + 1;
    Tensor<float> mosaic(Shape{1, rows * cell + 1, cols * cell + 1});
    const Index mw = cols * cell + 1;
    for (Index k = 0; k < q; ++k) {
      // Softmax over the kernel's taps, scaled to its peak.
      float peak = -std::numeric_limits<float>::infinity();
      for (Index t = 0; t < taps; ++t) peak = std::max(peak, pi[k * taps + t]);
      std::vector<float> w(static_cast<std::size_t>(taps));
      float top = 0;
      for (Index t = 0; t < taps; ++t) {
        w[static_cast<std::size_t>(t)] = std::exp(pi[k * taps + t] - peak);
        top = std::max(top, w[static_cast<std::size_t>(t)]);
      }
      const Index oy = (k / cols) * cell + 1, ox = (k % cols) * cell + 1;
      for (Index t = 0; t < taps; ++t) {
        mosaic[(oy + t / l) * mw + ox + t % l] = w[static_cast<std::size_t>(t)] / top;
      }
    }
    save_ppm(a.visualize, mosaic);
    out << "wrote " << rows << "x" << cols << " kernel mosaic to " << a.visualize << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) { return run(argc, argv, std::cout, std::cerr); }

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive-sampling Monte Carlo denoiser"};
  app.require_subcommand(1);

  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render", "Render frame bundles of a scene");
  render_cmd->add_option("--scene", render_args.scene, "Built-in scene name or JSON file")->required();
  render_cmd->add_option("--frames", render_args.frames, "Number of trajectory frames");
  render_cmd->add_option("--size", render_args.size, "Image size HxW");
  render_cmd->add_option("--seed", render_args.seed, "Random seed");
  render_cmd->add_option("--ref-spp", render_args.ref_spp, "Reference samples per pixel");
  render_cmd->add_option("--out", render_args.out, "Output directory")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a denoiser");
  train_cmd->add_option("--data", train_args.data, "Dataset directory")->required();
  train_cmd->add_option("--val", train_args.val, "Validation dataset directory");
  train_cmd->add_option("--config", train_args.config, "Training config (JSON)");
  train_cmd->add_option("--epochs", train_args.epochs, "Override the configured epoch count");
  train_cmd->add_option("--out", train_args.out, "Checkpoint directory")->required();

  DenoiseArgs denoise_args;
  auto* denoise_cmd = app.add_subcommand("denoise", "Denoise a frame sequence");
  denoise_cmd->add_option("--data", denoise_args.data, "Dataset directory")->required();
  denoise_cmd->add_option("--ckpt", denoise_args.ckpt, "Checkpoint directory")->required();
  denoise_cmd->add_option("--budget", denoise_args.budget, "Average samples per pixel");
  denoise_cmd->add_option("--out", denoise_args.out, "Output directory")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Compare predictions with references");
  eval_cmd->add_option("--pred", eval_args.pred, "Prediction directory")->required();
  eval_cmd->add_option("--ref", eval_args.ref, "Reference dataset directory")->required();
  eval_cmd->add_option("--out", eval_args.out, "CSV report path")->required();

  AssembleArgs assemble_args;
  auto* assemble_cmd = app.add_subcommand("assemble", "Assemble an adaptive image from a map");
  assemble_cmd->add_option("--frame", assemble_args.frame, "Frame directory")->required();
  assemble_cmd->add_option("--map", assemble_args.map, "Sample map (TNS)")->required();
  assemble_cmd->add_option("--out", assemble_args.out, "Output TNS path")->required();

  KernelArgs kernel_args;
  auto* kernels_cmd = app.add_subcommand("kernels", "Inspect a checkpoint's kernel pool");
  kernels_cmd->add_option("--ckpt", kernel_args.ckpt, "Checkpoint directory")->required();
  kernels_cmd->add_option("--dump-pool", kernel_args.dump_pool, "Write the pool as TNS");
  kernels_cmd->add_option("--visualize", kernel_args.visualize, "Write a kernel mosaic PPM");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mcdk: " << e.what() << '\n';
    return kExitFailure;
  }

  try {
    if (*render_cmd) return cmd_render(render_args, out);
    if (*train_cmd) return cmd_train(train_args, out);
    if (*denoise_cmd) return cmd_denoise(denoise_args, out, err);
    if (*eval_cmd) return cmd_eval(eval_args, out);
    if (*assemble_cmd) return cmd_assemble(assemble_args, out);
    if (*kernels_cmd) return cmd_kernels(kernel_args, out);
  } catch (const NumericError& e) {
    err << "mcdk: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "mcdk: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace mcdk::cli
