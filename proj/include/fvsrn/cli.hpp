// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fvsrn/checkpoint.hpp"
#include "fvsrn/fused.hpp"
#include "fvsrn/metrics.hpp"
#include "fvsrn/model.hpp"
#include "fvsrn/renderer.hpp"
#include "fvsrn/service.hpp"
#include "fvsrn/training.hpp"
#include "fvsrn/volume.hpp"

namespace fvsrn {

inline constexpr const char* kVersion = "1.0.0";

namespace cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Where a command writes. An --out with one of `exts` names the primary file
/// and sidecars get "<out>.<name>"; any other --out is a directory holding
/// the fixed file names.
struct OutputLayout {
  fs::path primary;
  fs::path dir;
  bool file_mode = false;

  fs::path sidecar(const std::string& fixed_name) const {
    if (!file_mode) return dir / fixed_name;
    return fs::path(primary.string() + "." + fixed_name);
  }
};

inline OutputLayout resolve_out(const std::string& out, const std::string& primary_name,
                                const std::vector<std::string>& exts) {
  OutputLayout o;
  const fs::path p(out);
  const std::string ext = p.extension().string();
  for (const auto& e : exts)
    if (ext == e) o.file_mode = true;
  if (o.file_mode) {
    o.primary = p;
    o.dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  } else {
    o.dir = p;
    o.primary = p / primary_name;
  }
  std::error_code ec;
  fs::create_directories(o.dir, ec);
  if (ec) throw IoError("cannot create output directory '" + o.dir.string() + "': " + ec.message());
  return o;
}

inline void write_text(const fs::path& path, const std::string& text) { detail::write_file(path.string(), text); }

inline json read_json_file(const std::string& path) {
  const std::string text = detail::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Parses "R=8,16,32" or "8,16,32" into integers.
inline std::vector<int> parse_int_list(const std::string& text) {
  std::string body = text;
  if (const auto eq = body.find('='); eq != std::string::npos) body = body.substr(eq + 1);
  std::vector<int> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("'" + item + "' in '" + text + "' is not an integer");
    }
  }
  if (out.empty()) throw ConfigError("empty list '" + text + "'");
  return out;
}

inline TransferFunction tf_from_arg(const std::string& arg) {
  if (arg.empty()) return TransferFunction();
  for (const auto& n : tf_preset_names())
    if (arg == n) return tf_preset(arg);
  return tf_from_json(read_json_file(arg));
}

inline TransferFunction tf_from_config(const json& cfg, const std::string& flag) {
  if (!flag.empty()) return tf_from_arg(flag);
  if (!cfg.contains("tf")) return TransferFunction();
  const auto& j = cfg.at("tf");
  return j.is_string() ? tf_preset(j.get<std::string>()) : tf_from_json(j);
}

/// Shared model/training flags; unset values leave the config file untouched.
struct ModelFlags {
  std::optional<std::string> head, activation, fourier, direction, time;
  std::optional<int> layers, channels, grid_res, grid_features, fourier_features;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--head", head, "density | color");
    app->add_option("--layers", layers, "Number of linear layers");
    app->add_option("--channels", channels, "Hidden channels");
    app->add_option("--activation", activation, "relu | sine | snake | snake_alt");
    app->add_option("--fourier", fourier, "off | nerf | random");
    app->add_option("--fourier-features", fourier_features, "Fourier feature count m");
    app->add_option("--grid-res", grid_res, "Latent grid resolution R (0 disables)");
    app->add_option("--grid-features", grid_features, "Latent grid features F");
    app->add_option("--direction", direction, "pos | dirP | dirF");
    app->add_option("--time", time, "none | direct | fourier | both");
    app->add_option("--seed", seed, "Random seed");
  }

  ModelConfig apply(const json& cfg) const {
    ModelConfig c = cfg.contains("model") ? config_from_json(cfg.at("model")) : ModelConfig{};
    if (head) c.head = head_from_string(*head);
    if (layers) c.layers = *layers;
    if (channels) c.channels = *channels;
    if (activation) c.activation = activation_from_string(*activation);
    if (fourier) c.fourier = fourier_mode_from_string(*fourier);
    if (fourier_features) c.fourier_features = *fourier_features;
    if (grid_res) c.grid_resolution = *grid_res;
    if (grid_features) c.grid_features = *grid_features;
    if (direction) c.direction = direction_from_string(*direction);
    if (time) c.time = time_encoding_from_string(*time);
    if (seed) c.seed = *seed;
    c.validate();
    return c;
  }
};

struct WorldFlags {
  std::optional<int> epochs;
  std::optional<std::size_t> samples, batch;
  std::optional<double> lr;
  bool adaptive = false;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--samples", samples, "Training positions");
    app->add_option("--batch", batch, "Mini-batch size");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_flag("--adaptive", adaptive, "Error-driven resampling every N epochs");
  }

  WorldTrainConfig apply(const json& cfg, std::optional<std::uint64_t> s) const {
    WorldTrainConfig w = cfg.contains("train") ? world_config_from_json(cfg.at("train")) : WorldTrainConfig{};
    if (epochs) w.epochs = *epochs;
    if (samples) w.samples = *samples;
    if (batch) w.batch = std::min(*batch, w.samples);
    if (lr) w.lr = *lr;
    if (adaptive) w.adaptive = true;
    if (s) w.seed = *s;
    w.batch = std::min(w.batch, w.samples);
    w.validate();
    return w;
  }
};

inline json manifest(const std::string& command, const std::vector<std::string>& args, json resolved) {
  return {{"tool", "fvsrn"},
          {"version", kVersion},
          {"command", command},
          {"args", args},
          {"threads", default_thread_count()},
          {"resolved", std::move(resolved)}};
}

inline void write_manifest(const OutputLayout& o, const json& m) { write_text(o.sidecar("manifest.json"), m.dump(2) + "\n"); }

inline std::string loss_csv(const TrainResult& r) {
  std::ostringstream os;
  write_loss_csv(os, r);
  return os.str();
}

inline ProgressFn progress_printer(std::ostream& log, bool quiet) {
  if (quiet) return {};
  return [&log](int epoch, double loss) { log << "epoch " << epoch << " loss " << loss << "\n"; };
}

/// A volume sequence from a printf pattern ("frames/t%03d.vraw") or a synthetic kind.
inline std::function<ScalarVolume(int)> sequence_source(const std::string& pattern, const std::string& kind, int res,
                                                         std::uint64_t seed) {
  if (!pattern.empty()) {
    return [pattern](int t) {
      std::vector<char> buf(pattern.size() + 32);
      std::snprintf(buf.data(), buf.size(), pattern.c_str(), t);
      return volume_read(buf.data());
    };
  }
  SynthParams prm;
  prm.seed = seed;
  const SynthKind k = synth_kind_from_string(kind);
  return [k, res, prm](int t) { return synth_field(k, res, prm, static_cast<float>(t)); };
}

}  // namespace cli

/// Runs the command line; returns 0 on success, 1 on usage errors, 2 on runtime errors.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App app{"fvsrn: compressive neural volume representations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("fvsrn ") + kVersion);
  int threads = 0;
  bool deterministic = false;
  bool quiet = false;
  app.add_option("--threads", threads, "Worker threads (default: FVSRN_THREADS or hardware)");
  app.add_flag("--deterministic", deterministic, "Single-worker execution with fixed reduction order");
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  std::function<void()> action;

  // make-synthetic ----------------------------------------------------------
  auto* ms = app.add_subcommand("make-synthetic", "Write a synthetic .vraw volume");
  std::string ms_kind = "sphere", ms_out, ms_dtype = "f32";
  int ms_res = 64;
  std::optional<float> ms_t;
  std::uint64_t ms_seed = 0;
  ms->add_option("--kind", ms_kind, "sphere | gaussians | marschner_lobb | moving_blobs");
  ms->add_option("--res", ms_res, "Resolution per axis");
  ms->add_option("--t", ms_t, "Timestep (moving_blobs)");
  ms->add_option("--seed", ms_seed, "Random seed");
  ms->add_option("--dtype", ms_dtype, "u8 | f32")->check(CLI::IsMember({"u8", "f32"}));
  ms->add_option("--out", ms_out, "Output .vraw or directory")->required();
  ms->callback([&] {
    action = [&] {
      const auto o = resolve_out(ms_out, "volume.vraw", {".vraw"});
      SynthParams prm;
      prm.seed = ms_seed;
      const auto vol = synth_field(ms_kind, ms_res, prm, ms_t);
      volume_write(vol, o.primary.string(), ms_dtype == "u8" ? VoxelType::U8 : VoxelType::F32);
      write_manifest(o, manifest("make-synthetic", args,
                                 {{"kind", ms_kind}, {"res", ms_res}, {"seed", ms_seed}, {"dtype", ms_dtype},
                                  {"t", ms_t ? json(*ms_t) : json(nullptr)}, {"output", o.primary.string()}}));
      out << o.primary.string() << "\n";
    };
  });

  // train-world -------------------------------------------------------------
  auto* tw = app.add_subcommand("train-world", "World-space training on a volume");
  std::string tw_config, tw_volume, tw_out, tw_tf;
  ModelFlags tw_model;
  WorldFlags tw_world;
  tw->add_option("--config", tw_config, "JSON config {model, train, tf}");
  tw->add_option("--volume", tw_volume, "Target .vraw")->required();
  tw->add_option("--tf", tw_tf, "TF preset name or JSON file (color head)");
  tw->add_option("--out", tw_out, "Output .fvsrn or directory")->required();
  tw_model.add(tw);
  tw_world.add(tw);
  tw->callback([&] {
    action = [&] {
      const json cfg = tw_config.empty() ? json::object() : read_json_file(tw_config);
      const auto vol = volume_read(tw_volume);
      ModelConfig mc = tw_model.apply(cfg);
      mc.volume_resolution = vol.max_dim();
      const auto wc = tw_world.apply(cfg, tw_model.seed);
      const auto tf = tf_from_config(cfg, tw_tf);
      auto model = make_model(mc);
      const auto o = resolve_out(tw_out, "model.fvsrn", {".fvsrn"});
      const auto res = train_world(model, TargetField::of(vol, &tf), wc, progress_printer(err, quiet));
      checkpoint_save(model, o.primary.string());
      write_text(o.sidecar("loss.csv"), loss_csv(res));
      write_manifest(o, manifest("train-world", args,
                                 {{"model", config_to_json(mc)}, {"train", world_config_to_json(wc)},
                                  {"tf", tf_to_json(tf)}, {"volume", tw_volume}, {"seed", wc.seed},
                                  {"final_loss", res.loss.empty() ? json(nullptr) : json(res.loss.back())},
                                  {"output", o.primary.string()}}));
      out << o.primary.string() << "\n";
    };
  });

  // train-screen ------------------------------------------------------------
  auto* ts = app.add_subcommand("train-screen", "Screen-space training through the differentiable renderer");
  std::string ts_config, ts_volume, ts_out, ts_tf;
  ModelFlags ts_model;
  std::optional<int> ts_epochs, ts_views, ts_res;
  std::optional<float> ts_step;
  std::optional<double> ts_lr;
  ts->add_option("--config", ts_config, "JSON config {model, screen, tf}");
  ts->add_option("--volume", ts_volume, "Target .vraw")->required();
  ts->add_option("--tf", ts_tf, "TF preset name or JSON file");
  ts->add_option("--out", ts_out, "Output .fvsrn or directory")->required();
  ts->add_option("--epochs", ts_epochs, "Epochs");
  ts->add_option("--views", ts_views, "Training views");
  ts->add_option("--res", ts_res, "Training image resolution");
  ts->add_option("--stepsize", ts_step, "Training stepsize (world units)");
  ts->add_option("--lr", ts_lr, "Adam learning rate");
  ts_model.add(ts);
  ts->callback([&] {
    action = [&] {
      const json cfg = ts_config.empty() ? json::object() : read_json_file(ts_config);
      const auto vol = volume_read(ts_volume);
      json mj = cfg.value("model", json::object());
      if (!mj.contains("head")) mj["head"] = "color";
      ModelConfig mc = ts_model.apply({{"model", mj}});
      mc.volume_resolution = vol.max_dim();
      ScreenTrainConfig sc = cfg.contains("screen") ? screen_config_from_json(cfg.at("screen")) : ScreenTrainConfig{};
      if (ts_epochs) sc.epochs = *ts_epochs;
      if (ts_views) sc.views = *ts_views;
      if (ts_res) sc.resolution = *ts_res;
      if (ts_step) sc.stepsize = *ts_step;
      if (ts_lr) sc.lr = *ts_lr;
      if (ts_model.seed) sc.seed = *ts_model.seed;
      sc.validate();
      const auto tf = tf_from_config(cfg, ts_tf);
      auto model = make_model(mc);
      const auto o = resolve_out(ts_out, "model.fvsrn", {".fvsrn"});
      const auto res = train_screen(model, vol, tf, sc, progress_printer(err, quiet));
      checkpoint_save(model, o.primary.string());
      write_text(o.sidecar("loss.csv"), loss_csv(res));
      write_manifest(o, manifest("train-screen", args,
                                 {{"model", config_to_json(mc)}, {"screen", screen_config_to_json(sc)},
                                  {"tf", tf_to_json(tf)}, {"volume", ts_volume}, {"seed", sc.seed},
                                  {"output", o.primary.string()}}));
      out << o.primary.string() << "\n";
    };
  });

  // train-temporal ----------------------------------------------------------
  auto* tt = app.add_subcommand("train-temporal", "Keyframe latent-grid training on a time sequence");
  std::string tt_config, tt_out, tt_sequence, tt_kind = "moving_blobs", tt_train = "every=5", tt_keys = "every=10";
  int tt_res = 64, tt_steps = 21;
  ModelFlags tt_model;
  WorldFlags tt_world;
  tt->add_option("--config", tt_config, "JSON config {model, train}");
  tt->add_option("--sequence", tt_sequence, "printf pattern of .vraw frames, e.g. frames/t%03d.vraw");
  tt->add_option("--kind", tt_kind, "Synthetic sequence kind when --sequence is absent");
  tt->add_option("--res", tt_res, "Synthetic resolution");
  tt->add_option("--timesteps", tt_steps, "Number of timesteps in the sequence");
  tt->add_option("--train", tt_train, "Training timesteps: every=K or a comma list");
  tt->add_option("--keyframes", tt_keys, "Keyframes: every=K or a comma list");
  tt->add_option("--out", tt_out, "Output .fvsrn or directory")->required();
  tt_model.add(tt);
  tt_world.add(tt);
  tt->callback([&] {
    action = [&] {
      auto steps_from = [&](const std::string& s) {
        if (s.rfind("every=", 0) == 0) {
          const int k = std::stoi(s.substr(6));
          if (k < 1) throw ConfigError("every=K needs K >= 1");
          std::vector<int> v;
          for (int t = 0; t < tt_steps; t += k) v.push_back(t);
          if (v.back() != tt_steps - 1 && (tt_steps - 1) % k == 0) v.push_back(tt_steps - 1);
          return v;
        }
        return parse_int_list(s);
      };
      const json cfg = tt_config.empty() ? json::object() : read_json_file(tt_config);
      ModelConfig mc = tt_model.apply(cfg);
      if (mc.keyframes.empty()) mc.keyframes = steps_from(tt_keys);
      if (!mc.time_range) mc.time_range = std::make_pair(0.0, static_cast<double>(tt_steps - 1));
      mc.volume_resolution = tt_res;
      mc.validate();
      const auto wc = tt_world.apply(cfg, tt_model.seed);
      TemporalTrainConfig tc{steps_from(tt_train), wc};
      const auto seq = sequence_source(tt_sequence, tt_kind, tt_res, mc.seed);
      std::map<int, ScalarVolume> frames;
      for (int t : tc.train_steps) frames.emplace(t, seq(t));
      TargetField target{[&frames](Vec3 p, float t) { return sample_volume(frames.at(static_cast<int>(t)), p); }};
      auto model = make_model(mc);
      const auto o = resolve_out(tt_out, "model.fvsrn", {".fvsrn"});
      const auto res = train_temporal(model, target, tc, progress_printer(err, quiet));
      checkpoint_save(model, o.primary.string());
      write_text(o.sidecar("loss.csv"), loss_csv(res));
      write_manifest(o, manifest("train-temporal", args,
                                 {{"model", config_to_json(mc)}, {"train", world_config_to_json(wc)},
                                  {"train_steps", tc.train_steps}, {"sequence", tt_sequence}, {"kind", tt_kind},
                                  {"res", tt_res}, {"timesteps", tt_steps}, {"seed", wc.seed},
                                  {"output", o.primary.string()}}));
      out << o.primary.string() << "\n";
    };
  });

  // render ------------------------------------------------------------------
  auto* rd = app.add_subcommand("render", "Render a checkpoint or a volume to PNG (and PFM)");
  std::string rd_model, rd_volume, rd_camera, rd_tf, rd_out;
  int rd_w = 256, rd_h = 256;
  float rd_step = 1.f;
  std::optional<float> rd_t;
  bool rd_pfm = false;
  std::vector<float> rd_eye;
  rd->add_option("--model", rd_model, "Checkpoint .fvsrn");
  rd->add_option("--volume", rd_volume, "Ground-truth .vraw (rendered with --tf)");
  rd->add_option("--camera", rd_camera, "Camera JSON file");
  rd->add_option("--eye", rd_eye, "Camera position x y z")->expected(3);
  rd->add_option("--width", rd_w, "Image width");
  rd->add_option("--height", rd_h, "Image height");
  rd->add_option("--stepsize-voxels", rd_step, "Stepsize in voxels");
  rd->add_option("--tf", rd_tf, "TF preset or JSON file (density models and volumes)");
  rd->add_option("--t", rd_t, "Timestep for temporal models");
  rd->add_flag("--pfm", rd_pfm, "Also write a float PFM");
  rd->add_option("--out", rd_out, "Output .png or directory")->required();
  rd->callback([&] {
    action = [&] {
      if (rd_model.empty() == rd_volume.empty()) throw ConfigError("render needs exactly one of --model or --volume");
      Camera cam;
      if (!rd_camera.empty()) cam = camera_from_json(read_json_file(rd_camera));
      if (!rd_eye.empty()) cam.eye = {rd_eye[0], rd_eye[1], rd_eye[2]};
      cam.width = rd_w;
      cam.height = rd_h;
      RenderSettings s;
      Image img;
      const auto o = resolve_out(rd_out, "image.png", {".png"});
      if (!rd_model.empty()) {
        const auto model = checkpoint_load(rd_model);
        const int res = model.config.volume_resolution > 0 ? model.config.volume_resolution : 64;
        s.stepsize = stepsize_from_voxels(rd_step, res);
        std::optional<TransferFunction> tf;
        if (model.config.head == Head::Density) tf = tf_from_arg(rd_tf);
        else if (!rd_tf.empty()) throw ConfigError("--tf cannot be applied to a color-head model");
        img = render_image(model, cam, s, tf ? &*tf : nullptr, rd_t);
      } else {
        const auto vol = volume_read(rd_volume);
        s.stepsize = stepsize_from_voxels(rd_step, vol.max_dim());
        img = render_image(vol, tf_from_arg(rd_tf), cam, s);
      }
      image_write_png(img, o.primary.string());
      if (rd_pfm) image_write_pfm(img, o.sidecar("pfm").string());
      write_manifest(o, manifest("render", args,
                                 {{"model", rd_model}, {"volume", rd_volume}, {"camera", camera_to_json(cam)},
                                  {"stepsize_voxels", rd_step}, {"tf", rd_tf},
                                  {"t", rd_t ? json(*rd_t) : json(nullptr)}, {"output", o.primary.string()}}));
      out << o.primary.string() << "\n";
    };
  });

  // evaluate ----------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "PSNR/SSIM of a checkpoint against a volume over orbit views");
  std::string ev_model, ev_volume, ev_tf, ev_out;
  EvalSettings ev_settings;
  std::optional<float> ev_t;
  ev->add_option("--model", ev_model, "Checkpoint .fvsrn")->required();
  ev->add_option("--volume", ev_volume, "Reference .vraw")->required();
  ev->add_option("--tf", ev_tf, "TF preset or JSON file");
  ev->add_option("--views", ev_settings.views, "Number of views");
  ev->add_option("--res", ev_settings.resolution, "Image resolution");
  ev->add_option("--t", ev_t, "Timestep for temporal models");
  ev->add_option("--out", ev_out, "Output .csv or directory")->required();
  ev->callback([&] {
    action = [&] {
      const auto model = checkpoint_load(ev_model);
      const auto vol = volume_read(ev_volume);
      const auto tf = tf_from_arg(ev_tf);
      const auto o = resolve_out(ev_out, "metrics.csv", {".csv"});
      const auto m = evaluate_views(model, vol, tf, ev_settings, ev_t);
      std::ostringstream os;
      write_metrics_csv(os, m);
      write_text(o.primary, os.str());
      write_manifest(o, manifest("evaluate", args,
                                 {{"model", ev_model}, {"volume", ev_volume}, {"tf", tf_to_json(tf)},
                                  {"views", ev_settings.views}, {"res", ev_settings.resolution},
                                  {"mean_psnr", m.mean.psnr}, {"mean_ssim", m.mean.ssim},
                                  {"output", o.primary.string()}}));
      out << "psnr=" << m.mean.psnr << " ssim=" << m.mean.ssim << "\n";
    };
  });

  // benchmark ---------------------------------------------------------------
  auto* bm = app.add_subcommand("benchmark", "Fused vs naive evaluator throughput");
  std::string bm_model, bm_batches = "1024,4096,16384,65536", bm_out;
  int bm_runs = 5;
  bm->add_option("--model", bm_model, "Checkpoint (default: the default model at random weights)");
  bm->add_option("--batches", bm_batches, "Comma-separated batch sizes");
  bm->add_option("--runs", bm_runs, "Timed runs per batch size (median reported)");
  bm->add_option("--out", bm_out, "Output .csv or directory")->required();
  bm->callback([&] {
    action = [&] {
      const auto model = bm_model.empty() ? make_model(ModelConfig{}) : checkpoint_load(bm_model);
      std::vector<std::size_t> batches;
      for (int b : parse_int_list(bm_batches)) {
        if (b < 1) throw ConfigError("batch sizes must be positive");
        batches.push_back(static_cast<std::size_t>(b));
      }
      const auto o = resolve_out(bm_out, "benchmark.csv", {".csv"});
      const auto rep = bench_compare(model, batches, bm_runs);
      std::ostringstream os;
      rep.write_csv(os);
      write_text(o.primary, os.str());
      json speedups = json::object();
      for (auto b : batches) speedups[std::to_string(b)] = rep.speedup(b);
      write_manifest(o, manifest("benchmark", args,
                                 {{"model", bm_model.empty() ? json("default") : json(bm_model)},
                                  {"config", config_to_json(model.config)}, {"runs", bm_runs},
                                  {"speedup", speedups}, {"output", o.primary.string()}}));
      out << os.str();
    };
  });

  // quantize ----------------------------------------------------------------
  auto* qz = app.add_subcommand("quantize", "Re-encode a checkpoint with f16 weights and/or a u8 grid");
  std::string qz_model, qz_out, qz_weights = "f16", qz_grid = "u8";
  qz->add_option("--model", qz_model, "Input checkpoint")->required();
  qz->add_option("--weights", qz_weights, "f16 | f32")->check(CLI::IsMember({"f16", "f32"}));
  qz->add_option("--grid", qz_grid, "u8 | f32")->check(CLI::IsMember({"u8", "f32"}));
  qz->add_option("--out", qz_out, "Output .fvsrn or directory")->required();
  qz->callback([&] {
    action = [&] {
      const auto model = checkpoint_load(qz_model);
      const auto o = resolve_out(qz_out, "model.fvsrn", {".fvsrn"});
      const auto wp = weight_precision_from_string(qz_weights);
      const auto gp = grid_precision_from_string(qz_grid);
      checkpoint_save(model, o.primary.string(), wp, gp);
      const auto before = memory_footprint(model, WeightPrecision::F32, GridPrecision::F32);
      const auto after = memory_footprint(model, wp, gp);
      write_manifest(o, manifest("quantize", args,
                                 {{"input", qz_model}, {"weights", qz_weights}, {"grid", qz_grid},
                                  {"bytes_before", {{"network", before.network}, {"grid", before.grid}}},
                                  {"bytes_after", {{"network", after.network}, {"grid", after.grid}}},
                                  {"output", o.primary.string()}}));
      out << "network " << before.network << " -> " << after.network << " bytes, grid " << before.grid << " -> "
          << after.grid << " bytes\n";
    };
  });

  // metrics -----------------------------------------------------------------
  auto* mt = app.add_subcommand("metrics", "PSNR between two .vraw volumes");
  std::string mt_a, mt_b;
  mt->add_option("a", mt_a, "First volume")->required();
  mt->add_option("b", mt_b, "Second volume")->required();
  mt->callback([&] {
    action = [&] {
      const auto a = volume_read(mt_a), b = volume_read(mt_b);
      out << "psnr=" << metric_psnr(a, b) << "\n";
    };
  });

  // ablate ------------------------------------------------------------------
  auto* ab = app.add_subcommand("ablate", "Grid/network sweep: one CSV row per configuration");
  std::string ab_grid = "R=0,8,16,32", ab_features = "F=16", ab_layers = "l=4", ab_channels = "c=32",
              ab_fourier = "m=-1", ab_volume, ab_kind = "gaussians", ab_tf, ab_out;
  int ab_res = 64;
  EvalSettings ab_eval;
  ab_eval.views = 8;
  ab_eval.resolution = 128;
  WorldFlags ab_world;
  std::uint64_t ab_seed = 0;
  ab->add_option("--grid", ab_grid, "Latent grid resolutions, e.g. R=0,8,16,32 (0 = no grid)");
  ab->add_option("--features", ab_features, "Grid features, e.g. F=4,16");
  ab->add_option("--layers", ab_layers, "Layer counts, e.g. l=2,4");
  ab->add_option("--channels", ab_channels, "Channel counts, e.g. c=32,48");
  ab->add_option("--fourier-features", ab_fourier, "Fourier feature counts, e.g. m=0,14 (-1 = default)");
  ab->add_option("--volume", ab_volume, "Target .vraw (default: synthetic --kind)");
  ab->add_option("--kind", ab_kind, "Synthetic target kind");
  ab->add_option("--res", ab_res, "Synthetic target resolution");
  ab->add_option("--tf", ab_tf, "TF for evaluation renders");
  ab->add_option("--views", ab_eval.views, "Evaluation views");
  ab->add_option("--eval-res", ab_eval.resolution, "Evaluation image resolution");
  ab->add_option("--seed", ab_seed, "Seed");
  ab->add_option("--out", ab_out, "Output .csv or directory")->required();
  ab_world.add(ab);
  ab->callback([&] {
    action = [&] {
      SynthParams prm;
      prm.seed = ab_seed;
      const auto vol = ab_volume.empty() ? synth_field(ab_kind, ab_res, prm) : volume_read(ab_volume);
      const auto tf = tf_from_arg(ab_tf);
      auto wc = ab_world.apply(json::object(), ab_seed);
      const auto o = resolve_out(ab_out, "ablate.csv", {".csv"});
      std::ostringstream os;
      os << "grid_R,grid_F,layers,channels,fourier_m,grid_bytes,network_bytes,final_loss,psnr,ssim\n";
      json rows = json::array();
      for (int R : parse_int_list(ab_grid))
        for (int F : parse_int_list(ab_features))
          for (int l : parse_int_list(ab_layers))
            for (int c : parse_int_list(ab_channels))
              for (int m : parse_int_list(ab_fourier)) {
                if (R == 0 && F != parse_int_list(ab_features).front()) continue;
                ModelConfig mc;
                mc.grid_resolution = R;
                mc.grid_features = F;
                mc.layers = l;
                mc.channels = c;
                mc.fourier_features = m;
                if (m == 0) mc.fourier = FourierMode::Off;
                mc.seed = ab_seed;
                mc.volume_resolution = vol.max_dim();
                auto model = make_model(mc);
                if (!quiet) err << "training R=" << R << " F=" << F << " l=" << l << " c=" << c << " m=" << m << "\n";
                const auto res = train_world(model, TargetField::of(vol), wc);
                const auto met = evaluate_views(model, vol, tf, ab_eval);
                const auto mem = memory_footprint(model, WeightPrecision::F16, GridPrecision::F32);
                os << R << ',' << (R ? F : 0) << ',' << l << ',' << c << ',' << mc.fourier_count() << ',' << mem.grid
                   << ',' << mem.network << ',' << (res.loss.empty() ? 0.0 : res.loss.back()) << ',' << met.mean.psnr
                   << ',' << met.mean.ssim << '\n';
                rows.push_back(config_to_json(mc));
              }
      write_text(o.primary, os.str());
      write_manifest(o, manifest("ablate", args,
                                 {{"configs", rows}, {"train", world_config_to_json(wc)}, {"tf", tf_to_json(tf)},
                                  {"volume", ab_volume.empty() ? json(ab_kind) : json(ab_volume)},
                                  {"views", ab_eval.views}, {"eval_res", ab_eval.resolution}, {"seed", ab_seed},
                                  {"output", o.primary.string()}}));
      out << os.str();
    };
  });

  // serve -------------------------------------------------------------------
  auto* sv = app.add_subcommand("serve", "HTTP render service (GET /model/info, POST /render)");
  std::string sv_model, sv_host = "127.0.0.1", sv_tf;
  int sv_port = 8080;
  ServiceOptions sv_opt;
  sv->add_option("--model", sv_model, "Checkpoint to serve")->required();
  sv->add_option("--host", sv_host, "Bind address");
  sv->add_option("--port", sv_port, "Port");
  sv->add_option("--tf", sv_tf, "Default TF preset or JSON file");
  sv->add_option("--server-threads", sv_opt.server_threads, "Concurrent requests");
  sv->add_option("--render-threads", sv_opt.render_threads, "Workers per render");
  sv->callback([&] {
    action = [&] {
      RenderService service(sv_opt);
      service.load(checkpoint_load(sv_model), tf_from_arg(sv_tf));
      httplib::Server server;
      err << "serving " << sv_model << " on http://" << sv_host << ":" << sv_port << "\n";
      if (!service.listen(server, sv_host, sv_port))
        throw IoError("cannot listen on " + sv_host + ":" + std::to_string(sv_port));
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  try {
    if (deterministic) threads = 1;
    if (threads > 0) setenv("FVSRN_THREADS", std::to_string(threads).c_str(), 1);
    if (action) action();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace fvsrn
