/******************************************************************************
 * Copyright 2026 The orbit-splat Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#include "osplat/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "osplat/augment.hpp"
#include "osplat/image.hpp"
#include "osplat/losses.hpp"

namespace osplat {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Small helpers

namespace {

std::uint64_t file_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path + " for hashing");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const auto n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!is) break;
  }
  return h;
}

VecX<double> beta_from_config(const PipelineConfig& cfg,
                              const TemplateBody& body) {
  if (cfg.beta.empty()) return VecX<double>::Zero(body.shape_dim());
  require(int(cfg.beta.size()) == body.shape_dim(),
          "config: beta has " + std::to_string(cfg.beta.size()) +
              " coefficients, body expects " +
              std::to_string(body.shape_dim()));
  VecX<double> beta(cfg.beta.size());
  for (std::size_t i = 0; i < cfg.beta.size(); ++i) beta[i] = cfg.beta[i];
  return beta;
}

std::unique_ptr<FeatureExtractorT<float>> make_extractor(
    const PipelineConfig& cfg) {
  if (cfg.lpips.mode == "none" || cfg.train.weights.lpips == 0.0)
    return nullptr;
  if (cfg.lpips.mode == "file") {
    require(!cfg.lpips.weight_file.empty(),
            "config: lpips.mode=file needs lpips.weight_file");
    return std::make_unique<ConvPyramidExtractor<float>>(cfg.lpips.weight_file);
  }
  ConvPyramidExtractor<float>::Config c;
  c.levels = cfg.lpips.levels;
  c.channels = cfg.lpips.channels;
  c.seed = cfg.lpips.seed;
  return std::make_unique<ConvPyramidExtractor<float>>(c);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << content;
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace

// ---------------------------------------------------------------------------
// Output lock

OutputLock::OutputLock(const std::string& output_dir) {
  fs::create_directories(output_dir);
  path_ = (fs::path(output_dir) / ".osplat_lock").string();
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f)
    throw IoError("output directory " + output_dir +
                  " is locked by another run (" + path_ + " exists)");
  std::fclose(f);
}

OutputLock::~OutputLock() { std::remove(path_.c_str()); }

// ---------------------------------------------------------------------------
// Frame files

std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.png", index);
  return buf;
}

std::vector<std::string> list_frame_files(const std::string& dir) {
  require(fs::is_directory(dir), "frames directory not found: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<AugmentEntry> load_augment_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path);
  std::vector<AugmentEntry> entries;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("count", 0) == 0)
      continue;
    std::istringstream ss(line);
    AugmentEntry e;
    std::string kind;
    ss >> e.index >> kind;
    if (kind == "source") {
      e.source = true;
      ss >> e.src_a;
      e.src_b = e.src_a;
    } else if (kind == "interp") {
      ss >> e.src_a >> e.src_b >> e.t;
    } else {
      throw ValidationError("manifest: unknown entry kind '" + kind + "'");
    }
    if (!ss) throw ValidationError("manifest: malformed line: " + line);
    entries.push_back(e);
  }
  return entries;
}

// ---------------------------------------------------------------------------
// augment

void cmd_augment(const PipelineConfig& config) {
  require(!config.paths.frames_dir.empty(), "augment: paths.frames_dir not set");
  require(!config.paths.output_dir.empty(), "augment: paths.output_dir not set");
  const auto files = list_frame_files(config.paths.frames_dir);
  require(files.size() >= 2, "augment: need at least 2 source frames, found " +
                                 std::to_string(files.size()));

  VideoSequence video;
  std::string errors;
  for (const auto& f : files) {
    try {
      video.frames.push_back(load_png<float>(f));
    } catch (const std::exception& e) {
      errors += std::string("  ") + e.what() + "\n";
    }
  }
  if (!errors.empty())
    throw ValidationError("augment: unreadable source frames:\n" + errors);
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    require(video.frames[i].width == video.frames[i].height,
            "augment: frame " + files[i] + " is not square");
    require(video.frames[i].same_shape(video.frames.front()),
            "augment: frame " + files[i] + " differs in resolution");
  }

  OutputLock lock(config.paths.output_dir);
  const fs::path out_dir = fs::path(config.paths.output_dir) / "augmented";
  fs::create_directories(out_dir);

  AugmentConfig acfg;
  acfg.sr_factor = config.augment.sr_factor;
  acfg.target_width = config.augment.target_size;
  acfg.target_height = config.augment.target_size;
  acfg.flow.levels = config.augment.flow_levels;
  acfg.flow.iterations = config.augment.flow_iterations;
  acfg.flow.sweeps = config.augment.flow_sweeps;
  acfg.flow.smoothness = config.augment.flow_smoothness;

  const auto out = augment_video<float>(video, acfg);

  std::ostringstream manifest;
  manifest << "# orbit-splat augment manifest\n";
  manifest << "count " << out.count() << "\n";
  const double times[3] = {0.25, 0.5, 0.75};
  for (int i = 0; i < out.count(); ++i) {
    save_png(out.frames[i], (out_dir / frame_filename(i)).string());
    if (i % 4 == 0) {
      manifest << i << " source " << i / 4 << "\n";
    } else {
      manifest << i << " interp " << i / 4 << ' ' << i / 4 + 1 << ' '
               << times[i % 4 - 1] << "\n";
    }
  }
  write_text_file((out_dir / "manifest.txt").string(), manifest.str());
}

// ---------------------------------------------------------------------------
// scene assembly

SceneT<float> build_model_scene(const PipelineConfig& config, int sample_count,
                                std::uint64_t sample_seed) {
  require(!config.paths.body_asset.empty(), "paths.body_asset not set");
  SceneT<float> scene;
  scene.body = load_template(config.paths.body_asset);
  scene.topo = scene.body.topological_order();
  const VecX<double> beta = beta_from_config(config, scene.body);

  scene.samples =
      sample_surface_for_uv(scene.body, sample_count, sample_seed,
                            config.gaussians.uv_resolution,
                            config.gaussians.uv_resolution);
  const MatX<double> shaped =
      shaped_sample_positions(scene.body, scene.samples, beta);
  scene.posmap =
      uv_position_map(scene.samples, shaped, config.gaussians.uv_resolution,
                      config.gaussians.uv_resolution);
  scene.sample_positions = shaped.cast<float>();
  scene.sample_weights = scene.samples.skin_weights.cast<float>();
  scene.rest_joints = joint_locations(scene.body, beta).cast<float>();
  scene.base_scale = float(mean_nn_distance(shaped));
  for (int c = 0; c < 3; ++c)
    scene.raster.background[c] = float(config.render.background[c]);
  return scene;
}

namespace {

// Azimuth and pose assignment for a frame directory, honoring the augment
// manifest when one is present.
struct FrameLayout {
  std::vector<double> azimuths;
  std::vector<BodyStated> states;
};

FrameLayout frame_layout(const PipelineConfig& config,
                         const std::string& frames_dir, int n_frames,
                         int joint_count) {
  FrameLayout layout;
  const std::string manifest_path =
      (fs::path(frames_dir) / "manifest.txt").string();

  std::vector<AugmentEntry> entries;
  int n_src = 0;
  if (fs::exists(manifest_path)) {
    entries = load_augment_manifest(manifest_path);
    require(int(entries.size()) == n_frames,
            "fit: manifest lists " + std::to_string(entries.size()) +
                " frames, directory holds " + std::to_string(n_frames));
    for (const auto& e : entries) n_src = std::max(n_src, e.src_b + 1);
  } else {
    for (int i = 0; i < n_frames; ++i) {
      AugmentEntry e;
      e.index = i;
      e.source = true;
      e.src_a = e.src_b = i;
      entries.push_back(e);
    }
    n_src = n_frames;
  }

  std::vector<BodyStated> src_poses;
  if (!config.paths.poses_file.empty()) {
    src_poses = load_poses(config.paths.poses_file, joint_count);
    require(int(src_poses.size()) == n_src || src_poses.size() == 1 ||
                int(src_poses.size()) == n_frames,
            "fit: poses file has " + std::to_string(src_poses.size()) +
                " rows; expected 1, " + std::to_string(n_src) + " or " +
                std::to_string(n_frames));
  } else {
    src_poses = {BodyStated::rest(joint_count, 0)};
  }

  const double step = 360.0 / double(n_src);
  for (int i = 0; i < n_frames; ++i) {
    const auto& e = entries[i];
    const double pos = e.source ? double(e.src_a)
                                : double(e.src_a) +
                                      e.t * double(e.src_b - e.src_a);
    layout.azimuths.push_back(pos * step);

    if (src_poses.size() == 1) {
      layout.states.push_back(src_poses[0]);
    } else if (int(src_poses.size()) == n_frames) {
      layout.states.push_back(src_poses[i]);
    } else {
      const auto& a = src_poses[e.src_a];
      const auto& b = src_poses[std::min(e.src_b, n_src - 1)];
      BodyStated s = a;
      const double t = e.source ? 0.0 : e.t;
      s.theta = (1.0 - t) * a.theta + t * b.theta;
      s.translation = (1.0 - t) * a.translation + t * b.translation;
      layout.states.push_back(std::move(s));
    }
  }
  return layout;
}

std::string manifest_text(const PipelineConfig& config, int n_frames,
                          const std::vector<std::string>& frame_files) {
  std::ostringstream os;
  os << "# orbit-splat run manifest\n";
  os << "seed=" << config.train.seed << "\n";
  os << "sample_seed=" << config.sample_seed << "\n";
  os << "epochs=" << config.train.epochs << "\n";
  os << "batch_size=" << config.train.batch_size << "\n";
  os << "learning_rate=" << config.train.learning_rate << "\n";
  os << "motion_learning_rate=" << config.train.motion_learning_rate << "\n";
  os << "gaussian_count=" << config.gaussians.count << "\n";
  os << "uv_resolution=" << config.gaussians.uv_resolution << "\n";
  os << "frames=" << n_frames << "\n";
  os << "body_asset_hash=" << std::hex << std::showbase
     << file_hash(config.paths.body_asset) << std::dec << std::noshowbase
     << "\n";
  std::uint64_t frames_hash = 0xcbf29ce484222325ull;
  for (const auto& f : frame_files) {
    const std::uint64_t h = file_hash(f);
    frames_hash ^= h;
    frames_hash *= 0x100000001b3ull;
  }
  os << "frames_hash=" << std::hex << std::showbase << frames_hash << std::dec
     << std::noshowbase << "\n";
  if (!config.paths.poses_file.empty())
    os << "poses_hash=" << std::hex << std::showbase
       << file_hash(config.paths.poses_file) << std::dec << std::noshowbase
       << "\n";
  os << "config=" << config_to_json(config) << "\n";
  return os.str();
}

std::string history_csv(const std::vector<LossBreakdown<float>>& history) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "step,rgb,ssim,lpips,offset,scale,feature,total\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    os << (i + 1) << ',' << h.rgb << ',' << h.ssim << ',' << h.lpips << ','
       << h.offset << ',' << h.scale << ',' << h.feature << ',' << h.total
       << "\n";
  }
  return os.str();
}

CheckpointMeta meta_for(const PipelineConfig& config, const SceneT<float>& scene,
                        const TrainState& state) {
  CheckpointMeta meta;
  meta.uv_width = scene.posmap.width;
  meta.uv_height = scene.posmap.height;
  meta.feature_channels = state.params.features.channels;
  meta.net_widths = {state.params.net.input_width()};
  for (const auto& w : state.params.net.weights)
    meta.net_widths.push_back(int(w.rows()));
  meta.joint_count = scene.body.joint_count();
  meta.frame_count = scene.frame_count();
  meta.sample_count = scene.samples.count();
  meta.sample_seed = config.sample_seed;
  meta.base_scale = scene.base_scale;
  return meta;
}

}  // namespace

void cmd_fit(const PipelineConfig& config) {
  require(!config.paths.frames_dir.empty(), "fit: paths.frames_dir not set");
  require(!config.paths.output_dir.empty(), "fit: paths.output_dir not set");
  const auto files = list_frame_files(config.paths.frames_dir);
  require(!files.empty(), "fit: no frames in " + config.paths.frames_dir);

  SceneT<float> scene =
      build_model_scene(config, config.gaussians.count, config.sample_seed);

  for (const auto& f : files) scene.frames.push_back(load_png<float>(f));
  const int n = int(scene.frames.size());
  for (const auto& img : scene.frames) {
    require(img.same_shape(scene.frames.front()),
            "fit: frames differ in resolution");
    require(img.width == img.height, "fit: frames must be square");
  }

  const auto layout =
      frame_layout(config, config.paths.frames_dir, n, scene.body.joint_count());
  for (int i = 0; i < n; ++i) {
    scene.cameras.push_back(look_at_origin(
        layout.azimuths[i], config.orbit.elevation, config.orbit.radius,
        config.orbit.fov, scene.frames[i].width, scene.frames[i].height));
    scene.states.push_back(layout.states[i].cast<float>());
  }

  const auto extractor = make_extractor(config);
  scene.lpips_extractor = extractor.get();
  scene.validate();

  OutputLock lock(config.paths.output_dir);
  const fs::path out(config.paths.output_dir);

  auto state = init_train_state<float>(scene, config.gaussians.feature_channels,
                                       config.gaussians.hidden_widths,
                                       config.train.seed);
  const CheckpointMeta meta = meta_for(config, scene, state);

  fit<float>(state, scene, config.train, [&](const TrainState& s) {
    save_checkpoint((out / "checkpoint.bin").string(), meta, s);
  });

  save_orbit(scene.cameras, (out / "orbit.txt").string());
  write_text_file((out / "run_manifest.txt").string(),
                  manifest_text(config, n, files));
  write_text_file((out / "loss_history.csv").string(),
                  history_csv(state.history));
}

// ---------------------------------------------------------------------------
// render / eval / export

namespace {

struct LoadedModel {
  CheckpointMeta meta;
  TrainState state;
  SceneT<float> scene;  // cameras/frames/states filled by the caller
};

LoadedModel load_model(const PipelineConfig& config,
                       const std::string& checkpoint) {
  auto [meta, state] = load_checkpoint(checkpoint);
  LoadedModel model;
  model.scene = build_model_scene(config, meta.sample_count, meta.sample_seed);
  require(model.scene.body.joint_count() == meta.joint_count,
          "checkpoint: body has " +
              std::to_string(model.scene.body.joint_count()) +
              " joints, checkpoint expects " + std::to_string(meta.joint_count));
  require(model.scene.posmap.width == meta.uv_width &&
              model.scene.posmap.height == meta.uv_height,
          "checkpoint: UV resolution mismatch with config");
  model.meta = meta;
  model.state = std::move(state);
  return model;
}

// Base pose for novel-view rendering: the first row of the poses file when
// given, otherwise the rest pose. Corrections stay zero (they are per
// training frame).
BodyState novel_view_state(const PipelineConfig& config, int joint_count) {
  if (!config.paths.poses_file.empty()) {
    const auto poses = load_poses(config.paths.poses_file, joint_count);
    require(!poses.empty(), "poses file is empty");
    return poses.front().cast<float>();
  }
  return BodyState::rest(joint_count, 0);
}

ImageT<float> render_view(const LoadedModel& model, const PipelineConfig& config,
                          const BodyState& state, double azimuth, int width,
                          int height) {
  SceneT<float> scene = model.scene;  // shallow-ish copy of the shared parts
  scene.frames = {ImageT<float>(width, height)};
  scene.cameras = {look_at_origin(azimuth, config.orbit.elevation,
                                  config.orbit.radius, config.orbit.fov, width,
                                  height)};
  scene.states = {state};
  TrainParams<float> params = model.state.params;
  // novel views carry no per-frame corrections
  params.delta_theta = MatX<float>::Zero(1, scene.body.joint_count() * 3);
  params.delta_translation = MatX<float>::Zero(1, 3);
  return render_frame<float>(params, scene, 0);
}

const std::map<std::string, double> kViewAzimuths = {
    {"front", 0.0}, {"back", 180.0}, {"right", 90.0}, {"left", 270.0}};

}  // namespace

void cmd_render(const PipelineConfig& config, const RenderRequest& request) {
  require(!config.paths.output_dir.empty(), "render: paths.output_dir not set");
  const LoadedModel model = load_model(config, request.checkpoint);

  OutputLock lock(config.paths.output_dir);
  const fs::path out_dir = fs::path(config.paths.output_dir) / "renders";
  fs::create_directories(out_dir);

  if (request.frame_index >= 0) {
    // reproduce a training frame, including its motion corrections
    require(request.frame_index < model.meta.frame_count,
            "render: frame index out of range");
    require(!config.paths.frames_dir.empty(),
            "render: paths.frames_dir needed for --frame");
    const auto files = list_frame_files(config.paths.frames_dir);
    require(int(files.size()) == model.meta.frame_count,
            "render: frames dir does not match the checkpoint");
    const auto probe = load_png<float>(files[request.frame_index]);

    SceneT<float> scene = model.scene;
    const auto layout = frame_layout(config, config.paths.frames_dir,
                                     model.meta.frame_count,
                                     scene.body.joint_count());
    for (int i = 0; i < model.meta.frame_count; ++i) {
      scene.frames.emplace_back(probe.width, probe.height);
      scene.cameras.push_back(look_at_origin(
          layout.azimuths[i], config.orbit.elevation, config.orbit.radius,
          config.orbit.fov, probe.width, probe.height));
      scene.states.push_back(layout.states[i].cast<float>());
    }
    const auto img =
        render_frame<float>(model.state.params, scene, request.frame_index);
    save_png(img, (out_dir / frame_filename(request.frame_index)).string());
    if (request.raw)
      save_raw(img, (out_dir / (frame_filename(request.frame_index) + ".raw"))
                        .string());
    return;
  }

  std::vector<double> azimuths = request.azimuths;
  // bare `render` defaults to a full turntable at the configured orbit count
  const int orbit_n = request.orbit_frames > 0
                          ? request.orbit_frames
                          : (azimuths.empty() ? config.orbit.n_frames : 0);
  if (orbit_n > 0) {
    azimuths.clear();
    for (int k = 0; k < orbit_n; ++k)
      azimuths.push_back(360.0 * k / orbit_n);
  }
  require(!azimuths.empty(), "render: nothing to render (no azimuths)");

  const BodyState state = novel_view_state(config, model.scene.body.joint_count());
  for (std::size_t i = 0; i < azimuths.size(); ++i) {
    const auto img = render_view(model, config, state, azimuths[i],
                                 config.render.resolution,
                                 config.render.resolution);
    save_png(img, (out_dir / frame_filename(int(i))).string());
    if (request.raw)
      save_raw(img, (out_dir / (frame_filename(int(i)) + ".raw")).string());
  }
}

EvalResult cmd_eval(const PipelineConfig& config, const std::string& checkpoint) {
  require(!config.paths.output_dir.empty(), "eval: paths.output_dir not set");
  require(!config.eval.gt_dir.empty(), "eval: eval.gt_dir not set");
  for (const auto& view : config.eval.views)
    require(kViewAzimuths.count(view) == 1, "eval: unknown view '" + view + "'");

  // every ground-truth view must exist before any work happens
  std::map<std::string, std::string> gt_files;
  for (const auto& view : config.eval.views) {
    const auto path = (fs::path(config.eval.gt_dir) / (view + ".png")).string();
    if (!fs::exists(path))
      throw ValidationError("eval: missing ground-truth view '" + view +
                            "' (" + path + ")");
    gt_files[view] = path;
  }

  const LoadedModel model = load_model(config, checkpoint);
  const auto extractor = make_extractor(config);
  const BodyState state = novel_view_state(config, model.scene.body.joint_count());

  OutputLock lock(config.paths.output_dir);

  EvalResult result;
  result.has_lpips = extractor != nullptr;
  std::ostringstream report;
  report << "# clip=unavailable (needs a pretrained vision-language model)\n";
  double psnr_sum = 0, ssim_sum = 0, lpips_sum = 0;
  for (const auto& view : config.eval.views) {
    const auto gt = load_png<float>(gt_files[view]);
    require(gt.width == gt.height, "eval: ground-truth views must be square");
    // score the 8-bit deliverable, exactly as save_png would emit it
    const auto img = quantize8(render_view(model, config, state,
                                           kViewAzimuths.at(view), gt.width,
                                           gt.height));
    const double p = psnr<float>(img, gt);
    const double s = ssim<float>(img, gt);
    result.psnr[view] = p;
    result.ssim[view] = s;
    psnr_sum += p;
    ssim_sum += s;
    report << view << " psnr=" << p << " ssim=" << s;
    if (extractor) {
      const double l = lpips<float>(img, gt, *extractor);
      result.lpips[view] = l;
      lpips_sum += l;
      report << " lpips=" << l;
    }
    report << "\n";
  }
  const double nv = double(config.eval.views.size());
  result.psnr["mean"] = psnr_sum / nv;
  result.ssim["mean"] = ssim_sum / nv;
  report << "mean psnr=" << psnr_sum / nv << " ssim=" << ssim_sum / nv;
  if (extractor) {
    result.lpips["mean"] = lpips_sum / nv;
    report << " lpips=" << lpips_sum / nv;
  }
  report << "\n";

  write_text_file(
      (fs::path(config.paths.output_dir) / "eval_report.txt").string(),
      report.str());
  return result;
}

// ---------------------------------------------------------------------------
// PLY export

void save_gaussian_ply(const GaussianSet& gaussians, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("export: cannot open " + path);
  const int n = gaussians.count();
  os << "ply\nformat binary_little_endian 1.0\n";
  os << "element vertex " << n << "\n";
  for (const char* prop :
       {"x", "y", "z", "red", "green", "blue", "opacity", "scale_0", "scale_1",
        "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"})
    os << "property float " << prop << "\n";
  os << "end_header\n";
  for (int i = 0; i < n; ++i) {
    float row[14] = {
        gaussians.centers(i, 0),   gaussians.centers(i, 1),
        gaussians.centers(i, 2),   gaussians.colors(i, 0),
        gaussians.colors(i, 1),    gaussians.colors(i, 2),
        gaussians.opacities[i],    gaussians.scales(i, 0),
        gaussians.scales(i, 1),    gaussians.scales(i, 2),
        gaussians.rotations(i, 0), gaussians.rotations(i, 1),
        gaussians.rotations(i, 2), gaussians.rotations(i, 3)};
    os.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
  if (!os) throw IoError("export: write failed for " + path);
}

GaussianSet load_gaussian_ply(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("import: cannot open " + path);
  std::string line;
  int n = -1;
  int props = 0;
  bool binary_le = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      binary_le = (fmt == "binary_little_endian");
    } else if (word == "element") {
      std::string what;
      ss >> what >> n;
      require(what == "vertex", "import: unsupported element " + what);
    } else if (word == "property") {
      ++props;
    }
  }
  require(binary_le, "import: expected binary_little_endian PLY");
  require(n >= 0, "import: missing vertex element in " + path);
  require(props == 14, "import: expected 14 float properties, found " +
                           std::to_string(props));

  GaussianSet g;
  g.centers.resize(n, 3);
  g.colors.resize(n, 3);
  g.opacities.resize(n);
  g.scales.resize(n, 3);
  g.rotations.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    float row[14];
    is.read(reinterpret_cast<char*>(row), sizeof(row));
    if (!is) throw IoError("import: truncated PLY " + path);
    g.centers.row(i) << row[0], row[1], row[2];
    g.colors.row(i) << row[3], row[4], row[5];
    g.opacities[i] = row[6];
    g.scales.row(i) << row[7], row[8], row[9];
    g.rotations.row(i) << row[10], row[11], row[12], row[13];
  }
  return g;
}

void cmd_export(const PipelineConfig& config, const std::string& checkpoint,
                const std::string& out_ply, int frame_index) {
  const LoadedModel model = load_model(config, checkpoint);
  const auto canonical =
      canonical_gaussians<float>(model.state.params, model.scene);

  if (frame_index < 0) {
    save_gaussian_ply(canonical, out_ply);
    return;
  }
  require(frame_index < model.meta.frame_count,
          "export: frame index out of range");
  SceneT<float> scene = model.scene;
  require(!config.paths.frames_dir.empty(),
          "export: paths.frames_dir needed for --frame");
  const auto layout =
      frame_layout(config, config.paths.frames_dir, model.meta.frame_count,
                   scene.body.joint_count());
  scene.states.clear();
  for (const auto& s : layout.states) scene.states.push_back(s.cast<float>());
  for (int i = 0; i < model.meta.frame_count; ++i) {
    scene.frames.emplace_back(8, 8);
    scene.cameras.push_back(look_at_origin(layout.azimuths[i], 0, 2.7, 33.8, 8, 8));
  }
  const auto posed = repose<float>(
      canonical, scene.sample_weights, scene.rest_joints, scene.body.parents,
      scene.topo, frame_state<float>(model.state.params, scene, frame_index));
  save_gaussian_ply(posed, out_ply);
}

}  // namespace osplat
