#include "gsroad/trainer.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gsroad/error.hpp"

namespace gsroad {

using nlohmann::json;

void TrainConfig::validate() const {
  const std::pair<const char*, double> rates[] = {{"lr_alpha", lr_alpha},       {"lr_scale", lr_scale},
                                                  {"lr_rot", lr_rot},           {"lr_z_start", lr_z_start},
                                                  {"lr_z_end", lr_z_end},       {"lr_color", lr_color},
                                                  {"lr_semantics", lr_semantics}, {"lr_exposure", lr_exposure}};
  for (const auto& [name, v] : rates) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InputError, std::string(name) + " must be >= 0");
  }
  if (lr_z_end > lr_z_start) throw Error(ErrorCode::InputError, "lr_z_end must not exceed lr_z_start");
  if (epochs < 0) throw Error(ErrorCode::InputError, "epochs must be >= 0");
  if (!(lidar_radius > 0.0)) throw Error(ErrorCode::InputError, "lidar_radius must be positive");
  const LossWeights& w = weights;
  if (!(w.lambda_c >= 0 && w.lambda_s >= 0 && w.lambda_smooth >= 0 && w.lambda_z >= 0)) {
    throw Error(ErrorCode::InputError, "loss weights must be >= 0");
  }
}

json to_json(const TrainConfig& c) {
  return {{"lr_alpha", c.lr_alpha},
          {"lr_scale", c.lr_scale},
          {"lr_rot", c.lr_rot},
          {"lr_z_start", c.lr_z_start},
          {"lr_z_end", c.lr_z_end},
          {"lr_color", c.lr_color},
          {"lr_semantics", c.lr_semantics},
          {"lr_exposure", c.lr_exposure},
          {"scene_size_factor", c.scene_size_factor},
          {"epochs", c.epochs},
          {"adam_beta1", c.adam.beta1},
          {"adam_beta2", c.adam.beta2},
          {"adam_eps", c.adam.eps},
          {"seed", c.seed},
          {"shuffle", c.shuffle},
          {"use_lidar", c.use_lidar},
          {"lidar_radius", c.lidar_radius},
          {"lambda_c", c.weights.lambda_c},
          {"lambda_s", c.weights.lambda_s},
          {"lambda_smooth", c.weights.lambda_smooth},
          {"lambda_z", c.weights.lambda_z},
          {"reference_camera", c.reference_camera},
          {"lowpass", c.render.lowpass},
          {"cutoff_sigma", c.render.cutoff_sigma},
          {"min_transmittance", c.render.min_transmittance}};
}

TrainConfig config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::InputError, "training config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "lr_alpha") c.lr_alpha = v.get<double>();
      else if (key == "lr_scale") c.lr_scale = v.get<double>();
      else if (key == "lr_rot") c.lr_rot = v.get<double>();
      else if (key == "lr_z_start") c.lr_z_start = v.get<double>();
      else if (key == "lr_z_end") c.lr_z_end = v.get<double>();
      else if (key == "lr_color") c.lr_color = v.get<double>();
      else if (key == "lr_semantics") c.lr_semantics = v.get<double>();
      else if (key == "lr_exposure") c.lr_exposure = v.get<double>();
      else if (key == "scene_size_factor") c.scene_size_factor = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "adam_beta1") c.adam.beta1 = v.get<double>();
      else if (key == "adam_beta2") c.adam.beta2 = v.get<double>();
      else if (key == "adam_eps") c.adam.eps = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "shuffle") c.shuffle = v.get<bool>();
      else if (key == "use_lidar") c.use_lidar = v.get<bool>();
      else if (key == "lidar_radius") c.lidar_radius = v.get<double>();
      else if (key == "lambda_c") c.weights.lambda_c = v.get<double>();
      else if (key == "lambda_s") c.weights.lambda_s = v.get<double>();
      else if (key == "lambda_smooth") c.weights.lambda_smooth = v.get<double>();
      else if (key == "lambda_z") c.weights.lambda_z = v.get<double>();
      else if (key == "reference_camera") c.reference_camera = v.get<int>();
      else if (key == "lowpass") c.render.lowpass = v.get<double>();
      else if (key == "cutoff_sigma") c.render.cutoff_sigma = v.get<double>();
      else if (key == "min_transmittance") c.render.min_transmittance = v.get<double>();
      else throw Error(ErrorCode::InputError, "unknown training config key '" + key + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InputError, "training config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

double scene_size_factor(const Lattice& lattice) {
  return 0.5 * std::max(lattice.extent_x(), lattice.extent_y());
}

double lr_z_at(std::uint64_t step, std::uint64_t total_steps, const TrainConfig& cfg, double factor) {
  if (step > total_steps) throw Error(ErrorCode::InputError, "lr_z_at: step beyond the schedule");
  if (total_steps == 0 || step == 0) return cfg.lr_z_start * factor;
  if (step == total_steps) return cfg.lr_z_end * factor;
  if (cfg.lr_z_start <= 0.0 || cfg.lr_z_end <= 0.0) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return cfg.lr_z_start * std::pow(cfg.lr_z_end / cfg.lr_z_start, t) * factor;
}

std::vector<std::size_t> epoch_order(std::size_t frame_count, std::uint64_t seed, int epoch, bool shuffle) {
  std::vector<std::size_t> order(frame_count);
  for (std::size_t i = 0; i < frame_count; ++i) order[i] = i;
  if (!shuffle || frame_count < 2) return order;
  // mt19937_64 output is fully specified by the standard; the index reduction is done by hand
  // because std::uniform_int_distribution differs between standard libraries.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x9e3779b9u};
  std::mt19937_64 rng(seq);
  for (std::size_t i = frame_count - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  return order;
}

bool EpochRecord::operator==(const EpochRecord& o) const {
  auto same = [](const LossParts& a, const LossParts& b) {
    return a.color == b.color && a.semantic == b.semantic && a.smooth == b.smooth && a.elevation == b.elevation;
  };
  return epoch == o.epoch && steps == o.steps && skipped == o.skipped && same(mean_parts, o.mean_parts) &&
         mean_total == o.mean_total && psnr == o.psnr && miou == o.miou && elevation_rmse == o.elevation_rmse;
}

bool TrainState::operator==(const TrainState& o) const {
  return step == o.step && total_steps == o.total_steps && z_factor == o.z_factor &&
         initial_z_center == o.initial_z_center && initial_z_range == o.initial_z_range && z == o.z &&
         log_scale == o.log_scale && opacity_logit == o.opacity_logit && quaternion == o.quaternion &&
         color == o.color && semantics == o.semantics && exposure_a == o.exposure_a && exposure_b == o.exposure_b &&
         history == o.history && current == o.current;
}

json to_json(const StepRecord& r) {
  return {{"type", "step"},          {"step", r.step},       {"epoch", r.epoch},
          {"frame", r.frame},        {"skipped", r.skipped}, {"L_c", r.parts.color},
          {"L_s", r.parts.semantic}, {"L_smooth", r.parts.smooth}, {"L_z", r.parts.elevation},
          {"total", r.total},        {"lr_z", r.lr_z}};
}

json to_json(const EpochRecord& r) {
  json j = {{"type", "epoch"},
            {"epoch", r.epoch},
            {"steps", r.steps},
            {"skipped", r.skipped},
            {"L_c", r.mean_parts.color},
            {"L_s", r.mean_parts.semantic},
            {"L_smooth", r.mean_parts.smooth},
            {"L_z", r.mean_parts.elevation},
            {"total", r.mean_total}};
  if (r.psnr) j["psnr"] = *r.psnr;
  if (r.miou) j["miou"] = *r.miou;
  if (r.elevation_rmse) j["elevation_rmse"] = *r.elevation_rmse;
  return j;
}

Trainer::Trainer(SurfelScene& scene, SceneData& data, const TrainConfig& cfg) : scene_(scene), data_(data), cfg_(cfg) {
  cfg_.validate();
  if (!data_.frames || data_.frames->size() == 0) throw Error(ErrorCode::InputError, "no training frames");
  if (scene_.empty()) throw Error(ErrorCode::EmptyScene, "scene has no surfels");
  if (cfg_.reference_camera >= static_cast<int>(data_.cameras.size())) {
    throw Error(ErrorCode::InputError, "reference camera index out of range");
  }
  neighbors_ = NeighborTable::build(scene_);
  if (cfg_.use_lidar) {
    if (!data_.has_lidar()) {
      throw Error(ErrorCode::InputError, "LiDAR supervision requested but the scene has no sweeps (missing folder " +
                                             (data_.directory / "lidar").string() + ")");
    }
    targets_ = ElevationTargets::build(scene_, accumulate_lidar(data_), cfg_.lidar_radius);
    spdlog::info("LiDAR targets matched {} of {} surfels", targets_->matched_count, scene_.size());
  }
  grads_.resize(scene_, data_.cameras.size());
}

TrainState Trainer::initial_state() const {
  TrainState s;
  s.total_steps = static_cast<std::uint64_t>(cfg_.epochs) * data_.frames->size();
  s.z_factor = cfg_.scene_size_factor > 0.0 ? cfg_.scene_size_factor : scene_size_factor(scene_.lattice);
  const auto [lo, hi] = std::minmax_element(scene_.z.begin(), scene_.z.end());
  double sum = 0.0;
  for (double z : scene_.z) sum += z;
  s.initial_z_center = sum / static_cast<double>(scene_.size());
  s.initial_z_range = *hi - *lo;
  s.z.resize(scene_.z.size());
  s.log_scale.resize(scene_.log_scale.size());
  s.opacity_logit.resize(scene_.opacity_logit.size());
  s.quaternion.resize(scene_.quaternion.size());
  s.color.resize(scene_.color.size());
  s.semantics.resize(scene_.semantics.size());
  s.exposure_a.resize(data_.cameras.size());
  s.exposure_b.resize(data_.cameras.size());
  return s;
}

void Trainer::check_divergence(const TrainState& state) const {
  double sum = 0.0;
  for (double z : scene_.z) sum += std::abs(z - state.initial_z_center);
  const double mean = sum / static_cast<double>(scene_.size());
  const double limit = 10.0 * std::max(state.initial_z_range, 1.0);
  if (!(mean <= limit)) {
    throw Error(ErrorCode::DivergedScene, "mean |z| offset " + std::to_string(mean) + " m exceeds " +
                                              std::to_string(limit) + " m at step " + std::to_string(state.step));
  }
}

StepRecord Trainer::step(TrainState& state, std::size_t frame_index) {
  StepRecord rec;
  rec.step = state.step + 1;
  rec.epoch = data_.frames->size() ? static_cast<int>(state.step / data_.frames->size()) : 0;
  rec.frame = frame_index;
  rec.lr_z = lr_z_at(std::min(state.step, state.total_steps), std::max(state.total_steps, state.step), cfg_,
                     state.z_factor);

  const FrameRef ref = data_.frames->ref(frame_index);
  const LabeledImage image = data_.frames->load(frame_index);
  CameraModel& cam = data_.cameras.at(ref.camera);
  const Pose& pose = data_.poses.at(ref.pose);
  const auto culled = cull_frustum(scene_, camera_pose_in_world(pose, cam), cam);
  render_into(scene_, pose, cam, culled, cfg_.render, PixelWindow::full(cam), render_);

  const int C = scene_.class_count;
  d_color_.resize(render_.color.size());
  d_sem_.resize(render_.semantics.size());
  try {
    rec.parts.color = color_loss(render_.color, image.rgb, image.mask, d_color_);
    rec.parts.semantic = semantic_loss(render_.semantics, C, image.labels, image.mask, d_sem_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyMask) throw;
    spdlog::debug("step {}: frame {} has no road pixels, skipped", rec.step, frame_index);
    rec.skipped = true;
    ++state.step;
    return rec;
  }

  const LossWeights w = effective_weights(cfg_.weights, cfg_.use_lidar);
  grads_.zero();
  for (double& d : d_color_) d *= w.lambda_c;
  for (double& d : d_sem_) d *= w.lambda_s;
  render_backward(scene_, cam, static_cast<std::size_t>(ref.camera), render_, d_color_, d_sem_, grads_);

  std::vector<double> scratch(scene_.size(), 0.0);
  rec.parts.smooth = smooth_loss(scene_.z, neighbors_, scratch);
  for (std::size_t i = 0; i < scratch.size(); ++i) grads_.z[i] += w.lambda_smooth * scratch[i];
  if (cfg_.use_lidar) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    rec.parts.elevation = elevation_loss(scene_.z, *targets_, scratch);
    for (std::size_t i = 0; i < scratch.size(); ++i) grads_.z[i] += w.lambda_z * scratch[i];
  }
  try {
    rec.total = total_loss(rec.parts, cfg_.weights, cfg_.use_lidar);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(e.what()) + " at step " + std::to_string(rec.step) + " (frame " +
                              std::to_string(frame_index) + ")");
  }

  if (cfg_.reference_camera >= 0) {
    grads_.exposure_a[cfg_.reference_camera] = 0.0;
    grads_.exposure_b[cfg_.reference_camera] = 0.0;
  }

  const std::uint64_t t = rec.step;
  const AdamConfig& adam = cfg_.adam;
  adam_step(scene_.z, grads_.z, state.z, rec.lr_z, t, adam);
  adam_step(scene_.log_scale, grads_.log_scale, state.log_scale, cfg_.lr_scale, t, adam);
  adam_step(scene_.opacity_logit, grads_.opacity_logit, state.opacity_logit, cfg_.lr_alpha, t, adam);
  adam_step(scene_.quaternion, grads_.quaternion, state.quaternion, cfg_.lr_rot, t, adam);
  adam_step(scene_.color, grads_.color, state.color, cfg_.lr_color, t, adam);
  adam_step(scene_.semantics, grads_.semantics, state.semantics, cfg_.lr_semantics, t, adam);

  std::vector<double> ea(data_.cameras.size()), eb(data_.cameras.size());
  for (std::size_t k = 0; k < data_.cameras.size(); ++k) {
    ea[k] = data_.cameras[k].exposure_a;
    eb[k] = data_.cameras[k].exposure_b;
  }
  adam_step(ea, grads_.exposure_a, state.exposure_a, cfg_.lr_exposure, t, adam);
  adam_step(eb, grads_.exposure_b, state.exposure_b, cfg_.lr_exposure, t, adam);
  for (std::size_t k = 0; k < data_.cameras.size(); ++k) {
    data_.cameras[k].exposure_a = ea[k];
    data_.cameras[k].exposure_b = eb[k];
  }

  for (std::size_t i = 0; i < scene_.size(); ++i) {
    double* q = &scene_.quaternion[4 * i];
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (n > 0.0) {
      for (int c = 0; c < 4; ++c) q[c] /= n;
    } else {
      q[0] = 1.0;
      q[1] = q[2] = q[3] = 0.0;
    }
  }
  for (double& c : scene_.color) c = std::clamp(c, 0.0, 1.0);

  ++state.step;
  check_divergence(state);
  return rec;
}

void Trainer::run(TrainState& state, std::optional<std::uint64_t> stop_at) {
  const std::size_t n = data_.frames->size();
  const std::uint64_t stop = std::min(stop_at.value_or(state.total_steps), state.total_steps);
  int cached_epoch = -1;
  std::vector<std::size_t> order;
  while (state.step < stop) {
    const int epoch = static_cast<int>(state.step / n);
    if (epoch != cached_epoch) {
      order = epoch_order(n, cfg_.seed, epoch, cfg_.shuffle);
      cached_epoch = epoch;
    }
    const StepRecord rec = step(state, order[state.step % n]);
    EpochRecord& cur = state.current;
    cur.epoch = epoch;
    ++cur.steps;
    if (rec.skipped) {
      ++cur.skipped;
    } else {
      cur.mean_parts.color += rec.parts.color;
      cur.mean_parts.semantic += rec.parts.semantic;
      cur.mean_parts.smooth += rec.parts.smooth;
      cur.mean_parts.elevation += rec.parts.elevation;
      cur.mean_total += rec.total;
    }
    if (on_step) on_step(rec);

    if (state.step % n == 0) {
      EpochRecord done = cur;
      const double used = static_cast<double>(std::max<std::size_t>(1, done.steps - done.skipped));
      done.mean_parts.color /= used;
      done.mean_parts.semantic /= used;
      done.mean_parts.smooth /= used;
      done.mean_parts.elevation /= used;
      done.mean_total /= used;
      if (on_epoch) on_epoch(done);
      spdlog::info("epoch {} done: {} steps, mean total loss {:.6f}", done.epoch + 1, done.steps, done.mean_total);
      state.history.push_back(done);
      state.current = EpochRecord{};
    }
  }
}

}  // namespace gsroad
