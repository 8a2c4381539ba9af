// Command-line front-end: project | synth | fit | motion | eval.
// Exit codes: 0 success, 1 computation-domain error, 2 usage/IO error.

#include <CLI11.hpp>
#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "emotive/correlation.hpp"
#include "emotive/events.hpp"
#include "emotive/fitting.hpp"
#include "emotive/io.hpp"
#include "emotive/motion.hpp"
#include "emotive/nurbs.hpp"
#include "emotive/projection.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace emotive;

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::pair<std::size_t, std::size_t> parse_sensor(const std::string& s) {
  auto x = s.find('x');
  if (x == std::string::npos) raise(Errc::invalid_argument, "--sensor expects HxW");
  return {static_cast<std::size_t>(std::stoul(s.substr(0, x))),
          static_cast<std::size_t>(std::stoul(s.substr(x + 1)))};
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    std::string tok = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(std::stod(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

EventFormat detect_format(const std::string& path, const std::string& flag) {
  if (flag == "csv") return EventFormat::CSV;
  if (flag == "bin") return EventFormat::RAW_BIN;
  return path.ends_with(".bin") ? EventFormat::RAW_BIN : EventFormat::CSV;
}

EventStream load_events(const std::string& path, const std::string& format, std::size_t h,
                        std::size_t w, bool strict) {
  return parse_event_stream(io::read_file(path), detect_format(path, format), h, w, strict);
}

Tensor downsample2(const Tensor& t, std::size_t factor) {
  return factor > 1 ? mean_pool_tail(t, factor, 2) : t;
}

// Event-count densities have an arbitrary scale that saturates the softmax
// behind the curve weights; the pipeline normalizes the temporal profile to
// unit maximum before adaptation.
AdaptationResult adapt_from_density(const DensityField& density, std::size_t controls,
                                    int degree) {
  std::vector<double> profile = density_profile(density);
  double top = *std::max_element(profile.begin(), profile.end());
  if (top > 0.0)
    for (double& v : profile) v /= top;
  return density_adapt_profile(profile, controls, degree);
}

// Shared fit/project hyperparameters, defaults as published.
struct Params {
  std::size_t bins = 7;
  std::size_t t_bins = 120;
  double sigma = 10.0;
  std::size_t anchors = 6;
  std::size_t controls = 5;
  int degree = 3;
  int radius = 4;
  std::size_t levels = 2;
  std::size_t iters = 6;
  std::size_t downsample = 8;
  std::vector<std::size_t> pool{3, 3, 3};
  bool truncate = false;
};

void add_projection_flags(CLI::App* cmd, Params& p) {
  cmd->add_option("--bins", p.bins, "Voxel bin count");
  cmd->add_option("--tbins", p.t_bins, "Temporal resolution of the x-t/y-t maps");
  cmd->add_option("--sigma", p.sigma, "Temporal Gaussian scale in bins");
  cmd->add_flag("--truncate", p.truncate, "Cut the temporal Gaussian at 4 sigma");
}

FlowField upsample_flow(const DisplacementField& src, std::size_t H, std::size_t W) {
  FlowField out = FlowField::zeros(H, W);
  if (src.height == H && src.width == W) {
    for (std::size_t i = 0; i < H * W; ++i) {
      out.u[i] = src.uv[2 * i];
      out.v[i] = src.uv[2 * i + 1];
    }
    return out;
  }
  double sy = H > 1 ? static_cast<double>(src.height - 1) / static_cast<double>(H - 1) : 0.0;
  double sx = W > 1 ? static_cast<double>(src.width - 1) / static_cast<double>(W - 1) : 0.0;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double fy = static_cast<double>(y) * sy, fx = static_cast<double>(x) * sx;
      std::size_t y0 = std::min(static_cast<std::size_t>(fy), src.height - 1);
      std::size_t x0 = std::min(static_cast<std::size_t>(fx), src.width - 1);
      std::size_t y1 = std::min(y0 + 1, src.height - 1);
      std::size_t x1 = std::min(x0 + 1, src.width - 1);
      double wy = fy - static_cast<double>(y0), wx = fx - static_cast<double>(x0);
      for (int c = 0; c < 2; ++c) {
        double v00 = src.uv[(y0 * src.width + x0) * 2 + c];
        double v01 = src.uv[(y0 * src.width + x1) * 2 + c];
        double v10 = src.uv[(y1 * src.width + x0) * 2 + c];
        double v11 = src.uv[(y1 * src.width + x1) * 2 + c];
        double val = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
        (c == 0 ? out.u : out.v)[y * W + x] = val;
      }
    }
  return out;
}

MiDField upsample_mid(const MiDField& src, std::size_t H, std::size_t W) {
  if (src.height == H && src.width == W) return src;
  MiDField out = MiDField::ones(H, W);
  double sy = H > 1 ? static_cast<double>(src.height - 1) / static_cast<double>(H - 1) : 0.0;
  double sx = W > 1 ? static_cast<double>(src.width - 1) / static_cast<double>(W - 1) : 0.0;
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double fy = static_cast<double>(y) * sy, fx = static_cast<double>(x) * sx;
      std::size_t y0 = std::min(static_cast<std::size_t>(fy), src.height - 1);
      std::size_t x0 = std::min(static_cast<std::size_t>(fx), src.width - 1);
      std::size_t y1 = std::min(y0 + 1, src.height - 1);
      std::size_t x1 = std::min(x0 + 1, src.width - 1);
      double wy = fy - static_cast<double>(y0), wx = fx - static_cast<double>(x0);
      out.m[y * W + x] =
          (1 - wy) * ((1 - wx) * src.m[y0 * src.width + x0] + wx * src.m[y0 * src.width + x1]) +
          wy * ((1 - wx) * src.m[y1 * src.width + x0] + wx * src.m[y1 * src.width + x1]);
      std::size_t ny = std::min<std::size_t>(static_cast<std::size_t>(std::lround(fy)),
                                             src.height - 1);
      std::size_t nx = std::min<std::size_t>(static_cast<std::size_t>(std::lround(fx)),
                                             src.width - 1);
      out.valid[y * W + x] = src.valid[ny * src.width + nx];
    }
  return out;
}

// ---------------------------------------------------------------- project

int cmd_project(const std::string& events_path, const std::string& format,
                const std::string& sensor, const std::string& out, const Params& p,
                std::optional<std::uint64_t> t0, std::optional<std::uint64_t> t1) {
  auto [H, W] = parse_sensor(sensor);
  EventStream stream = load_events(events_path, format, H, W, false);
  if (t0 || t1)
    stream = slice_window(stream, t0.value_or(stream.t_start), t1.value_or(stream.t_end + 1));
  if (stream.events.empty())
    std::cerr << "warning: empty event stream, writing zero-valued projections\n";

  Voxel vox = event_voxel(stream, p.bins);
  Kymograph kymo = event_kymograph(stream, p.t_bins, p.sigma, p.truncate);

  json vmeta{{"kind", "voxel"},
             {"bins", p.bins},
             {"bin_duration", vox.bin_duration},
             {"window", {stream.t_start, stream.t_end}},
             {"sensor", {H, W}}};
  io::write_container(out + "_voxel.emok", vox.data, vmeta.dump());
  json kmeta{{"kind", "kymograph_x"},
             {"t_bins", p.t_bins},
             {"sigma", p.sigma},
             {"window", {stream.t_start, stream.t_end}}};
  io::write_container(out + "_kx.emok", kymo.kx, kmeta.dump());
  kmeta["kind"] = "kymograph_y";
  io::write_container(out + "_ky.emok", kymo.ky, kmeta.dump());

  Tensor mid_bin({H, W});
  std::size_t b = p.bins / 2;
  for (std::size_t i = 0; i < H * W; ++i) mid_bin[i] = vox.data[b * H * W + i];
  io::write_pgm_normalized(out + "_voxel.pgm", mid_bin);
  io::write_pgm_normalized(out + "_kx.pgm", kymo.kx);
  io::write_pgm_normalized(out + "_ky.pgm", kymo.ky);
  return 0;
}

// ------------------------------------------------------------------ synth

RigidSceneConfig scene_from_json(const json& j) {
  RigidSceneConfig cfg;
  auto sensor = j.at("sensor").get<std::vector<std::size_t>>();
  cfg.height = sensor.at(0);
  cfg.width = sensor.at(1);
  const auto& k = j.at("intrinsics");
  cfg.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                    k.at("cy").get<double>()};
  for (const auto& p : j.at("points"))
    cfg.points.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
  auto vel = j.at("velocity").get<std::vector<double>>();
  cfg.vx = vel.at(0);
  cfg.vy = vel.at(1);
  cfg.vz = vel.at(2);
  cfg.duration = j.value("duration", 1.0);
  cfg.contrast_threshold = j.value("contrast_threshold", 0.1);
  cfg.jitter = j.value("jitter", 0.0);
  return cfg;
}

int cmd_synth(const std::string& cfg_path, const std::string& out, std::uint64_t seed) {
  json jcfg = json::parse(io::read_file(cfg_path));
  RigidSceneConfig cfg = scene_from_json(jcfg);
  std::vector<double> taus = jcfg.value("corr_taus", std::vector<double>{});
  if (taus.empty())
    for (int k = 1; k <= 8; ++k) taus.push_back(k / 8.0);

  auto result = synth_rigid_scene(cfg, seed);
  const GroundTruth& truth = result.truth;

  io::write_file(out + "_events.csv", write_event_csv(result.stream));
  io::write_file(out + "_events.bin", write_event_raw(result.stream));

  auto flow = FlowField::zeros(cfg.height, cfg.width, false);
  auto mid = MiDField::ones(cfg.height, cfg.width, false);
  std::string corr = "x,y,tau,dx,dy,w\n";
  json mid_tau1 = json::array();
  json flow_tau1 = json::array();
  for (std::size_t i = 0; i < truth.point_count(); ++i) {
    std::size_t x, y;
    mid_tau1.push_back(truth.motion_in_depth(i, 1.0));
    auto f1 = truth.flow(i, 1.0);
    flow_tau1.push_back({f1.first, f1.second});
    if (!truth.start_pixel(i, x, y)) continue;
    std::size_t px = y * cfg.width + x;
    if (flow.valid[px]) continue;  // first point keeps a contested pixel
    flow.u[px] = f1.first;
    flow.v[px] = f1.second;
    flow.valid[px] = 1;
    mid.m[px] = truth.motion_in_depth(i, 1.0);
    mid.valid[px] = 1;
    for (double tau : taus) {
      auto f = truth.flow(i, tau);
      corr += std::to_string(x) + "," + std::to_string(y) + "," + fmt_g(tau) + "," +
              fmt_g(f.first) + "," + fmt_g(f.second) + ",1\n";
    }
  }
  io::write_flo(out + "_flow.flo", flow);
  io::write_mid(out + "_mid.emok", mid, 1.0);
  io::write_file(out + "_corr.csv", corr);

  json manifest{{"schema_version", 1},
                {"seed", seed},
                {"config", jcfg},
                {"n_events", result.stream.events.size()},
                {"corr_taus", taus},
                {"mid_tau1", mid_tau1},
                {"flow_tau1", flow_tau1},
                {"files",
                 {{"events_csv", fs::path(out + "_events.csv").filename().string()},
                  {"events_bin", fs::path(out + "_events.bin").filename().string()},
                  {"flow", fs::path(out + "_flow.flo").filename().string()},
                  {"mid", fs::path(out + "_mid.emok").filename().string()},
                  {"corr", fs::path(out + "_corr.csv").filename().string()}}}};
  io::write_file(out + "_manifest.json", manifest.dump(2) + "\n");
  return 0;
}

// -------------------------------------------------------------------- fit

CorrespondenceSet load_corr(const std::string& path, std::size_t H, std::size_t W) {
  CorrespondenceSet corr;
  corr.height = H;
  corr.width = W;
  std::string body = io::read_file(path);
  std::size_t pos = 0, row = 0;
  while (pos < body.size()) {
    std::size_t eol = body.find('\n', pos);
    std::string line = body.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? body.size() : eol + 1;
    row++;
    if (line.empty() || line.starts_with("x,")) continue;
    CorrespondenceSet::Sample s;
    double x, y, w = 1.0;
    int got = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &x, &y, &s.tau, &s.dx, &s.dy,
                          &w);
    if (got < 5)
      raise(Errc::malformed_record, "row " + std::to_string(row) + ": expected x,y,tau,dx,dy[,w]");
    s.x = static_cast<std::size_t>(x);
    s.y = static_cast<std::size_t>(y);
    s.weight = w;
    corr.samples.push_back(s);
  }
  return corr;
}

struct FitPipelineOut {
  Trajectory trajectory;
  json diagnostics;
  std::vector<DisplacementField> flow_history;
};

// Feature derivation used by the refinement path: voxel slices near the two
// window ends become the spatial feature channels, kymograph blocks the
// axis feature channels, all mean-pooled to the trajectory grid.
FitPipelineOut fit_refine(const EventStream& stream, const Params& p) {
  if (stream.events.empty()) raise(Errc::invalid_argument, "cannot fit an empty event stream");
  const std::size_t H = stream.height, W = stream.width;
  const std::uint64_t span = stream.t_end - stream.t_start;
  if (span == 0) raise(Errc::invalid_argument, "cannot fit a zero-length window");
  const std::uint64_t edge = std::max<std::uint64_t>(1, span / p.anchors);

  Voxel v_prev = event_voxel(slice_window(stream, stream.t_start, stream.t_start + edge), p.bins);
  Voxel v_next = event_voxel(slice_window(stream, stream.t_end - edge, stream.t_end + 1), p.bins);
  FeatureMap f_prev{downsample2(v_prev.data, p.downsample), FeatureAxis::XY, 0};
  FeatureMap f_next{downsample2(v_next.data, p.downsample), FeatureAxis::XY, 0};

  Kymograph kymo = event_kymograph(stream, p.t_bins, p.sigma, p.truncate);
  DensityField density = density_field(kymo, p.anchors, {p.pool[0], p.pool[1], p.pool[2]});
  AdaptationResult adapt = adapt_from_density(density, p.controls, p.degree);

  const std::size_t block_len = (p.t_bins + p.anchors - 1) / p.anchors;
  std::vector<FeatureMap> wt_blocks, ht_blocks;
  for (std::size_t b = 0; b < p.anchors; ++b) {
    std::size_t lo = b * block_len, hi = std::min(p.t_bins, lo + block_len);
    Tensor bx({hi - lo, W}), by({hi - lo, H});
    for (std::size_t t = lo; t < hi; ++t) {
      for (std::size_t x = 0; x < W; ++x) bx[(t - lo) * W + x] = kymo.kx[t * W + x];
      for (std::size_t y = 0; y < H; ++y) by[(t - lo) * H + y] = kymo.ky[t * H + y];
    }
    wt_blocks.push_back(
        {p.downsample > 1 ? mean_pool_tail(bx, p.downsample, 1) : bx, FeatureAxis::WT, b});
    ht_blocks.push_back(
        {p.downsample > 1 ? mean_pool_tail(by, p.downsample, 1) : by, FeatureAxis::HT, b});
  }

  CostVolumeSet volumes;
  volumes.spatial = spatial_cost_pyramid(f_prev, f_next, p.levels);
  volumes.temporal =
      fuse_temporal(temporal_cost_pyramid(ht_blocks, p.levels), temporal_cost_pyramid(wt_blocks, p.levels));

  const std::size_t GH = f_prev.data.dim(1), GW = f_prev.data.dim(2);
  Trajectory traj0(adapt.knots, adapt.weights, Tensor({p.controls, GH, GW, 2}));
  GradientDescentUpdater updater;
  LossConfig cfg;
  cfg.iters = p.iters;
  cfg.radius = p.radius;
  auto refined = refine_trajectory(traj0, volumes, adapt, updater, cfg);

  json diag{{"mode", "refine"},
            {"iterations", p.iters},
            {"grid", {GH, GW}},
            {"anchor_times", adapt.anchor_times},
            {"anchor_blocks", adapt.anchor_blocks},
            {"knots", adapt.knots.knots},
            {"curve_weights", adapt.weights}};
  json history = json::array();
  for (const auto& f : refined.flow_history) {
    double mean_mag = 0.0;
    for (std::size_t i = 0; i < f.uv.size() / 2; ++i)
      mean_mag += std::hypot(f.uv[2 * i], f.uv[2 * i + 1]);
    history.push_back(mean_mag / static_cast<double>(f.uv.size() / 2));
  }
  diag["mean_flow_magnitude_history"] = history;
  return {std::move(refined.trajectory), std::move(diag), std::move(refined.flow_history)};
}

FitPipelineOut fit_lsq(const CorrespondenceSet& corr, const Params& p, double lambda_t,
                       double ridge, const AdaptationResult* adapt) {
  KnotVector knots;
  std::vector<double> weights;
  if (adapt) {
    knots = adapt->knots;
    weights = adapt->weights;
  } else {
    std::size_t q = p.controls - static_cast<std::size_t>(p.degree) - 1;
    std::vector<double> interior(q);
    for (std::size_t i = 0; i < q; ++i)
      interior[i] = static_cast<double>(i + 1) / static_cast<double>(q + 1);
    knots = clamped_knots(p.controls, p.degree, interior);
    weights.assign(p.controls, 1.0);
  }

  FitOptions opts;
  opts.lambda_t = lambda_t;
  opts.ridge = ridge;
  opts.fallback_ridge = 1e-6;  // rank-deficient pixels get the guard ridge
  auto fit = fit_trajectory_lsq(corr, knots, weights, opts);

  json diag{{"mode", "lsq"},
            {"max_residual", fit.max_residual},
            {"mean_residual", fit.mean_residual},
            {"pixels_fit", fit.pixels_fit},
            {"pixels_empty", fit.pixels_empty},
            {"pixels_regularized", fit.pixels_regularized},
            {"knots", knots.knots},
            {"curve_weights", weights},
            {"adapted", adapt != nullptr}};
  return {std::move(fit.trajectory), std::move(diag), {}};
}

int cmd_fit(const std::string& events_path, const std::string& format, const std::string& sensor,
            const std::string& out, const Params& p, bool lsq, const std::string& corr_path,
            bool adapt_lsq, double lambda_t, double ridge, const std::string& gt_prefix) {
  auto [H, W] = parse_sensor(sensor);

  FitPipelineOut result;
  if (lsq) {
    if (corr_path.empty()) raise(Errc::invalid_argument, "--lsq requires --corr FILE");
    CorrespondenceSet corr = load_corr(corr_path, H, W);
    std::optional<AdaptationResult> adapt;
    if (adapt_lsq) {
      EventStream stream = load_events(events_path, format, H, W, false);
      Kymograph kymo = event_kymograph(stream, p.t_bins, p.sigma, p.truncate);
      adapt = adapt_from_density(density_field(kymo, p.anchors, {p.pool[0], p.pool[1], p.pool[2]}),
                                 p.controls, p.degree);
    }
    result = fit_lsq(corr, p, lambda_t, ridge, adapt ? &*adapt : nullptr);
  } else {
    if (events_path.empty()) raise(Errc::invalid_argument, "fit requires --events FILE");
    EventStream stream = load_events(events_path, format, H, W, false);
    result = fit_refine(stream, p);
  }

  io::write_trajectory(out + "_traj.emok", result.trajectory, H, W);

  if (!gt_prefix.empty()) {
    FlowField gt = io::read_flo(gt_prefix + "_flow.flo");
    auto epe_against_gt = [&gt](const FlowField& pred) {
      double err = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < gt.u.size(); ++i) {
        if (!gt.valid[i]) continue;
        err += std::hypot(pred.u[i] - gt.u[i], pred.v[i] - gt.v[i]);
        n++;
      }
      return n ? err / static_cast<double>(n) : 0.0;
    };
    result.diagnostics["epe_tau1"] = epe_against_gt(optical_flow(result.trajectory, 1.0,
                                                                 gt.height, gt.width));
    if (!result.flow_history.empty()) {
      json epe_hist = json::array();
      for (const auto& disp : result.flow_history)
        epe_hist.push_back(epe_against_gt(upsample_flow(disp, gt.height, gt.width)));
      result.diagnostics["epe_history"] = epe_hist;
    }
  }
  io::write_file(out + "_diag.json", result.diagnostics.dump(2) + "\n");
  return 0;
}

// ----------------------------------------------------------------- motion

int cmd_motion(const std::string& traj_path, const std::string& out, std::vector<double> taus,
               bool multiview, const std::string& intrinsics_flag, double max_flow) {
  if (taus.empty()) taus = {1.0};
  std::size_t H = 0, W = 0;
  Trajectory traj = io::read_trajectory(traj_path, H, W);
  if (H == 0 || W == 0) {
    H = traj.height();
    W = traj.width();
  }

  CameraIntrinsics k{1, 1, 0, 0};
  if (!intrinsics_flag.empty()) {
    auto v = parse_list(intrinsics_flag);
    if (v.size() != 4) raise(Errc::invalid_argument, "--intrinsics expects fx,fy,cx,cy");
    k = {v[0], v[1], v[2], v[3]};
  }

  FlowField final_flow;
  for (double tau : taus) {
    FlowField flow = optical_flow(traj, tau, H, W);
    char name[64];
    std::snprintf(name, sizeof(name), "_flow_t%g.flo", tau);
    io::write_flo(out + name, flow);
    std::snprintf(name, sizeof(name), "_flow_t%g.ppm", tau);
    io::write_flow_ppm(out + name, flow, max_flow);
    final_flow = std::move(flow);
  }
  io::write_flo(out + "_flow.flo", final_flow);

  // The depth ratio is defined for positive times; tau = 0 is identically 1.
  std::vector<double> mid_taus;
  for (double t : taus)
    if (t > 0.0) mid_taus.push_back(t);
  MiDField mid_grid =
      mid_taus.empty()
          ? MiDField::ones(traj.height(), traj.width())
          : (multiview ? motion_in_depth_multiview(traj, mid_taus)
                       : motion_in_depth_single(traj, mid_taus.back()));
  MiDField mid = upsample_mid(mid_grid, H, W);
  io::write_mid(out + "_mid.emok", mid, mid_taus.empty() ? 0.0 : mid_taus.back());
  Tensor mimg({H, W});
  for (std::size_t i = 0; i < H * W; ++i) mimg[i] = mid.m[i];
  io::write_pgm_normalized(out + "_mid.pgm", mimg);

  NormalizedSceneFlow nsf = normalized_scene_flow(final_flow, mid, k);
  Tensor nsf_t({H, W, 3});
  for (std::size_t i = 0; i < nsf.s.size(); ++i) nsf_t[i] = nsf.s[i];
  json meta{{"kind", "normalized_scene_flow"}, {"tau", taus.back()}};
  io::write_container(out + "_nsf.emok", nsf_t, meta.dump());
  return 0;
}

// ------------------------------------------------------------------- eval

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& out) {
  FlowField pf = io::read_flo(pred + "_flow.flo");
  FlowField gf = io::read_flo(gt + "_flow.flo");
  MiDField pm = io::read_mid(pred + "_mid.emok");
  MiDField gm = io::read_mid(gt + "_mid.emok");
  if (pf.height != gf.height || pf.width != gf.width)
    raise(Errc::shape_mismatch, "prediction and ground truth resolutions differ");

  std::vector<std::uint8_t> valid(gf.u.size());
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = gf.valid[i] && gm.valid[i];
  MetricsReport r = metrics(pf, gf, pm, gm, valid);

  std::string text = "epe=" + fmt_g(r.epe) + "\nf1=" + fmt_g(r.f1) +
                     "\nlogmid=" + fmt_g(r.logmid) + "\nvalid=" + std::to_string(r.valid_count) +
                     "\n";
  std::cout << text;
  json j{{"epe", r.epe}, {"f1", r.f1}, {"logmid", r.logmid}, {"valid", r.valid_count}};
  std::string base = out.empty() ? pred + "_metrics" : out;
  io::write_file(base + ".txt", text);
  io::write_file(base + ".json", j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-based 3D motion estimation via rational spline trajectories"};
  app.require_subcommand(1);

  Params p;
  std::string events_path, format = "auto", sensor = "240x320", out = "out", corr_path,
              gt_prefix, cfg_path, traj_path, pred_prefix, taus_flag = "1", intrinsics_flag;
  std::uint64_t seed = 0;
  bool lsq = false, adapt_lsq = false, multiview = false;
  double lambda_t = 0.0, ridge = 0.0, max_flow = 0.0;
  std::optional<std::uint64_t> t0, t1;

  auto* project = app.add_subcommand("project", "Build voxel and x-t/y-t projections");
  project->add_option("--events", events_path, "Event file (CSV or packed binary)")->required();
  project->add_option("--format", format, "csv|bin|auto");
  project->add_option("--sensor", sensor, "Sensor size HxW")->required();
  project->add_option("--out", out, "Output prefix")->required();
  project->add_option("--t0", t0, "Window start (us)");
  project->add_option("--t1", t1, "Window end (us, exclusive)");
  add_projection_flags(project, p);

  auto* synth = app.add_subcommand("synth", "Generate an analytic rigid-scene event stream");
  synth->add_option("--config", cfg_path, "Scene config JSON")->required();
  synth->add_option("--out", out, "Output prefix")->required();
  synth->add_option("--seed", seed, "Jitter seed");

  auto* fit = app.add_subcommand("fit", "Estimate a trajectory from events or correspondences");
  fit->add_option("--events", events_path, "Event file");
  fit->add_option("--format", format, "csv|bin|auto");
  fit->add_option("--sensor", sensor, "Sensor size HxW")->required();
  fit->add_option("--out", out, "Output prefix")->required();
  fit->add_flag("--lsq", lsq, "Least-squares fit to a correspondence file");
  fit->add_option("--corr", corr_path, "Correspondence CSV (x,y,tau,dx,dy[,w])");
  fit->add_flag("--adapt", adapt_lsq, "Use density-adapted knots/weights for --lsq");
  fit->add_option("--lambda-t", lambda_t, "Velocity smoothness weight for --lsq");
  fit->add_option("--ridge", ridge, "Always-on ridge for --lsq");
  fit->add_option("--gt", gt_prefix, "Ground-truth prefix for diagnostics");
  fit->add_option("--controls", p.controls, "Control point count");
  fit->add_option("--degree", p.degree, "Curve degree");
  fit->add_option("--anchors", p.anchors, "Temporal block count");
  fit->add_option("--radius", p.radius, "Correlation lookup radius");
  fit->add_option("--levels", p.levels, "Cost pyramid levels");
  fit->add_option("--iters", p.iters, "Refinement iterations");
  fit->add_option("--downsample", p.downsample, "Feature grid downsampling factor");
  fit->add_option("--pool", p.pool, "Density pooling kernel (3 values)")->expected(3);
  add_projection_flags(fit, p);

  auto* motion = app.add_subcommand("motion", "Derive flow, depth-ratio and scene-flow fields");
  motion->add_option("--traj", traj_path, "Trajectory container")->required();
  motion->add_option("--out", out, "Output prefix")->required();
  motion->add_option("--taus", taus_flag, "Comma-separated query times in (0,1]");
  motion->add_flag("--multiview", multiview, "Aggregate the depth ratio across all taus");
  motion->add_option("--intrinsics", intrinsics_flag, "fx,fy,cx,cy (scene-flow output)");
  motion->add_option("--max-flow", max_flow, "Color-wheel saturation magnitude");

  auto* eval = app.add_subcommand("eval", "Compare predicted fields against ground truth");
  eval->add_option("--pred", pred_prefix, "Prediction prefix")->required();
  eval->add_option("--gt", gt_prefix, "Ground-truth prefix")->required();
  eval->add_option("--out", out, "Report base name (default <pred>_metrics)");
  eval->get_option("--out")->required(false);

  out = "";  // eval's default must not inherit another command's value
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (project->parsed()) return cmd_project(events_path, format, sensor, out, p, t0, t1);
    if (synth->parsed()) return cmd_synth(cfg_path, out, seed);
    if (fit->parsed())
      return cmd_fit(events_path, format, sensor, out, p, lsq, corr_path, adapt_lsq, lambda_t,
                     ridge, gt_prefix);
    if (motion->parsed())
      return cmd_motion(traj_path, out, parse_list(taus_flag), multiview, intrinsics_flag,
                        max_flow);
    if (eval->parsed()) return cmd_eval(pred_prefix, gt_prefix, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::io:
      case Errc::malformed_record:
        return 2;
      default:
        return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
