#include "emotive/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace emotive::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "container and .flo writers assume a little-endian host");

constexpr float kUnknownFlow = 1e10f;

void put_f32(std::string& out, float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_i32(std::string& out, std::int32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(Errc::io, "short write to " + path.string());
}

void write_container(const std::filesystem::path& path, const Tensor& t, const std::string& meta,
                     bool f64) {
  nlohmann::json j = meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta);
  if (f64) j["dtype"] = "f64";
  std::string meta_text = j.dump();

  std::string out = "EMOK1 " + std::to_string(t.rank());
  for (std::size_t d = 0; d < t.rank(); ++d) out += " " + std::to_string(t.dim(d));
  out += " " + std::to_string(meta_text.size()) + "\n";
  out += meta_text;
  if (f64) {
    out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  } else {
    out.reserve(out.size() + t.size() * 4);
    for (std::size_t i = 0; i < t.size(); ++i) put_f32(out, static_cast<float>(t[i]));
  }
  write_file(path, out);
}

Container read_container(const std::filesystem::path& path) {
  std::string bytes = read_file(path);
  std::size_t eol = bytes.find('\n');
  if (eol == std::string::npos) raise(Errc::io, path.string() + ": missing container header");
  std::istringstream header(bytes.substr(0, eol));
  std::string magic;
  std::size_t ndim = 0;
  header >> magic >> ndim;
  if (magic != "EMOK1" || !header) raise(Errc::io, path.string() + ": not an EMOK1 container");
  std::vector<std::size_t> dims(ndim);
  for (auto& d : dims) header >> d;
  std::size_t meta_len = 0;
  header >> meta_len;
  if (!header) raise(Errc::io, path.string() + ": truncated container header");

  Container c;
  c.meta = bytes.substr(eol + 1, meta_len);
  nlohmann::json j = c.meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(c.meta);
  bool f64 = j.value("dtype", "f32") == std::string("f64");

  c.tensor = Tensor(dims);
  std::size_t payload = eol + 1 + meta_len;
  std::size_t need = c.tensor.size() * (f64 ? 8 : 4);
  if (bytes.size() - payload < need) raise(Errc::io, path.string() + ": truncated payload");
  if (f64) {
    std::memcpy(c.tensor.data(), bytes.data() + payload, need);
  } else {
    for (std::size_t i = 0; i < c.tensor.size(); ++i) {
      float v;
      std::memcpy(&v, bytes.data() + payload + 4 * i, 4);
      c.tensor[i] = static_cast<double>(v);
    }
  }
  return c;
}

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  std::string out;
  out.reserve(12 + flow.u.size() * 8);
  put_f32(out, 202021.25f);  // "PIEH"
  put_i32(out, static_cast<std::int32_t>(flow.width));
  put_i32(out, static_cast<std::int32_t>(flow.height));
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    if (flow.valid[i]) {
      put_f32(out, static_cast<float>(flow.u[i]));
      put_f32(out, static_cast<float>(flow.v[i]));
    } else {
      put_f32(out, kUnknownFlow);
      put_f32(out, kUnknownFlow);
    }
  }
  write_file(path, out);
}

FlowField read_flo(const std::filesystem::path& path) {
  std::string bytes = read_file(path);
  if (bytes.size() < 12) raise(Errc::io, path.string() + ": truncated .flo file");
  float magic;
  std::int32_t w, h;
  std::memcpy(&magic, bytes.data(), 4);
  std::memcpy(&w, bytes.data() + 4, 4);
  std::memcpy(&h, bytes.data() + 8, 4);
  if (magic != 202021.25f || w <= 0 || h <= 0)
    raise(Errc::io, path.string() + ": bad .flo header");
  std::size_t cells = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < 12 + cells * 8) raise(Errc::io, path.string() + ": truncated .flo payload");

  FlowField f = FlowField::zeros(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  for (std::size_t i = 0; i < cells; ++i) {
    float u, v;
    std::memcpy(&u, bytes.data() + 12 + 8 * i, 4);
    std::memcpy(&v, bytes.data() + 16 + 8 * i, 4);
    bool ok = std::isfinite(u) && std::isfinite(v) && std::abs(u) < 1e9f && std::abs(v) < 1e9f;
    f.u[i] = ok ? static_cast<double>(u) : 0.0;
    f.v[i] = ok ? static_cast<double>(v) : 0.0;
    f.valid[i] = ok ? 1 : 0;
  }
  return f;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj,
                      std::size_t sensor_h, std::size_t sensor_w) {
  nlohmann::json meta;
  meta["kind"] = "trajectory";
  meta["degree"] = traj.degree();
  meta["knots"] = traj.knots().knots;
  meta["weights"] = traj.weights();
  meta["sensor"] = {sensor_h, sensor_w};
  // f64 payload: control points round-tripped exactly.
  write_container(path, traj.control(), meta.dump(), true);
}

Trajectory read_trajectory(const std::filesystem::path& path, std::size_t& sensor_h,
                           std::size_t& sensor_w) {
  Container c = read_container(path);
  nlohmann::json meta = nlohmann::json::parse(c.meta);
  KnotVector kv;
  kv.degree = meta.at("degree").get<int>();
  kv.knots = meta.at("knots").get<std::vector<double>>();
  auto weights = meta.at("weights").get<std::vector<double>>();
  auto sensor = meta.value("sensor", std::vector<std::size_t>{0, 0});
  sensor_h = sensor.size() > 0 ? sensor[0] : 0;
  sensor_w = sensor.size() > 1 ? sensor[1] : 0;
  return Trajectory(kv, weights, std::move(c.tensor));
}

void write_mid(const std::filesystem::path& path, const MiDField& mid, double tau) {
  Tensor t({mid.height, mid.width});
  for (std::size_t i = 0; i < mid.m.size(); ++i) t[i] = mid.valid[i] ? mid.m[i] : 0.0;
  nlohmann::json meta;
  meta["kind"] = "mid";
  meta["tau"] = tau;
  meta["invalid"] = 0.0;
  write_container(path, t, meta.dump());
}

MiDField read_mid(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.tensor.rank() != 2) raise(Errc::io, path.string() + ": depth-ratio field must be 2D");
  MiDField f = MiDField::ones(c.tensor.dim(0), c.tensor.dim(1));
  for (std::size_t i = 0; i < c.tensor.size(); ++i) {
    if (c.tensor[i] > 0.0 && std::isfinite(c.tensor[i])) {
      f.m[i] = c.tensor[i];
      f.valid[i] = 1;
    } else {
      f.m[i] = 1.0;
      f.valid[i] = 0;
    }
  }
  return f;
}

void write_pgm_normalized(const std::filesystem::path& path, const Tensor& image2d) {
  if (image2d.rank() != 2) raise(Errc::invalid_argument, "PGM preview expects a 2D tensor");
  double lo = image2d.size() ? image2d[0] : 0.0, hi = lo;
  for (std::size_t i = 0; i < image2d.size(); ++i) {
    lo = std::min(lo, image2d[i]);
    hi = std::max(hi, image2d[i]);
  }
  double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;

  std::string out = "P5\n" + std::to_string(image2d.dim(1)) + " " + std::to_string(image2d.dim(0)) +
                    "\n255\n";
  for (std::size_t i = 0; i < image2d.size(); ++i)
    out += static_cast<char>(std::lround((image2d[i] - lo) * scale));
  write_file(path, out);

  nlohmann::json side;
  side["min"] = lo;
  side["max"] = hi;
  write_file(path.string() + ".json", side.dump() + "\n");
}

namespace {

// The 55-color optical-flow wheel (RY/YG/GC/CB/BM/MR sectors).
std::vector<std::array<int, 3>> make_color_wheel() {
  const int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
  std::vector<std::array<int, 3>> wheel;
  wheel.reserve(RY + YG + GC + CB + BM + MR);
  for (int i = 0; i < RY; ++i) wheel.push_back({255, 255 * i / RY, 0});
  for (int i = 0; i < YG; ++i) wheel.push_back({255 - 255 * i / YG, 255, 0});
  for (int i = 0; i < GC; ++i) wheel.push_back({0, 255, 255 * i / GC});
  for (int i = 0; i < CB; ++i) wheel.push_back({0, 255 - 255 * i / CB, 255});
  for (int i = 0; i < BM; ++i) wheel.push_back({255 * i / BM, 0, 255});
  for (int i = 0; i < MR; ++i) wheel.push_back({255, 0, 255 - 255 * i / MR});
  return wheel;
}

}  // namespace

void write_flow_ppm(const std::filesystem::path& path, const FlowField& flow, double max_flow) {
  static const std::vector<std::array<int, 3>> wheel = make_color_wheel();
  const int ncols = static_cast<int>(wheel.size());

  if (max_flow <= 0.0) {
    std::vector<double> mags;
    mags.reserve(flow.u.size());
    for (std::size_t i = 0; i < flow.u.size(); ++i)
      if (flow.valid[i]) mags.push_back(std::hypot(flow.u[i], flow.v[i]));
    if (mags.empty()) {
      max_flow = 1.0;
    } else {
      std::size_t k = static_cast<std::size_t>(0.98 * static_cast<double>(mags.size() - 1));
      std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
      max_flow = std::max(mags[k], 1e-9);
    }
  }

  std::string out = "P6\n" + std::to_string(flow.width) + " " + std::to_string(flow.height) +
                    "\n255\n";
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    if (!flow.valid[i]) {
      out += '\0';
      out += '\0';
      out += '\0';
      continue;
    }
    double u = flow.u[i] / max_flow, v = flow.v[i] / max_flow;
    double rad = std::hypot(u, v);
    double a = std::atan2(-v, -u) / M_PI;
    double fk = (a + 1.0) / 2.0 * (ncols - 1);
    int k0 = static_cast<int>(fk);
    int k1 = (k0 + 1) % ncols;
    double f = fk - k0;
    for (int c = 0; c < 3; ++c) {
      double col0 = wheel[static_cast<std::size_t>(k0)][static_cast<std::size_t>(c)] / 255.0;
      double col1 = wheel[static_cast<std::size_t>(k1)][static_cast<std::size_t>(c)] / 255.0;
      double col = (1 - f) * col0 + f * col1;
      col = rad <= 1.0 ? 1.0 - rad * (1.0 - col) : col * 0.75;  // saturate past max
      out += static_cast<char>(std::lround(255.0 * col));
    }
  }
  write_file(path, out);
}

}  // namespace emotive::io
