#include "emotive/events.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstring>
#include <random>
#include <sstream>

namespace emotive {
namespace {

constexpr std::size_t kRawRecordBytes = 13;  // uint64 + uint16 + uint16 + int8

bool parse_u64(std::string_view s, std::uint64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_i64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  if (s.front() == '+') b++;  // from_chars rejects a leading '+'
  auto [p, ec] = std::from_chars(b, s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

void finalize(EventStream& s, bool strict_time) {
  bool sorted = std::is_sorted(s.events.begin(), s.events.end(),
                               [](const Event& a, const Event& b) { return a.t < b.t; });
  if (!sorted) {
    if (strict_time) raise(Errc::non_monotonic_time, "event timestamps are not non-decreasing");
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
  }
  if (!s.events.empty()) {
    s.t_start = s.events.front().t;
    s.t_end = s.events.back().t;
  }
}

EventStream parse_csv(std::string_view source, std::size_t height, std::size_t width,
                      bool strict_time) {
  EventStream stream;
  stream.height = height;
  stream.width = width;

  std::size_t row = 0;
  std::size_t parsed = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    std::size_t eol = source.find('\n', pos);
    std::string_view line = source.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                             : eol - pos);
    pos = eol == std::string_view::npos ? source.size() + 1 : eol + 1;
    row++;
    line = trim(line);
    if (line.empty()) continue;

    std::string_view fields[4];
    std::size_t nfields = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (nfields == 4) { nfields = 5; break; }
        fields[nfields++] = trim(line.substr(start, i - start));
        start = i + 1;
      }
    }

    std::uint64_t t;
    if (row == 1 && nfields >= 1 && !parse_u64(fields[0], t)) continue;  // header line
    if (nfields != 4)
      raise(Errc::malformed_record, "row " + std::to_string(row) + ": expected 4 fields");

    std::uint64_t x, y;
    std::int64_t p;
    if (!parse_u64(fields[0], t) || !parse_u64(fields[1], x) || !parse_u64(fields[2], y) ||
        !parse_i64(fields[3], p))
      raise(Errc::malformed_record, "row " + std::to_string(row) + ": not an integer record");
    if (x >= width || y >= height)
      raise(Errc::out_of_bounds, "row " + std::to_string(row) + ": pixel (" + std::to_string(x) +
                                     "," + std::to_string(y) + ") outside " +
                                     std::to_string(width) + "x" + std::to_string(height));
    if (p != 1 && p != -1)
      raise(Errc::malformed_record, "row " + std::to_string(row) + ": polarity must be -1 or 1");

    stream.events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                                  static_cast<std::int8_t>(p)});
    parsed++;
  }
  if (parsed == 0) raise(Errc::malformed_record, "no event records in input");
  finalize(stream, strict_time);
  return stream;
}

EventStream parse_raw(std::string_view source, std::size_t height, std::size_t width,
                      bool strict_time) {
  if (source.empty() || source.size() % kRawRecordBytes != 0)
    raise(Errc::malformed_record,
          "binary length " + std::to_string(source.size()) + " is not a multiple of 13");
  EventStream stream;
  stream.height = height;
  stream.width = width;
  const auto* bytes = reinterpret_cast<const unsigned char*>(source.data());
  std::size_t n = source.size() / kRawRecordBytes;
  stream.events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* r = bytes + i * kRawRecordBytes;
    std::uint64_t t = 0;
    for (int b = 7; b >= 0; --b) t = (t << 8) | r[b];
    std::uint16_t x = static_cast<std::uint16_t>(r[8] | (r[9] << 8));
    std::uint16_t y = static_cast<std::uint16_t>(r[10] | (r[11] << 8));
    std::int8_t p = static_cast<std::int8_t>(r[12]);
    if (x >= width || y >= height)
      raise(Errc::out_of_bounds, "record " + std::to_string(i + 1) + ": pixel outside sensor");
    if (p != 1 && p != -1)
      raise(Errc::malformed_record, "record " + std::to_string(i + 1) + ": bad polarity");
    stream.events.push_back(Event{t, x, y, p});
  }
  finalize(stream, strict_time);
  return stream;
}

}  // namespace

EventStream parse_event_stream(std::string_view source, EventFormat format, std::size_t height,
                               std::size_t width, bool strict_time) {
  if (source.empty()) raise(Errc::malformed_record, "empty input");
  if (height == 0 || width == 0) raise(Errc::invalid_argument, "sensor dimensions must be positive");
  return format == EventFormat::CSV ? parse_csv(source, height, width, strict_time)
                                    : parse_raw(source, height, width, strict_time);
}

std::string write_event_csv(const EventStream& stream) {
  std::string out = "t_us,x,y,p\n";
  for (const Event& e : stream.events) {
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    out += std::to_string(static_cast<int>(e.p));
    out += '\n';
  }
  return out;
}

std::string write_event_raw(const EventStream& stream) {
  std::string out;
  out.reserve(stream.events.size() * kRawRecordBytes);
  for (const Event& e : stream.events) {
    for (int b = 0; b < 8; ++b) out += static_cast<char>((e.t >> (8 * b)) & 0xff);
    out += static_cast<char>(e.x & 0xff);
    out += static_cast<char>((e.x >> 8) & 0xff);
    out += static_cast<char>(e.y & 0xff);
    out += static_cast<char>((e.y >> 8) & 0xff);
    out += static_cast<char>(e.p);
  }
  return out;
}

EventStream slice_window(const EventStream& stream, std::uint64_t t0, std::uint64_t t1) {
  if (!(t0 < t1)) raise(Errc::invalid_argument, "slice_window requires t0 < t1");
  EventStream out;
  out.height = stream.height;
  out.width = stream.width;
  out.t_start = t0;
  out.t_end = t1;
  auto lo = std::lower_bound(stream.events.begin(), stream.events.end(), t0,
                             [](const Event& e, std::uint64_t t) { return e.t < t; });
  auto hi = std::lower_bound(lo, stream.events.end(), t1,
                             [](const Event& e, std::uint64_t t) { return e.t < t; });
  out.events.assign(lo, hi);
  return out;
}

std::pair<double, double> GroundTruth::project(std::size_t i, double tau) const {
  const auto& p = cfg_.points.at(i);
  double t = tau * cfg_.duration;
  double Z = p.Z + cfg_.vz * t;
  if (!(Z > 0.0)) raise(Errc::point_behind_camera, "point depth non-positive at queried time");
  double X = p.X + cfg_.vx * t;
  double Y = p.Y + cfg_.vy * t;
  return {cfg_.intrinsics.fx * X / Z + cfg_.intrinsics.cx,
          cfg_.intrinsics.fy * Y / Z + cfg_.intrinsics.cy};
}

std::pair<double, double> GroundTruth::flow(std::size_t i, double tau) const {
  auto p0 = project(i, 0.0);
  auto p1 = project(i, tau);
  return {p1.first - p0.first, p1.second - p0.second};
}

double GroundTruth::motion_in_depth(std::size_t i, double tau) const {
  return depth(i, tau) / depth(i, 0.0);
}

double GroundTruth::depth(std::size_t i, double tau) const {
  const auto& p = cfg_.points.at(i);
  return p.Z + cfg_.vz * tau * cfg_.duration;
}

bool GroundTruth::start_pixel(std::size_t i, std::size_t& x, std::size_t& y) const {
  auto p0 = project(i, 0.0);
  long xi = std::lround(p0.first);
  long yi = std::lround(p0.second);
  if (xi < 0 || yi < 0 || static_cast<std::size_t>(xi) >= cfg_.width ||
      static_cast<std::size_t>(yi) >= cfg_.height)
    return false;
  x = static_cast<std::size_t>(xi);
  y = static_cast<std::size_t>(yi);
  return true;
}

SynthResult synth_rigid_scene(const RigidSceneConfig& cfg, std::uint64_t seed) {
  if (!(cfg.duration > 0.0)) raise(Errc::invalid_argument, "duration must be positive");
  if (!(cfg.contrast_threshold > 0.0))
    raise(Errc::invalid_argument, "contrast threshold must be positive");
  if (cfg.height == 0 || cfg.width == 0) raise(Errc::invalid_argument, "sensor must be non-empty");
  validate_intrinsics(cfg.intrinsics);
  for (const auto& p : cfg.points) {
    if (!(p.Z > 0.0) || !(p.Z + cfg.vz * cfg.duration > 0.0))
      raise(Errc::point_behind_camera, "point depth must stay positive over the window");
  }

  GroundTruth truth(cfg);
  std::mt19937_64 rng(seed);
  const std::uint64_t window_us = static_cast<std::uint64_t>(std::llround(cfg.duration * 1e6));

  EventStream stream;
  stream.height = cfg.height;
  stream.width = cfg.width;
  stream.t_start = 0;
  stream.t_end = window_us;

  for (std::size_t i = 0; i < cfg.points.size(); ++i) {
    double phase = 0.0;
    if (cfg.jitter > 0.0) {
      std::uniform_real_distribution<double> u(0.0, std::min(cfg.jitter, 1.0));
      phase = u(rng) * cfg.contrast_threshold;
    }

    // Estimate the projected path length on a coarse grid, then resample
    // finely enough that each substep moves far less than one threshold.
    double approx_len = 0.0;
    auto prev = truth.project(i, 0.0);
    const int coarse = 256;
    for (int s = 1; s <= coarse; ++s) {
      auto cur = truth.project(i, static_cast<double>(s) / coarse);
      approx_len += std::hypot(cur.first - prev.first, cur.second - prev.second);
      prev = cur;
    }
    std::size_t steps = static_cast<std::size_t>(
        std::max<double>(coarse, std::ceil(16.0 * approx_len / cfg.contrast_threshold)));

    double acc = phase;
    prev = truth.project(i, 0.0);
    for (std::size_t s = 1; s <= steps; ++s) {
      double tau = static_cast<double>(s) / static_cast<double>(steps);
      auto cur = truth.project(i, tau);
      double dx = cur.first - prev.first;
      double dy = cur.second - prev.second;
      double step_len = std::hypot(dx, dy);
      double remaining = step_len;
      while (acc + remaining >= cfg.contrast_threshold) {
        double used = cfg.contrast_threshold - acc;
        double f = step_len > 0.0 ? 1.0 - (remaining - used) / step_len : 1.0;
        double ex = prev.first + f * dx;
        double ey = prev.second + f * dy;
        double tau_prev = static_cast<double>(s - 1) / static_cast<double>(steps);
        double etau = tau_prev + f / static_cast<double>(steps);
        long xi = std::lround(ex);
        long yi = std::lround(ey);
        if (xi >= 0 && yi >= 0 && static_cast<std::size_t>(xi) < cfg.width &&
            static_cast<std::size_t>(yi) < cfg.height) {
          std::int8_t pol = std::abs(dx) >= std::abs(dy) ? (dx >= 0 ? 1 : -1) : (dy >= 0 ? 1 : -1);
          std::uint64_t t =
              static_cast<std::uint64_t>(std::llround(etau * static_cast<double>(window_us)));
          stream.events.push_back(Event{t, static_cast<std::uint16_t>(xi),
                                        static_cast<std::uint16_t>(yi), pol});
        }
        remaining -= used;
        acc = 0.0;
      }
      acc += remaining;
      prev = cur;
    }
  }

  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return SynthResult{std::move(stream), std::move(truth)};
}

}  // namespace emotive
