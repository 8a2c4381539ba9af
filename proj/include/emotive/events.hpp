#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emotive/core.hpp"

namespace emotive {

/// One polarity event: time in integer microseconds, integer pixel
/// coordinates, polarity in {-1, +1}.
struct Event {
  std::uint64_t t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;
};

/// Time-ordered event sequence with sensor geometry and the half-open-ish
/// observation window [t_start, t_end] in microseconds. Immutable by
/// convention once built; all operations return new streams.
struct EventStream {
  std::vector<Event> events;
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;

  std::uint64_t window_length_us() const { return t_end - t_start; }
  double window_length_s() const { return static_cast<double>(t_end - t_start) * 1e-6; }
};

enum class EventFormat { CSV, RAW_BIN };

/// Parses an event file body. CSV rows are `t_us,x,y,p` with an optional
/// header line; RAW_BIN is packed little-endian (uint64 t, uint16 x, uint16 y,
/// int8 p), 13 bytes per record. Events are sorted by time (stable) unless
/// `strict_time` is set, in which case out-of-order input is an error.
EventStream parse_event_stream(std::string_view source, EventFormat format,
                               std::size_t height, std::size_t width,
                               bool strict_time = false);

/// Normalized CSV serialization: header + one `t,x,y,p` row per event.
/// parse(write(s)) == s and write(parse(b)) == b for normalized bodies.
std::string write_event_csv(const EventStream& stream);

/// Packed little-endian binary serialization (13-byte records).
std::string write_event_raw(const EventStream& stream);

/// Events with t0 <= t < t1; the result window is exactly (t0, t1).
EventStream slice_window(const EventStream& stream, std::uint64_t t0, std::uint64_t t1);

/// Constant-velocity rigid scene observed by a static pinhole camera.
/// `contrast_threshold` is the accumulated projected displacement (pixels)
/// that triggers one event; `jitter` optionally randomizes each point's
/// accumulator phase in [0, threshold) using the generator seed.
struct RigidSceneConfig {
  struct Point {
    double X = 0.0, Y = 0.0, Z = 1.0;
  };
  std::vector<Point> points;
  double vx = 0.0, vy = 0.0, vz = 0.0;  // world units / second
  double duration = 1.0;                // seconds
  CameraIntrinsics intrinsics;
  double contrast_threshold = 0.1;  // pixels of projected motion per event
  std::size_t height = 0;
  std::size_t width = 0;
  double jitter = 0.0;
};

/// Analytic ground truth for a rigid scene; all queries take normalized
/// time tau in [0, 1] (tau=1 is the end of the window).
class GroundTruth {
 public:
  GroundTruth() = default;
  explicit GroundTruth(RigidSceneConfig cfg) : cfg_(std::move(cfg)) {}

  const RigidSceneConfig& config() const { return cfg_; }
  std::size_t point_count() const { return cfg_.points.size(); }

  /// Projected pixel position of point i at tau.
  std::pair<double, double> project(std::size_t i, double tau) const;
  /// Image displacement of point i between tau=0 and tau.
  std::pair<double, double> flow(std::size_t i, double tau) const;
  /// Depth ratio Z(tau)/Z(0) of point i.
  double motion_in_depth(std::size_t i, double tau) const;
  /// Depth of point i at tau.
  double depth(std::size_t i, double tau) const;
  /// Integer start pixel of point i (rounded projection at tau=0), or
  /// false if it starts outside the sensor.
  bool start_pixel(std::size_t i, std::size_t& x, std::size_t& y) const;

 private:
  RigidSceneConfig cfg_;
};

struct SynthResult {
  EventStream stream;
  GroundTruth truth;
};

/// Generates events by densely sampling each point's projected path and
/// emitting one event whenever the accumulated displacement crosses the
/// contrast threshold. Polarity is the sign of the dominant-axis image
/// velocity at the crossing. Deterministic for a fixed (cfg, seed).
SynthResult synth_rigid_scene(const RigidSceneConfig& cfg, std::uint64_t seed);

}  // namespace emotive
