#pragma once

#include <filesystem>
#include <string>

#include "emotive/core.hpp"
#include "emotive/motion.hpp"
#include "emotive/nurbs.hpp"

// File formats: the EMOK1 tensor container (ASCII header
// `EMOK1 <ndim> <dims...> <meta-json-length>\n`, then the meta JSON, then a
// packed little-endian payload, float32 unless meta says "dtype":"f64"),
// Middlebury `.flo` flow files, binary PGM/PPM previews.

namespace emotive::io {

struct Container {
  Tensor tensor;
  std::string meta;  // JSON text ("{}" when absent)
};

void write_container(const std::filesystem::path& path, const Tensor& t, const std::string& meta,
                     bool f64 = false);
Container read_container(const std::filesystem::path& path);

/// Flow fields use the conventional unknown-flow sentinel (values above
/// 1e9 mark invalid pixels).
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj,
                      std::size_t sensor_h, std::size_t sensor_w);
Trajectory read_trajectory(const std::filesystem::path& path, std::size_t& sensor_h,
                           std::size_t& sensor_w);

void write_mid(const std::filesystem::path& path, const MiDField& mid, double tau);
MiDField read_mid(const std::filesystem::path& path);

/// 8-bit min-max normalized P5 preview + a `<path>.json` sidecar holding
/// the normalization range.
void write_pgm_normalized(const std::filesystem::path& path, const Tensor& image2d);

/// Flow rendered with the standard optical-flow color wheel; max_flow <= 0
/// saturates at the 98th percentile of the valid magnitudes.
void write_flow_ppm(const std::filesystem::path& path, const FlowField& flow,
                    double max_flow = 0.0);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace emotive::io
