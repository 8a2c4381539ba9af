#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace emotive {

/// Error codes for every failure mode the library reports. The CLI maps
/// `usage`/`io`/`parse` onto exit code 2 and everything else onto exit code 1.
enum class Errc {
  malformed_record,
  out_of_bounds,
  non_monotonic_time,
  point_behind_camera,
  non_positive_sigma,
  bad_anchor_count,
  too_few_blocks,
  wrong_interior_count,
  unsorted_interior,
  index_out_of_range,
  shape_mismatch,
  fewer_than_two_blocks,
  level_mismatch,
  empty_timestamps,
  non_positive_depth,
  empty_valid_mask,
  grid_too_short,
  singular_system,
  invalid_argument,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

/// Dense row-major tensor of doubles with a dynamic shape. Kernels that care
/// about speed index the flat data() buffer directly.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  std::size_t index(std::initializer_list<std::size_t> ix) const {
    std::size_t flat = 0;
    std::size_t k = 0;
    for (std::size_t i : ix) flat = flat * shape_[k++] + i;
    return flat;
  }
  double& at(std::initializer_list<std::size_t> ix) { return data_[index(ix)]; }
  double at(std::initializer_list<std::size_t> ix) const { return data_[index(ix)]; }

  bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

inline void validate_intrinsics(const CameraIntrinsics& k) {
  if (!(k.fx > 0.0) || !(k.fy > 0.0))
    raise(Errc::invalid_argument, "camera focal lengths must be positive");
}

}  // namespace emotive
