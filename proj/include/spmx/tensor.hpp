#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spmx {

// Dense 4-axis array stored channel-planar: [channel][z][y][x], x fastest.
// "channel" is the band index for spectral images and the fluorophore
// index for concentration maps.
struct Shape {
  std::size_t channels = 0;
  std::size_t z = 1;
  std::size_t y = 1;
  std::size_t x = 1;

  std::size_t voxels() const noexcept { return z * y * x; }
  std::size_t size() const noexcept { return channels * voxels(); }
  bool same_spatial(const Shape& o) const noexcept {
    return z == o.z && y == o.y && x == o.x;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor4(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t voxels() const noexcept { return shape_.voxels(); }
  std::size_t channels() const noexcept { return shape_.channels; }

  double& operator()(std::size_t c, std::size_t p) noexcept {
    return data_[c * shape_.voxels() + p];
  }
  double operator()(std::size_t c, std::size_t p) const noexcept {
    return data_[c * shape_.voxels() + p];
  }
  double& at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) noexcept {
    return data_[((c * shape_.z + z) * shape_.y + y) * shape_.x + x];
  }
  double at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) const noexcept {
    return data_[((c * shape_.z + z) * shape_.y + y) * shape_.x + x];
  }

  std::span<double> channel(std::size_t c) noexcept {
    return {data_.data() + c * shape_.voxels(), shape_.voxels()};
  }
  std::span<const double> channel(std::size_t c) const noexcept {
    return {data_.data() + c * shape_.voxels(), shape_.voxels()};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  // Crops a spatial sub-box [z0,z0+nz) x [y0,y0+ny) x [x0,x0+nx), all channels.
  Tensor4 crop(std::size_t z0, std::size_t y0, std::size_t x0, std::size_t nz,
               std::size_t ny, std::size_t nx) const;

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

}  // namespace spmx
