#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cdfh {

struct Dims {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  std::size_t count() const noexcept { return nx * ny * nz; }
  bool operator==(const Dims&) const = default;
};

/// Scalar 2D/3D image stored x-fastest. Voxels equal to background_value are
/// treated as "outside the object" by the distribution estimators and are
/// preserved by the transforms when requested.
class Volume {
 public:
  Volume(Dims dims, std::vector<double> voxels, std::string channel = {},
         double background_value = 0.0);

  const Dims& dims() const noexcept { return dims_; }
  std::span<const double> voxels() const noexcept { return voxels_; }
  const std::string& channel() const noexcept { return channel_; }
  double background_value() const noexcept { return background_value_; }
  std::size_t size() const noexcept { return voxels_.size(); }

  bool is_background(double v) const noexcept { return v == background_value_; }
  std::size_t background_count() const noexcept;

  /// Copy with replaced voxel buffer (same dims/channel/background).
  Volume with_voxels(std::vector<double> voxels) const;
  Volume with_channel(std::string channel) const;

  bool operator==(const Volume&) const = default;

 private:
  Dims dims_;
  std::vector<double> voxels_;
  std::string channel_;
  double background_value_;
};

}  // namespace cdfh
