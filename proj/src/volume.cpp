#include "cdfh/volume.hpp"

#include <algorithm>
#include <cmath>

#include "cdfh/error.hpp"

namespace cdfh {

Volume::Volume(Dims dims, std::vector<double> voxels, std::string channel, double background_value)
    : dims_(dims), voxels_(std::move(voxels)), channel_(std::move(channel)),
      background_value_(background_value) {
  if (dims_.nx == 0 || dims_.ny == 0 || dims_.nz == 0)
    throw Error(ErrorCode::InvalidArgument, "volume dims must be positive");
  if (voxels_.size() != dims_.count())
    throw Error(ErrorCode::InvalidArgument, "voxel count does not match dims");
  if (!std::isfinite(background_value_))
    throw Error(ErrorCode::InvalidArgument, "background value must be finite");
  if (!std::all_of(voxels_.begin(), voxels_.end(), [](double v) { return std::isfinite(v); }))
    throw Error(ErrorCode::InvalidArgument, "volume contains non-finite voxels");
}

std::size_t Volume::background_count() const noexcept {
  return static_cast<std::size_t>(
      std::count(voxels_.begin(), voxels_.end(), background_value_));
}

Volume Volume::with_voxels(std::vector<double> voxels) const {
  return Volume(dims_, std::move(voxels), channel_, background_value_);
}

Volume Volume::with_channel(std::string channel) const {
  return Volume(dims_, voxels_, std::move(channel), background_value_);
}

}  // namespace cdfh
