#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cdfh/volume.hpp"

namespace cdfh {

// Raw volume format: a little-endian voxel payload in x-fastest order plus a
// JSON sidecar at "<payload>.json":
//   {"dims":[nx,ny,nz], "dtype":"u16", "channel":"T2",
//    "background_value":0, "endianness":"little"}

enum class DType { U8, U16, I16, F32 };

std::string_view to_string(DType t) noexcept;
DType dtype_from_string(std::string_view s);  // throws HeaderMismatch
std::size_t dtype_size(DType t) noexcept;

struct RawHeader {
  Dims dims;
  DType dtype = DType::F32;
  std::string channel;
  double background_value = 0.0;
};

enum class OverflowPolicy { Clamp, Throw };

struct WriteStats {
  std::size_t clamped = 0;  // voxels outside the dtype range
  std::size_t rounded = 0;  // voxels that were not integral for an integer dtype
};

std::filesystem::path sidecar_path(const std::filesystem::path& payload);

/// Parses and validates the sidecar only. Throws HeaderMismatch/IoError.
RawHeader read_header(const std::filesystem::path& payload);
/// Validates the header and payload length before decoding any voxel.
Volume read_volume(const std::filesystem::path& payload);
/// Integer dtypes round half-to-even; out-of-range values clamp (or throw
/// Overflow under OverflowPolicy::Throw).
WriteStats write_volume(const Volume& vol, const std::filesystem::path& payload, DType dtype,
                        OverflowPolicy policy = OverflowPolicy::Clamp);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace cdfh
