#include "cdfh/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "cdfh/error.hpp"

namespace cdfh {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(DType t) noexcept {
  switch (t) {
    case DType::U8: return "u8";
    case DType::U16: return "u16";
    case DType::I16: return "i16";
    case DType::F32: return "f32";
  }
  return "?";
}

DType dtype_from_string(std::string_view s) {
  if (s == "u8") return DType::U8;
  if (s == "u16") return DType::U16;
  if (s == "i16") return DType::I16;
  if (s == "f32") return DType::F32;
  throw Error(ErrorCode::HeaderMismatch, "unknown dtype '" + std::string(s) + "'");
}

std::size_t dtype_size(DType t) noexcept {
  switch (t) {
    case DType::U8: return 1;
    case DType::U16: return 2;
    case DType::I16: return 2;
    case DType::F32: return 4;
  }
  return 0;
}

fs::path sidecar_path(const fs::path& payload) {
  fs::path p = payload;
  p += ".json";
  return p;
}

namespace {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <class T>
void decode(const std::vector<char>& raw, std::vector<double>& out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    T v;
    std::memcpy(&v, raw.data() + i * sizeof(T), sizeof(T));
    out[i] = static_cast<double>(to_little(v));
  }
}

template <class T>
void encode(std::span<const double> in, std::vector<char>& raw, OverflowPolicy policy,
            WriteStats& stats, DType dtype) {
  raw.resize(in.size() * sizeof(T));
  for (std::size_t i = 0; i < in.size(); ++i) {
    double v = in[i];
    T out;
    if constexpr (std::is_integral_v<T>) {
      constexpr double lo = static_cast<double>(std::numeric_limits<T>::lowest());
      constexpr double hi = static_cast<double>(std::numeric_limits<T>::max());
      double r = std::nearbyint(v);  // default rounding mode: half to even
      if (r != v) ++stats.rounded;
      if (r < lo || r > hi) {
        if (policy == OverflowPolicy::Throw)
          throw Error(ErrorCode::Overflow, "voxel value " + std::to_string(v) + " does not fit " +
                                               std::string(to_string(dtype)));
        ++stats.clamped;
        r = r < lo ? lo : hi;
      }
      out = static_cast<T>(r);
    } else {
      constexpr double fmax = std::numeric_limits<float>::max();
      if (std::abs(v) > fmax) {
        if (policy == OverflowPolicy::Throw)
          throw Error(ErrorCode::Overflow, "value exceeds " + std::string(to_string(dtype)) + " range");
        ++stats.clamped;
        v = v < 0 ? -fmax : fmax;
      }
      out = static_cast<T>(v);
    }
    out = to_little(out);
    std::memcpy(raw.data() + i * sizeof(T), &out, sizeof(T));
  }
}

}  // namespace

RawHeader read_header(const fs::path& payload) {
  const auto side = sidecar_path(payload);
  std::ifstream in(side, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open header " + side.string());
  RawHeader h;
  try {
    const json j = json::parse(in);
    const auto& d = j.at("dims");
    if (!d.is_array() || d.size() < 2 || d.size() > 3)
      throw Error(ErrorCode::HeaderMismatch, "dims must have 2 or 3 entries");
    h.dims.nx = d.at(0).get<std::size_t>();
    h.dims.ny = d.at(1).get<std::size_t>();
    h.dims.nz = d.size() == 3 ? d.at(2).get<std::size_t>() : 1;
    h.dtype = dtype_from_string(j.at("dtype").get<std::string>());
    h.channel = j.value("channel", std::string{});
    h.background_value = j.value("background_value", 0.0);
    if (j.value("endianness", std::string("little")) != "little")
      throw Error(ErrorCode::HeaderMismatch, "only little-endian payloads are supported");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::HeaderMismatch, side.string() + ": " + e.what());
  }
  if (h.dims.count() == 0) throw Error(ErrorCode::HeaderMismatch, "dims must be positive");
  return h;
}

Volume read_volume(const fs::path& payload) {
  const RawHeader h = read_header(payload);
  std::error_code ec;
  const auto bytes = fs::file_size(payload, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot stat " + payload.string());
  const std::size_t expected = h.dims.count() * dtype_size(h.dtype);
  if (bytes != expected)
    throw Error(ErrorCode::HeaderMismatch, payload.string() + ": payload has " +
                                               std::to_string(bytes) + " bytes, header implies " +
                                               std::to_string(expected));
  std::ifstream in(payload, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + payload.string());
  std::vector<char> raw(expected);
  in.read(raw.data(), static_cast<std::streamsize>(expected));
  if (!in) throw Error(ErrorCode::IoError, "short read: " + payload.string());

  std::vector<double> voxels(h.dims.count());
  switch (h.dtype) {
    case DType::U8: decode<std::uint8_t>(raw, voxels); break;
    case DType::U16: decode<std::uint16_t>(raw, voxels); break;
    case DType::I16: decode<std::int16_t>(raw, voxels); break;
    case DType::F32: decode<float>(raw, voxels); break;
  }
  return Volume(h.dims, std::move(voxels), h.channel, h.background_value);
}

WriteStats write_volume(const Volume& vol, const fs::path& payload, DType dtype,
                        OverflowPolicy policy) {
  WriteStats stats;
  std::vector<char> raw;
  switch (dtype) {
    case DType::U8: encode<std::uint8_t>(vol.voxels(), raw, policy, stats, dtype); break;
    case DType::U16: encode<std::uint16_t>(vol.voxels(), raw, policy, stats, dtype); break;
    case DType::I16: encode<std::int16_t>(vol.voxels(), raw, policy, stats, dtype); break;
    case DType::F32: encode<float>(vol.voxels(), raw, policy, stats, dtype); break;
  }
  const auto& d = vol.dims();
  json h = {{"dims", {d.nx, d.ny, d.nz}},
            {"dtype", to_string(dtype)},
            {"channel", vol.channel()},
            {"background_value", vol.background_value()},
            {"endianness", "little"}};
  write_text(sidecar_path(payload), h.dump(1) + "\n");
  std::ofstream out(payload, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + payload.string());
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + payload.string());
  return stats;
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

}  // namespace cdfh
