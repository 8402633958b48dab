#include <limits>

#include "echoflag/echogram.hpp"
#include "echoflag/error.hpp"
#include "echoflag/io.hpp"

namespace echoflag {
namespace {

constexpr std::string_view kMagic = "ECHG";
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 4 + 8 + 8;

}  // namespace

std::vector<std::uint8_t> encode_echogram(const Echogram& e) {
  if (e.rows() > std::numeric_limits<std::uint32_t>::max() ||
      e.cols() > std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::DimensionOverflow, "dimensions exceed u32");
  io::ByteWriter w;
  w.reserve(kHeaderBytes + 4 * e.values().size());
  w.raw(kMagic);
  w.u32(kEchogramFormatVersion);
  w.u32(static_cast<std::uint32_t>(e.rows()));
  w.u32(static_cast<std::uint32_t>(e.cols()));
  w.f64(e.depth_step_m());
  w.f64(e.depth_origin_m());
  for (float v : e.values()) w.f32(v);
  return std::move(w.bytes());
}

Echogram decode_echogram(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != kMagic) throw Error(ErrorCode::BadMagic, "missing ECHG magic");
  const std::uint32_t version = r.u32();
  if (version != kEchogramFormatVersion)
    throw Error(ErrorCode::BadMagic, "unsupported version " + std::to_string(version));
  const std::uint64_t rows = r.u32();
  const std::uint64_t cols = r.u32();
  const double step = r.f64();
  const double origin = r.f64();
  const std::uint64_t cells = rows * cols;  // cannot overflow: both < 2^32
  if (cells > std::numeric_limits<std::size_t>::max() / 4)
    throw Error(ErrorCode::DimensionOverflow, "payload size overflows");
  if (r.remaining() < cells * 4)
    throw Error(ErrorCode::TruncatedPayload, "header announces " + std::to_string(cells) +
                                                 " values, payload holds " +
                                                 std::to_string(r.remaining() / 4));
  if (r.remaining() > cells * 4)
    throw Error(ErrorCode::TruncatedPayload, "payload longer than header announces");
  std::vector<float> sv(cells);
  for (auto& v : sv) v = r.f32();
  return Echogram(rows, cols, origin, step, std::move(sv));
}

void save_echogram(const Echogram& e, const std::filesystem::path& path) {
  io::write_bytes(path, encode_echogram(e));
}

Echogram load_echogram(const std::filesystem::path& path) {
  Echogram e = decode_echogram(io::read_bytes(path));
  e.set_survey_id(path.stem().string());
  return e;
}

}  // namespace echoflag
