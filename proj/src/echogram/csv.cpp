#include <string>

#include "echoflag/echogram.hpp"
#include "echoflag/error.hpp"
#include "echoflag/io.hpp"

namespace echoflag {

std::string format_bottom_csv(const BottomRecord& b) {
  if (b.bottom_m.size() != b.clean_bottom_m.size())
    throw Error(ErrorCode::MisalignedRecords, "bottom and clean bottom differ in length");
  std::string out = "ping_index,bottom_m,clean_bottom_m\n";
  for (std::size_t i = 0; i < b.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += io::fixed(b.bottom_m[i], 6);
    out += ',';
    out += io::fixed(b.clean_bottom_m[i], 6);
    out += '\n';
  }
  return out;
}

void write_bottom_csv(const BottomRecord& b, const std::filesystem::path& path) {
  io::write_text(path, format_bottom_csv(b));
}

BottomRecord read_bottom_csv(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  const auto lines = io::split_lines(text);
  if (lines.empty() || io::trim(lines.front()) != "ping_index,bottom_m,clean_bottom_m")
    throw Error(ErrorCode::Parse, path.string() + ": missing bottom CSV header");
  BottomRecord b;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = io::split(lines[i], ',');
    if (f.size() != 3) throw Error(ErrorCode::Parse, path.string() + ": expected 3 fields");
    if (io::parse_int(f[0]) != static_cast<long long>(i - 1))
      throw Error(ErrorCode::MisalignedRecords, path.string() + ": ping indices must be 0..n-1 in order");
    b.bottom_m.push_back(io::parse_double(f[1]));
    b.clean_bottom_m.push_back(io::parse_double(f[2]));
  }
  return b;
}

std::string_view label_name(PingLabel label) noexcept {
  switch (label) {
    case PingLabel::NoBottom: return "no_bottom";
    case PingLabel::WeakCorrection: return "weak";
    case PingLabel::StrongCorrection: return "strong";
  }
  return "?";
}

PingLabel parse_label(std::string_view name) {
  name = io::trim(name);
  if (name == "no_bottom") return PingLabel::NoBottom;
  if (name == "weak") return PingLabel::WeakCorrection;
  if (name == "strong") return PingLabel::StrongCorrection;
  throw Error(ErrorCode::Parse, "unknown label '" + std::string(name) + "'");
}

std::string format_labels_csv(std::span<const PingLabel> labels) {
  std::string out = "ping_index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += label_name(labels[i]);
    out += '\n';
  }
  return out;
}

void write_labels_csv(std::span<const PingLabel> labels, const std::filesystem::path& path) {
  io::write_text(path, format_labels_csv(labels));
}

std::vector<PingLabel> read_labels_csv(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  const auto lines = io::split_lines(text);
  if (lines.empty() || io::trim(lines.front()) != "ping_index,label")
    throw Error(ErrorCode::Parse, path.string() + ": missing labels CSV header");
  std::vector<PingLabel> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = io::split(lines[i], ',');
    if (f.size() != 2) throw Error(ErrorCode::Parse, path.string() + ": expected 2 fields");
    if (io::parse_int(f[0]) != static_cast<long long>(i - 1))
      throw Error(ErrorCode::MisalignedRecords, path.string() + ": ping indices must be 0..n-1 in order");
    labels.push_back(parse_label(f[1]));
  }
  return labels;
}

std::string format_stats_csv(const StandardizationStats& s) {
  std::string out = "row,mean,stddev\n";
  for (std::size_t r = 0; r < s.size(); ++r)
    out += std::to_string(r) + ',' + io::fixed(s.mean[r], 9) + ',' + io::fixed(s.stddev[r], 9) + '\n';
  return out;
}

void write_stats_csv(const StandardizationStats& s, const std::filesystem::path& path) {
  io::write_text(path, format_stats_csv(s));
}

StandardizationStats read_stats_csv(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  const auto lines = io::split_lines(text);
  if (lines.empty() || io::trim(lines.front()) != "row,mean,stddev")
    throw Error(ErrorCode::Parse, path.string() + ": missing stats CSV header");
  StandardizationStats s;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = io::split(lines[i], ',');
    if (f.size() != 3) throw Error(ErrorCode::Parse, path.string() + ": expected 3 fields");
    s.mean.push_back(io::parse_double(f[1]));
    const double sd = io::parse_double(f[2]);
    if (!(sd > 0.0)) throw Error(ErrorCode::Parse, path.string() + ": stddev must be positive");
    s.stddev.push_back(sd);
  }
  if (s.size() == 0) throw Error(ErrorCode::EmptyInput, path.string() + ": no rows");
  return s;
}

std::string format_partition_csv(const PingPartition& p, std::size_t cols) {
  std::vector<char> kept(cols, 0);
  for (auto i : p.kept)
    if (i < cols) kept[i] = 1;
  std::string out = "ping_index,kept\n";
  for (std::size_t i = 0; i < cols; ++i) out += std::to_string(i) + (kept[i] ? ",1\n" : ",0\n");
  return out;
}

}  // namespace echoflag
