#pragma once

// File formats.
//
//   TCF field:  "TCF1" | u32 LE height | u32 LE width | height*width binary32 LE, row-major
//   Dots CSV:   header "x,y" or "x,y,w,h", one dot per line, LF endings
//   JSON:       diagrams and metric reports, keys in fixed order

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "toploc/domain.hpp"
#include "toploc/dotmap.hpp"
#include "toploc/metrics.hpp"
#include "toploc/optdemo.hpp"

namespace toploc::io {

using json = nlohmann::ordered_json;

inline constexpr std::array<char, 4> tcf_magic{'T', 'C', 'F', '1'};
inline constexpr std::size_t tcf_header_size = 12;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= std::uint32_t{static_cast<unsigned char>(in[at + k])} << (8 * k);
  return v;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw error("write failed for " + path);
}

/// Shortest decimal that parses back to the same double.
inline std::string format_real(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

inline double parse_real(std::string_view s, std::size_t line) {
  double v = 0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != end || !std::isfinite(v))
    throw error("malformed row at line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// TCF fields

inline std::string encode_field(const field& f) {
  std::string out(tcf_magic.begin(), tcf_magic.end());
  out.reserve(tcf_header_size + 4 * f.size());
  detail::put_u32(out, f.height());
  detail::put_u32(out, f.width());
  for (const float v : f.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline field decode_field(const std::string& bytes) {
  if (bytes.size() < tcf_magic.size() || !std::equal(tcf_magic.begin(), tcf_magic.end(), bytes.begin()))
    throw error("bad magic: not a TCF1 field");
  if (bytes.size() < tcf_header_size) throw error("truncated header");
  const std::uint32_t h = detail::get_u32(bytes, 4);
  const std::uint32_t w = detail::get_u32(bytes, 8);
  if (h == 0 || w == 0) throw error("invalid dimensions " + shape{h, w}.str());
  const std::uint64_t n = std::uint64_t{h} * w;
  if (n > (std::numeric_limits<std::uint64_t>::max() - tcf_header_size) / 4 ||
      n > std::numeric_limits<std::uint32_t>::max())
    throw error("dimension overflow: " + shape{h, w}.str());
  const std::uint64_t want = tcf_header_size + 4 * n;
  if (bytes.size() < want)
    throw error("truncated payload: " + shape{h, w}.str() + " needs " + std::to_string(n) + " floats, file holds " +
                std::to_string((bytes.size() - tcf_header_size) / 4));
  if (bytes.size() > want) throw error("trailing bytes after payload");
  std::vector<float> values(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = std::bit_cast<float>(detail::get_u32(bytes, tcf_header_size + 4 * i));
  return field(h, w, std::move(values));
}

inline field read_field(const std::string& path) { return decode_field(detail::slurp(path)); }
inline void write_field(const field& f, const std::string& path) { detail::spit(path, encode_field(f)); }

inline void write_mask(const binary_mask& m, const std::string& path) { write_field(m.to_field<float>(), path); }

/// Masks are fields with values in {0, 1}.
inline binary_mask read_mask(const std::string& path) {
  const auto f = read_field(path);
  std::vector<std::uint8_t> bits(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] != 0.0f && f[i] != 1.0f) throw error("mask value at index " + std::to_string(i) + " is not 0 or 1");
    bits[i] = f[i] == 1.0f;
  }
  return binary_mask(f.height(), f.width(), std::move(bits));
}

// ---------------------------------------------------------------------------
// Dots CSV

inline std::string encode_dots(const dot_annotation& ann) {
  std::string out = ann.has_boxes() ? "x,y,w,h\n" : "x,y\n";
  const auto pts = ann.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out += detail::format_real(pts[i].x) + "," + detail::format_real(pts[i].y);
    if (ann.has_boxes()) out += "," + detail::format_real(ann.boxes()[i].w) + "," + detail::format_real(ann.boxes()[i].h);
    out += "\n";
  }
  return out;
}

inline dot_annotation decode_dots(const std::string& text) {
  auto lines = detail::split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw error("missing header: expected 'x,y' or 'x,y,w,h'");
  const auto header = lines.front();
  bool boxes = false;
  if (header == "x,y,w,h") boxes = true;
  else if (header != "x,y") throw error("bad header '" + std::string(header) + "': expected 'x,y' or 'x,y,w,h'");
  const std::size_t columns = boxes ? 4 : 2;

  std::vector<point> pts;
  std::vector<box> bx;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::size_t line = k + 1;
    const auto cells = detail::split(lines[k], ',');
    if (cells.size() != columns)
      throw error("malformed row at line " + std::to_string(line) + ": expected " + std::to_string(columns) +
                  " columns, got " + std::to_string(cells.size()));
    pts.push_back({detail::parse_real(cells[0], line), detail::parse_real(cells[1], line)});
    if (boxes) bx.push_back({detail::parse_real(cells[2], line), detail::parse_real(cells[3], line)});
  }
  if (boxes) return dot_annotation(std::move(pts), std::move(bx));
  return dot_annotation(std::move(pts));
}

inline dot_annotation read_dots(const std::string& path) { return decode_dots(detail::slurp(path)); }
inline void write_dots(const dot_annotation& ann, const std::string& path) { detail::spit(path, encode_dots(ann)); }

inline void write_centers(std::span<const point> centers, const std::string& path) {
  write_dots(dot_annotation(std::vector<point>(centers.begin(), centers.end())), path);
}

// ---------------------------------------------------------------------------
// JSON

template <std::floating_point T>
json to_json(const persistence_diagram<T>& d) {
  json arr = json::array();
  for (const auto& p : d.pairs)
    arr.push_back(json{{"mode", {p.mode.row, p.mode.col}},
                       {"saddle", {p.saddle.row, p.saddle.col}},
                       {"birth", static_cast<double>(p.birth)},
                       {"death", static_cast<double>(p.death)},
                       {"essential", p.essential}});
  return arr;
}

inline json to_json(const match_report& r) {
  json rows = json::array();
  for (const auto& t : r.per_threshold)
    rows.push_back(json{{"threshold", t.threshold},
                        {"precision", t.precision},
                        {"recall", t.recall},
                        {"f_score", t.f_score},
                        {"tp", t.counts.tp},
                        {"fp", t.counts.fp},
                        {"fn", t.counts.fn}});
  return json{{"per_threshold", rows},
              {"mean_precision", r.mean_precision},
              {"mean_recall", r.mean_recall},
              {"mean_f", r.mean_f}};
}

inline json to_json(const gaussian_report& r) {
  json j = to_json(r.report);
  j["mAP"] = r.report.mean_precision;
  j["mAR"] = r.report.mean_recall;
  j["AP50"] = r.ap50;
  j["AR50"] = r.ar50;
  j["AP75"] = r.ap75;
  j["AR75"] = r.ar75;
  return j;
}

inline json to_json(const game_report& r) {
  json rows = json::array();
  for (const auto& l : r.per_level) rows.push_back(json{{"level", l.level}, {"value", l.value}});
  return json{{"per_level", rows}};
}

inline json to_json(const nwpu_side& s) {
  json areas = json::array();
  for (const auto& a : s.recall_by_area) areas.push_back(a ? json(*a) : json(nullptr));
  return json{{"precision", s.scores.precision},
              {"recall", s.scores.recall},
              {"f_score", s.scores.f_score},
              {"tp", s.counts.tp},
              {"fp", s.counts.fp},
              {"fn", s.counts.fn},
              {"recall_by_area", areas}};
}

inline json to_json(const nwpu_report& r) { return json{{"sigma_l", to_json(r.large)}, {"sigma_s", to_json(r.strict)}}; }

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_report(const json& j, const std::string& path) { detail::spit(path, dump(j)); }

// ---------------------------------------------------------------------------
// Demo trace CSV

inline std::string encode_trace(const std::vector<trace_entry>& trace) {
  std::string out = "iter,loss,components\n";
  for (const auto& t : trace)
    out += std::to_string(t.iter) + "," + detail::format_real(t.loss) + "," + std::to_string(t.components) + "\n";
  return out;
}

inline void write_trace(const std::vector<trace_entry>& trace, const std::string& path) {
  detail::spit(path, encode_trace(trace));
}

}  // namespace toploc::io
