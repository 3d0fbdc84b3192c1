#pragma once

// RTTM speaker lines:
//   SPEAKER <file> 1 <tbeg> <tdur> <NA> <NA> <speaker> <NA> <NA>
// Blank lines and lines starting with ';' or '#' are ignored, as are
// well-formed lines of other record types.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "sparse_diarize/errors.hpp"
#include "sparse_diarize/text.hpp"
#include "sparse_diarize/timeline.hpp"

namespace sparse_diarize {

inline constexpr std::size_t kRttmFields = 10;

inline std::map<std::string, LabeledTimeline> parse_rttm_files(std::string_view text) {
  std::map<std::string, LabeledTimeline> files;
  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == ';' || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::istringstream stream{std::string(line)};
    for (std::string f; stream >> f;) fields.push_back(std::move(f));
    if (fields.size() != kRttmFields) {
      throw ParseError(line_no, "expected " + std::to_string(kRttmFields) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    if (fields[0] != "SPEAKER") continue;
    const double tbeg = detail::parse_number<double>(fields[3], line_no);
    const double tdur = detail::parse_number<double>(fields[4], line_no);
    if (!std::isfinite(tbeg) || tbeg < 0.0) throw ParseError(line_no, "negative onset");
    if (!std::isfinite(tdur) || tdur < 0.0) throw ParseError(line_no, "negative duration");
    files[fields[1]].add(fields[7], tbeg, tbeg + tdur);
  }
  return files;
}

// Single-recording convenience: every SPEAKER line must name the same file.
inline LabeledTimeline parse_rttm(std::string_view text) {
  auto files = parse_rttm_files(text);
  if (files.size() > 1) {
    throw FormatError("RTTM holds " + std::to_string(files.size()) +
                      " recordings; use parse_rttm_files");
  }
  return files.empty() ? LabeledTimeline{} : std::move(files.begin()->second);
}

inline std::string emit_rttm(const LabeledTimeline& timeline, const std::string& file_id) {
  std::vector<std::tuple<double, std::string, double>> rows;
  for (const auto& [speaker, list] : timeline.speakers()) {
    for (const auto& iv : list) rows.emplace_back(iv.start, speaker, iv.end);
  }
  std::sort(rows.begin(), rows.end());
  std::string out;
  char buf[64];
  for (const auto& [start, speaker, end] : rows) {
    std::snprintf(buf, sizeof buf, "%.3f %.3f", start, end - start);
    out += "SPEAKER " + file_id + " 1 " + buf + " <NA> <NA> " + speaker + " <NA> <NA>\n";
  }
  return out;
}

}  // namespace sparse_diarize
