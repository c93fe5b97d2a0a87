#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diverid/types.hpp"

namespace diverid {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);

/// Whitespace tokenizer; views point into `line`.
std::vector<std::string_view> split_ws(std::string_view line);

// Pose stream: one frame per line
//   pose <frame_id> <label|-> <joint> <x> <y> <conf>  (x10)
// Blank lines and lines starting with '#' are ignored. The writer emits the
// joints in canonical order; the reader accepts any order but rejects a
// record with a missing, unknown or repeated joint.
void write_pose_stream(std::ostream& out, const std::vector<PoseFrame>& frames);
std::vector<PoseFrame> read_pose_stream(std::istream& in);
void write_pose_file(const std::filesystem::path& path, const std::vector<PoseFrame>& frames);
std::vector<PoseFrame> read_pose_file(const std::filesystem::path& path);

/// "<tag> v_1 ... v_n" on one line.
void write_tagged_row(std::ostream& out, std::string_view tag, std::span<const double> values);
/// Reads one line, checks its leading tag and, unless `n_values` is
/// SIZE_MAX, the number of values after it. Views point into `buf`.
std::vector<std::string_view> read_tagged_line(std::istream& in, std::string& buf, std::string_view tag,
                                               std::size_t n_values);
std::vector<double> read_tagged_row(std::istream& in, std::string_view tag, std::size_t n_values);

std::string format_pose_record(const PoseFrame& frame);
PoseFrame parse_pose_record(std::string_view line);

}  // namespace diverid
