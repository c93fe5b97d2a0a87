#include "diverid/text_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace diverid {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("not an integer: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

void write_tagged_row(std::ostream& out, std::string_view tag, std::span<const double> values) {
  std::string line(tag);
  for (double v : values) {
    line += ' ';
    line += format_double(v);
  }
  line += '\n';
  out << line;
}

std::vector<std::string_view> read_tagged_line(std::istream& in, std::string& buf, std::string_view tag,
                                               std::size_t n_values) {
  if (!std::getline(in, buf)) throw FormatError("file truncated before '" + std::string(tag) + "'");
  auto tok = split_ws(buf);
  if (tok.empty() || tok[0] != tag) throw FormatError("expected '" + std::string(tag) + "' record");
  if (n_values != static_cast<std::size_t>(-1) && tok.size() != n_values + 1) {
    throw FormatError("'" + std::string(tag) + "' record has the wrong number of values");
  }
  return tok;
}

std::vector<double> read_tagged_row(std::istream& in, std::string_view tag, std::size_t n_values) {
  std::string buf;
  auto tok = read_tagged_line(in, buf, tag, n_values);
  std::vector<double> v;
  v.reserve(tok.size() - 1);
  for (std::size_t i = 1; i < tok.size(); ++i) v.push_back(parse_double(tok[i]));
  return v;
}

std::string format_pose_record(const PoseFrame& frame) {
  std::string s = "pose " + std::to_string(frame.frame_id()) + " ";
  s += frame.label() ? std::to_string(*frame.label()) : std::string("-");
  for (Joint j : kAllJoints) {
    const auto& k = frame[j];
    s += ' ';
    s += joint_name(j);
    s += ' ' + format_double(k.x) + ' ' + format_double(k.y) + ' ' + format_double(k.confidence);
  }
  return s;
}

PoseFrame parse_pose_record(std::string_view line) {
  auto tok = split_ws(line);
  if (tok.size() != 3 + 4 * kNumJoints || tok[0] != "pose") {
    throw FormatError("pose record must be 'pose <id> <label|-> ' followed by 10 joints");
  }
  const std::int64_t id = parse_int(tok[1]);
  std::optional<int> label;
  if (tok[2] != "-") label = static_cast<int>(parse_int(tok[2]));
  std::array<Keypoint, kNumJoints> joints{};
  std::array<bool, kNumJoints> seen{};
  for (std::size_t n = 0; n < kNumJoints; ++n) {
    const std::size_t base = 3 + 4 * n;
    auto j = joint_from_name(tok[base]);
    if (!j) throw FormatError("unknown joint '" + std::string(tok[base]) + "'");
    const auto idx = static_cast<std::size_t>(*j);
    if (seen[idx]) throw FormatError("repeated joint '" + std::string(tok[base]) + "'");
    seen[idx] = true;
    joints[idx] = {parse_double(tok[base + 1]), parse_double(tok[base + 2]), parse_double(tok[base + 3])};
  }
  try {
    return PoseFrame(joints, id, label);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid pose record: ") + e.what());
  }
}

void write_pose_stream(std::ostream& out, const std::vector<PoseFrame>& frames) {
  for (const auto& f : frames) out << format_pose_record(f) << '\n';
}

std::vector<PoseFrame> read_pose_stream(std::istream& in) {
  std::vector<PoseFrame> frames;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    try {
      frames.push_back(parse_pose_record(line));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return frames;
}

void write_pose_file(const std::filesystem::path& path, const std::vector<PoseFrame>& frames) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_pose_stream(out, frames);
}

std::vector<PoseFrame> read_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  return read_pose_stream(in);
}

}  // namespace diverid
