#include "restless/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace restless {
namespace {

[[noreturn]] void fail(const std::string& path, std::size_t line_no, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string& path, std::size_t line_no, const std::string& tok) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(path, line_no, "not a number: '" + tok + "'");
  }
}

long parse_long(const std::string& path, std::size_t line_no, const std::string& tok) {
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(path, line_no, "not an integer: '" + tok + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

}  // namespace

std::string format_double(double v) {
  // 17 significant digits round-trip any double; trim to the shortest form
  // that still parses back exactly so files stay readable.
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& trajectories) {
  auto sorted = trajectories;
  std::sort(sorted.begin(), sorted.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.arm_id < b.arm_id; });
  auto out = open_out(path);
  out << "arm_id,week,state,action\n";
  for (const auto& traj : sorted) {
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
      out << traj.arm_id << ',' << (i + 1) << ',' << format_double(traj.steps[i].state.value())
          << ',' << action_index(traj.steps[i].action) << '\n';
    }
  }
}

std::vector<Trajectory> read_trajectories_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) fail(path, line_no, "empty file");
  if (split_csv_line(line) != std::vector<std::string>{"arm_id", "week", "state", "action"}) {
    fail(path, line_no, "expected header 'arm_id,week,state,action'");
  }

  std::vector<Trajectory> trajectories;
  long prev_arm = -1;
  long prev_week = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) fail(path, line_no, "expected 4 fields");
    const long arm = parse_long(path, line_no, fields[0]);
    const long week = parse_long(path, line_no, fields[1]);
    const double state = parse_double(path, line_no, fields[2]);
    const long action = parse_long(path, line_no, fields[3]);
    if (arm < 0) fail(path, line_no, "negative arm_id");
    if (action != 0 && action != 1) fail(path, line_no, "action must be 0 or 1");

    if (arm != prev_arm) {
      if (arm < prev_arm) fail(path, line_no, "rows not sorted by arm_id");
      if (week != 1) fail(path, line_no, "first week of an arm must be 1");
      trajectories.push_back(Trajectory{static_cast<int>(arm), {}, {}});
    } else if (week != prev_week + 1) {
      fail(path, line_no, "weeks must be consecutive (expected " +
                              std::to_string(prev_week + 1) + ", got " + std::to_string(week) + ")");
    }
    try {
      trajectories.back().steps.push_back(
          Step{EngagementState(state), action == 1 ? Action::active : Action::passive});
    } catch (const std::out_of_range& e) {
      fail(path, line_no, e.what());
    }
    prev_arm = arm;
    prev_week = week;
  }
  return trajectories;
}

void write_features_csv(const std::string& path, const std::vector<Trajectory>& trajectories) {
  std::size_t dim = 0;
  for (const auto& traj : trajectories) dim = std::max(dim, traj.features.size());
  auto out = open_out(path);
  out << "arm_id";
  for (std::size_t j = 0; j < dim; ++j) out << ",f" << j;
  out << '\n';
  auto sorted = trajectories;
  std::sort(sorted.begin(), sorted.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.arm_id < b.arm_id; });
  for (const auto& traj : sorted) {
    if (traj.features.empty()) continue;
    if (traj.features.size() != dim) {
      throw std::runtime_error("feature length differs across arms (arm " +
                               std::to_string(traj.arm_id) + ")");
    }
    out << traj.arm_id;
    for (double f : traj.features) out << ',' << format_double(f);
    out << '\n';
  }
}

void attach_features_csv(const std::string& path, std::vector<Trajectory>& trajectories) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) fail(path, line_no, "empty file");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "arm_id") fail(path, line_no, "expected 'arm_id,f0,...' header");
  const std::size_t dim = header.size() - 1;

  std::map<long, std::vector<double>> by_arm;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != dim + 1) fail(path, line_no, "expected " + std::to_string(dim + 1) + " fields");
    const long arm = parse_long(path, line_no, fields[0]);
    std::vector<double> feats;
    for (std::size_t j = 1; j < fields.size(); ++j) {
      feats.push_back(parse_double(path, line_no, fields[j]));
    }
    if (!by_arm.emplace(arm, std::move(feats)).second) {
      fail(path, line_no, "duplicate arm_id " + std::to_string(arm));
    }
  }
  for (auto& traj : trajectories) {
    auto it = by_arm.find(traj.arm_id);
    if (it == by_arm.end()) {
      throw std::runtime_error(path + ": no feature row for arm " + std::to_string(traj.arm_id));
    }
    traj.features = it->second;
  }
}

}  // namespace restless
