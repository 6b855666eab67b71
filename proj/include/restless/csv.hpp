// CSV interchange: trajectory files (`arm_id,week,state,action`) and static
// feature files (`arm_id,f0,f1,...`), plus the low-level formatting helpers
// shared by the episode and diagnostic writers.
#pragma once

#include <string>
#include <vector>

#include "restless/core.hpp"

namespace restless {

// Formats a double as decimal text that parses back to the identical bits.
std::string format_double(double v);

// Splits one CSV line on commas; no quoting support (none of our fields
// contain commas).
std::vector<std::string> split_csv_line(const std::string& line);

// Trajectory files: one row per (arm, week); rows sorted by (arm_id, week);
// weeks start at 1 and are gapless per arm. The reader validates all of that
// and reports offending line numbers.
void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectories_csv(const std::string& path);

// Feature files: one row per arm, fixed-width numeric columns. The writer
// skips arms without features; the reader attaches features onto matching
// arm_ids and requires a consistent column count.
void write_features_csv(const std::string& path, const std::vector<Trajectory>& trajectories);
void attach_features_csv(const std::string& path, std::vector<Trajectory>& trajectories);

}  // namespace restless
