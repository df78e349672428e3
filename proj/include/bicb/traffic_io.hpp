#pragma once

// Traffic CSV schema: `period_id,step,pctr,wp,obj`, one row per impression.

#include <string>
#include <utility>
#include <vector>

#include "bicb/allocator.hpp"
#include "bicb/csv.hpp"

namespace bicb {

inline constexpr const char* kTrafficHeader = "period_id,step,pctr,wp,obj";

struct LoadOptions {
  int max_steps = 48;  // steps must be in [0, max_steps)
};

/// Loads one or more periods from a traffic CSV. Periods keep their order of
/// first appearance; impressions within a period are stably sorted by step.
inline std::vector<std::pair<std::string, TrafficSlice>> load_traffic(
    const std::string& path, const LoadOptions& opts = {}) {
  auto in = csv::open_input(path);
  csv::expect_header(in, kTrafficHeader, path);

  std::vector<std::pair<std::string, TrafficSlice>> periods;
  std::vector<std::string> order;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    const auto fields = csv::split(line);
    if (fields.size() != 5) throw ParseError(ctx + ": expected 5 fields");
    Impression imp;
    const std::string period(fields[0]);
    imp.step = csv::parse_int(fields[1], ctx);
    imp.pctr = csv::parse_double(fields[2], ctx);
    imp.wp = csv::parse_double(fields[3], ctx);
    imp.obj = csv::parse_double(fields[4], ctx);
    if (imp.step < 0 || imp.step >= opts.max_steps)
      throw ParseError(ctx + ": step outside [0," + std::to_string(opts.max_steps) + ")");
    if (!(imp.pctr >= 0 && imp.pctr <= 1)) throw ParseError(ctx + ": pctr outside [0,1]");
    if (!(imp.wp > 0)) throw ParseError(ctx + ": wp must be > 0");
    if (!(imp.obj >= 0)) throw ParseError(ctx + ": obj must be >= 0");

    auto it = std::find_if(periods.begin(), periods.end(),
                           [&](const auto& p) { return p.first == period; });
    if (it == periods.end()) {
      periods.emplace_back(period, TrafficSlice{{}, 0, opts.max_steps - 1});
      it = periods.end() - 1;
    }
    it->second.impressions.push_back(imp);
  }
  for (auto& [_, slice] : periods)
    std::stable_sort(slice.impressions.begin(), slice.impressions.end(),
                     [](const Impression& a, const Impression& b) { return a.step < b.step; });
  return periods;
}

inline void write_traffic(std::ostream& out, const std::string& period_id,
                          const TrafficSlice& slice) {
  for (const auto& imp : slice.impressions)
    out << period_id << ',' << imp.step << ',' << csv::fmt(imp.pctr) << ',' << csv::fmt(imp.wp)
        << ',' << csv::fmt(imp.obj) << "\n";
}

inline void save_traffic(const std::string& path,
                         const std::vector<std::pair<std::string, TrafficSlice>>& periods) {
  auto out = csv::open_output(path);
  out << kTrafficHeader << "\n";
  for (const auto& [id, slice] : periods) write_traffic(out, id, slice);
}

}  // namespace bicb
