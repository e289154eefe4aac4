#pragma once

#include <string>

#include "json.hpp"
#include "otrank/htest.hpp"

namespace otrank {

inline constexpr int kReportSchema = 1;

/// JSON form of a TestReport. Timings vary between runs, so they are only
/// written when asked for; everything else is a function of inputs and options.
inline nlohmann::ordered_json report_to_json(const TestReport& r, bool with_timings = false) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["test_kind"] = to_string(r.kind);
  j["statistic_raw"] = r.statistic_raw;
  j["statistic_scaled"] = r.statistic_scaled;
  j["scale"] = r.scale;
  j["p_value"] = r.p_value;
  j["alpha"] = r.alpha;
  j["critical_value"] = r.critical_value;
  j["reject"] = r.reject;
  j["counts"] = r.counts;
  j["dims"] = r.dims;
  j["grids"] = r.grids;
  j["B"] = r.B;
  j["seed"] = r.seed;
  j["generator"] = r.generator;
  j["table_source"] = r.table_source;
  j["prerank"] = r.prerank;
  j["jitter"] = r.jitter;
  j["warnings"] = r.warnings;
  if (with_timings) {
    j["timings_ms"] = {{"ranks", r.timings.ranks_ms},
                       {"statistic", r.timings.statistic_ms},
                       {"null_table", r.timings.null_ms}};
  }
  return j;
}

}  // namespace otrank
