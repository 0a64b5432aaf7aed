#pragma once

// Study summary document, replicate CSV reader and the static text / SVG
// report renderers.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "margeff/harness.hpp"

namespace margeff {

/// Contents of summary.json.
struct StudySummary {
  std::string engine_version;
  std::uint64_t seed = 0;
  std::string profile;
  Family family = Family::logistic;
  std::size_t replicates = 0;
  std::size_t bootstrap = 0;
  double truth = 0.0;
  nlohmann::json truth_ledger;  // optional detail, null when absent
  std::vector<PerformanceSummary> methods;
};

void to_json(nlohmann::json& j, const StudySummary& s);
void from_json(const nlohmann::json& j, StudySummary& s);

struct ReplicateRow {
  std::size_t replicate = 0;
  Method method = Method::bucher;
  double delta_hat = 0.0, se = 0.0, ci_low = 0.0, ci_high = 0.0;
  bool valid = false;
};

struct ReplicateTable {
  std::vector<std::string> provenance;  // '#' lines without the marker
  std::vector<ReplicateRow> rows;
};

/// Parses a replicates.csv stream. Columns may come in any order; extra
/// columns are ignored. Throws Error(InvalidArgument) naming any missing
/// columns, or pointing at the first malformed line.
ReplicateTable read_replicates_csv(std::istream& is);

std::string render_report_text(const StudySummary& summary, const ReplicateTable& table);
std::string render_report_svg(const StudySummary& summary, const ReplicateTable& table);

}  // namespace margeff
