#include "margeff/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <sstream>

#include "margeff/error.hpp"

namespace margeff {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& cell, std::size_t line_no) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (cell.empty() || end != begin + cell.size())
    throw Error(ErrorKind::InvalidArgument,
                "replicates.csv line " + std::to_string(line_no) + ": bad number '" + cell + "'");
  return v;
}

std::string num3(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string with_mcse(double v, double mcse) { return num3(v) + " (" + num3(mcse) + ")"; }

std::string fixed(double v, int decimals) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::vector<double> valid_estimates(const ReplicateTable& table, Method m) {
  std::vector<double> out;
  for (const auto& r : table.rows)
    if (r.method == m && r.valid && std::isfinite(r.delta_hat)) out.push_back(r.delta_hat);
  return out;
}

double nice_step(double span, int target_ticks) {
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

}  // namespace

void to_json(nlohmann::json& j, const StudySummary& s) {
  j = nlohmann::json{{"engine_version", s.engine_version},
                     {"seed", s.seed},
                     {"profile", s.profile},
                     {"family", std::string(to_string(s.family))},
                     {"replicates", s.replicates},
                     {"bootstrap", s.bootstrap},
                     {"truth", s.truth},
                     {"methods", s.methods}};
  if (!s.truth_ledger.is_null()) j["truth_ledger"] = s.truth_ledger;
}

void from_json(const nlohmann::json& j, StudySummary& s) {
  s.engine_version = j.at("engine_version").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.profile = j.at("profile").get<std::string>();
  s.family = family_from_string(j.at("family").get<std::string>());
  s.replicates = j.at("replicates").get<std::size_t>();
  s.bootstrap = j.at("bootstrap").get<std::size_t>();
  s.truth = j.at("truth").get<double>();
  s.truth_ledger = j.contains("truth_ledger") ? j.at("truth_ledger") : nlohmann::json();
  s.methods = j.at("methods").get<std::vector<PerformanceSummary>>();
}

ReplicateTable read_replicates_csv(std::istream& is) {
  static constexpr std::array<const char*, 7> kColumns = {
      "replicate", "method", "delta_hat", "se", "ci_low", "ci_high", "valid"};
  ReplicateTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      table.provenance.push_back(trim(line.substr(1)));
      continue;
    }
    header = split(line, ',');
    break;
  }

  std::array<std::size_t, kColumns.size()> index{};
  std::string missing;
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](const std::string& h) { return trim(h) == kColumns[c]; });
    if (it == header.end()) {
      missing += missing.empty() ? "" : ", ";
      missing += kColumns[c];
    } else {
      index[c] = static_cast<std::size_t>(it - header.begin());
    }
  }
  if (!missing.empty())
    throw Error(ErrorKind::InvalidArgument, "replicates.csv is missing columns: " + missing);

  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw Error(ErrorKind::InvalidArgument,
                  "replicates.csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
    auto cell = [&](std::size_t c) { return trim(cells[index[c]]); };
    ReplicateRow row;
    const double rep = parse_double(cell(0), line_no);
    if (!(rep >= 0.0) || rep != std::floor(rep))
      throw Error(ErrorKind::InvalidArgument,
                  "replicates.csv line " + std::to_string(line_no) + ": bad replicate index");
    row.replicate = static_cast<std::size_t>(rep);
    try {
      row.method = method_from_string(cell(1));
    } catch (const Error&) {
      throw Error(ErrorKind::InvalidArgument,
                  "replicates.csv line " + std::to_string(line_no) + ": unknown method '" + cell(1) + "'");
    }
    row.delta_hat = parse_double(cell(2), line_no);
    row.se = parse_double(cell(3), line_no);
    row.ci_low = parse_double(cell(4), line_no);
    row.ci_high = parse_double(cell(5), line_no);
    const std::string valid = cell(6);
    if (valid != "0" && valid != "1")
      throw Error(ErrorKind::InvalidArgument,
                  "replicates.csv line " + std::to_string(line_no) + ": valid must be 0 or 1");
    row.valid = valid == "1";
    table.rows.push_back(row);
  }
  return table;
}

std::string render_report_text(const StudySummary& summary, const ReplicateTable& table) {
  std::ostringstream os;
  os << "Simulation report\n";
  os << "engine " << summary.engine_version << ", seed " << summary.seed << ", profile "
     << summary.profile << ", family " << to_string(summary.family) << '\n';
  os << "replicates " << summary.replicates << ", bootstrap " << summary.bootstrap
     << ", true delta_AB " << num3(summary.truth) << "\n\n";

  os << "Performance, MCSE in parentheses\n";
  os << pad("method", 10) << pad("bias", 18) << pad("MSE", 18) << pad("coverage", 18) << "valid\n";
  for (const auto& s : summary.methods) {
    os << pad(std::string(to_string(s.method)), 10) << pad(with_mcse(s.bias, s.bias_mcse), 18)
       << pad(with_mcse(s.mse, s.mse_mcse), 18) << pad(with_mcse(s.coverage, s.coverage_mcse), 18)
       << s.n_valid << '/' << summary.replicates << '\n';
  }

  os << "\nEstimate spread over valid replicates\n";
  os << pad("method", 10) << pad("mean", 10) << pad("emp sd", 10) << pad("mean se", 10)
     << pad("min", 10) << "max\n";
  for (Method m : kAllMethods) {
    double sum = 0.0, se_sum = 0.0, lo = kNaN, hi = kNaN;
    std::size_t n = 0;
    for (const auto& r : table.rows) {
      if (r.method != m || !r.valid || !std::isfinite(r.delta_hat)) continue;
      sum += r.delta_hat;
      se_sum += r.se;
      lo = n == 0 ? r.delta_hat : std::min(lo, r.delta_hat);
      hi = n == 0 ? r.delta_hat : std::max(hi, r.delta_hat);
      ++n;
    }
    const double mean = n ? sum / static_cast<double>(n) : kNaN;
    double ss = 0.0;
    for (const auto& r : table.rows)
      if (r.method == m && r.valid && std::isfinite(r.delta_hat))
        ss += (r.delta_hat - mean) * (r.delta_hat - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : kNaN;
    os << pad(std::string(to_string(m)), 10) << pad(num3(mean), 10) << pad(num3(sd), 10)
       << pad(num3(n ? se_sum / static_cast<double>(n) : kNaN), 10) << pad(num3(lo), 10) << num3(hi)
       << '\n';
  }
  return os.str();
}

std::string render_report_svg(const StudySummary& summary, const ReplicateTable& table) {
  constexpr int kWidth = 760, kPanel = 130, kLeft = 90, kRight = 30, kTop = 50, kBins = 30;
  constexpr int kAxis = 50;
  const int height = kTop + kPanel * static_cast<int>(std::size(kAllMethods)) + kAxis;
  const double plot_w = kWidth - kLeft - kRight;

  double lo = summary.truth, hi = summary.truth;
  std::array<std::vector<double>, 3> values;
  for (Method m : kAllMethods) {
    auto& v = values[static_cast<std::size_t>(m)];
    v = valid_estimates(table, m);
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) lo = hi = 0.0;
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double padding = 0.05 * (hi - lo);
  lo -= padding;
  hi += padding;
  auto x_of = [&](double v) { return kLeft + (v - lo) / (hi - lo) * plot_w; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << kWidth << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"14\">Point estimates of delta_AB ("
     << to_string(summary.family) << ", seed " << summary.seed << ", " << summary.profile << ")</text>\n";

  static constexpr const char* kColours[] = {"#4c72b0", "#dd8452", "#55a868"};
  for (Method m : kAllMethods) {
    const auto mi = static_cast<std::size_t>(m);
    const auto& v = values[mi];
    std::array<int, kBins> counts{};
    for (double x : v) {
      auto b = static_cast<int>((x - lo) / (hi - lo) * kBins);
      counts[static_cast<std::size_t>(std::clamp(b, 0, kBins - 1))]++;
    }
    const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));
    const double base = kTop + kPanel * static_cast<double>(mi + 1) - 10.0;
    const double bar_h = kPanel - 30.0;
    os << "<text x=\"10\" y=\"" << fixed(base - bar_h / 2, 2) << "\">" << to_string(m) << "</text>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << fixed(base, 2) << "\" x2=\"" << kWidth - kRight
       << "\" y2=\"" << fixed(base, 2) << "\" stroke=\"#999\"/>\n";
    const double bin_w = plot_w / kBins;
    for (int b = 0; b < kBins; ++b) {
      if (counts[static_cast<std::size_t>(b)] == 0) continue;
      const double h = bar_h * counts[static_cast<std::size_t>(b)] / peak;
      os << "<rect x=\"" << fixed(kLeft + b * bin_w, 2) << "\" y=\"" << fixed(base - h, 2)
         << "\" width=\"" << fixed(bin_w - 1.0, 2) << "\" height=\"" << fixed(h, 2) << "\" fill=\""
         << kColours[mi] << "\"/>\n";
    }
  }

  const double axis_y = kTop + kPanel * static_cast<double>(std::size(kAllMethods)) + 5.0;
  os << "<line x1=\"" << kLeft << "\" y1=\"" << fixed(axis_y, 2) << "\" x2=\"" << kWidth - kRight
     << "\" y2=\"" << fixed(axis_y, 2) << "\" stroke=\"black\"/>\n";
  const double step = nice_step(hi - lo, 6);
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12; t += step) {
    const double x = x_of(t);
    const double shown = std::fabs(t) < step * 1e-9 ? 0.0 : t;
    os << "<line x1=\"" << fixed(x, 2) << "\" y1=\"" << fixed(axis_y, 2) << "\" x2=\"" << fixed(x, 2)
       << "\" y2=\"" << fixed(axis_y + 5, 2) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fixed(x, 2) << "\" y=\"" << fixed(axis_y + 20, 2)
       << "\" text-anchor=\"middle\">" << fixed(shown, step < 0.1 ? 2 : 1) << "</text>\n";
  }
  const double tx = x_of(summary.truth);
  os << "<line x1=\"" << fixed(tx, 2) << "\" y1=\"" << kTop << "\" x2=\"" << fixed(tx, 2) << "\" y2=\""
     << fixed(axis_y, 2) << "\" stroke=\"#c44e52\" stroke-dasharray=\"5,4\"/>\n";
  os << "<text x=\"" << fixed(tx + 4, 2) << "\" y=\"" << kTop + 10 << "\" fill=\"#c44e52\">truth</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace margeff
