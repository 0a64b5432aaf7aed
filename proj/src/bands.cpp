#include "margeff/bands.hpp"

#include <cmath>
#include <cstdio>

namespace margeff {
namespace {

const PerformanceSummary& find(const std::vector<PerformanceSummary>& s, Method m) {
  for (const auto& x : s)
    if (x.method == m) return x;
  static const PerformanceSummary missing{};
  return missing;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

BandCheck in_range(std::string name, double value, double lo, double hi) {
  return {std::move(name), value >= lo && value <= hi,
          fmt("%.4f in [%.4f, %.4f]", value, lo, hi)};
}

void add_validity(std::vector<BandCheck>& out, const std::vector<PerformanceSummary>& s,
                  std::size_t replicates) {
  for (Method m : kAllMethods) {
    const double n_valid = static_cast<double>(find(s, m).n_valid);
    out.push_back({std::string(to_string(m)) + " n_valid",
                   n_valid >= 0.99 * static_cast<double>(replicates),
                   fmt("%.0f of %.0f replicates valid (need 99%%)", n_valid,
                       static_cast<double>(replicates))});
  }
}

struct Published {
  Method method;
  double bias, bias_round;
  double mse, mse_round;
  double coverage, coverage_round;
};

}  // namespace

std::vector<BandCheck> check_desk_bands(Family family, const std::vector<PerformanceSummary>& s,
                                        std::size_t replicates) {
  std::vector<BandCheck> out;
  add_validity(out, s, replicates);
  const auto& bucher = find(s, Method::bucher);
  const auto& maic = find(s, Method::maic);
  const auto& gcomp = find(s, Method::gcomp);

  if (family == Family::logistic) {
    out.push_back(in_range("bucher bias", bucher.bias, -0.211 - 0.03, -0.211 + 0.03));
    out.push_back(in_range("bucher coverage", bucher.coverage, 0.0, 0.72));
    out.push_back(in_range("bucher mse", bucher.mse, 0.062 - 0.015, 0.062 + 0.015));
    out.push_back(in_range("gcomp |bias|", std::fabs(gcomp.bias), 0.0, 0.02));
    out.push_back(in_range("gcomp coverage", gcomp.coverage, 0.89, 0.99));
    out.push_back(in_range("gcomp mse", gcomp.mse, 0.018 - 0.01, 0.018 + 0.01));
    out.push_back(in_range("maic |bias|", std::fabs(maic.bias), 0.0, 0.06));
    out.push_back(in_range("maic coverage", maic.coverage, 0.87, 0.99));
    out.push_back(in_range("maic mse", maic.mse, 0.08, 0.22));
  } else {
    out.push_back(in_range("bucher |bias|", std::fabs(bucher.bias), 0.0, 0.01));
    out.push_back(in_range("bucher coverage", bucher.coverage, 0.91, 0.99));
    out.push_back({"gcomp mse <= bucher mse <= 0.006",
                   gcomp.mse <= bucher.mse && bucher.mse <= 0.006,
                   fmt("gcomp %.5f, bucher %.5f", gcomp.mse, bucher.mse)});
    out.push_back(in_range("maic mse", maic.mse, 0.12, INFINITY));
    out.push_back(in_range("maic coverage", maic.coverage, 0.0, 0.93));
  }
  return out;
}

std::vector<BandCheck> check_full_bands(Family family, const std::vector<PerformanceSummary>& s,
                                        std::size_t replicates) {
  static const Published logistic[] = {
      {Method::bucher, -0.211, 5e-4, 0.062, 5e-4, 0.631, 5e-4},
      {Method::maic, 0.034, 5e-4, 0.137, 5e-4, 0.938, 5e-4},
      {Method::gcomp, -0.006, 5e-4, 0.018, 5e-4, 0.944, 5e-4},
  };
  static const Published linear[] = {
      {Method::bucher, 0.001, 5e-4, 0.003, 5e-4, 0.954, 5e-4},
      {Method::maic, 0.01, 5e-3, 0.227, 5e-4, 0.889, 5e-4},
      {Method::gcomp, 0.002, 5e-4, 0.002, 5e-4, 0.949, 5e-4},
  };
  std::vector<BandCheck> out;
  add_validity(out, s, replicates);
  for (const auto& p : family == Family::logistic ? logistic : linear) {
    const auto& got = find(s, p.method);
    const std::string name(to_string(p.method));
    auto band = [&](const char* what, double value, double published, double rounding, double mcse) {
      const double tol = 3.0 * (rounding + mcse);
      out.push_back({name + " " + what, std::fabs(value - published) <= tol,
                     fmt("%.4f vs published %.4f (tolerance %.4f)", value, published, tol)});
    };
    band("bias", got.bias, p.bias, p.bias_round, got.bias_mcse);
    band("mse", got.mse, p.mse, p.mse_round, got.mse_mcse);
    band("coverage", got.coverage, p.coverage, p.coverage_round, got.coverage_mcse);
  }
  return out;
}

bool all_pass(const std::vector<BandCheck>& checks) noexcept {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

}  // namespace margeff
