#ifndef COPYOPT_METRICS_AB_HPP
#define COPYOPT_METRICS_AB_HPP

// Funnel metrics (CTR, add-to-cart rate, CVR), seeded traffic splitting and
// two-proportion significance tests for A/B experiments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "copyopt/error.hpp"
#include "copyopt/text_features.hpp"

namespace copyopt {

enum class Arm { Control, TreatmentA, TreatmentB };

inline std::string_view arm_name(Arm a) {
  switch (a) {
    case Arm::Control: return "control";
    case Arm::TreatmentA: return "treatment_a";
    case Arm::TreatmentB: return "treatment_b";
  }
  return "control";
}

inline Arm parse_arm(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '_' || c == '-' || c == ' ') continue;
    key += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  if (key == "control") return Arm::Control;
  if (key == "treatmenta") return Arm::TreatmentA;
  if (key == "treatmentb") return Arm::TreatmentB;
  throw Error(Errc::parse_error, "unknown arm '" + std::string(name) + "'");
}

struct FunnelCounts {
  long long impressions = 0;
  long long clicks = 0;
  long long add_to_carts = 0;
  long long orders = 0;

  FunnelCounts& operator+=(const FunnelCounts& o) {
    impressions += o.impressions;
    clicks += o.clicks;
    add_to_carts += o.add_to_carts;
    orders += o.orders;
    return *this;
  }
  friend FunnelCounts operator+(FunnelCounts a, const FunnelCounts& b) { return a += b; }
  friend bool operator==(const FunnelCounts&, const FunnelCounts&) = default;
};

struct SessionEvent {
  std::string session_id;
  Arm arm = Arm::Control;
  FunnelCounts counts;

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

inline bool funnel_monotone(const FunnelCounts& c) {
  return c.orders >= 0 && c.orders <= c.add_to_carts && c.add_to_carts <= c.clicks &&
         c.clicks <= c.impressions;
}

inline void check_funnel(const SessionEvent& e) {
  if (!funnel_monotone(e.counts)) {
    throw Error(Errc::funnel_violation, "session '" + e.session_id +
                                            "' violates impressions >= clicks >= add_to_carts >= orders >= 0");
  }
}

// CTR = clicks / impressions x 100.
inline double ctr(const FunnelCounts& c) {
  if (c.impressions <= 0) throw Error(Errc::zero_denominator, "CTR needs impressions > 0");
  return 100.0 * static_cast<double>(c.clicks) / static_cast<double>(c.impressions);
}

// Share of clicks that lead to an add-to-cart, x 100.
inline double add_to_cart_rate(const FunnelCounts& c) {
  if (c.clicks <= 0) throw Error(Errc::zero_denominator, "add-to-cart rate needs clicks > 0");
  return 100.0 * static_cast<double>(c.add_to_carts) / static_cast<double>(c.clicks);
}

// Orders per impression, x 100.
inline double cvr(const FunnelCounts& c) {
  if (c.impressions <= 0) throw Error(Errc::zero_denominator, "CVR needs impressions > 0");
  return 100.0 * static_cast<double>(c.orders) / static_cast<double>(c.impressions);
}

struct ArmWeight {
  Arm arm;
  double weight;
};

// Stateless bucketing: u = FNV-1a-64(session_id ++ seed as 8 little-endian
// bytes), top 53 bits scaled to [0, 1), mapped onto cumulative weights.
inline Arm assign_arm(std::string_view session_id, std::uint64_t seed, const std::vector<ArmWeight>& arms) {
  if (arms.empty()) throw Error(Errc::out_of_range, "no arms configured");
  double total = 0.0;
  for (const auto& a : arms) {
    if (!(a.weight > 0.0)) throw Error(Errc::out_of_range, "arm weights must be > 0");
    total += a.weight;
  }
  std::uint64_t h = fnv1a64(session_id);
  for (int i = 0; i < 8; ++i) {
    h ^= (seed >> (8 * i)) & 0xFFu;
    h *= kFnvPrime;
  }
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  double cumulative = 0.0;
  for (const auto& a : arms) {
    cumulative += a.weight / total;
    if (u < cumulative) return a.arm;
  }
  return arms.back().arm;
}

// Upper tail of the standard normal.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Upper tail of chi-square with one degree of freedom.
inline double chi2_1_sf(double x) { return x <= 0.0 ? 1.0 : std::erfc(std::sqrt(x / 2.0)); }

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Pooled two-proportion z-test, two-sided. Degenerate pooled rate (0 or 1)
// yields z = 0, p = 1.
inline TestResult two_proportion_z(long long s1, long long n1, long long s2, long long n2) {
  if (n1 <= 0 || n2 <= 0 || s1 < 0 || s2 < 0 || s1 > n1 || s2 > n2) {
    throw Error(Errc::invalid_counts, "need n > 0 and 0 <= s <= n");
  }
  const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2);
  const double pooled = static_cast<double>(s1 + s2) / (dn1 + dn2);
  if (pooled <= 0.0 || pooled >= 1.0) return {0.0, 1.0};
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / dn1 + 1.0 / dn2));
  const double z = (static_cast<double>(s1) / dn1 - static_cast<double>(s2) / dn2) / se;
  return {z, std::erfc(std::abs(z) / std::sqrt(2.0))};
}

// Pearson chi-square on [[s1, f1], [s2, f2]]. No continuity correction
// unless yates is set. Any zero marginal yields chi2 = 0, p = 1.
inline TestResult chi_square_2x2(long long s1, long long f1, long long s2, long long f2, bool yates = false) {
  if (s1 < 0 || f1 < 0 || s2 < 0 || f2 < 0 || s1 + f1 <= 0 || s2 + f2 <= 0) {
    throw Error(Errc::invalid_counts, "cells must be >= 0 with positive row totals");
  }
  const double a = static_cast<double>(s1), b = static_cast<double>(f1);
  const double c = static_cast<double>(s2), d = static_cast<double>(f2);
  const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d, n = r1 + r2;
  if (c1 == 0.0 || c2 == 0.0) return {0.0, 1.0};
  double diff = std::abs(a * d - b * c);
  if (yates) diff = std::max(0.0, diff - n / 2.0);
  const double chi2 = n * diff * diff / (r1 * r2 * c1 * c2);
  return {chi2, chi2_1_sf(chi2)};
}

enum class Metric { Ctr, AtcRate, Cvr };

inline std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::Ctr: return "ctr";
    case Metric::AtcRate: return "atc_rate";
    case Metric::Cvr: return "cvr";
  }
  return "ctr";
}

// (successes, trials) behind each metric.
inline std::pair<long long, long long> metric_fraction(const FunnelCounts& c, Metric m) {
  switch (m) {
    case Metric::Ctr: return {c.clicks, c.impressions};
    case Metric::AtcRate: return {c.add_to_carts, c.clicks};
    case Metric::Cvr: return {c.orders, c.impressions};
  }
  return {0, 0};
}

struct ArmSummary {
  Arm arm = Arm::Control;
  FunnelCounts counts;
  std::optional<double> ctr;
  std::optional<double> atc_rate;
  std::optional<double> cvr;
};

struct Comparison {
  Arm treatment = Arm::TreatmentA;
  Arm control = Arm::Control;
  Metric metric = Metric::Ctr;
  // Relative lift (treatment / control - 1); empty when control rate is 0.
  std::optional<double> lift;
  double z = 0.0;
  double p_z = 1.0;
  double chi2 = 0.0;
  double p_chi2 = 1.0;
  bool significant = false;
  // Set when the metric's denominator is zero in either arm.
  std::optional<std::string> error;
};

struct AbReport {
  double alpha = 0.05;
  std::vector<ArmSummary> arms;
  std::vector<Comparison> comparisons;
};

inline std::map<Arm, FunnelCounts> aggregate(const std::vector<SessionEvent>& events) {
  std::map<Arm, FunnelCounts> totals;
  for (const auto& e : events) {
    check_funnel(e);
    totals[e.arm] += e.counts;
  }
  return totals;
}

inline AbReport evaluate_experiment(const std::vector<SessionEvent>& events, double alpha = 0.05) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::out_of_range, "alpha must be in (0,1)");
  const auto totals = aggregate(events);
  if (!totals.contains(Arm::Control)) throw Error(Errc::missing_control, "no control sessions");
  for (const auto& [arm, counts] : totals) {
    if (counts.impressions <= 0) {
      throw Error(Errc::zero_denominator, "arm " + std::string(arm_name(arm)) + " has no impressions");
    }
  }

  AbReport report;
  report.alpha = alpha;
  for (const auto& [arm, counts] : totals) {
    ArmSummary s{arm, counts, {}, {}, {}};
    s.ctr = ctr(counts);
    if (counts.clicks > 0) s.atc_rate = add_to_cart_rate(counts);
    s.cvr = cvr(counts);
    report.arms.push_back(s);
  }

  const FunnelCounts& control = totals.at(Arm::Control);
  for (const auto& [arm, counts] : totals) {
    if (arm == Arm::Control) continue;
    for (Metric m : {Metric::Ctr, Metric::AtcRate, Metric::Cvr}) {
      Comparison cmp;
      cmp.treatment = arm;
      cmp.metric = m;
      const auto [st, nt] = metric_fraction(counts, m);
      const auto [sc, nc] = metric_fraction(control, m);
      if (nt <= 0 || nc <= 0) {
        cmp.error = std::string(errc_name(Errc::zero_denominator));
        report.comparisons.push_back(cmp);
        continue;
      }
      const double rt = static_cast<double>(st) / static_cast<double>(nt);
      const double rc = static_cast<double>(sc) / static_cast<double>(nc);
      if (rc > 0.0) cmp.lift = rt / rc - 1.0;
      const auto z = two_proportion_z(st, nt, sc, nc);
      const auto chi = chi_square_2x2(st, nt - st, sc, nc - sc);
      cmp.z = z.statistic;
      cmp.p_z = z.p_value;
      cmp.chi2 = chi.statistic;
      cmp.p_chi2 = chi.p_value;
      cmp.significant = cmp.p_z < alpha;
      report.comparisons.push_back(cmp);
    }
  }
  return report;
}

}  // namespace copyopt

#endif  // COPYOPT_METRICS_AB_HPP
