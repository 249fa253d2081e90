#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "copyopt/io.hpp"
#include "copyopt/metrics_ab.hpp"
#include "mpfr_oracle.hpp"

using namespace copyopt;

namespace {

SessionEvent event(std::string id, Arm arm, long long imp, long long clk, long long atc, long long ord) {
  return {std::move(id), arm, {imp, clk, atc, ord}};
}

}  // namespace

TEST(Rates, Definitions) {
  const FunnelCounts c{200, 20, 8, 3};
  EXPECT_DOUBLE_EQ(ctr(c), 10.0);
  EXPECT_DOUBLE_EQ(add_to_cart_rate(c), 40.0);
  EXPECT_DOUBLE_EQ(cvr(c), 1.5);
  EXPECT_THROW(ctr(FunnelCounts{}), Error);
  EXPECT_THROW(cvr(FunnelCounts{}), Error);
  EXPECT_THROW(add_to_cart_rate(FunnelCounts{5, 0, 0, 0}), Error);
}

TEST(Funnel, Monotonicity) {
  EXPECT_TRUE(funnel_monotone({3, 2, 1, 1}));
  EXPECT_FALSE(funnel_monotone({3, 2, 1, 2}));
  EXPECT_FALSE(funnel_monotone({1, 2, 0, 0}));
  EXPECT_FALSE(funnel_monotone({1, 0, 0, -1}));
  EXPECT_THROW(check_funnel(event("x", Arm::Control, 1, 1, 2, 0)), Error);
}

TEST(ZTest, WorkedExample) {
  const auto r = two_proportion_z(119, 1000, 90, 1000);
  EXPECT_NEAR(r.statistic, 2.1197861961908386, 1e-12);
  EXPECT_NEAR(r.p_value, 0.034024079930617485, 1e-12);
  const auto chi = chi_square_2x2(119, 881, 90, 910);
  EXPECT_NEAR(chi.statistic, r.statistic * r.statistic, 1e-9);
  EXPECT_NEAR(chi.p_value, r.p_value, 1e-12);
}

TEST(ZTest, EqualProportionsGivePOne) {
  EXPECT_EQ(two_proportion_z(50, 500, 100, 1000).p_value, 1.0);
  EXPECT_EQ(two_proportion_z(50, 500, 100, 1000).statistic, 0.0);
  EXPECT_EQ(two_proportion_z(0, 10, 0, 20).p_value, 1.0);
  EXPECT_EQ(two_proportion_z(10, 10, 20, 20).p_value, 1.0);
  EXPECT_EQ(chi_square_2x2(50, 450, 100, 900).p_value, 1.0);
}

TEST(ZTest, InvalidCounts) {
  EXPECT_THROW(two_proportion_z(1, 0, 1, 1), Error);
  EXPECT_THROW(two_proportion_z(3, 2, 1, 1), Error);
  EXPECT_THROW(two_proportion_z(-1, 2, 1, 1), Error);
  EXPECT_THROW(chi_square_2x2(0, 0, 1, 1), Error);
  EXPECT_THROW(chi_square_2x2(-1, 2, 1, 1), Error);
}

TEST(ZTest, MatchesMpfrOracle) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 1000; ++trial) {
    const long long n1 = 1 + static_cast<long long>(rng() % 200000);
    const long long n2 = 1 + static_cast<long long>(rng() % 200000);
    const double base = static_cast<double>(rng() % 1000) / 1000.0;
    const long long s1 = std::min<long long>(n1, static_cast<long long>(base * n1 + rng() % 50));
    const long long s2 = std::min<long long>(n2, static_cast<long long>(base * n2));
    const auto got = two_proportion_z(s1, n1, s2, n2);
    const auto want = oracle::two_proportion_z(s1, n1, s2, n2);
    ASSERT_NEAR(got.p_value, want.p, 1e-9) << s1 << "/" << n1 << " vs " << s2 << "/" << n2;
    ASSERT_NEAR(got.statistic, want.z, 1e-9 * std::max(1.0, std::abs(want.z)));
    const auto chi = chi_square_2x2(s1, n1 - s1, s2, n2 - s2);
    ASSERT_NEAR(chi.statistic, got.statistic * got.statistic, 1e-9 * std::max(1.0, chi.statistic));
    ASSERT_NEAR(chi.statistic, oracle::chi_square_2x2(s1, n1 - s1, s2, n2 - s2),
                1e-9 * std::max(1.0, chi.statistic));
  }
}

TEST(ChiSquare, YatesCorrectionShrinksStatistic) {
  const auto plain = chi_square_2x2(30, 70, 45, 55);
  const auto yates = chi_square_2x2(30, 70, 45, 55, true);
  EXPECT_LT(yates.statistic, plain.statistic);
  EXPECT_GT(yates.p_value, plain.p_value);
  // |ad - bc| = |1650 - 3150| = 1500, minus n/2 = 100.
  EXPECT_NEAR(yates.statistic, 200.0 * 1400.0 * 1400.0 / (100.0 * 100.0 * 75.0 * 125.0), 1e-12);
}

TEST(AssignArm, MatchesIndependentHash) {
  const std::vector<ArmWeight> two{{Arm::Control, 1}, {Arm::TreatmentA, 1}};
  EXPECT_EQ(assign_arm("s0000001", 0, two), Arm::Control);
  EXPECT_EQ(assign_arm("s0000001", 7, two), Arm::TreatmentA);
  EXPECT_EQ(assign_arm("user-42", 0, two), Arm::TreatmentA);
  EXPECT_EQ(assign_arm("abc", 7, two), Arm::Control);
  const std::vector<ArmWeight> three{{Arm::Control, 1}, {Arm::TreatmentA, 1}, {Arm::TreatmentB, 1}};
  EXPECT_EQ(assign_arm("user-42", 0, three), Arm::TreatmentB);
  EXPECT_EQ(assign_arm("abc", 0, three), Arm::Control);
  EXPECT_EQ(assign_arm("s0000001", 7, three), Arm::TreatmentA);
}

TEST(AssignArm, BalancedAndStable) {
  const std::vector<ArmWeight> two{{Arm::Control, 1}, {Arm::TreatmentA, 1}};
  long long control = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto id = "s" + std::to_string(i);
    const Arm a = assign_arm(id, 2024, two);
    control += a == Arm::Control;
    ASSERT_EQ(a, assign_arm(id, 2024, two));
  }
  EXPECT_NEAR(static_cast<double>(control) / n, 0.5, 0.01);
  const double e = n / 2.0;
  const double chi2 = std::pow(control - e, 2) / e + std::pow(n - control - e, 2) / e;
  EXPECT_LT(chi2, 10.828);
}

TEST(AssignArm, RespectsWeights) {
  const std::vector<ArmWeight> skew{{Arm::Control, 3}, {Arm::TreatmentA, 1}};
  int control = 0;
  for (int i = 0; i < 40000; ++i) control += assign_arm("u" + std::to_string(i), 5, skew) == Arm::Control;
  EXPECT_NEAR(control / 40000.0, 0.75, 0.01);
  EXPECT_THROW(assign_arm("x", 0, {}), Error);
  EXPECT_THROW(assign_arm("x", 0, {{Arm::Control, 0}}), Error);
}

TEST(Arms, NamesRoundTrip) {
  for (Arm a : {Arm::Control, Arm::TreatmentA, Arm::TreatmentB}) EXPECT_EQ(parse_arm(arm_name(a)), a);
  EXPECT_EQ(parse_arm("Treatment-A"), Arm::TreatmentA);
  EXPECT_THROW(parse_arm("treatment_c"), Error);
}

TEST(EvaluateExperiment, ReportsRatesAndComparisons) {
  const std::vector<SessionEvent> events{event("1", Arm::Control, 1000, 90, 30, 10),
                                         event("2", Arm::TreatmentA, 600, 70, 25, 9),
                                         event("3", Arm::TreatmentA, 400, 49, 20, 8)};
  const auto r = evaluate_experiment(events, 0.05);
  ASSERT_EQ(r.arms.size(), 2u);
  EXPECT_EQ(r.arms[1].counts, (FunnelCounts{1000, 119, 45, 17}));
  EXPECT_DOUBLE_EQ(*r.arms[1].ctr, 11.9);
  ASSERT_EQ(r.comparisons.size(), 3u);
  const auto& c = r.comparisons[0];
  EXPECT_EQ(c.metric, Metric::Ctr);
  EXPECT_NEAR(*c.lift, 119.0 / 90.0 - 1.0, 1e-12);
  EXPECT_NEAR(c.z, 2.1197861961908386, 1e-12);
  EXPECT_TRUE(c.significant);
  EXPECT_EQ(r.comparisons[1].metric, Metric::AtcRate);
  EXPECT_FALSE(r.comparisons[2].significant);
}

TEST(EvaluateExperiment, Errors) {
  EXPECT_THROW(evaluate_experiment({event("1", Arm::TreatmentA, 10, 1, 0, 0)}), Error);
  EXPECT_THROW(evaluate_experiment({event("1", Arm::Control, 0, 0, 0, 0)}), Error);
  EXPECT_THROW(evaluate_experiment({event("1", Arm::Control, 1, 2, 0, 0)}), Error);
  EXPECT_THROW(evaluate_experiment({event("1", Arm::Control, 10, 1, 0, 0)}, 1.0), Error);
}

TEST(EvaluateExperiment, ZeroClicksMarksAtcComparison) {
  const auto r = evaluate_experiment({event("1", Arm::Control, 100, 0, 0, 0), event("2", Arm::TreatmentB, 100, 5, 1, 0)});
  ASSERT_EQ(r.comparisons.size(), 3u);
  EXPECT_FALSE(r.comparisons[0].lift.has_value());
  ASSERT_TRUE(r.comparisons[1].error.has_value());
  EXPECT_EQ(*r.comparisons[1].error, "ZeroDenominator");
  EXPECT_FALSE(r.arms[0].atc_rate.has_value());
}

TEST(EventsCsv, RoundTrip) {
  const std::vector<SessionEvent> events{event("a", Arm::Control, 3, 1, 1, 0), event("b", Arm::TreatmentB, 2, 2, 1, 1)};
  std::istringstream in(write_events_csv(events));
  EXPECT_EQ(read_events_csv(in), events);
}

TEST(EventsCsv, RejectsBadRows) {
  std::istringstream bad_header("id,arm\n");
  EXPECT_THROW(read_events_csv(bad_header), Error);
  std::istringstream bad_funnel(std::string(kEventHeader) + "\na,control,1,2,0,0\n");
  try {
    read_events_csv(bad_funnel);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::funnel_violation);
  }
  std::istringstream bad_arm(std::string(kEventHeader) + "\na,holdout,1,0,0,0\n");
  EXPECT_THROW(read_events_csv(bad_arm), Error);
}
