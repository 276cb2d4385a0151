#include "rbc/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace rbc;

namespace {

RunConfig config(ProtocolKind kind, int k, double p, int m) {
    RunConfig c;
    c.kind = kind;
    c.k = k;
    c.n_stations = kind == ProtocolKind::tree ? 3 : 2;
    c.field = FieldSpec(2147483647);
    c.loss = LossModel{p, m};
    return c;
}

}  // namespace

TEST(Formulas, PokExamples) {
    for (int k : {1, 10, 100}) EXPECT_EQ(p_ok_formula(ProtocolKind::fq, 0.0, 1, k), 1.0);
    EXPECT_NEAR(tree_q(3, 0.01), 3.01e-4, 1e-18);
    EXPECT_NEAR(tree_q(4, 0.01), 4e-6 + 1e-8, 1e-20);
    EXPECT_NEAR(p_ok_formula(ProtocolKind::fq, 0.01, 1, 69), std::pow(0.99, 69), 1e-15);
    EXPECT_NEAR(p_ok_formula(ProtocolKind::tree, 0.002, 5, 100), std::pow(1 - 3.01e-4, 100), 1e-15);
    EXPECT_THROW(p_ok_formula(ProtocolKind::fq, 1.5, 1, 1), std::domain_error);
    EXPECT_THROW(p_ok_formula(ProtocolKind::tree, 0.5, 5, 1), std::domain_error);
}

TEST(Formulas, ExactRationalConsistency) {
    const BigRational mp(1, 100);
    EXPECT_EQ(tree_q_exact(3, mp), BigRational(3) * mp * mp + mp * mp * mp);
    EXPECT_EQ(tree_q_exact(3, mp), BigRational(301, 1000000));
    EXPECT_EQ(tree_q_exact(4, mp), BigRational(4, 1000000) + BigRational(1, 100000000));
    const BigRational p(1, 500);
    EXPECT_EQ(p_ok_formula_exact(ProtocolKind::tree, p, 5, 7, 3), [&] {
        BigRational r(1);
        for (int i = 0; i < 7; ++i) r *= BigRational(1) - BigRational(301, 1000000);
        return r;
    }());
    EXPECT_EQ(p_ok_formula_exact(ProtocolKind::fq, BigRational(0), 1, 9), BigRational(1));
}

TEST(Formulas, ChainSurvivalUnderWindowModel) {
    EXPECT_NEAR(fq_survival_exact(0.01, 1, 69), std::pow(0.99, 69), 1e-15);
    // m = 2, k = 3: station 1 needs no death at rounds 1 and 3 (and 2, the window of round 3);
    // station 2 needs none at rounds 1, 2. Distinct draws: 3 + 2 = 5.
    EXPECT_NEAR(fq_survival_exact(0.1, 2, 3), std::pow(0.9, 5), 1e-15);
}

TEST(Formulas, HalfLifeExamples) {
    const HalfLife fq = half_life(ProtocolKind::fq, 0.002, 5);
    const HalfLife tr = half_life(ProtocolKind::tree, 0.002, 5);
    EXPECT_NEAR(fq.rounds, 100.0, 1e-9);
    EXPECT_NEAR(fq.from_formula, 500.0, 1e-9);
    EXPECT_FALSE(fq.note.empty());
    EXPECT_NEAR(tr.rounds, 1.0 / 3.01e-4, 1e-6);
    EXPECT_NEAR(tr.rounds, 3322.0, 1.0);
    EXPECT_NEAR(tr.rounds / fq.rounds, 33.2, 0.05);
    EXPECT_TRUE(std::isinf(half_life(ProtocolKind::tree, 0.0, 5).rounds));
    const HalfLife t4 = half_life(ProtocolKind::tree, 0.002, 5, 4);
    EXPECT_NEAR(t4.approx, 1.0 / (4 * 1e-6), 1e-3);
}

TEST(Formulas, XnRecursion) {
    EXPECT_DOUBLE_EQ(x_n(2), 1.0);
    EXPECT_DOUBLE_EQ(x_n(3), 1.25);
    EXPECT_DOUBLE_EQ(x_n(4), 1.45);
    const double r = x_n(200) / std::sqrt(100.0);
    EXPECT_GE(r, 0.9);
    EXPECT_LE(r, 1.1);
    EXPECT_THROW(x_n(1), std::domain_error);
}

TEST(Formulas, BindingBoundTable) {
    const BindingBound b = binding_bound(1, 2);
    EXPECT_DOUBLE_EQ(b.raw, 2.5);
    EXPECT_DOUBLE_EQ(b.capped, 1.0);
    EXPECT_FALSE(b.conjectured);
    for (int k : {1, 7, 100}) {
        for (std::uint64_t q : {2ULL, 101ULL, 2147483647ULL}) {
            EXPECT_DOUBLE_EQ(binding_bound(k, q).raw, 5.0 * k / std::sqrt(2.0 * static_cast<double>(q)));
        }
    }
    const BindingBound b4 = binding_bound(3, 101, 4);
    EXPECT_TRUE(b4.conjectured);
    EXPECT_DOUBLE_EQ(b4.raw, 2.0 * 3 * 1.45 * std::sqrt(2.0 / 101.0));
    EXPECT_EQ(bound_table({1, 2}, {2, 3}, {3, 4}).size(), 8U);
}

TEST(Formulas, MinimalFieldSize) {
    const double k = 5e9, eps = 1e-6;
    const double l = min_log2_q(k, eps);
    EXPECT_NEAR(l, std::log2(25.0 * k * k / (2 * eps * eps)), 1e-9);
    // Inverting back lands on the target.
    EXPECT_NEAR(5 * k / std::sqrt(2 * std::pow(2.0, l)), eps, 1e-12);
}

TEST(Statistics, ClopperPearsonKnownValues) {
    // n = 10, x = 3 at 95%: [0.06673, 0.65245] (standard tables).
    const Interval ci = clopper_pearson(3, 10);
    EXPECT_NEAR(ci.lo, 0.066739, 1e-5);
    EXPECT_NEAR(ci.hi, 0.652453, 1e-5);
    const Interval all = clopper_pearson(10, 10);
    EXPECT_EQ(all.hi, 1.0);
    EXPECT_NEAR(all.lo, std::pow(0.025, 0.1), 1e-12);
    EXPECT_EQ(clopper_pearson(0, 10).lo, 0.0);
    EXPECT_THROW(clopper_pearson(1, 0), std::domain_error);
}

TEST(Statistics, LogLogFit) {
    const std::vector<double> xs{0.005, 0.01, 0.02};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(4.2 * x * x);
    const SlopeFit f = fit_loglog(xs, ys);
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_NEAR(std::exp(f.intercept), 4.2, 1e-9);
    EXPECT_NEAR(f.stderr_slope, 0.0, 1e-9);
    EXPECT_THROW(fit_loglog({1.0}, {1.0}), std::domain_error);
    EXPECT_THROW(fit_loglog({1.0, 0.0}, {1.0, 1.0}), std::domain_error);
}

TEST(MonteCarlo, LossFreeIsExactlyOne) {
    for (auto kind : {ProtocolKind::fq, ProtocolKind::tree}) {
        const ReliabilityReport r = monte_carlo_reliability(config(kind, 10, 0.0, 1), 200, 1);
        EXPECT_EQ(r.p_ok_mc, 1.0);
        EXPECT_EQ(r.ci.lo, 1.0);
        EXPECT_EQ(r.ci.hi, 1.0);
    }
}

TEST(MonteCarlo, ChainMatchesClosedForm) {
    const ReliabilityReport r = monte_carlo_reliability(config(ProtocolKind::fq, 20, 0.02, 1), 20000, 5);
    const double f = p_ok_formula(ProtocolKind::fq, 0.02, 1, 20);
    EXPECT_NEAR(r.p_ok_mc, f, 4 * std::sqrt(f * (1 - f) / 20000));
    EXPECT_NEAR(r.p_ok_exact_model, f, 1e-15);
}

TEST(MonteCarlo, ChainWithLongOutagesMatchesWindowModel) {
    const ReliabilityReport r = monte_carlo_reliability(config(ProtocolKind::fq, 20, 0.02, 3), 20000, 6);
    const double f = fq_survival_exact(0.02, 3, 20);
    EXPECT_NEAR(r.p_ok_mc, f, 4 * std::sqrt(f * (1 - f) / 20000));
}

TEST(MonteCarlo, IndependentOfJobCount) {
    const RunConfig cfg = config(ProtocolKind::tree, 30, 0.03, 2);
    const ReliabilityReport a = monte_carlo_reliability(cfg, 3000, 7, 1);
    const ReliabilityReport b = monte_carlo_reliability(cfg, 3000, 7, 3);
    EXPECT_EQ(a.successes, b.successes);
    EXPECT_EQ(a.aborts_at, b.aborts_at);
    EXPECT_DOUBLE_EQ(a.comm_bits_mean, b.comm_bits_mean);
}

TEST(MonteCarlo, TreeOutlivesChain) {
    const RunConfig t = config(ProtocolKind::tree, 60, 0.002, 5);
    const RunConfig c = config(ProtocolKind::fq, 60, 0.002, 5);
    const ReliabilityReport rt = monte_carlo_reliability(t, 20000, 8);
    const ReliabilityReport rc = monte_carlo_reliability(c, 20000, 8);
    EXPECT_GT(rt.ci.lo, rc.ci.hi);
    // Paper constant as a lower envelope.
    EXPECT_GE(rt.p_ok_mc, rt.p_ok_formula - 3 * rt.sigma);
}

TEST(Reports, CsvSchemaAndDeterminism) {
    const RunConfig cfg = config(ProtocolKind::tree, 10, 0.01, 2);
    std::ostringstream a, b;
    write_reliability_csv(a, {monte_carlo_reliability(cfg, 500, 3)});
    write_reliability_csv(b, {monte_carlo_reliability(cfg, 500, 3)});
    EXPECT_EQ(a.str(), b.str());
    const std::string header = a.str().substr(0, a.str().find('\n'));
    EXPECT_EQ(header,
              "protocol,p,m,k,n,N,p_ok_formula,p_ok_mc,ci_lo,ci_hi,comm_bits_mean,comm_bits_formula,half_life_formula");
    const auto j = to_json(monte_carlo_reliability(cfg, 100, 3));
    for (const auto& col : reliability_csv_columns()) EXPECT_TRUE(j.contains(col)) << col;
    EXPECT_TRUE(j.contains("q_closed_form"));
    EXPECT_TRUE(j.contains("stationary_dead"));
}

TEST(Reports, CommunicationFormula) {
    const FieldSpec f(2147483647);
    EXPECT_NEAR(comm_cost_formula(ProtocolKind::fq, 10, f, 2), 20 * f.log2q(), 1e-9);
    EXPECT_NEAR(comm_cost_formula(ProtocolKind::tree, 10, f, 1), 10 * 8 * f.log2q(), 1e-9);
    EXPECT_NEAR(comm_cost_formula(ProtocolKind::tree, 10, f, 2), 10 * 16 * f.log2q(), 1e-9);
}
