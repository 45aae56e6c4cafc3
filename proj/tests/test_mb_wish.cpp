#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

#include "mbwish/mb_wish.hpp"
#include "mbwish/report.hpp"
#include "test_support.hpp"

using namespace mbwish;
using namespace mbwish::testing;
using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

namespace {

EstimatorConfig config(std::uint32_t q, std::size_t n, std::uint64_t seed = 0, std::uint32_t r = 0) {
    EstimatorConfig c;
    c.q = q;
    c.n = n;
    c.r = r;
    c.seed = seed;
    return c;
}

// Smallest j with q^j >= q^n r^j, by exact integers.
std::size_t ref_n_prime(std::uint32_t q, std::uint32_t r, std::size_t n) {
    cpp_int qn = 1;
    for (std::size_t i = 0; i < n; ++i) qn *= q;
    cpp_int qj = 1, rj = 1;
    std::size_t j = 0;
    while (qj < qn * rj) qj *= q, rj *= r, ++j;
    return j;
}

// Oracle that answers from an inner oracle but can misbehave on a chosen call.
class FaultyOracle final : public MaxOracle {
public:
    enum class Mode { Throw, Timeout };
    FaultyOracle(Mode mode, std::size_t bad_call) : mode_(mode), bad_(bad_call) {}
    OracleAnswer solve(const OracleQuery& q) const override {
        OracleAnswer a = inner_.solve(q);
        if (calls_++ == bad_) {
            if (mode_ == Mode::Throw) throw std::runtime_error("solver crashed");
            a.status = OracleStatus::TimedOutLowerBound;
        }
        return a;
    }

private:
    Mode mode_;
    std::size_t bad_;
    ExhaustiveOracle inner_;
    mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace

TEST(Median, LowerMedianConvention) {
    EXPECT_EQ(median({3}), 3);
    EXPECT_EQ(median({1, 2, 9}), 2);
    EXPECT_EQ(median({1, 2, 3, 4}), 2);
    EXPECT_EQ(median({4, 1, 3, 2}), 2);
    EXPECT_THROW(median({}), std::invalid_argument);
    const std::vector<double> keys{5, 1, 4, 1, 3};
    EXPECT_EQ(keys[median_position(keys)], 3);
    const std::vector<double> ties{2, 2, 2, 2};
    EXPECT_EQ(median_position(ties), 1u);  // stable: second of four equal keys
}

TEST(Parameters, GammaEllNPrime) {
    EXPECT_EQ(compute_n_prime(3, 1, 2), 2u);
    EXPECT_EQ(compute_n_prime(5, 2, 2), 4u);
    EXPECT_EQ(compute_n_prime(5, 2, 6), 11u);
    for (std::uint32_t q : {3u, 4u, 5u, 7u, 8u, 9u, 11u, 13u})
        for (std::uint32_t r = 1; 2 * r < q; ++r)
            for (std::size_t n = 1; n <= 12; ++n) {
                EXPECT_EQ(compute_n_prime(q, r, n), ref_n_prime(q, r, n)) << q << " " << r << " " << n;
                EXPECT_GE(compute_n_prime(q, r, n), n);
            }
    EXPECT_NEAR(compute_gamma(5, 2), 5.0 / 6.0 * 0.01, 1e-15);
    EXPECT_EQ(compute_ell(5, 2, 6, 0.1), 575u);
    EXPECT_EQ(compute_ell(5, 2, 8, 0.1), 610u);
    EXPECT_EQ(compute_ell(5, 2, 4, 0.1), static_cast<std::size_t>(std::ceil(std::log(80.0) / (5.0 / 6.0 * 0.01))));
}

TEST(Parameters, ConfigValidation) {
    EXPECT_NO_THROW(config(3, 2).validate());
    EXPECT_EQ(config(5, 2).bin_rank(), 2u);
    EXPECT_EQ(config(11, 2).bin_rank(), 5u);
    EXPECT_THROW(config(2, 2).validate(), std::invalid_argument);  // no r with 2r < 2
    EXPECT_THROW(config(6, 2).validate(), std::invalid_argument);
    EXPECT_THROW(config(5, 2, 0, 3).validate(), std::invalid_argument);
    auto c = config(5, 2);
    c.delta = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = config(5, 2);
    c.construction = Construction::SparseToeplitz;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Combine, MatchesDirectSumAndLogPath) {
    const std::vector<double> M{3, 2, 1, 0.5};
    std::vector<double> logM;
    for (double m : M) logM.push_back(std::log(m));
    const Combined c = combine(M, logM, 2.5);
    const double want = 3 + 1.5 * (2 + 1 * 2.5 + 0.5 * 6.25);
    EXPECT_DOUBLE_EQ(c.value, want);
    EXPECT_NEAR(c.log_value, std::log(want), 1e-14);
    // Underflowing weights fall back to exp(log).
    const std::vector<double> tinyM{0, 0, 0};
    const std::vector<double> tinyLog{-800, -801, -802};
    const Combined t = combine(tinyM, tinyLog, 3.0);
    EXPECT_NEAR(t.log_value, std::log(std::exp(-800.0 + 800) + 2 * std::exp(-801.0 + 800) + 6 * std::exp(-802.0 + 800)) - 800,
                1e-12);
    EXPECT_EQ(t.value, std::exp(t.log_value));
    const std::vector<double> zeros{0, 0};
    const double ninf = -std::numeric_limits<double>::infinity();
    const Combined z = combine(zeros, {ninf, ninf}, 3.0);
    EXPECT_EQ(z.value, 0.0);
    EXPECT_EQ(z.log_value, ninf);
}

TEST(MbWish, ConstantWeightF3Squared) {
    auto w = std::make_shared<ConstantWeight>(3, 2, 1.0);
    const EstimateReport r = run_mb_wish(config(3, 2, 4), w, ExhaustiveOracle());
    for (double m : r.M) EXPECT_EQ(m, 1.0);
    EXPECT_EQ(r.estimate, 9.0);
    EXPECT_EQ(r.oracle_calls, r.config.n_prime() * r.config.ell() + 1);
}

TEST(MbWish, ConstantWeightF5Squared) {
    // All five medians equal to one gives the closed form 39.0625.
    EXPECT_DOUBLE_EQ(combine({1, 1, 1, 1, 1}, {0, 0, 0, 0, 0}, 2.5).value, 39.0625);
    auto w = std::make_shared<ConstantWeight>(5, 2, 1.0);
    const double ninf = -std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const EstimateReport r = run_mb_wish(config(5, 2, seed), w, ExhaustiveOracle());
        ASSERT_EQ(r.M.size(), 5u);
        EXPECT_EQ(r.config.n_prime(), 4u);
        // Levels 1..3 accept 10, 4 and 1.6 of 25 points on average: nonempty in most draws.
        for (std::size_t i = 0; i <= 3; ++i) EXPECT_EQ(r.M[i], 1.0);
        // Level 4 accepts 0.64 points on average, so its median bin is usually empty.
        const double tail = r.M[4];
        EXPECT_TRUE(tail == 0.0 || tail == 1.0);
        EXPECT_DOUBLE_EQ(r.estimate, tail == 1.0 ? 39.0625 : 15.625);
        EXPECT_EQ(r.log_M[4], tail == 1.0 ? 0.0 : ninf);
        EXPECT_LE(r.estimate / 25.0, 6.25);
        EXPECT_GE(r.estimate / 25.0, 1 / 6.25);
    }
}

TEST(MbWish, ReportStructure) {
    auto w = random_potts(4, 5, 1.0, 3);
    auto c = config(5, 4, 9);
    c.ell_override = 7;
    const EstimateReport r = run_mb_wish(c, w, ExhaustiveOracle());
    EXPECT_EQ(r.variant, "constrained");
    EXPECT_EQ(r.levels.size(), r.config.n_prime());
    EXPECT_EQ(r.M.size(), r.levels.size() + 1);
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
        EXPECT_EQ(r.levels[i].i, i + 1);
        EXPECT_EQ(r.levels[i].values.size(), 7u);
        EXPECT_EQ(r.M[i + 1], median(r.levels[i].values));
    }
    EXPECT_EQ(r.oracle_calls, r.levels.size() * 7 + 1);
    EXPECT_EQ(plan_mb_wish(c, w).size(), r.oracle_calls);
    // Level 0 is the unconstrained maximum.
    EXPECT_EQ(r.M[0], ExhaustiveOracle().solve(OracleQuery::unconstrained(w)).value);
    EXPECT_FALSE(r.lower_bound_only);
    // The combination is reproducible from M alone.
    const Combined comb = combine(r.M, r.log_M, c.t());
    EXPECT_EQ(comb.value, r.estimate);
}

TEST(MbWish, DeterministicAcrossWorkers) {
    auto w = random_potts(4, 5, 2.0, 4);
    auto c = config(5, 4, 17);
    c.workers = 1;
    const auto a = canonical_report(report_to_json(run_mb_wish(c, w, ExhaustiveOracle())));
    c.workers = 4;
    const auto b = canonical_report(report_to_json(run_mb_wish(c, w, ExhaustiveOracle())));
    EXPECT_EQ(a, b);
    c.seed = 18;
    EXPECT_NE(a, canonical_report(report_to_json(run_mb_wish(c, w, ExhaustiveOracle()))));
}

TEST(MbWish, LevelHashesAndFallback) {
    auto f = Field::make(5);
    auto c = config(5, 3, 2);
    c.construction = Construction::Toeplitz;
    EXPECT_EQ(level_construction(c, 3), Construction::Toeplitz);
    EXPECT_EQ(level_construction(c, 4), Construction::Dense);
    const MultiBinHash h = level_hash(c, f, 2, 5);
    EXPECT_EQ(h.m(), 2u);
    EXPECT_EQ(h.r, 2u);
    EXPECT_EQ(h, level_hash(c, f, 2, 5));
    EXPECT_FALSE(h == level_hash(c, f, 2, 6));
    c.construction = Construction::FieldMult;
    EXPECT_EQ(level_hash(c, f, 5, 0).construction, Construction::Dense);
}

TEST(MbWish, TimeoutMarksLowerBoundOnly) {
    auto w = random_potts(3, 5, 1.0, 1);
    auto c = config(5, 3, 1);
    c.ell_override = 3;
    const EstimateReport r = run_mb_wish(c, w, FaultyOracle(FaultyOracle::Mode::Timeout, 4));
    EXPECT_TRUE(r.lower_bound_only);
}

TEST(MbWish, HardFailureCarriesPartialReport) {
    auto w = random_potts(3, 5, 1.0, 1);
    auto c = config(5, 3, 1);
    c.ell_override = 3;
    try {
        run_mb_wish(c, w, FaultyOracle(FaultyOracle::Mode::Throw, 5));
        FAIL() << "expected EstimationAborted";
    } catch (const EstimationAborted& e) {
        EXPECT_EQ(e.partial().M.size(), 1u);  // level 0 finished
    }
}

TEST(MbWish, RefusesOversizedDomain) {
    auto w = std::make_shared<ConstantWeight>(5, 14, 1.0);
    OracleOptions o;
    o.max_evaluations = 1000;
    o.max_table = 0;
    auto c = config(5, 14);
    c.ell_override = 1;
    EXPECT_THROW(run_mb_wish(c, w, ExhaustiveOracle(o)), DomainTooLarge);
}

TEST(Quantiles, ConstantWeightBrackets) {
    ConstantWeight c3(3, 2, 2.0);
    const QuantileBracket b3 = quantile_bracket(quantile_truth(c3), config(3, 2));
    EXPECT_DOUBLE_EQ(b3.lower, 18.0);
    EXPECT_DOUBLE_EQ(b3.upper, 18.0);
    // t^n' = 39.06 exceeds q^n = 25: the tail quantiles beyond rank 25 vanish.
    ConstantWeight c5(5, 2, 1.0);
    const QuantileBracket b5 = quantile_bracket(quantile_truth(c5), config(5, 2));
    EXPECT_DOUBLE_EQ(b5.lower, 6.25);
    EXPECT_DOUBLE_EQ(b5.upper, 39.0625);
    EXPECT_LE(b5.lower, 25.0);
    EXPECT_GE(b5.upper, 25.0);
}

TEST(Quantiles, RanksAreExactFloors) {
    const auto ranks = quantile_ranks(5, 2, 6, ~0ULL);
    const std::vector<std::uint64_t> want{1, 2, 6, 15, 39, 97, 244};
    EXPECT_EQ(ranks, want);
    EXPECT_EQ(quantile_ranks(3, 1, 3, 5).back(), 5u);
}

TEST(Quantiles, NineDistinctValues) {
    std::vector<double> v{9, 1, 8, 2, 7, 3, 6, 4, 5};
    TableWeight w(3, 2, v);
    const QuantileBracket b = quantile_bracket(quantile_truth(w), config(3, 2, 0, 1));
    EXPECT_LE(b.lower, 45.0);
    EXPECT_GE(b.upper, 45.0);
    EXPECT_LE(b.upper / b.lower, 9.0);
}

TEST(Quantiles, SandwichWithExactBetas) {
    // Substituting beta_i for M_i lands inside [L', U'] (rational arithmetic).
    RandomStream rs(77);
    for (std::uint32_t q : {3u, 4u, 5u})
        for (std::size_t n = 1; n <= 3; ++n)
            for (int rep = 0; rep < 5; ++rep) {
                const std::size_t N = static_cast<std::size_t>(std::pow(q, n));
                std::vector<double> v(N);
                for (auto& x : v) x = rs.uniform(50);
                TableWeight w(q, n, v);
                const auto c = config(q, n);
                const auto truth = quantile_truth(w);
                const auto beta = quantile_betas(truth, c);
                const QuantileBracket b = quantile_bracket(truth, c);
                std::vector<double> logb;
                for (double x : beta) logb.push_back(x > 0 ? std::log(x) : -std::numeric_limits<double>::infinity());
                const Combined est = combine(beta, logb, c.t());
                EXPECT_LE(b.lower, est.value * (1 + 1e-12));
                EXPECT_GE(b.upper * (1 + 1e-12), est.value);
            }
}

TEST(Concentration, LevelZeroClampAndConstant) {
    auto w = std::make_shared<ConstantWeight>(5, 3, 1.5);
    auto c = config(5, 3, 1);
    c.ell_override = 5;
    const auto truth = quantile_truth(*w);
    const auto rep = empirical_quantile_concentration(c, w, truth, 0, 10, ExhaustiveOracle());
    EXPECT_EQ(rep.interval_low, truth.at_rank(2));
    EXPECT_EQ(rep.interval_high, truth.at_rank(1));
    const auto rep2 = empirical_quantile_concentration(c, w, truth, 2, 30, ExhaustiveOracle());
    EXPECT_EQ(rep2.frequency, 1.0);
}

TEST(Concentration, MedianLandsInInterval) {
    auto w = random_potts(3, 5, 3.0, 12);
    auto c = config(5, 3, 5);
    const auto truth = quantile_truth(*w);
    const auto rep = empirical_quantile_concentration(c, w, truth, 2, 200, ExhaustiveOracle());
    EXPECT_EQ(rep.ell, c.ell());
    EXPECT_TRUE(rep.passed()) << rep.frequency << " vs " << rep.bound << " - " << rep.slack;
}

TEST(Report, VerifyDetectsTampering) {
    auto w = random_potts(3, 5, 1.0, 2);
    auto c = config(5, 3, 3);
    c.ell_override = 5;
    nlohmann::json j = report_to_json(run_mb_wish(c, w, ExhaustiveOracle()));
    EXPECT_TRUE(verify_report(j).ok);
    nlohmann::json bad = j;
    bad["estimate"] = bad["estimate"].get<double>() * (1 + 1e-15) + 1e-300;
    EXPECT_FALSE(verify_report(bad).ok);
    bad = j;
    bad["oracle_calls"] = 3;
    EXPECT_FALSE(verify_report(bad).ok);
    bad = j;
    bad["M"][2] = 123.0;
    EXPECT_FALSE(verify_report(bad).ok);
    bad = j;
    bad.erase("levels");
    EXPECT_FALSE(verify_report(bad).ok);
    EXPECT_EQ(canonical_report(j), canonical_report(nlohmann::json::parse(j.dump())));
}
