#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include <boost/multiprecision/cpp_int.hpp>

#include "mbwish/report.hpp"
#include "mbwish/unconstrained.hpp"
#include "test_support.hpp"

using namespace mbwish;
using namespace mbwish::testing;

namespace {

EstimatorConfig config(std::uint32_t q, std::size_t n, std::uint64_t seed = 0, std::uint32_t r = 0) {
    EstimatorConfig c;
    c.q = q;
    c.n = n;
    c.r = r;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Basis, SmallCases) {
    auto f2 = Field::make(2);
    const FieldMatrix one = sample_basis(2, 1, 5);
    EXPECT_EQ(one.at(0, 0).index, 1u);
    auto f3 = Field::make(3);
    for (std::uint64_t s = 0; s < 100; ++s) EXPECT_EQ(rank(*f3, sample_basis(3, 2, s)), 2u);
}

TEST(Basis, UniformOverOrderedBases) {
    std::map<std::vector<std::uint32_t>, int> counts;
    const int seeds = 6000;
    for (int s = 0; s < seeds; ++s) {
        const FieldMatrix B = sample_basis(2, 2, s);
        std::vector<std::uint32_t> key;
        for (auto e : B.data) key.push_back(e.index);
        ++counts[key];
    }
    ASSERT_EQ(counts.size(), 6u);
    const double expected = seeds / 6.0;
    double chi2 = 0;
    for (auto& [k, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 20.52);  // 5 dof, p = 0.001
}

TEST(LexSet, Examples) {
    const LexBound a = lex_set(3, 1, 2, 1);
    EXPECT_EQ(a.K, 1u);
    EXPECT_TRUE(a.empty());
    const LexBound b = lex_set(3, 2, 3, 1);
    EXPECT_EQ(b.K, 1u);
    EXPECT_TRUE(b.empty());
    const LexBound c = lex_set(5, 2, 3, 2);
    EXPECT_EQ(c.K, 2u);
    EXPECT_EQ(c.floor_size, 1u);
    EXPECT_EQ(c.s_m, (FieldVector{{0}, {1}}));
    EXPECT_EQ(c.size, 1u);
    EXPECT_THROW(lex_set(5, 2, 2, 2), std::invalid_argument);
}

TEST(LexSet, CeilingAgainstExactIntegers) {
    using boost::multiprecision::cpp_int;
    for (std::uint32_t q : {3u, 5u, 7u})
        for (std::uint32_t r = 1; 2 * r < q; ++r)
            for (std::size_t n = 1; n <= 4; ++n)
                for (std::size_t m = n + 1; m <= n + 8; ++m) {
                    cpp_int num = 1, den = 1;
                    for (std::size_t i = 0; i < m; ++i) num *= r;
                    for (std::size_t i = 0; i < m - n; ++i) den *= q;
                    const cpp_int K = (num + den - 1) / den;
                    const LexBound lb = lex_set(q, n, m, r);
                    EXPECT_EQ(cpp_int(lb.K), K);
                    EXPECT_EQ(cpp_int(lb.floor_size), num / den);
                    EXPECT_EQ(lb.size, lb.K - 1);
                    std::vector<std::uint32_t> s;
                    for (auto e : lb.s_m) s.push_back(e.index);
                    EXPECT_EQ(config_rank(s, q), lb.K - 1);
                }
}

TEST(Generators, ImageSizes) {
    auto f = Field::make(3);
    const auto c = config(3, 2, 1, 1);
    const GeneratorDomain g1 = level_domain(c, f, 1, 0);
    EXPECT_EQ(g1.regime, Regime::CosetUnion);
    const ImageAudit a1 = image_membership_audit(g1);
    EXPECT_EQ(a1.expected_size, 3u);
    EXPECT_TRUE(a1.exact());
    const ImageAudit a2 = image_membership_audit(level_domain(c, f, 2, 0));
    EXPECT_EQ(a2.expected_size, 1u);
    EXPECT_TRUE(a2.exact());
    const GeneratorDomain g3 = level_domain(c, f, 3, 0);
    EXPECT_EQ(g3.regime, Regime::LexSet);
    EXPECT_EQ(to_string(g3.regime), "lex-set");
}

TEST(Generators, CosetUnionColumnsSpan) {
    auto f = Field::make(5);
    const auto c = config(5, 3, 4);
    for (std::size_t k = 0; k < 10; ++k) {
        const GeneratorDomain g = level_domain(c, f, 2, k);
        EXPECT_EQ(g.A().cols, 1u);
        EXPECT_EQ(g.R().cols, 2u);
        EXPECT_EQ(rank(*f, g.domain->G), 3u);
        EXPECT_TRUE(image_membership_audit(g).exact());
    }
}

TEST(Generators, MembershipFrequencies) {
    const MembershipStatistics s = membership_statistics(5, 2, 1, 2, 2000, 3);
    EXPECT_DOUBLE_EQ(s.target, 0.4);
    EXPECT_TRUE(s.marginals_ok()) << s.max_marginal_deviation << " > " << s.marginal_slack;
    EXPECT_TRUE(s.joints_ok());
}

TEST(Unconstrained, ConstantWeight) {
    auto w = std::make_shared<ConstantWeight>(3, 2, 1.0);
    const EstimateReport r = run_unconstrained_mb_wish(config(3, 2, 2), w, ExhaustiveOracle());
    EXPECT_EQ(r.estimate, 9.0);
    EXPECT_EQ(r.variant, "unconstrained");
}

TEST(Unconstrained, CallAccountingAndRegimes) {
    std::vector<double> v(125);
    RandomStream rs(4);
    for (auto& x : v) x = rs.unit();
    auto w = std::make_shared<TableWeight>(5, 3, v);
    auto c = config(5, 3, 6);
    c.ell_override = 9;
    const EstimateReport r = run_unconstrained_mb_wish(c, w, ExhaustiveOracle());
    EXPECT_EQ(r.oracle_calls, c.n_prime() * 9 + 1);
    for (const auto& L : r.levels) EXPECT_EQ(L.regime, L.i <= 3 ? "coset-union" : "lex-set");
    EXPECT_TRUE(verify_report(report_to_json(r)).ok);
}

TEST(Unconstrained, AgreesWithMaxOverImage) {
    // Each level value is the maximum of w over the enumerated image set.
    auto w = random_potts(3, 5, 2.0, 9);
    auto f = Field::make(5);
    auto c = config(5, 3, 10);
    c.ell_override = 4;
    const EstimateReport r = run_unconstrained_mb_wish(c, w, ExhaustiveOracle());
    for (const auto& L : r.levels)
        for (std::size_t k = 0; k < L.values.size(); ++k) {
            const GeneratorDomain g = level_domain(c, f, L.i, k);
            const ParametricDomain& d = *g.domain;
            double best = 0;
            std::vector<std::uint32_t> p(3, 0), s(3);
            do {
                if (!d.contains(p.data())) continue;
                d.map(p.data(), s.data());
                best = std::max(best, w->weight(s));
            } while (odometer(p, 5));
            EXPECT_EQ(L.values[k], best) << "level " << L.i << " rep " << k;
        }
}

TEST(Unconstrained, BothVariantsWithinT2) {
    auto w = random_potts(4, 5, 4.0, 21);
    const double Z = brute_force_sum(*w);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto c = config(5, 4, seed);
        const double a = run_mb_wish(c, w, ExhaustiveOracle()).estimate / Z;
        const double b = run_unconstrained_mb_wish(c, w, ExhaustiveOracle()).estimate / Z;
        EXPECT_GE(a, 1 / 6.25);
        EXPECT_LE(a, 6.25);
        EXPECT_GE(b, 1 / 6.25);
        EXPECT_LE(b, 6.25);
    }
}
