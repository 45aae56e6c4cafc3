#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mbwish/perm_wish.hpp"
#include "mbwish/report.hpp"
#include "mbwish/random.hpp"

using namespace mbwish;

namespace {

// n! terms, independent of the library.
double permanent_reference(const Matrix& D) {
    std::vector<std::size_t> p(D.size());
    std::iota(p.begin(), p.end(), 0);
    double total = 0;
    do {
        double prod = 1;
        for (std::size_t i = 0; i < p.size(); ++i) prod *= D[i][p[i]];
        total += prod;
    } while (std::next_permutation(p.begin(), p.end()));
    return total;
}

Matrix random_matrix(std::size_t n, std::uint64_t seed) {
    RandomStream rs(seed);
    Matrix D(n, std::vector<double>(n));
    for (auto& row : D)
        for (auto& x : row) x = rs.unit();
    return D;
}

Matrix identity(std::size_t n) {
    Matrix D(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) D[i][i] = 1;
    return D;
}

}  // namespace

TEST(Permanent, HandValues) {
    EXPECT_EQ(exact_permanent(identity(3)), 1.0);
    EXPECT_EQ(exact_permanent(Matrix(4, std::vector<double>(4, 1.0))), 24.0);
    EXPECT_EQ(exact_permanent({{1, 2}, {3, 4}}), 10.0);
    EXPECT_EQ(permanent_by_enumeration({{1, 2}, {3, 4}}), 10.0);
    EXPECT_EQ(exact_permanent({{7}}), 7.0);
}

TEST(Permanent, InclusionExclusionMatchesEnumeration) {
    for (std::size_t n = 1; n <= 8; ++n)
        for (std::uint64_t s = 0; s < 3; ++s) {
            const Matrix D = random_matrix(n, 100 * n + s);
            const double want = permanent_reference(D);
            EXPECT_NEAR(exact_permanent(D), want, 1e-9 * want);
            EXPECT_NEAR(permanent_by_enumeration(D), want, 1e-9 * want);
        }
}

TEST(Permanent, InstanceValidation) {
    EXPECT_EQ((PermanentInstance{identity(4), 0}.field_size()), 5u);
    EXPECT_EQ((PermanentInstance{identity(7), 0}.field_size()), 8u);
    EXPECT_THROW((PermanentInstance{identity(4), 4}.validate()), std::invalid_argument);
    EXPECT_THROW((PermanentInstance{identity(4), 6}.validate()), std::invalid_argument);
    EXPECT_THROW((PermanentInstance{{{1, 2}, {3}}, 0}.validate()), std::invalid_argument);
    EXPECT_THROW((PermanentInstance{{{1, -2}, {3, 4}}, 0}.validate()), std::invalid_argument);
}

TEST(Permanent, MatrixJsonForms) {
    EXPECT_EQ(matrix_from_json(nlohmann::json::parse("[[1,2],[3,4]]")), (Matrix{{1, 2}, {3, 4}}));
    EXPECT_EQ(matrix_from_json(nlohmann::json::parse(R"({"matrix": [[5]]})")), (Matrix{{5}}));
    EXPECT_THROW(matrix_from_json(nlohmann::json::parse(R"({"rows": 1})")), std::invalid_argument);
}

TEST(PermWish, ZeroMatrixGivesZero) {
    EstimatorConfig base;
    base.ell_override = 5;
    const EstimateReport r = run_perm_wish({Matrix(3, std::vector<double>(3, 0.0)), 0}, base, ExhaustiveOracle());
    EXPECT_EQ(r.estimate, 0.0);
    for (double m : r.M) EXPECT_EQ(m, 0.0);
    EXPECT_EQ(r.variant, "permutation");
}

TEST(PermWish, IdentityWithinT2) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EstimatorConfig base;
        base.seed = seed;
        const EstimateReport r = run_perm_wish({identity(4), 0}, base, ExhaustiveOracle());
        EXPECT_EQ(r.config.q, 5u);
        EXPECT_EQ(r.M[0], 1.0);
        EXPECT_GE(r.estimate, 1 / 6.25);
        EXPECT_LE(r.estimate, 6.25);
    }
}

TEST(PermWish, StructureAndPlan) {
    const PermanentInstance inst{random_matrix(4, 3), 0};
    EstimatorConfig base;
    base.seed = 2;
    base.ell_override = 6;
    const EstimateReport r = run_perm_wish(inst, base, ExhaustiveOracle());
    EXPECT_EQ(r.oracle_calls, r.config.n_prime() * 6 + 1);
    EXPECT_EQ(plan_perm_wish(inst, base).size(), r.oracle_calls);
    for (const auto& L : r.levels) EXPECT_EQ(L.regime, "multibin-permutation");
    EXPECT_TRUE(verify_report(report_to_json(r)).ok);
    // M_0 is the best single permutation.
    std::vector<std::uint32_t> p{0, 1, 2, 3};
    double best = 0;
    do best = std::max(best, permutation_weight(inst.D, p));
    while (std::next_permutation(p.begin(), p.end()));
    EXPECT_EQ(r.M[0], best);
}
