#include "mbwish/perm_wish.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace mbwish {

std::uint32_t PermanentInstance::field_size() const {
    return q != 0 ? q : smallest_prime_power_above(static_cast<std::uint32_t>(n()));
}

void PermanentInstance::validate() const {
    const std::size_t size = n();
    if (size < 1) throw std::invalid_argument("permanent: empty matrix");
    for (const auto& row : D) {
        if (row.size() != size) throw std::invalid_argument("permanent: matrix must be square");
        for (double v : row)
            if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("permanent: entries must be nonnegative and finite");
    }
    std::uint32_t p = 0, k = 0;
    const std::uint32_t fq = field_size();
    if (!prime_power(fq, p, k)) throw std::invalid_argument("permanent: q must be a prime power");
    if (fq <= size) throw std::invalid_argument("permanent: q must exceed n");
}

double exact_permanent(const Matrix& D) {
    const std::size_t n = D.size();
    if (n == 0) return 1;
    if (n > 20) throw std::invalid_argument("exact_permanent: n <= 20 required");
    for (const auto& row : D)
        if (row.size() != n) throw std::invalid_argument("exact_permanent: matrix must be square");
    // Ryser: perm = (-1)^n sum_S (-1)^|S| prod_i sum_{j in S} D[i][j], with Gray-code subset order.
    std::vector<double> rowsum(n, 0.0);
    double total = 0, comp = 0;
    const std::uint64_t subsets = 1ULL << n;
    std::uint64_t gray = 0;
    for (std::uint64_t s = 1; s < subsets; ++s) {
        const std::uint64_t next = s ^ (s >> 1);
        const std::uint64_t diff = next ^ gray;
        const auto j = static_cast<std::size_t>(std::countr_zero(diff));
        const double sign_add = (next & diff) ? 1.0 : -1.0;
        for (std::size_t i = 0; i < n; ++i) rowsum[i] += sign_add * D[i][j];
        gray = next;
        double prod = 1;
        for (std::size_t i = 0; i < n; ++i) prod *= rowsum[i];
        const int bits = std::popcount(gray);
        const double term = ((n - static_cast<std::size_t>(bits)) % 2 == 0) ? prod : -prod;
        const double t = total + term;
        comp += std::abs(total) >= std::abs(term) ? (total - t) + term : (term - t) + total;
        total = t;
    }
    return total + comp;
}

double permanent_by_enumeration(const Matrix& D) {
    const std::size_t n = D.size();
    if (n > 10) throw std::invalid_argument("permanent_by_enumeration: n <= 10 required");
    std::vector<std::uint32_t> p(n);
    std::iota(p.begin(), p.end(), 0U);
    double total = 0;
    do {
        double prod = 1;
        for (std::size_t i = 0; i < n; ++i) prod *= D[i][p[i]];
        total += prod;
    } while (std::next_permutation(p.begin(), p.end()));
    return total;
}

EstimatorConfig perm_config(const PermanentInstance& instance, const EstimatorConfig& base) {
    instance.validate();
    EstimatorConfig c = base;
    c.q = instance.field_size();
    c.n = instance.n();
    c.r = base.r;
    return c;
}

namespace {

LevelPlan perm_plan(const EstimatorConfig& config, const WeightPtr& weight, std::shared_ptr<const Field> field) {
    LevelPlan plan;
    plan.variant = "permutation";
    plan.level0 = [=] {
        // An m = 0 hash accepts every configuration.
        return OracleQuery::permutation(weight, make_hash(field, Construction::Dense, FieldMatrix(0, config.n),
                                                          FieldVector{}, config.bin_rank()));
    };
    plan.query = [=](std::size_t i, std::size_t k) {
        return OracleQuery::permutation(weight, level_hash(config, field, i, k));
    };
    plan.regime = [](std::size_t) { return std::string("multibin-permutation"); };
    return plan;
}

}  // namespace

EstimateReport run_perm_wish(const PermanentInstance& instance, const EstimatorConfig& base,
                             const MaxOracle& oracle) {
    const EstimatorConfig config = perm_config(instance, base);
    config.validate();
    const auto field = Field::make(config.q);
    const WeightPtr weight = std::make_shared<PermanentWeight>(instance.D, config.q);
    return run_estimator(config, weight, oracle, perm_plan(config, weight, field));
}

std::vector<PlannedQuery> plan_perm_wish(const PermanentInstance& instance, const EstimatorConfig& base) {
    const EstimatorConfig config = perm_config(instance, base);
    config.validate();
    const auto field = Field::make(config.q);
    const WeightPtr weight = std::make_shared<PermanentWeight>(instance.D, config.q);
    const LevelPlan plan = perm_plan(config, weight, field);
    std::vector<PlannedQuery> out;
    out.push_back({0, 0, plan.level0()});
    for (std::size_t i = 1; i <= config.n_prime(); ++i)
        for (std::size_t k = 0; k < config.ell(); ++k) out.push_back({i, k, plan.query(i, k)});
    return out;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    if (j.is_object() && !j.contains("matrix")) throw std::invalid_argument("matrix file: missing \"matrix\"");
    const nlohmann::json& arr = j.is_object() ? j.at("matrix") : j;
    if (!arr.is_array()) throw std::invalid_argument("matrix file: expected a 2-D array");
    Matrix D;
    for (const auto& row : arr) D.push_back(row.get<std::vector<double>>());
    PermanentInstance{D, 0}.validate();
    return D;
}

Matrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open matrix file '" + path + "'");
    try {
        nlohmann::json j;
        in >> j;
        return matrix_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("matrix file '" + path + "': " + e.what());
    }
}

}  // namespace mbwish
