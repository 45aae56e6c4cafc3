#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

#include "mbwish/max_oracle.hpp"
#include "mbwish/mb_wish.hpp"
#include "mbwish/weight_models.hpp"

namespace mbwish {

using Matrix = std::vector<std::vector<double>>;

struct PermanentInstance {
    Matrix D;
    /// 0 selects the smallest prime power above n.
    std::uint32_t q = 0;

    std::size_t n() const noexcept { return D.size(); }
    std::uint32_t field_size() const;
    /// Square, nonnegative, finite, q > n and q a prime power.
    void validate() const;
};

/// Inclusion-exclusion over column subsets with Gray-code updates, n <= 20.
double exact_permanent(const Matrix& D);
/// Direct sum over all n! permutations, n <= 10.
double permanent_by_enumeration(const Matrix& D);

/// Configuration for an instance: q from the instance, n from D, other fields from `base`.
EstimatorConfig perm_config(const PermanentInstance& instance, const EstimatorConfig& base);

EstimateReport run_perm_wish(const PermanentInstance& instance, const EstimatorConfig& base,
                             const MaxOracle& oracle);

std::vector<PlannedQuery> plan_perm_wish(const PermanentInstance& instance, const EstimatorConfig& base);

Matrix matrix_from_json(const nlohmann::json& j);
Matrix load_matrix(const std::string& path);

}  // namespace mbwish
