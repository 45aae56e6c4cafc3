#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbwish/finite_field.hpp"
#include "mbwish/hash_family.hpp"
#include "mbwish/max_oracle.hpp"
#include "mbwish/weight_models.hpp"

namespace mbwish {

struct EstimatorConfig {
    std::uint32_t q = 2;
    std::size_t n = 1;
    /// Bin rank; 0 selects floor((q-1)/2).
    std::uint32_t r = 0;
    double delta = 0.1;
    Construction construction = Construction::Dense;
    double density = 0.5;
    std::uint64_t seed = 0;
    /// Thread count for oracle calls; 0 = hardware concurrency. Never affects results.
    std::size_t workers = 1;
    /// Per-call oracle budget.
    std::optional<double> budget_seconds;
    /// Replaces the derived repetition count when set.
    std::optional<std::size_t> ell_override;

    std::uint32_t bin_rank() const;
    double t() const;
    double gamma() const;
    std::size_t ell() const;
    std::size_t n_prime() const;

    /// Throws std::invalid_argument for q not a prime power, r outside [1, q/2), etc.
    void validate() const;
};

/// Smallest j with (q/r)^j >= q^n, i.e. ceil(n log_{q/r} q), in exact integer arithmetic.
std::size_t compute_n_prime(std::uint32_t q, std::uint32_t r, std::size_t n);
/// ceil((1/gamma) ln(2n/delta)).
std::size_t compute_ell(std::uint32_t q, std::uint32_t r, std::size_t n, double delta);
double compute_gamma(std::uint32_t q, std::uint32_t r);

/// Lower median (the floor((len-1)/2)-th order statistic).
double median(std::vector<double> values);
/// Position of the lower median under an explicit ordering key.
std::size_t median_position(const std::vector<double>& keys);

struct Combined {
    double value = 0;
    double log_value = 0;
};

/// M_0 + (t-1) sum_{i<n'} M_{i+1} t^i with compensated summation, plus the same
/// quantity by log-sum-exp over log_M. The raw value is replaced by exp(log) when it
/// overflows or underflows.
Combined combine(const std::vector<double>& M, const std::vector<double>& log_M, double t);

struct LevelRecord {
    std::size_t i = 0;
    std::string regime;
    std::vector<double> values;
    std::vector<double> log_values;
    std::vector<OracleStatus> statuses;
};

struct EstimateReport {
    std::string variant;
    EstimatorConfig config;
    FieldSpec field;
    nlohmann::json model;
    std::vector<double> M;
    std::vector<double> log_M;
    double estimate = 0;
    double log_estimate = 0;
    std::uint64_t oracle_calls = 0;
    std::vector<LevelRecord> levels;
    bool lower_bound_only = false;
    double wall_seconds = 0;
};

/// Raised when an oracle call fails hard; carries everything completed so far.
class EstimationAborted : public std::runtime_error {
public:
    EstimationAborted(const std::string& what, EstimateReport partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const EstimateReport& partial() const noexcept { return partial_; }

private:
    EstimateReport partial_;
};

/// Hash for repetition k of level i (m = i rows), from the stream keyed (seed, i, k).
/// Toeplitz and field-multiplication hashes fall back to Dense when i > n.
MultiBinHash level_hash(const EstimatorConfig& config, const std::shared_ptr<const Field>& field,
                        std::size_t i, std::size_t k);
Construction level_construction(const EstimatorConfig& config, std::size_t i);

/// Shared driver: level 0 and the n' x ell grid of queries, dispatched on the work pool.
struct LevelPlan {
    std::string variant;
    std::function<OracleQuery()> level0;
    std::function<OracleQuery(std::size_t i, std::size_t k)> query;
    std::function<std::string(std::size_t i)> regime;
};

EstimateReport run_estimator(const EstimatorConfig& config, const WeightPtr& weight, const MaxOracle& oracle,
                             const LevelPlan& plan);

EstimateReport run_mb_wish(const EstimatorConfig& config, const WeightPtr& weight, const MaxOracle& oracle);

/// The queries run_mb_wish would issue, level 0 first, then (i, k) row-major.
struct PlannedQuery {
    std::size_t i = 0;
    std::size_t k = 0;
    OracleQuery query;
};
std::vector<PlannedQuery> plan_mb_wish(const EstimatorConfig& config, const WeightPtr& weight);

/// Full descending weight table of an enumerable model.
struct QuantileTruth {
    std::vector<double> sorted;

    /// w(sigma_j) for 1-based j, 0 beyond the domain.
    double at_rank(std::uint64_t j) const;
};

QuantileTruth quantile_truth(const WeightModel& weight);

/// floor(t^i) for i = 0..n', each capped at `cap` (so the value is exact up to the cap).
std::vector<std::uint64_t> quantile_ranks(std::uint32_t q, std::uint32_t r, std::size_t n_prime,
                                          std::uint64_t cap);

/// beta_0..beta_{n'}.
std::vector<double> quantile_betas(const QuantileTruth& truth, const EstimatorConfig& config);

struct QuantileBracket {
    double lower = 0;
    double upper = 0;
};

QuantileBracket quantile_bracket(const QuantileTruth& truth, const EstimatorConfig& config);

struct ConcentrationReport {
    std::size_t level = 0;
    std::size_t trials = 0;
    std::size_t ell = 0;
    double interval_low = 0;
    double interval_high = 0;
    std::size_t hits = 0;
    double frequency = 0;
    double bound = 0;  // 1 - 2 exp(-gamma ell)
    double slack = 0;  // 3 sigma binomial
    bool passed() const { return frequency >= bound - slack; }
};

/// Runs level i's inner loop `trials` times and counts medians inside
/// [beta_{min(i+1,n')}, beta_{max(i-1,0)}].
ConcentrationReport empirical_quantile_concentration(const EstimatorConfig& config, const WeightPtr& weight,
                                                     const QuantileTruth& truth, std::size_t level,
                                                     std::size_t trials, const MaxOracle& oracle);

}  // namespace mbwish
