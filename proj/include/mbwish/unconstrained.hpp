#pragma once

#include <cstdint>
#include <memory>

#include <json.hpp>

#include "mbwish/finite_field.hpp"
#include "mbwish/max_oracle.hpp"
#include "mbwish/mb_wish.hpp"
#include "mbwish/random.hpp"

namespace mbwish {

/// n x n matrix whose columns form a uniformly random ordered basis of F_q^n.
/// Dependent columns are redrawn; gives up after 64 n redraws.
FieldMatrix sample_basis(const Field& field, std::size_t n, RandomStream& stream);
FieldMatrix sample_basis(std::uint32_t q, std::size_t n, std::uint64_t seed);

enum class Regime { CosetUnion, LexSet };

std::string to_string(Regime r);

/// The parameter set of one level together with its affine map.
struct GeneratorDomain {
    Regime regime = Regime::CosetUnion;
    std::size_t m = 0;
    std::uint32_t r = 1;
    /// CosetUnion: G = [A | R]; LexSet: G = A.
    std::shared_ptr<const ParametricDomain> domain;

    /// CosetUnion columns 0..n-m-1 of G.
    FieldMatrix A() const;
    /// CosetUnion columns n-m..n-1 of G.
    FieldMatrix R() const;
};

struct LexBound {
    std::size_t n = 0;
    std::size_t m = 0;
    /// ceil(r^m / q^(m-n)), exact.
    std::uint64_t K = 0;
    /// floor(r^m / q^(m-n)).
    std::uint64_t floor_size = 0;
    /// The K-th vector of F_q^n in lexicographic order (coordinate 0 most significant).
    FieldVector s_m;
    /// |{x : x <_lex s_m}| = K - 1.
    std::uint64_t size = 0;
    bool empty() const noexcept { return size == 0; }
};

/// Requires m > n.
LexBound lex_set(std::uint32_t q, std::size_t n, std::size_t m, std::uint32_t r);

/// Level i, repetition k of the image-of-a-map estimator, drawn from the stream (seed, i, k).
GeneratorDomain level_domain(const EstimatorConfig& config, const std::shared_ptr<const Field>& field,
                             std::size_t i, std::size_t k);

struct ImageAudit {
    Regime regime = Regime::CosetUnion;
    std::uint64_t expected_size = 0;
    std::uint64_t measured_size = 0;
    bool exact() const noexcept { return expected_size == measured_size; }
};

/// Enumerates the image of the parameter set and counts distinct points.
ImageAudit image_membership_audit(const GeneratorDomain& domain);

struct MembershipStatistics {
    std::uint32_t q = 0, r = 0;
    std::size_t n = 0, m = 0, draws = 0;
    double target = 0;  // (r/q)^m, or |S_m| / q^n for the lexicographic regime
    double max_marginal_deviation = 0;
    double marginal_slack = 0;  // 3 sigma
    double max_joint_excess = 0;  // max over pairs of joint - target^2
    double joint_slack = 0;
    bool marginals_ok() const { return max_marginal_deviation <= marginal_slack; }
    bool joints_ok() const { return max_joint_excess <= joint_slack; }
};

/// Monte-Carlo membership frequencies over `draws` independent levels.
MembershipStatistics membership_statistics(std::uint32_t q, std::size_t n, std::size_t m, std::uint32_t r,
                                           std::size_t draws, std::uint64_t seed);

EstimateReport run_unconstrained_mb_wish(const EstimatorConfig& config, const WeightPtr& weight,
                                         const MaxOracle& oracle);

}  // namespace mbwish
