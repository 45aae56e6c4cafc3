#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbwish/finite_field.hpp"
#include "mbwish/random.hpp"

namespace mbwish {

enum class Construction { Dense, Toeplitz, SparseToeplitz, FieldMult };

std::string to_string(Construction c);
Construction construction_from_string(const std::string& name);

/// An affine map x -> Ax + b over F_q together with the multi-bin acceptance
/// region { sigma : A sigma + b < threshold }, where threshold defaults to alpha_r * 1.
struct MultiBinHash {
    std::shared_ptr<const Field> field;
    Construction construction = Construction::Dense;
    FieldMatrix A;  // m x n
    FieldVector b;  // m
    std::uint32_t r = 1;
    /// Per-coordinate bin ranks; every entry equals r unless set explicitly.
    std::vector<std::uint32_t> threshold;
    std::uint64_t seed = 0;
    /// Bernoulli density of the first row/column, SparseToeplitz only.
    double density = 0.5;

    std::size_t m() const noexcept { return A.rows; }
    std::size_t n() const noexcept { return A.cols; }

    /// h(x) = Ax + b.
    FieldVector evaluate(std::span<const FieldElement> x) const;

    /// True iff every coordinate of A sigma + b has ordering index below its threshold.
    /// An m = 0 hash accepts everything.
    bool accepts(std::span<const FieldElement> sigma) const;

    /// Same test on raw element indices; no dimension checks.
    bool accepts_raw(const std::uint32_t* sigma) const noexcept {
        const std::size_t cols = A.cols;
        for (std::size_t i = 0; i < A.rows; ++i) {
            std::uint32_t acc = b[i].index;
            const FieldElement* row = A.data.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j)
                acc = field->add_raw(acc, field->mul_raw(row[j].index, sigma[j]));
            if (acc >= threshold[i]) return false;
        }
        return true;
    }

    bool operator==(const MultiBinHash& other) const;
};

/// Builds a hash with the default threshold alpha_r * 1.
MultiBinHash make_hash(std::shared_ptr<const Field> field, Construction construction,
                       FieldMatrix A, FieldVector b, std::uint32_t r, std::uint64_t seed = 0);

bool accepts(const MultiBinHash& h, std::span<const FieldElement> sigma);

void to_json(nlohmann::json& j, const MultiBinHash& h);
MultiBinHash hash_from_json(const nlohmann::json& j);

/// Draws hashes of one shape from a seeded stream. Not thread-safe; sampled
/// hashes are immutable values.
class HashSampler {
public:
    HashSampler(std::shared_ptr<const Field> field, std::size_t m, std::size_t n,
                Construction construction, std::uint64_t seed, std::uint32_t r = 1,
                double density = 0.5);
    /// Uses an externally keyed stream, e.g. one derived from (seed, level, repetition).
    HashSampler(std::shared_ptr<const Field> field, std::size_t m, std::size_t n,
                Construction construction, RandomStream stream, std::uint32_t r = 1,
                double density = 0.5);

    MultiBinHash sample();

    std::uint64_t bits_consumed() const noexcept { return stream_.bits_consumed(); }
    RandomStream& stream() noexcept { return stream_; }

    const Field& field() const noexcept { return *field_; }
    std::shared_ptr<const Field> field_ptr() const noexcept { return field_; }
    std::size_t m() const noexcept { return m_; }
    std::size_t n() const noexcept { return n_; }
    std::uint32_t r() const noexcept { return r_; }
    double density() const noexcept { return density_; }
    Construction construction() const noexcept { return construction_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    void validate() const;

    std::shared_ptr<const Field> field_;
    std::size_t m_;
    std::size_t n_;
    Construction construction_;
    std::uint64_t seed_;
    std::uint32_t r_;
    double density_;
    RandomStream stream_;
};

/// Every entry of A and b i.i.d. uniform on F_q.
MultiBinHash sample_dense(HashSampler& sampler);

/// Toeplitz A (constant along descending diagonals): m + n - 1 diagonal symbols,
/// drawn first column bottom-up then first row left to right, followed by b.
MultiBinHash sample_toeplitz(HashSampler& sampler);

/// Toeplitz A with Bernoulli(density) first row/column; b uniform. q = 2 only.
MultiBinHash sample_sparse_toeplitz(HashSampler& sampler, double density);

/// Field-multiplication hash: x -> first m coordinates of phi^-1(phi(x) phi(nu) mod f) + b,
/// materialized as the affine form A = first m rows of P Gamma. Requires m <= n.
MultiBinHash sample_fieldmult(HashSampler& sampler);

/// The m x n matrix of the field-multiplication hash for multiplier nu over F_q,
/// using f = find_irreducible_over(F_q, n).
FieldMatrix fieldmult_matrix(const Field& field, std::span<const FieldElement> nu, std::size_t m);

/// Toeplitz matrix from its m + n - 1 diagonals; diagonals[d] holds A[i][j] with j - i + m - 1 = d.
FieldMatrix toeplitz_matrix(std::span<const FieldElement> diagonals, std::size_t m, std::size_t n);

struct AuditReport {
    Construction construction = Construction::Dense;
    std::uint32_t q = 0;
    std::uint32_t r = 0;
    std::size_t m = 0;
    std::size_t n = 0;
    double density = 0.5;
    /// Number of (A, b) members enumerated (weighted families count support size).
    std::uint64_t family_size = 0;
    double target_marginal = 0;  // (r/q)^m
    double target_joint = 0;     // (r/q)^(2m)
    double max_marginal_deviation = 0;
    double max_joint_deviation = 0;
    /// Integer-count equality for every sigma and pair; meaningful for exact families.
    bool marginals_exact = false;
    bool joints_exact = false;
    /// Whether the construction is one that must audit to zero deviation.
    bool exactness_required = true;

    bool passed() const { return !exactness_required || (marginals_exact && joints_exact); }
};

void to_json(nlohmann::json& j, const AuditReport& report);

/// Exhaustively enumerates the hash family and measures Pr(Z_sigma = 1) and
/// Pr(Z_s1 = 1, Z_s2 = 1) over all sigma and all pairs s1 != s2.
AuditReport pairwise_independence_audit(Construction construction, std::uint32_t q,
                                        std::uint32_t r, std::size_t m, std::size_t n,
                                        double density = 0.5);

}  // namespace mbwish
