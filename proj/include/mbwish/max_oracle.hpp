#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mbwish/finite_field.hpp"
#include "mbwish/hash_family.hpp"
#include "mbwish/weight_models.hpp"

namespace mbwish {

/// Thrown when a query would need more enumeration than the oracle allows.
class DomainTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The parameter set B of an image-of-a-map level together with the bijective
/// affine map p -> G p + b onto a subset of F_q^n.
struct ParametricDomain {
    enum class Kind { Product, LexPrefix };

    std::shared_ptr<const Field> field;
    Kind kind = Kind::Product;
    /// Product: coordinate j ranges over alpha_0..alpha_{radix[j]-1}.
    std::vector<std::uint32_t> radices;
    /// LexPrefix: the first `count` vectors of F_q^n in lexicographic order.
    std::uint64_t count = 0;
    FieldMatrix G;  // n x n, invertible
    FieldVector b;
    FieldMatrix G_inverse;

    std::size_t n() const noexcept { return G.rows; }
    std::uint64_t size() const;
    /// True iff p lies in the parameter set.
    bool contains(const std::uint32_t* p) const;
    /// sigma = G p + b.
    void map(const std::uint32_t* p, std::uint32_t* sigma) const;
    /// p = G^-1 (sigma - b).
    void preimage(const std::uint32_t* sigma, std::uint32_t* p) const;
};

/// Validates G and precomputes its inverse.
ParametricDomain make_parametric_domain(std::shared_ptr<const Field> field, ParametricDomain::Kind kind,
                                        std::vector<std::uint32_t> radices, std::uint64_t count,
                                        FieldMatrix G, FieldVector b);

enum class ConstraintKind { Unconstrained, MultiBin, MultiBinPermutation, Parametric };

std::string to_string(ConstraintKind kind);

struct OracleQuery {
    WeightPtr weight;
    ConstraintKind kind = ConstraintKind::Unconstrained;
    /// MultiBin and MultiBinPermutation.
    std::optional<MultiBinHash> hash;
    /// Parametric.
    std::shared_ptr<const ParametricDomain> domain;
    /// Overrides the oracle's default per-call budget.
    std::optional<double> budget_seconds;

    static OracleQuery unconstrained(WeightPtr w);
    static OracleQuery multibin(WeightPtr w, MultiBinHash h);
    static OracleQuery permutation(WeightPtr w, MultiBinHash h);
    static OracleQuery parametric(WeightPtr w, std::shared_ptr<const ParametricDomain> d);

    /// Throws std::invalid_argument when dimensions disagree with the weight's domain.
    void validate() const;
};

enum class OracleStatus { Exact, TimedOutLowerBound, EmptyFeasibleSet };

std::string to_string(OracleStatus s);

struct OracleAnswer {
    double value = 0;
    /// -inf when value is 0.
    double log_value = 0;
    /// The maximizing configuration in F_q^n (element indices); absent for empty sets.
    std::optional<std::vector<std::uint32_t>> witness;
    /// For parametric queries, the maximizing parameter.
    std::optional<std::vector<std::uint32_t>> parameter;
    OracleStatus status = OracleStatus::Exact;
    std::uint64_t evaluations = 0;
};

class MaxOracle {
public:
    virtual ~MaxOracle() = default;
    virtual OracleAnswer solve(const OracleQuery& query) const = 0;
    /// Optional warm-up for a weight that is about to be queried many times.
    virtual void prepare(const WeightPtr&) const {}
};

enum class OracleStrategy {
    /// Picks the cheapest exact method per query.
    Auto,
    /// Plain lexicographic enumeration of the feasible set.
    Scan,
};

struct OracleOptions {
    OracleStrategy strategy = OracleStrategy::Auto;
    std::optional<double> budget_seconds;
    std::uint64_t max_evaluations = 100'000'000ULL;
    /// Largest domain for which a weight-sorted table is built.
    std::uint64_t max_table = 1ULL << 22;
};

/// Exact maximization by enumeration. Every method returns the same answer:
/// the maximum, witnessed by the lexicographically first maximizer (the first
/// maximizing parameter for parametric queries).
class ExhaustiveOracle final : public MaxOracle {
public:
    explicit ExhaustiveOracle(OracleOptions options = {});

    OracleAnswer solve(const OracleQuery& query) const override;
    void prepare(const WeightPtr& weight) const override;

    const OracleOptions& options() const noexcept { return options_; }

    struct Table;

private:
    std::shared_ptr<const Table> table_for(const WeightPtr& weight, bool permutations) const;

    OracleOptions options_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<const WeightModel*, bool>, std::shared_ptr<const Table>> tables_;
};

/// Convenience wrappers using the reference lexicographic scan.
OracleAnswer exhaustive_max(const OracleQuery& query);
OracleAnswer exhaustive_max_permutation(const OracleQuery& query);

/// Writes the query as a solver-neutral integer program (grammar in docs/ilp_format.md).
/// Throws std::invalid_argument for unconstrained/parametric queries or weights without
/// a log-linear form.
void export_ilp(const OracleQuery& query, std::ostream& out);
void export_ilp(const OracleQuery& query, const std::string& path);

struct IlpModel {
    struct Var {
        std::string name;
        long long lo = 0;
        long long hi = 0;
    };
    struct Term {
        double coef = 0;
        std::size_t var = 0;
    };
    struct Constraint {
        std::string name;
        std::vector<Term> terms;
        std::string sense;  // "<=", ">=", "="
        double rhs = 0;
    };
    std::uint32_t q = 0, p = 0, k = 0;
    std::size_t n = 0;
    std::vector<Var> vars;
    std::map<std::string, std::size_t> index;
    std::vector<Constraint> constraints;
    double objective_constant = 0;
    std::vector<Term> objective;
    /// decode[i] lists the one-hot variables of sigma_i, value order.
    std::vector<std::vector<std::size_t>> decode;
};

IlpModel parse_ilp(std::istream& in);

}  // namespace mbwish
