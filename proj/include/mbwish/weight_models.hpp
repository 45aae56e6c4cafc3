#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mbwish/finite_field.hpp"

namespace mbwish {

/// Configurations are passed as raw element indices (alpha_i -> i).
using Config = std::span<const std::uint32_t>;

struct Domain {
    std::uint32_t q = 2;
    std::size_t n = 1;
};

/// log w(sigma) = constant + sum_i unary[i][sigma_i] + sum over pair terms.
/// A unary entry of -inf forbids that value.
struct LogLinearForm {
    struct Pair {
        std::size_t a = 0;
        std::size_t b = 0;
        /// q*q table indexed [va * q + vb]; zero entries contribute nothing.
        std::vector<double> table;
    };
    double constant = 0;
    std::vector<std::vector<double>> unary;
    std::vector<Pair> pairs;

    double evaluate(Config sigma) const;
};

class WeightModel {
public:
    virtual ~WeightModel() = default;

    virtual Domain domain() const = 0;
    /// Natural log of the weight; -inf for zero weight.
    virtual double log_weight(Config sigma) const = 0;
    virtual double weight(Config sigma) const;
    /// Present only for models whose log-weight is a sum of unary and pairwise terms.
    virtual std::optional<LogLinearForm> log_linear_form() const { return std::nullopt; }
    virtual std::string name() const = 0;
    virtual nlohmann::json describe() const = 0;
};

using WeightPtr = std::shared_ptr<const WeightModel>;

double weight_of(const WeightModel& w, const FieldVector& sigma);
double log_weight_of(const WeightModel& w, const FieldVector& sigma);

struct Graph {
    std::size_t vertices = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
};

/// Throws on out-of-range endpoints, self-loops and duplicate edges.
void validate_graph(const Graph& g);

class PottsModel final : public WeightModel {
public:
    PottsModel(Graph graph, std::uint32_t q, double zeta, double J, double H);

    Domain domain() const override { return {q_, graph_.vertices}; }
    double log_weight(Config sigma) const override;
    std::optional<LogLinearForm> log_linear_form() const override;
    std::string name() const override { return "potts"; }
    nlohmann::json describe() const override;

    const Graph& graph() const noexcept { return graph_; }
    double zeta() const noexcept { return zeta_; }
    double J() const noexcept { return J_; }
    double H() const noexcept { return H_; }

private:
    Graph graph_;
    std::uint32_t q_;
    double zeta_;
    double J_;
    double H_;
};

/// |P^n(sigma) - Q^n(sigma)| / 2 for i.i.d. coordinates.
class ProductDistributionPair final : public WeightModel {
public:
    ProductDistributionPair(std::vector<double> P, std::vector<double> Q, std::size_t n);

    Domain domain() const override { return {static_cast<std::uint32_t>(P_.size()), n_}; }
    double log_weight(Config sigma) const override;
    double weight(Config sigma) const override;
    std::string name() const override { return "product"; }
    nlohmann::json describe() const override;

    const std::vector<double>& P() const noexcept { return P_; }
    const std::vector<double>& Q() const noexcept { return Q_; }
    std::size_t n() const noexcept { return n_; }

private:
    std::vector<double> P_;
    std::vector<double> Q_;
    std::size_t n_;
};

/// |P(sigma) - Q(sigma)| / 2 for two Markov chains of length n.
class MarkovChainPair final : public WeightModel {
public:
    MarkovChainPair(std::vector<double> P0, std::vector<double> Q0,
                    std::vector<std::vector<double>> TP, std::vector<std::vector<double>> TQ,
                    std::size_t n);

    Domain domain() const override { return {static_cast<std::uint32_t>(P0_.size()), n_}; }
    double log_weight(Config sigma) const override;
    double weight(Config sigma) const override;
    std::string name() const override { return "markov"; }
    nlohmann::json describe() const override;

    double likelihood_p(Config sigma) const;
    double likelihood_q(Config sigma) const;

private:
    std::vector<double> P0_;
    std::vector<double> Q0_;
    std::vector<std::vector<double>> TP_;
    std::vector<std::vector<double>> TQ_;
    std::size_t n_;
};

/// Explicit weights indexed by the lexicographic rank (coordinate 0 most significant).
class TableWeight final : public WeightModel {
public:
    TableWeight(std::uint32_t q, std::size_t n, std::vector<double> values);

    Domain domain() const override { return {q_, n_}; }
    double log_weight(Config sigma) const override;
    double weight(Config sigma) const override;
    std::string name() const override { return "table"; }
    nlohmann::json describe() const override;

    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::uint32_t q_;
    std::size_t n_;
    std::vector<double> values_;
};

class ConstantWeight final : public WeightModel {
public:
    ConstantWeight(std::uint32_t q, std::size_t n, double value);

    Domain domain() const override { return {q_, n_}; }
    double log_weight(Config) const override { return log_value_; }
    double weight(Config) const override { return value_; }
    std::optional<LogLinearForm> log_linear_form() const override;
    std::string name() const override { return "constant"; }
    nlohmann::json describe() const override;

private:
    std::uint32_t q_;
    std::size_t n_;
    double value_;
    double log_value_;
};

/// c * w(sigma).
class ScaledWeight final : public WeightModel {
public:
    ScaledWeight(WeightPtr inner, double factor);

    Domain domain() const override { return inner_->domain(); }
    double log_weight(Config sigma) const override;
    double weight(Config sigma) const override;
    std::optional<LogLinearForm> log_linear_form() const override;
    std::string name() const override { return "scaled"; }
    nlohmann::json describe() const override;

private:
    WeightPtr inner_;
    double factor_;
    double log_factor_;
};

/// w(G p + b) over parameters p in F_q^k, with G an n x k matrix.
class ComposedWeight final : public WeightModel {
public:
    ComposedWeight(WeightPtr inner, std::shared_ptr<const Field> field, FieldMatrix G, FieldVector b);

    Domain domain() const override { return {field_->q(), G_.cols}; }
    double log_weight(Config params) const override;
    double weight(Config params) const override;
    std::string name() const override { return "composed"; }
    nlohmann::json describe() const override;

    /// sigma = G p + b, written into `out` (length n).
    void map(Config params, std::uint32_t* out) const;

private:
    WeightPtr inner_;
    std::shared_ptr<const Field> field_;
    FieldMatrix G_;
    FieldVector b_;
};

/// prod_i D[i][sigma_i]; zero for anything that is not a permutation of 0..n-1.
class PermanentWeight final : public WeightModel {
public:
    PermanentWeight(std::vector<std::vector<double>> D, std::uint32_t q);

    Domain domain() const override { return {q_, D_.size()}; }
    double log_weight(Config sigma) const override;
    double weight(Config sigma) const override;
    std::optional<LogLinearForm> log_linear_form() const override;
    std::string name() const override { return "permanent"; }
    nlohmann::json describe() const override;

    const std::vector<std::vector<double>>& matrix() const noexcept { return D_; }

private:
    std::vector<std::vector<double>> D_;
    std::uint32_t q_;
};

/// Raises when sigma is not a permutation of 0..n-1.
double permutation_weight(const std::vector<std::vector<double>>& D, Config sigma);

struct ExactSum {
    double value = 0;
    /// -inf when value is zero.
    double log_value = 0;
};

/// Brute-force sum over F_q^n (q^n <= 1e8).
ExactSum exact_sum(const WeightModel& w);
ExactSum exact_partition(const PottsModel& model);

/// Simple d-regular graph on n vertices by the pairing model with rejection.
Graph random_regular_graph(std::size_t n, std::size_t d, std::uint64_t seed);

struct HellingerBracket {
    double h2 = 0;
    double lower = 0;
    double upper = 0;
};

/// (h^2/2, h sqrt(1 - h^2/4)) with h = h(P^n, Q^n) from the product formula.
HellingerBracket hellinger_bracket(const ProductDistributionPair& pair);
/// Squared Hellinger distance between two distributions, sum (sqrt p - sqrt q)^2.
double hellinger_squared(const std::vector<double>& P, const std::vector<double>& Q);

/// Builds a weight model from its JSON description. Recognized "type" values:
/// potts (default when absent), product, markov, table, constant.
WeightPtr model_from_json(const nlohmann::json& j);
WeightPtr load_model(const std::string& path);

/// Lexicographic rank of sigma (coordinate 0 most significant) and its inverse.
std::uint64_t config_rank(Config sigma, std::uint32_t q);
void config_unrank(std::uint64_t rank, std::uint32_t q, std::span<std::uint32_t> out);

/// q^n, or std::nullopt when it exceeds `limit`.
std::optional<std::uint64_t> domain_size(std::uint32_t q, std::size_t n,
                                         std::uint64_t limit = ~0ULL);

}  // namespace mbwish
