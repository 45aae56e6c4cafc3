#include "mbwish/weight_models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mbwish/random.hpp"

namespace mbwish {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0 ? std::log(x) : kNegInf; }

void check_distribution(const std::vector<double>& p, double tol, const char* what) {
    if (p.size() < 2) throw std::invalid_argument(std::string(what) + ": need at least 2 states");
    double s = 0;
    for (double v : p) {
        if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": negative or non-finite entry");
        s += v;
    }
    if (std::abs(s - 1.0) > tol) throw std::invalid_argument(std::string(what) + ": entries do not sum to 1");
}

void check_config(Config sigma, const Domain& d) {
    if (sigma.size() != d.n) throw std::invalid_argument("weight: dimension mismatch");
}

double product_likelihood(const std::vector<double>& P, Config sigma) {
    double r = 1;
    for (auto v : sigma) r *= P[v];
    return r;
}

// Neumaier-compensated accumulator.
struct Compensated {
    double sum = 0;
    double c = 0;
    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            c += (sum - t) + x;
        else
            c += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + c; }
};

}  // namespace

double LogLinearForm::evaluate(Config sigma) const {
    double s = constant;
    for (std::size_t i = 0; i < unary.size(); ++i) {
        const double u = unary[i][sigma[i]];
        if (u == kNegInf) return kNegInf;
        s += u;
    }
    for (const auto& p : pairs) {
        const std::size_t q = unary.empty() ? 0 : unary[0].size();
        s += p.table[sigma[p.a] * q + sigma[p.b]];
    }
    return s;
}

double WeightModel::weight(Config sigma) const { return std::exp(log_weight(sigma)); }

double weight_of(const WeightModel& w, const FieldVector& sigma) {
    std::vector<std::uint32_t> raw(sigma.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = sigma[i].index;
    return w.weight(raw);
}

double log_weight_of(const WeightModel& w, const FieldVector& sigma) {
    std::vector<std::uint32_t> raw(sigma.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = sigma[i].index;
    return w.log_weight(raw);
}

void validate_graph(const Graph& g) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto [u, v] : g.edges) {
        if (u >= g.vertices || v >= g.vertices) throw std::invalid_argument("graph: edge endpoint out of range");
        if (u == v) throw std::invalid_argument("graph: self-loop");
        if (!seen.insert({std::min(u, v), std::max(u, v)}).second)
            throw std::invalid_argument("graph: duplicate edge");
    }
}

// ---- Potts ----

PottsModel::PottsModel(Graph graph, std::uint32_t q, double zeta, double J, double H)
    : graph_(std::move(graph)), q_(q), zeta_(zeta), J_(J), H_(H) {
    if (graph_.vertices < 1) throw std::invalid_argument("potts: need at least one vertex");
    if (q_ < 2) throw std::invalid_argument("potts: q must be >= 2");
    if (!std::isfinite(zeta_) || !std::isfinite(J_) || !std::isfinite(H_))
        throw std::invalid_argument("potts: non-finite parameter");
    validate_graph(graph_);
}

double PottsModel::log_weight(Config sigma) const {
    check_config(sigma, domain());
    std::size_t same = 0;
    for (auto [u, v] : graph_.edges) same += sigma[u] == sigma[v];
    std::size_t zeros = 0;
    for (auto s : sigma) zeros += s == 0;
    return -zeta_ * (J_ * static_cast<double>(same) + H_ * static_cast<double>(zeros));
}

std::optional<LogLinearForm> PottsModel::log_linear_form() const {
    LogLinearForm f;
    f.unary.assign(graph_.vertices, std::vector<double>(q_, 0.0));
    for (auto& u : f.unary) u[0] = -zeta_ * H_;
    for (auto [a, b] : graph_.edges) {
        LogLinearForm::Pair p;
        p.a = a;
        p.b = b;
        p.table.assign(static_cast<std::size_t>(q_) * q_, 0.0);
        for (std::uint32_t v = 0; v < q_; ++v) p.table[v * q_ + v] = -zeta_ * J_;
        f.pairs.push_back(std::move(p));
    }
    return f;
}

nlohmann::json PottsModel::describe() const {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [u, v] : graph_.edges) edges.push_back({u, v});
    return {{"type", "potts"}, {"vertices", graph_.vertices}, {"edges", edges}, {"q", q_},
            {"zeta", zeta_},   {"J", J_},                     {"H", H_}};
}

// ---- TV integrands ----

ProductDistributionPair::ProductDistributionPair(std::vector<double> P, std::vector<double> Q, std::size_t n)
    : P_(std::move(P)), Q_(std::move(Q)), n_(n) {
    check_distribution(P_, 1e-12, "product pair P");
    check_distribution(Q_, 1e-12, "product pair Q");
    if (P_.size() != Q_.size()) throw std::invalid_argument("product pair: P and Q differ in length");
    if (n_ < 1) throw std::invalid_argument("product pair: n must be >= 1");
}

double ProductDistributionPair::weight(Config sigma) const {
    check_config(sigma, domain());
    return std::abs(product_likelihood(P_, sigma) - product_likelihood(Q_, sigma)) / 2;
}

double ProductDistributionPair::log_weight(Config sigma) const { return safe_log(weight(sigma)); }

nlohmann::json ProductDistributionPair::describe() const {
    return {{"type", "product"}, {"P", P_}, {"Q", Q_}, {"n", n_}};
}

MarkovChainPair::MarkovChainPair(std::vector<double> P0, std::vector<double> Q0,
                                 std::vector<std::vector<double>> TP,
                                 std::vector<std::vector<double>> TQ, std::size_t n)
    : P0_(std::move(P0)), Q0_(std::move(Q0)), TP_(std::move(TP)), TQ_(std::move(TQ)), n_(n) {
    check_distribution(P0_, 1e-9, "markov P0");
    check_distribution(Q0_, 1e-9, "markov Q0");
    const std::size_t q = P0_.size();
    if (Q0_.size() != q || TP_.size() != q || TQ_.size() != q)
        throw std::invalid_argument("markov pair: inconsistent state counts");
    for (std::size_t i = 0; i < q; ++i) {
        if (TP_[i].size() != q || TQ_[i].size() != q)
            throw std::invalid_argument("markov pair: transition matrices must be q x q");
        check_distribution(TP_[i], 1e-9, "markov TP row");
        check_distribution(TQ_[i], 1e-9, "markov TQ row");
    }
    if (n_ < 1) throw std::invalid_argument("markov pair: n must be >= 1");
}

double MarkovChainPair::likelihood_p(Config sigma) const {
    double r = P0_[sigma[0]];
    for (std::size_t i = 1; i < sigma.size(); ++i) r *= TP_[sigma[i - 1]][sigma[i]];
    return r;
}

double MarkovChainPair::likelihood_q(Config sigma) const {
    double r = Q0_[sigma[0]];
    for (std::size_t i = 1; i < sigma.size(); ++i) r *= TQ_[sigma[i - 1]][sigma[i]];
    return r;
}

double MarkovChainPair::weight(Config sigma) const {
    check_config(sigma, domain());
    return std::abs(likelihood_p(sigma) - likelihood_q(sigma)) / 2;
}

double MarkovChainPair::log_weight(Config sigma) const { return safe_log(weight(sigma)); }

nlohmann::json MarkovChainPair::describe() const {
    return {{"type", "markov"}, {"P0", P0_}, {"Q0", Q0_}, {"TP", TP_}, {"TQ", TQ_}, {"n", n_}};
}

// ---- tables and wrappers ----

TableWeight::TableWeight(std::uint32_t q, std::size_t n, std::vector<double> values)
    : q_(q), n_(n), values_(std::move(values)) {
    const auto size = domain_size(q_, n_, 1ULL << 32);
    if (q_ < 2 || n_ < 1 || !size) throw std::invalid_argument("table weight: bad domain");
    if (values_.size() != *size) throw std::invalid_argument("table weight: table must cover F_q^n exactly");
    for (double v : values_)
        if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("table weight: negative or non-finite value");
}

double TableWeight::weight(Config sigma) const {
    check_config(sigma, domain());
    return values_[config_rank(sigma, q_)];
}

double TableWeight::log_weight(Config sigma) const { return safe_log(weight(sigma)); }

nlohmann::json TableWeight::describe() const {
    return {{"type", "table"}, {"q", q_}, {"n", n_}, {"values", values_}};
}

ConstantWeight::ConstantWeight(std::uint32_t q, std::size_t n, double value)
    : q_(q), n_(n), value_(value), log_value_(safe_log(value)) {
    if (q_ < 2 || n_ < 1) throw std::invalid_argument("constant weight: bad domain");
    if (!(value >= 0) || !std::isfinite(value)) throw std::invalid_argument("constant weight: bad value");
}

std::optional<LogLinearForm> ConstantWeight::log_linear_form() const {
    if (value_ <= 0) return std::nullopt;
    LogLinearForm f;
    f.constant = log_value_;
    f.unary.assign(n_, std::vector<double>(q_, 0.0));
    return f;
}

nlohmann::json ConstantWeight::describe() const {
    return {{"type", "constant"}, {"q", q_}, {"n", n_}, {"value", value_}};
}

ScaledWeight::ScaledWeight(WeightPtr inner, double factor)
    : inner_(std::move(inner)), factor_(factor), log_factor_(safe_log(factor)) {
    if (!inner_) throw std::invalid_argument("scaled weight: null inner model");
    if (!(factor > 0) || !std::isfinite(factor)) throw std::invalid_argument("scaled weight: factor must be positive");
}

double ScaledWeight::log_weight(Config sigma) const { return log_factor_ + inner_->log_weight(sigma); }
double ScaledWeight::weight(Config sigma) const { return factor_ * inner_->weight(sigma); }

std::optional<LogLinearForm> ScaledWeight::log_linear_form() const {
    auto f = inner_->log_linear_form();
    if (f) f->constant += log_factor_;
    return f;
}

nlohmann::json ScaledWeight::describe() const {
    return {{"type", "scaled"}, {"factor", factor_}, {"inner", inner_->describe()}};
}

ComposedWeight::ComposedWeight(WeightPtr inner, std::shared_ptr<const Field> field, FieldMatrix G, FieldVector b)
    : inner_(std::move(inner)), field_(std::move(field)), G_(std::move(G)), b_(std::move(b)) {
    if (!inner_ || !field_) throw std::invalid_argument("composed weight: null argument");
    const Domain d = inner_->domain();
    if (d.q != field_->q() || G_.rows != d.n || b_.size() != d.n)
        throw std::invalid_argument("composed weight: affine map does not match the inner domain");
}

void ComposedWeight::map(Config params, std::uint32_t* out) const {
    for (std::size_t i = 0; i < G_.rows; ++i) {
        std::uint32_t acc = b_[i].index;
        for (std::size_t j = 0; j < G_.cols; ++j)
            acc = field_->add_raw(acc, field_->mul_raw(G_.at(i, j).index, params[j]));
        out[i] = acc;
    }
}

double ComposedWeight::log_weight(Config params) const {
    std::vector<std::uint32_t> sigma(G_.rows);
    map(params, sigma.data());
    return inner_->log_weight(sigma);
}

double ComposedWeight::weight(Config params) const {
    std::vector<std::uint32_t> sigma(G_.rows);
    map(params, sigma.data());
    return inner_->weight(sigma);
}

nlohmann::json ComposedWeight::describe() const {
    return {{"type", "composed"}, {"inner", inner_->describe()}};
}

// ---- permanents ----

PermanentWeight::PermanentWeight(std::vector<std::vector<double>> D, std::uint32_t q)
    : D_(std::move(D)), q_(q) {
    const std::size_t n = D_.size();
    if (n < 1) throw std::invalid_argument("permanent: empty matrix");
    for (const auto& row : D_) {
        if (row.size() != n) throw std::invalid_argument("permanent: matrix must be square");
        for (double v : row)
            if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("permanent: entries must be nonnegative");
    }
    if (q_ <= n) throw std::invalid_argument("permanent: q must exceed n");
}

double PermanentWeight::weight(Config sigma) const {
    check_config(sigma, domain());
    const std::size_t n = D_.size();
    std::uint64_t seen = 0;
    double r = 1;
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = sigma[i];
        if (v >= n || (seen >> v & 1U)) return 0;
        seen |= 1ULL << v;
        r *= D_[i][v];
    }
    return r;
}

double PermanentWeight::log_weight(Config sigma) const {
    check_config(sigma, domain());
    const std::size_t n = D_.size();
    std::uint64_t seen = 0;
    double r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = sigma[i];
        if (v >= n || (seen >> v & 1U)) return kNegInf;
        seen |= 1ULL << v;
        r += safe_log(D_[i][v]);
    }
    return r;
}

// The all-different requirement is not log-linear; exporters add it as constraints.
std::optional<LogLinearForm> PermanentWeight::log_linear_form() const {
    const std::size_t n = D_.size();
    LogLinearForm f;
    f.unary.assign(n, std::vector<double>(q_, kNegInf));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t v = 0; v < n; ++v) f.unary[i][v] = safe_log(D_[i][v]);
    return f;
}

nlohmann::json PermanentWeight::describe() const {
    return {{"type", "permanent"}, {"matrix", D_}, {"q", q_}};
}

double permutation_weight(const std::vector<std::vector<double>>& D, Config sigma) {
    const std::size_t n = D.size();
    if (sigma.size() != n) throw std::invalid_argument("permutation_weight: dimension mismatch");
    std::vector<bool> seen(n, false);
    double r = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (sigma[i] >= n || seen[sigma[i]]) throw std::invalid_argument("permutation_weight: not a permutation");
        seen[sigma[i]] = true;
        r *= D[i][sigma[i]];
    }
    return r;
}

// ---- brute force ----

std::uint64_t config_rank(Config sigma, std::uint32_t q) {
    std::uint64_t r = 0;
    for (auto v : sigma) r = r * q + v;
    return r;
}

void config_unrank(std::uint64_t rank, std::uint32_t q, std::span<std::uint32_t> out) {
    for (std::size_t i = out.size(); i-- > 0;) {
        out[i] = static_cast<std::uint32_t>(rank % q);
        rank /= q;
    }
}

std::optional<std::uint64_t> domain_size(std::uint32_t q, std::size_t n, std::uint64_t limit) {
    std::uint64_t r = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (r > limit / q) return std::nullopt;
        r *= q;
    }
    return r;
}

ExactSum exact_sum(const WeightModel& w) {
    const Domain d = w.domain();
    const auto size = domain_size(d.q, d.n, 100'000'000ULL);
    if (!size) throw std::invalid_argument("exact_sum: domain too large for enumeration");
    std::vector<std::uint32_t> sigma(d.n, 0);
    Compensated raw;
    // Streaming log-sum-exp: running maximum and compensated scaled sum.
    double lmax = kNegInf;
    Compensated scaled;
    for (std::uint64_t s = 0; s < *size; ++s) {
        const double l = w.log_weight(sigma);
        raw.add(w.weight(sigma));
        if (l != kNegInf) {
            if (l > lmax) {
                const double factor = lmax == kNegInf ? 0.0 : std::exp(lmax - l);
                scaled.sum *= factor;
                scaled.c *= factor;
                lmax = l;
            }
            scaled.add(std::exp(l - lmax));
        }
        for (std::size_t i = d.n; i-- > 0;) {
            if (++sigma[i] < d.q) break;
            sigma[i] = 0;
        }
    }
    ExactSum out;
    const double rv = raw.value();
    if (std::isfinite(rv) && rv >= std::numeric_limits<double>::min() * 1e10) {
        out.value = rv;
        out.log_value = std::log(rv);
    } else {
        out.log_value = lmax == kNegInf ? kNegInf : lmax + std::log(scaled.value());
        out.value = std::exp(out.log_value);
    }
    return out;
}

ExactSum exact_partition(const PottsModel& model) { return exact_sum(model); }

Graph random_regular_graph(std::size_t n, std::size_t d, std::uint64_t seed) {
    if (d >= n || (n * d) % 2 != 0) throw std::invalid_argument("random_regular_graph: need d < n and n*d even");
    constexpr int kMaxAttempts = 100000;
    RandomStream rng(seed, {0x7265677567ULL});
    std::vector<std::size_t> points(n * d);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        for (std::size_t i = 0; i < points.size(); ++i) points[i] = i / d;
        for (std::size_t i = points.size(); i > 1; --i)
            std::swap(points[i - 1], points[rng.uniform(static_cast<std::uint32_t>(i))]);
        std::set<std::pair<std::size_t, std::size_t>> edges;
        bool ok = true;
        for (std::size_t i = 0; ok && i < points.size(); i += 2) {
            const auto u = std::min(points[i], points[i + 1]);
            const auto v = std::max(points[i], points[i + 1]);
            ok = u != v && edges.insert({u, v}).second;
        }
        if (ok) return Graph{n, {edges.begin(), edges.end()}};
    }
    throw std::runtime_error("random_regular_graph: pairing retries exhausted");
}

double hellinger_squared(const std::vector<double>& P, const std::vector<double>& Q) {
    if (P.size() != Q.size()) throw std::invalid_argument("hellinger: length mismatch");
    double s = 0;
    for (std::size_t i = 0; i < P.size(); ++i) {
        const double d = std::sqrt(P[i]) - std::sqrt(Q[i]);
        s += d * d;
    }
    return s;
}

HellingerBracket hellinger_bracket(const ProductDistributionPair& pair) {
    const double h1 = hellinger_squared(pair.P(), pair.Q());
    HellingerBracket b;
    // 2 - 2 (1 - h1/2)^n without cancellation.
    b.h2 = -2.0 * std::expm1(static_cast<double>(pair.n()) * std::log1p(-h1 / 2));
    const double h = std::sqrt(b.h2);
    b.lower = b.h2 / 2;
    b.upper = h * std::sqrt(1 - b.h2 / 4);
    return b;
}

// ---- JSON ----

WeightPtr model_from_json(const nlohmann::json& j) {
    const std::string type = j.value("type", std::string("potts"));
    if (type == "potts") {
        Graph g;
        g.vertices = j.at("vertices").get<std::size_t>();
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw std::invalid_argument("potts: edges must be pairs");
            g.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
        }
        return std::make_shared<PottsModel>(std::move(g), j.at("q").get<std::uint32_t>(),
                                            j.at("zeta").get<double>(), j.at("J").get<double>(),
                                            j.at("H").get<double>());
    }
    if (type == "product")
        return std::make_shared<ProductDistributionPair>(j.at("P").get<std::vector<double>>(),
                                                         j.at("Q").get<std::vector<double>>(),
                                                         j.at("n").get<std::size_t>());
    if (type == "markov")
        return std::make_shared<MarkovChainPair>(
            j.at("P0").get<std::vector<double>>(), j.at("Q0").get<std::vector<double>>(),
            j.at("TP").get<std::vector<std::vector<double>>>(),
            j.at("TQ").get<std::vector<std::vector<double>>>(), j.at("n").get<std::size_t>());
    if (type == "table")
        return std::make_shared<TableWeight>(j.at("q").get<std::uint32_t>(), j.at("n").get<std::size_t>(),
                                             j.at("values").get<std::vector<double>>());
    if (type == "constant")
        return std::make_shared<ConstantWeight>(j.at("q").get<std::uint32_t>(), j.at("n").get<std::size_t>(),
                                                j.at("value").get<double>());
    throw std::invalid_argument("unknown model type '" + type + "'");
}

WeightPtr load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("model file '" + path + "': " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("model file '" + path + "': " + e.what());
    }
}

}  // namespace mbwish
