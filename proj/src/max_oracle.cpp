#include "mbwish/max_oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace mbwish {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
using Clock = std::chrono::steady_clock;

struct Deadline {
    std::optional<Clock::time_point> at;
    std::uint64_t tick = 0;

    explicit Deadline(std::optional<double> seconds) {
        if (seconds) at = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(*seconds));
    }
    // Polls the clock every 1024 steps.
    bool expired() {
        if (!at) return false;
        if ((++tick & 1023U) != 0) return false;
        return Clock::now() >= *at;
    }
};

/// Running best under (larger log weight, then lexicographically smaller key).
struct Best {
    bool found = false;
    double log = kNegInf;
    std::vector<std::uint32_t> sigma;
    std::vector<std::uint32_t> key;

    // Strict improvement only: the first candidate wins ties in enumeration order.
    void offer_in_order(double l, const std::uint32_t* s, std::size_t n) {
        if (!found || l > log) {
            found = true;
            log = l;
            sigma.assign(s, s + n);
        }
    }
    // Order-free: ties go to the lexicographically smaller key.
    void offer_keyed(double l, const std::uint32_t* s, const std::uint32_t* k, std::size_t n) {
        if (!found || l > log ||
            (l == log && std::lexicographical_compare(k, k + n, key.begin(), key.end()))) {
            found = true;
            log = l;
            sigma.assign(s, s + n);
            key.assign(k, k + n);
        }
    }
};

bool is_permutation_config(const std::uint32_t* s, std::size_t n) {
    std::uint64_t seen = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (s[i] >= n || (seen >> s[i] & 1U)) return false;
        seen |= 1ULL << s[i];
    }
    return true;
}

std::optional<std::uint64_t> factorial(std::size_t n, std::uint64_t limit) {
    std::uint64_t r = 1;
    for (std::size_t i = 2; i <= n; ++i) {
        if (r > limit / i) return std::nullopt;
        r *= i;
    }
    return r;
}

OracleAnswer finish(const OracleQuery& query, const Best& best, bool timed_out, std::uint64_t evals,
                    const std::vector<std::uint32_t>* parameter = nullptr) {
    OracleAnswer a;
    a.evaluations = evals;
    if (best.found) {
        a.witness = best.sigma;
        a.value = query.weight->weight(best.sigma);
        a.log_value = a.value > 0 ? query.weight->log_weight(best.sigma) : kNegInf;
        if (parameter) a.parameter = *parameter;
    } else {
        a.value = 0;
        a.log_value = kNegInf;
    }
    if (timed_out)
        a.status = OracleStatus::TimedOutLowerBound;
    else
        a.status = best.found ? OracleStatus::Exact : OracleStatus::EmptyFeasibleSet;
    return a;
}

/// Pivot rows of A with the RREF data needed to solve for feasible points directly.
struct CosetPlan {
    std::vector<std::size_t> rows;
    std::vector<std::size_t> pivots;
    std::vector<std::size_t> free_cols;
    FieldMatrix E;  // rho x n
    FieldMatrix T;  // rho x rho
    std::uint64_t candidates = 0;
    bool feasible = false;
};

CosetPlan plan_cosets(const MultiBinHash& h, std::uint64_t limit) {
    const Field& F = *h.field;
    const std::size_t n = h.n();
    CosetPlan plan;
    FieldMatrix chosen(0, n);
    for (std::size_t j = 0; j < h.m() && plan.rows.size() < n; ++j) {
        FieldMatrix trial = chosen;
        trial.rows += 1;
        for (std::size_t c = 0; c < n; ++c) trial.data.push_back(h.A.at(j, c));
        if (rank(F, trial) == trial.rows) {
            chosen = std::move(trial);
            plan.rows.push_back(j);
        }
    }
    const std::size_t rho = plan.rows.size();
    FieldMatrix aug(rho, n + rho);
    for (std::size_t i = 0; i < rho; ++i) {
        for (std::size_t c = 0; c < n; ++c) aug.at(i, c) = chosen.at(i, c);
        aug.at(i, n + i) = F.one();
    }
    plan.pivots = rref(F, aug, n);
    plan.E = FieldMatrix(rho, n);
    plan.T = FieldMatrix(rho, rho);
    for (std::size_t i = 0; i < rho; ++i) {
        for (std::size_t c = 0; c < n; ++c) plan.E.at(i, c) = aug.at(i, c);
        for (std::size_t c = 0; c < rho; ++c) plan.T.at(i, c) = aug.at(i, n + c);
    }
    std::vector<bool> is_pivot(n, false);
    for (auto c : plan.pivots) is_pivot[c] = true;
    for (std::size_t c = 0; c < n; ++c)
        if (!is_pivot[c]) plan.free_cols.push_back(c);

    std::uint64_t cand = 1;
    plan.feasible = true;
    auto mul = [&](std::uint64_t f) {
        if (f == 0) {
            cand = 0;
            return;
        }
        if (cand > limit / f) plan.feasible = false;
        else cand *= f;
    };
    for (auto j : plan.rows) mul(h.threshold[j]);
    for (std::size_t i = 0; i < plan.free_cols.size() && plan.feasible; ++i) mul(F.q());
    plan.candidates = plan.feasible ? cand : limit + 1;
    return plan;
}

double acceptance_rate(const MultiBinHash& h) {
    double p = 1;
    for (auto t : h.threshold) p *= static_cast<double>(std::min(t, h.field->q())) / h.field->q();
    return p;
}

}  // namespace

// ---- parametric domains ----

std::uint64_t ParametricDomain::size() const {
    if (kind == Kind::LexPrefix) return count;
    std::uint64_t s = 1;
    for (auto r : radices) {
        if (r != 0 && s > ~0ULL / r) return ~0ULL;
        s *= r;
    }
    return s;
}

bool ParametricDomain::contains(const std::uint32_t* p) const {
    const std::size_t k = n();
    if (kind == Kind::Product) {
        for (std::size_t j = 0; j < k; ++j)
            if (p[j] >= radices[j]) return false;
        return true;
    }
    // Lexicographic rank below count, without overflowing.
    const std::uint32_t q = field->q();
    std::uint64_t rank = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (rank >= count || rank > (~0ULL - p[j]) / q) return false;
        rank = rank * q + p[j];
    }
    return rank < count;
}

void ParametricDomain::map(const std::uint32_t* p, std::uint32_t* sigma) const {
    const Field& F = *field;
    const std::size_t k = n();
    for (std::size_t i = 0; i < k; ++i) {
        std::uint32_t acc = b[i].index;
        for (std::size_t j = 0; j < k; ++j) acc = F.add_raw(acc, F.mul_raw(G.at(i, j).index, p[j]));
        sigma[i] = acc;
    }
}

void ParametricDomain::preimage(const std::uint32_t* sigma, std::uint32_t* p) const {
    const Field& F = *field;
    const std::size_t k = n();
    std::uint32_t shifted[64];
    std::vector<std::uint32_t> heap;
    std::uint32_t* d = shifted;
    if (k > 64) {
        heap.resize(k);
        d = heap.data();
    }
    for (std::size_t i = 0; i < k; ++i) d[i] = F.sub_raw(sigma[i], b[i].index);
    for (std::size_t i = 0; i < k; ++i) {
        std::uint32_t acc = 0;
        for (std::size_t j = 0; j < k; ++j) acc = F.add_raw(acc, F.mul_raw(G_inverse.at(i, j).index, d[j]));
        p[i] = acc;
    }
}

ParametricDomain make_parametric_domain(std::shared_ptr<const Field> field, ParametricDomain::Kind kind,
                                        std::vector<std::uint32_t> radices, std::uint64_t count,
                                        FieldMatrix G, FieldVector b) {
    if (!field) throw std::invalid_argument("parametric domain: null field");
    if (G.rows != G.cols || b.size() != G.rows)
        throw std::invalid_argument("parametric domain: G must be square and match b");
    auto inv = inverse(*field, G);
    if (!inv) throw std::invalid_argument("parametric domain: G is singular");
    if (kind == ParametricDomain::Kind::Product) {
        if (radices.size() != G.cols) throw std::invalid_argument("parametric domain: radix count mismatch");
        for (auto r : radices)
            if (r > field->q()) throw std::invalid_argument("parametric domain: radix exceeds q");
    }
    ParametricDomain d;
    d.field = std::move(field);
    d.kind = kind;
    d.radices = std::move(radices);
    d.count = count;
    d.G = std::move(G);
    d.b = std::move(b);
    d.G_inverse = std::move(*inv);
    return d;
}

// ---- queries ----

std::string to_string(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::Unconstrained: return "unconstrained";
        case ConstraintKind::MultiBin: return "multibin";
        case ConstraintKind::MultiBinPermutation: return "multibin-permutation";
        case ConstraintKind::Parametric: return "parametric";
    }
    return "unconstrained";
}

std::string to_string(OracleStatus s) {
    switch (s) {
        case OracleStatus::Exact: return "exact";
        case OracleStatus::TimedOutLowerBound: return "timed-out-lower-bound";
        case OracleStatus::EmptyFeasibleSet: return "empty";
    }
    return "exact";
}

OracleQuery OracleQuery::unconstrained(WeightPtr w) {
    OracleQuery q;
    q.weight = std::move(w);
    q.kind = ConstraintKind::Unconstrained;
    return q;
}

OracleQuery OracleQuery::multibin(WeightPtr w, MultiBinHash h) {
    OracleQuery q;
    q.weight = std::move(w);
    q.kind = ConstraintKind::MultiBin;
    q.hash = std::move(h);
    return q;
}

OracleQuery OracleQuery::permutation(WeightPtr w, MultiBinHash h) {
    OracleQuery q = multibin(std::move(w), std::move(h));
    q.kind = ConstraintKind::MultiBinPermutation;
    return q;
}

OracleQuery OracleQuery::parametric(WeightPtr w, std::shared_ptr<const ParametricDomain> d) {
    OracleQuery q;
    q.weight = std::move(w);
    q.kind = ConstraintKind::Parametric;
    q.domain = std::move(d);
    return q;
}

void OracleQuery::validate() const {
    if (!weight) throw std::invalid_argument("oracle query: missing weight");
    const Domain d = weight->domain();
    switch (kind) {
        case ConstraintKind::Unconstrained: break;
        case ConstraintKind::MultiBin:
        case ConstraintKind::MultiBinPermutation:
            if (!hash) throw std::invalid_argument("oracle query: missing hash");
            if (hash->n() != d.n || hash->field->q() != d.q)
                throw std::invalid_argument("oracle query: hash dimensions do not match the weight domain");
            if (hash->threshold.size() != hash->m())
                throw std::invalid_argument("oracle query: threshold length mismatch");
            if (kind == ConstraintKind::MultiBinPermutation && d.q <= d.n)
                throw std::invalid_argument("oracle query: permutation constraint needs q > n");
            break;
        case ConstraintKind::Parametric:
            if (!domain) throw std::invalid_argument("oracle query: missing parameter domain");
            if (domain->n() != d.n || domain->field->q() != d.q)
                throw std::invalid_argument("oracle query: parameter map does not match the weight domain");
            break;
    }
}

// ---- the exhaustive oracle ----

struct ExhaustiveOracle::Table {
    std::size_t n = 0;
    std::size_t count = 0;
    std::vector<std::uint32_t> configs;  // count * n, sorted by weight descending
    std::vector<double> logw;
    /// Cache entries are keyed by address; this detects a reused address.
    std::weak_ptr<const WeightModel> owner;

    const std::uint32_t* at(std::size_t i) const { return configs.data() + i * n; }
};

ExhaustiveOracle::ExhaustiveOracle(OracleOptions options) : options_(std::move(options)) {}

std::shared_ptr<const ExhaustiveOracle::Table> ExhaustiveOracle::table_for(const WeightPtr& weight,
                                                                           bool permutations) const {
    if (options_.strategy != OracleStrategy::Auto) return nullptr;
    const Domain d = weight->domain();
    std::optional<std::uint64_t> count =
        permutations ? factorial(d.n, options_.max_table) : domain_size(d.q, d.n, options_.max_table);
    if (!count || *count * d.n > (1ULL << 25)) return nullptr;
    if (permutations && d.q <= d.n) return nullptr;

    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_pair(weight.get(), permutations);
    if (auto it = tables_.find(key); it != tables_.end()) {
        if (!it->second->owner.expired()) return it->second;
        tables_.erase(it);
    }
    std::erase_if(tables_, [](const auto& entry) { return entry.second->owner.expired(); });

    std::vector<std::uint32_t> raw(*count * d.n);
    if (permutations) {
        std::vector<std::uint32_t> p(d.n);
        std::iota(p.begin(), p.end(), 0U);
        std::size_t i = 0;
        do {
            std::copy(p.begin(), p.end(), raw.begin() + static_cast<std::ptrdiff_t>(i * d.n));
            ++i;
        } while (std::next_permutation(p.begin(), p.end()));
    } else {
        for (std::uint64_t s = 0; s < *count; ++s)
            config_unrank(s, d.q, std::span<std::uint32_t>(raw.data() + s * d.n, d.n));
    }
    std::vector<double> lw(*count);
    for (std::uint64_t s = 0; s < *count; ++s)
        lw[s] = weight->log_weight(std::span<const std::uint32_t>(raw.data() + s * d.n, d.n));
    std::vector<std::uint32_t> order(*count);
    std::iota(order.begin(), order.end(), 0U);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return lw[a] > lw[b]; });

    auto table = std::make_shared<Table>();
    table->n = d.n;
    table->owner = weight;
    table->count = *count;
    table->configs.resize(raw.size());
    table->logw.resize(*count);
    for (std::size_t i = 0; i < *count; ++i) {
        std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(order[i] * d.n), d.n,
                    table->configs.begin() + static_cast<std::ptrdiff_t>(i * d.n));
        table->logw[i] = lw[order[i]];
    }
    tables_.emplace(key, table);
    return table;
}

void ExhaustiveOracle::prepare(const WeightPtr& weight) const {
    table_for(weight, false);
}

namespace {

// Reference enumeration of F_q^n (or S_n) in lexicographic order with an acceptance filter.
template <typename Accept>
OracleAnswer scan(const OracleQuery& query, bool permutations, std::uint64_t limit, Deadline& deadline,
                  Accept&& accept) {
    const Domain d = query.weight->domain();
    if (permutations) {
        if (d.n > 10) throw DomainTooLarge("permutation scan limited to n <= 10");
    } else if (!domain_size(d.q, d.n, limit)) {
        throw DomainTooLarge("domain q^n exceeds the enumeration limit");
    }
    Best best;
    std::uint64_t evals = 0;
    bool timed_out = false;
    std::vector<std::uint32_t> s(d.n, 0);
    if (permutations) std::iota(s.begin(), s.end(), 0U);
    for (;;) {
        if (deadline.expired()) {
            timed_out = true;
            break;
        }
        ++evals;
        if (accept(s.data())) best.offer_in_order(query.weight->log_weight(s), s.data(), d.n);
        if (permutations) {
            if (!std::next_permutation(s.begin(), s.end())) break;
        } else {
            bool advanced = false;
            for (std::size_t i = d.n; i-- > 0;) {
                if (++s[i] < d.q) {
                    advanced = true;
                    break;
                }
                s[i] = 0;
            }
            if (!advanced) break;
        }
    }
    return finish(query, best, timed_out, evals);
}

OracleAnswer coset_enumerate(const OracleQuery& query, const CosetPlan& plan, bool permutations,
                             Deadline& deadline) {
    const MultiBinHash& h = *query.hash;
    const Field& F = *h.field;
    const std::size_t n = h.n();
    const std::size_t rho = plan.rows.size();
    Best best;
    std::uint64_t evals = 0;
    bool timed_out = false;

    std::vector<std::uint32_t> y(rho, 0), c(rho), rhs(rho), f(plan.free_cols.size(), 0), s(n);
    auto next = [](std::vector<std::uint32_t>& v, auto radix) {
        for (std::size_t i = v.size(); i-- > 0;) {
            if (++v[i] < radix(i)) return true;
            v[i] = 0;
        }
        return false;
    };
    if (plan.candidates == 0) return finish(query, best, false, 0);
    do {
        for (std::size_t i = 0; i < rho; ++i) rhs[i] = F.sub_raw(y[i], h.b[plan.rows[i]].index);
        for (std::size_t i = 0; i < rho; ++i) {
            std::uint32_t acc = 0;
            for (std::size_t j = 0; j < rho; ++j) acc = F.add_raw(acc, F.mul_raw(plan.T.at(i, j).index, rhs[j]));
            c[i] = acc;
        }
        std::fill(f.begin(), f.end(), 0U);
        do {
            if (deadline.expired()) {
                timed_out = true;
                break;
            }
            for (std::size_t j = 0; j < f.size(); ++j) s[plan.free_cols[j]] = f[j];
            for (std::size_t i = 0; i < rho; ++i) {
                std::uint32_t acc = c[i];
                for (std::size_t j = 0; j < f.size(); ++j)
                    acc = F.sub_raw(acc, F.mul_raw(plan.E.at(i, plan.free_cols[j]).index, f[j]));
                s[plan.pivots[i]] = acc;
            }
            ++evals;
            if (h.accepts_raw(s.data()) && (!permutations || is_permutation_config(s.data(), n)))
                best.offer_keyed(query.weight->log_weight(s), s.data(), s.data(), n);
        } while (next(f, [&](std::size_t) { return F.q(); }));
        if (timed_out) break;
    } while (next(y, [&](std::size_t i) { return h.threshold[plan.rows[i]]; }));
    return finish(query, best, timed_out, evals);
}

template <typename Table, typename Accept>
OracleAnswer ranked(const OracleQuery& query, const Table& table, Deadline& deadline, Accept&& accept) {
    Best best;
    std::uint64_t evals = 0;
    bool timed_out = false;
    for (std::size_t i = 0; i < table.count; ++i) {
        if (deadline.expired()) {
            timed_out = true;
            break;
        }
        ++evals;
        if (accept(table.at(i))) {
            best.offer_in_order(table.logw[i], table.at(i), table.n);
            break;
        }
    }
    return finish(query, best, timed_out, evals);
}

}  // namespace

OracleAnswer ExhaustiveOracle::solve(const OracleQuery& query) const {
    query.validate();
    Deadline deadline(query.budget_seconds ? query.budget_seconds : options_.budget_seconds);
    const Domain d = query.weight->domain();
    const std::uint64_t limit = options_.max_evaluations;
    const bool autoselect = options_.strategy == OracleStrategy::Auto;

    switch (query.kind) {
        case ConstraintKind::Unconstrained: {
            if (auto t = autoselect ? table_for(query.weight, false) : nullptr)
                return ranked(query, *t, deadline, [](const std::uint32_t*) { return true; });
            return scan(query, false, limit, deadline, [](const std::uint32_t*) { return true; });
        }
        case ConstraintKind::MultiBin:
        case ConstraintKind::MultiBinPermutation: {
            const bool perm = query.kind == ConstraintKind::MultiBinPermutation;
            const MultiBinHash& h = *query.hash;
            auto accept = [&](const std::uint32_t* s) {
                return h.accepts_raw(s) && (!perm || is_permutation_config(s, d.n));
            };
            if (!autoselect) return scan(query, perm, limit, deadline, accept);

            const auto full = perm ? factorial(d.n, ~0ULL) : domain_size(d.q, d.n);
            const double domain_count = full ? static_cast<double>(*full) : 1e300;
            const CosetPlan plan = plan_cosets(h, limit);
            // Coset candidates each need a weight evaluation; weigh them double.
            const double coset_cost = plan.feasible ? 2.0 * static_cast<double>(plan.candidates) : 1e300;
            auto table = table_for(query.weight, perm);
            const double rate = acceptance_rate(h);
            const double ranked_cost =
                table ? std::min(domain_count, rate > 0 ? 1.0 / rate : 1e300) : 1e300;
            const double scan_cost = 2.0 * domain_count;
            if (table && ranked_cost <= coset_cost) return ranked(query, *table, deadline, accept);
            if (plan.feasible && coset_cost <= scan_cost) return coset_enumerate(query, plan, perm, deadline);
            return scan(query, perm, limit, deadline, accept);
        }
        case ConstraintKind::Parametric: {
            const ParametricDomain& dom = *query.domain;
            auto t = autoselect ? table_for(query.weight, false) : nullptr;
            // Tiny parameter sets are cheaper to walk directly than to find in the table.
            if (t) {
                const double sz = static_cast<double>(dom.size());
                if (2.0 * sz < static_cast<double>(t->count) / (sz + 1.0)) t = nullptr;
            }
            if (t) {
                // First accepted entry fixes the maximum; ties resolved by smallest parameter.
                Best best;
                std::uint64_t evals = 0;
                bool timed_out = false;
                std::vector<std::uint32_t> p(d.n);
                for (std::size_t i = 0; i < t->count; ++i) {
                    if (deadline.expired()) {
                        timed_out = true;
                        break;
                    }
                    if (best.found && t->logw[i] < best.log) break;
                    ++evals;
                    dom.preimage(t->at(i), p.data());
                    if (dom.contains(p.data())) best.offer_keyed(t->logw[i], t->at(i), p.data(), d.n);
                }
                const std::vector<std::uint32_t> param = best.key;
                return finish(query, best, timed_out, evals, best.found ? &param : nullptr);
            }
            const std::uint64_t size = dom.size();
            if (size > limit) throw DomainTooLarge("parameter domain exceeds the enumeration limit");
            Best best;
            std::uint64_t evals = 0;
            bool timed_out = false;
            std::vector<std::uint32_t> p(d.n, 0), s(d.n);
            for (std::uint64_t idx = 0; idx < size; ++idx) {
                if (deadline.expired()) {
                    timed_out = true;
                    break;
                }
                if (dom.kind == ParametricDomain::Kind::LexPrefix)
                    config_unrank(idx, d.q, p);
                dom.map(p.data(), s.data());
                ++evals;
                const double l = query.weight->log_weight(s);
                if (!best.found || l > best.log) {
                    best.found = true;
                    best.log = l;
                    best.sigma = s;
                    best.key = p;
                }
                if (dom.kind == ParametricDomain::Kind::Product) {
                    for (std::size_t j = d.n; j-- > 0;) {
                        if (++p[j] < dom.radices[j]) break;
                        p[j] = 0;
                    }
                }
            }
            const std::vector<std::uint32_t> param = best.key;
            return finish(query, best, timed_out, evals, best.found ? &param : nullptr);
        }
    }
    throw std::logic_error("unreachable constraint kind");
}

OracleAnswer exhaustive_max(const OracleQuery& query) {
    OracleOptions options;
    options.strategy = OracleStrategy::Scan;
    return ExhaustiveOracle(options).solve(query);
}

OracleAnswer exhaustive_max_permutation(const OracleQuery& query) {
    if (query.kind != ConstraintKind::MultiBinPermutation)
        throw std::invalid_argument("exhaustive_max_permutation: query must carry a permutation constraint");
    return exhaustive_max(query);
}

// ---- integer program export ----

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void export_ilp(const OracleQuery& query, std::ostream& out) {
    query.validate();
    if (query.kind != ConstraintKind::MultiBin && query.kind != ConstraintKind::MultiBinPermutation)
        throw std::invalid_argument("export_ilp: only multi-bin constraints can be exported");
    const auto form = query.weight->log_linear_form();
    if (!form) throw std::invalid_argument("export_ilp: weight model '" + query.weight->name() +
                                           "' has no log-linear objective");
    const MultiBinHash& h = *query.hash;
    const Field& F = *h.field;
    const std::uint32_t q = F.q(), p = F.p(), k = F.k();
    const std::size_t n = h.n();
    const bool perm = query.kind == ConstraintKind::MultiBinPermutation;

    auto x = [](std::size_t i, std::uint32_t v) { return "x_" + std::to_string(i) + "_" + std::to_string(v); };

    out << "mbwish-ilp 1\n";
    out << "domain q " << q << " p " << p << " k " << k << " n " << n << "\n";
    for (std::size_t i = 0; i < n; ++i)
        for (std::uint32_t v = 0; v < q; ++v) {
            const bool forbidden = form->unary[i][v] == kNegInf;
            out << "var " << x(i, v) << " 0 " << (forbidden ? 0 : 1) << "\n";
        }
    for (std::size_t j = 0; j < h.m(); ++j)
        for (std::uint32_t c = 0; c < k; ++c) {
            out << "var y_" << j << "_" << c << " 0 " << p - 1 << "\n";
            out << "var k_" << j << "_" << c << " 0 " << n << "\n";
        }
    std::ostringstream zcons;
    std::ostringstream zobj;
    for (std::size_t e = 0; e < form->pairs.size(); ++e) {
        const auto& pr = form->pairs[e];
        for (std::uint32_t va = 0; va < q; ++va)
            for (std::uint32_t vb = 0; vb < q; ++vb) {
                const double coef = pr.table[va * q + vb];
                if (coef == 0) continue;
                const std::string z = "z_" + std::to_string(e) + "_" + std::to_string(va) + "_" + std::to_string(vb);
                out << "var " << z << " 0 1\n";
                zcons << "con " << z << "_a <= 0 1 " << z << " -1 " << x(pr.a, va) << "\n";
                zcons << "con " << z << "_b <= 0 1 " << z << " -1 " << x(pr.b, vb) << "\n";
                zcons << "con " << z << "_ab >= -1 1 " << z << " -1 " << x(pr.a, va) << " -1 " << x(pr.b, vb) << "\n";
                zobj << " " << num(coef) << " " << z;
            }
    }
    for (std::size_t i = 0; i < n; ++i) {
        out << "con onehot_" << i << " = 1";
        for (std::uint32_t v = 0; v < q; ++v) out << " 1 " << x(i, v);
        out << "\n";
    }
    // Coefficient c of row j: sum coef_c(A_ji alpha_v) x_iv + coef_c(b_j) = p k_jc + y_jc.
    for (std::size_t j = 0; j < h.m(); ++j) {
        for (std::uint32_t c = 0; c < k; ++c) {
            out << "con row_" << j << "_" << c << " = " << -static_cast<long long>(F.coefficient(h.b[j], c));
            for (std::size_t i = 0; i < n; ++i)
                for (std::uint32_t v = 0; v < q; ++v) {
                    const auto coef = F.coefficient({F.mul_raw(h.A.at(j, i).index, v)}, c);
                    if (coef != 0) out << " " << coef << " " << x(i, v);
                }
            out << " -" << p << " k_" << j << "_" << c << " -1 y_" << j << "_" << c << "\n";
        }
        out << "con bin_" << j << " <= " << h.threshold[j] - 1;
        std::uint64_t weight = 1;
        for (std::uint32_t c = 0; c < k; ++c, weight *= p) out << " " << weight << " y_" << j << "_" << c;
        out << "\n";
    }
    if (perm) {
        for (std::uint32_t v = 0; v < n; ++v) {
            out << "con alldiff_" << v << " <= 1";
            for (std::size_t i = 0; i < n; ++i) out << " 1 " << x(i, v);
            out << "\n";
        }
        for (std::size_t i = 0; i < n; ++i) {
            out << "con cap_" << i << " = 0";
            for (std::uint32_t v = static_cast<std::uint32_t>(n); v < q; ++v) out << " 1 " << x(i, v);
            out << "\n";
        }
    }
    out << zcons.str();
    out << "obj max " << num(form->constant);
    for (std::size_t i = 0; i < n; ++i)
        for (std::uint32_t v = 0; v < q; ++v) {
            const double u = form->unary[i][v];
            if (u != 0 && u != kNegInf) out << " " << num(u) << " " << x(i, v);
        }
    out << zobj.str() << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        out << "decode " << i;
        for (std::uint32_t v = 0; v < q; ++v) out << " " << x(i, v);
        out << "\n";
    }
    out << "end\n";
}

void export_ilp(const OracleQuery& query, const std::string& path) {
    std::ostringstream buf;
    export_ilp(query, buf);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << buf.str();
}

IlpModel parse_ilp(std::istream& in) {
    IlpModel m;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("ilp line " + std::to_string(lineno) + ": " + why);
    };
    auto var_index = [&](const std::string& name) {
        auto it = m.index.find(name);
        if (it == m.index.end()) fail("unknown variable '" + name + "'");
        return it->second;
    };
    auto read_terms = [&](std::istringstream& ls) {
        std::vector<IlpModel::Term> terms;
        double coef;
        std::string name;
        while (ls >> coef) {
            if (!(ls >> name)) fail("coefficient without variable");
            terms.push_back({coef, var_index(name)});
        }
        return terms;
    };
    bool header = false, ended = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (!header) {
            int version = 0;
            if (tag != "mbwish-ilp" || !(ls >> version) || version != 1) fail("missing header");
            header = true;
            continue;
        }
        if (tag == "domain") {
            std::string a, b, c, d;
            if (!(ls >> a >> m.q >> b >> m.p >> c >> m.k >> d >> m.n)) fail("bad domain line");
            m.decode.assign(m.n, {});
        } else if (tag == "var") {
            IlpModel::Var v;
            if (!(ls >> v.name >> v.lo >> v.hi)) fail("bad var line");
            if (m.index.count(v.name)) fail("duplicate variable");
            m.index[v.name] = m.vars.size();
            m.vars.push_back(v);
        } else if (tag == "con") {
            IlpModel::Constraint c;
            if (!(ls >> c.name >> c.sense >> c.rhs)) fail("bad con line");
            if (c.sense != "<=" && c.sense != ">=" && c.sense != "=") fail("bad sense");
            c.terms = read_terms(ls);
            m.constraints.push_back(std::move(c));
        } else if (tag == "obj") {
            std::string dir;
            if (!(ls >> dir >> m.objective_constant) || dir != "max") fail("bad obj line");
            m.objective = read_terms(ls);
        } else if (tag == "decode") {
            std::size_t i;
            if (!(ls >> i) || i >= m.decode.size()) fail("bad decode line");
            std::string name;
            while (ls >> name) m.decode[i].push_back(var_index(name));
        } else if (tag == "end") {
            ended = true;
            break;
        } else {
            fail("unknown directive '" + tag + "'");
        }
    }
    if (!header || !ended) throw std::invalid_argument("ilp: truncated file");
    return m;
}

}  // namespace mbwish
