#include "mbwish/mb_wish.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "mbwish/random.hpp"
#include "mbwish/work_pool.hpp"

namespace mbwish {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
using boost::multiprecision::cpp_int;

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

cpp_int big_pow(std::uint64_t base, std::size_t exp) {
    cpp_int r = 1;
    for (std::size_t i = 0; i < exp; ++i) r *= base;
    return r;
}

}  // namespace

// ---- configuration ----

std::uint32_t EstimatorConfig::bin_rank() const { return r != 0 ? r : (q - 1) / 2; }
double EstimatorConfig::t() const { return static_cast<double>(q) / bin_rank(); }
double EstimatorConfig::gamma() const { return compute_gamma(q, bin_rank()); }
std::size_t EstimatorConfig::ell() const {
    return ell_override ? *ell_override : compute_ell(q, bin_rank(), n, delta);
}
std::size_t EstimatorConfig::n_prime() const { return compute_n_prime(q, bin_rank(), n); }

void EstimatorConfig::validate() const {
    std::uint32_t p = 0, k = 0;
    if (!prime_power(q, p, k)) throw std::invalid_argument("q = " + std::to_string(q) + " is not a prime power");
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    const std::uint32_t rr = bin_rank();
    if (rr < 1 || 2 * rr >= q)
        throw std::invalid_argument("bin rank r = " + std::to_string(rr) + " must satisfy 1 <= r < q/2");
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (ell_override && *ell_override < 1) throw std::invalid_argument("ell must be at least 1");
    if (budget_seconds && !(*budget_seconds > 0)) throw std::invalid_argument("budget must be positive");
    if (construction == Construction::SparseToeplitz && (q != 2 || !(density > 0 && density <= 0.5)))
        throw std::invalid_argument("sparse Toeplitz hashing needs q = 2 and density in (0, 0.5]");
}

double compute_gamma(std::uint32_t q, std::uint32_t r) {
    const double ratio = static_cast<double>(r) / q;
    return static_cast<double>(q) / (3.0 * r) * (0.5 - ratio) * (0.5 - ratio);
}

std::size_t compute_ell(std::uint32_t q, std::uint32_t r, std::size_t n, double delta) {
    const double g = compute_gamma(q, r);
    if (!(g > 0)) throw std::invalid_argument("gamma must be positive (need 2r < q)");
    return static_cast<std::size_t>(std::ceil(std::log(2.0 * static_cast<double>(n) / delta) / g));
}

std::size_t compute_n_prime(std::uint32_t q, std::uint32_t r, std::size_t n) {
    if (r < 1 || r >= q) throw std::invalid_argument("n': need 1 <= r < q");
    // (q/r)^j >= q^n  <=>  q^j >= q^n r^j.
    const cpp_int qn = big_pow(q, n);
    cpp_int qj = 1, rj = 1;
    for (std::size_t j = 0;; ++j) {
        if (qj >= qn * rj) return j;
        qj *= q;
        rj *= r;
    }
}

// ---- aggregation ----

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of an empty list");
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
    std::nth_element(values.begin(), mid, values.end());
    return *mid;
}

std::size_t median_position(const std::vector<double>& keys) {
    if (keys.empty()) throw std::invalid_argument("median of an empty list");
    std::vector<std::size_t> idx(keys.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    return idx[(keys.size() - 1) / 2];
}

Combined combine(const std::vector<double>& M, const std::vector<double>& log_M, double t) {
    if (M.empty() || M.size() != log_M.size()) throw std::invalid_argument("combine: need matching nonempty M and log M");
    const std::size_t np = M.size() - 1;

    Compensated inner;
    for (std::size_t i = 0; i < np; ++i) inner.add(M[i + 1] * std::pow(t, static_cast<double>(i)));
    const double raw = M[0] + (t - 1) * inner.value();

    std::vector<double> terms;
    terms.reserve(M.size());
    terms.push_back(log_M[0]);
    const double lt1 = std::log(t - 1), lt = std::log(t);
    for (std::size_t i = 0; i < np; ++i) terms.push_back(lt1 + log_M[i + 1] + static_cast<double>(i) * lt);
    const double top = *std::max_element(terms.begin(), terms.end());
    Combined out;
    if (top == kNegInf) {
        out.value = 0;
        out.log_value = kNegInf;
        return out;
    }
    Compensated scaled;
    for (double x : terms) scaled.add(std::exp(x - top));
    out.log_value = top + std::log(scaled.value());
    const bool raw_ok = std::isfinite(raw) && raw >= 1e-290;
    out.value = raw_ok ? raw : std::exp(out.log_value);
    return out;
}

// ---- driver ----

Construction level_construction(const EstimatorConfig& config, std::size_t i) {
    if (i > config.n &&
        (config.construction == Construction::Toeplitz || config.construction == Construction::FieldMult))
        return Construction::Dense;
    return config.construction;
}

MultiBinHash level_hash(const EstimatorConfig& config, const std::shared_ptr<const Field>& field,
                        std::size_t i, std::size_t k) {
    RandomStream stream(config.seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k)});
    HashSampler sampler(field, i, config.n, level_construction(config, i), stream, config.bin_rank(),
                        config.density);
    return sampler.sample();
}

namespace {

struct Slot {
    double value = 0;
    double log_value = kNegInf;
    OracleStatus status = OracleStatus::Exact;
    bool done = false;
};

void fill_levels(EstimateReport& report, const std::vector<Slot>& slots, std::size_t np, std::size_t ell,
                 const LevelPlan& plan) {
    for (std::size_t i = 1; i <= np; ++i) {
        LevelRecord rec;
        rec.i = i;
        rec.regime = plan.regime ? plan.regime(i) : "multibin";
        for (std::size_t k = 0; k < ell; ++k) {
            const Slot& s = slots[(i - 1) * ell + k];
            if (!s.done) continue;
            rec.values.push_back(s.value);
            rec.log_values.push_back(s.log_value);
            rec.statuses.push_back(s.status);
        }
        report.levels.push_back(std::move(rec));
    }
}

}  // namespace

EstimateReport run_estimator(const EstimatorConfig& config, const WeightPtr& weight, const MaxOracle& oracle,
                             const LevelPlan& plan) {
    config.validate();
    if (!weight) throw std::invalid_argument("estimator: missing weight model");
    const Domain d = weight->domain();
    if (d.q != config.q || d.n != config.n)
        throw std::invalid_argument("estimator: weight domain does not match q and n");

    const auto start = std::chrono::steady_clock::now();
    EstimateReport report;
    report.variant = plan.variant;
    report.config = config;
    report.config.r = config.bin_rank();
    report.field = Field::make(config.q)->spec();
    report.model = weight->describe();

    const std::size_t np = config.n_prime();
    const std::size_t ell = config.ell();
    auto with_budget = [&](OracleQuery q) {
        if (config.budget_seconds && !q.budget_seconds) q.budget_seconds = config.budget_seconds;
        return q;
    };

    oracle.prepare(weight);
    OracleAnswer a0;
    try {
        a0 = oracle.solve(with_budget(plan.level0()));
    } catch (const DomainTooLarge&) {
        throw;
    } catch (const std::exception& e) {
        throw EstimationAborted(std::string("level 0 oracle call failed: ") + e.what(), report);
    }
    report.oracle_calls = 1;

    std::vector<Slot> slots(np * ell);
    try {
        parallel_for(np * ell, config.workers, [&](std::size_t idx) {
            const std::size_t i = idx / ell + 1, k = idx % ell;
            const OracleAnswer a = oracle.solve(with_budget(plan.query(i, k)));
            slots[idx] = Slot{a.value, a.log_value, a.status, true};
        });
    } catch (const DomainTooLarge&) {
        throw;
    } catch (const std::exception& e) {
        report.M = {a0.value};
        report.log_M = {a0.log_value};
        for (const auto& s : slots) report.oracle_calls += s.done;
        fill_levels(report, slots, np, ell, plan);
        throw EstimationAborted(std::string("oracle call failed: ") + e.what(), report);
    }
    report.oracle_calls += np * ell;
    fill_levels(report, slots, np, ell, plan);

    report.M.push_back(a0.value);
    report.log_M.push_back(a0.log_value);
    report.lower_bound_only = a0.status == OracleStatus::TimedOutLowerBound;
    for (const auto& rec : report.levels) {
        const std::size_t pos = median_position(rec.log_values);
        report.M.push_back(rec.values[pos]);
        report.log_M.push_back(rec.log_values[pos]);
        for (auto s : rec.statuses) report.lower_bound_only |= s == OracleStatus::TimedOutLowerBound;
    }
    const Combined c = combine(report.M, report.log_M, config.t());
    report.estimate = c.value;
    report.log_estimate = c.log_value;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

EstimateReport run_mb_wish(const EstimatorConfig& config, const WeightPtr& weight, const MaxOracle& oracle) {
    config.validate();
    const auto field = Field::make(config.q);
    LevelPlan plan;
    plan.variant = "constrained";
    plan.level0 = [&] { return OracleQuery::unconstrained(weight); };
    plan.query = [&](std::size_t i, std::size_t k) {
        return OracleQuery::multibin(weight, level_hash(config, field, i, k));
    };
    plan.regime = [](std::size_t) { return std::string("multibin"); };
    return run_estimator(config, weight, oracle, plan);
}

std::vector<PlannedQuery> plan_mb_wish(const EstimatorConfig& config, const WeightPtr& weight) {
    config.validate();
    const auto field = Field::make(config.q);
    std::vector<PlannedQuery> out;
    out.push_back({0, 0, OracleQuery::unconstrained(weight)});
    const std::size_t np = config.n_prime(), ell = config.ell();
    for (std::size_t i = 1; i <= np; ++i)
        for (std::size_t k = 0; k < ell; ++k)
            out.push_back({i, k, OracleQuery::multibin(weight, level_hash(config, field, i, k))});
    return out;
}

// ---- quantile truth ----

double QuantileTruth::at_rank(std::uint64_t j) const {
    if (j == 0) throw std::invalid_argument("ranks are 1-based");
    return j <= sorted.size() ? sorted[j - 1] : 0.0;
}

QuantileTruth quantile_truth(const WeightModel& weight) {
    const Domain d = weight.domain();
    const auto size = domain_size(d.q, d.n, 1ULL << 26);
    if (!size) throw std::invalid_argument("quantile_truth: domain too large");
    QuantileTruth t;
    t.sorted.resize(*size);
    std::vector<std::uint32_t> s(d.n);
    for (std::uint64_t i = 0; i < *size; ++i) {
        config_unrank(i, d.q, s);
        t.sorted[i] = weight.weight(s);
    }
    std::sort(t.sorted.begin(), t.sorted.end(), std::greater<>());
    return t;
}

std::vector<std::uint64_t> quantile_ranks(std::uint32_t q, std::uint32_t r, std::size_t n_prime, std::uint64_t cap) {
    std::vector<std::uint64_t> out;
    cpp_int qi = 1, ri = 1;
    for (std::size_t i = 0; i <= n_prime; ++i) {
        const cpp_int f = qi / ri;
        out.push_back(f >= cap ? cap : static_cast<std::uint64_t>(f));
        qi *= q;
        ri *= r;
    }
    return out;
}

std::vector<double> quantile_betas(const QuantileTruth& truth, const EstimatorConfig& config) {
    const auto ranks = quantile_ranks(config.q, config.bin_rank(), config.n_prime(), truth.sorted.size() + 1);
    std::vector<double> beta;
    for (auto j : ranks) beta.push_back(truth.at_rank(j));
    return beta;
}

QuantileBracket quantile_bracket(const QuantileTruth& truth, const EstimatorConfig& config) {
    const std::vector<double> beta = quantile_betas(truth, config);
    const std::size_t np = beta.size() - 1;
    const double t = config.t();
    Compensated lo, hi;
    for (std::size_t i = 0; i < np; ++i) {
        const double ti = std::pow(t, static_cast<double>(i));
        lo.add(beta[std::min(i + 2, np)] * ti);
        hi.add(beta[i] * ti);
    }
    return {beta[0] + (t - 1) * lo.value(), beta[0] + (t - 1) * hi.value()};
}

ConcentrationReport empirical_quantile_concentration(const EstimatorConfig& config, const WeightPtr& weight,
                                                     const QuantileTruth& truth, std::size_t level,
                                                     std::size_t trials, const MaxOracle& oracle) {
    config.validate();
    const std::vector<double> beta = quantile_betas(truth, config);
    const std::size_t np = beta.size() - 1;
    if (level > np) throw std::invalid_argument("concentration: level exceeds n'");
    if (trials < 1) throw std::invalid_argument("concentration: need at least one trial");
    const auto field = Field::make(config.q);
    ConcentrationReport rep;
    rep.level = level;
    rep.trials = trials;
    rep.ell = config.ell();
    rep.interval_low = beta[std::min(level + 1, np)];
    rep.interval_high = beta[level == 0 ? 0 : level - 1];
    oracle.prepare(weight);

    std::vector<char> hit(trials, 0);
    parallel_for(trials, config.workers, [&](std::size_t trial) {
        double m = 0;
        if (level == 0) {
            m = oracle.solve(OracleQuery::unconstrained(weight)).value;
        } else {
            std::vector<double> vals(rep.ell);
            for (std::size_t k = 0; k < rep.ell; ++k) {
                RandomStream stream(config.seed, {0x636f6e63ULL, level, trial, k});
                HashSampler sampler(field, level, config.n, level_construction(config, level), stream,
                                    config.bin_rank(), config.density);
                vals[k] = oracle.solve(OracleQuery::multibin(weight, sampler.sample())).value;
            }
            m = median(vals);
        }
        hit[trial] = m >= rep.interval_low && m <= rep.interval_high;
    });
    rep.hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
    rep.frequency = static_cast<double>(rep.hits) / static_cast<double>(trials);
    rep.bound = 1 - 2 * std::exp(-config.gamma() * static_cast<double>(rep.ell));
    const double p = std::clamp(rep.bound, 0.0, 1.0);
    rep.slack = 3 * std::sqrt(p * (1 - p) / static_cast<double>(trials));
    return rep;
}

}  // namespace mbwish
