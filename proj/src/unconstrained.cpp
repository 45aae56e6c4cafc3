#include "mbwish/unconstrained.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include <boost/multiprecision/cpp_int.hpp>

namespace mbwish {

using boost::multiprecision::cpp_int;

FieldMatrix sample_basis(const Field& field, std::size_t n, RandomStream& stream) {
    if (n < 1) throw std::invalid_argument("sample_basis: n must be >= 1");
    const std::size_t cap = 64 * n;
    std::size_t redraws = 0;
    FieldMatrix cols(0, n);  // chosen columns stored as rows
    while (cols.rows < n) {
        FieldMatrix trial = cols;
        trial.rows += 1;
        for (std::size_t i = 0; i < n; ++i) trial.data.push_back({stream.uniform(field.q())});
        if (rank(field, trial) == trial.rows) {
            cols = std::move(trial);
        } else if (++redraws > cap) {
            throw std::runtime_error("sample_basis: too many dependent draws");
        }
    }
    FieldMatrix out(n, n);
    for (std::size_t c = 0; c < n; ++c)
        for (std::size_t i = 0; i < n; ++i) out.at(i, c) = cols.at(c, i);
    return out;
}

FieldMatrix sample_basis(std::uint32_t q, std::size_t n, std::uint64_t seed) {
    const auto field = Field::make(q);
    RandomStream stream(seed);
    return sample_basis(*field, n, stream);
}

std::string to_string(Regime r) { return r == Regime::CosetUnion ? "coset-union" : "lex-set"; }

FieldMatrix GeneratorDomain::A() const {
    const FieldMatrix& G = domain->G;
    const std::size_t n = G.rows, cols = regime == Regime::CosetUnion ? n - m : n;
    FieldMatrix out(n, cols);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = G.at(i, j);
    return out;
}

FieldMatrix GeneratorDomain::R() const {
    if (regime != Regime::CosetUnion) return FieldMatrix(domain->G.rows, 0);
    const FieldMatrix& G = domain->G;
    const std::size_t n = G.rows;
    FieldMatrix out(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out.at(i, j) = G.at(i, n - m + j);
    return out;
}

LexBound lex_set(std::uint32_t q, std::size_t n, std::size_t m, std::uint32_t r) {
    if (m <= n) throw std::invalid_argument("lex_set: requires m > n");
    if (r < 1 || r >= q) throw std::invalid_argument("lex_set: need 1 <= r < q");
    cpp_int rm = 1, qd = 1;
    for (std::size_t i = 0; i < m; ++i) rm *= r;
    for (std::size_t i = 0; i < m - n; ++i) qd *= q;
    const cpp_int fl = rm / qd;
    const cpp_int K = (rm + qd - 1) / qd;
    LexBound b;
    b.n = n;
    b.m = m;
    // K <= q^n since r < q; both fit whenever q^n does.
    b.K = static_cast<std::uint64_t>(K);
    b.floor_size = static_cast<std::uint64_t>(fl);
    b.size = b.K == 0 ? 0 : b.K - 1;
    std::vector<std::uint32_t> digits(n);
    config_unrank(b.K == 0 ? 0 : b.K - 1, q, digits);
    for (auto d : digits) b.s_m.push_back({d});
    return b;
}

GeneratorDomain level_domain(const EstimatorConfig& config, const std::shared_ptr<const Field>& field,
                             std::size_t i, std::size_t k) {
    const std::size_t n = config.n;
    const std::uint32_t q = field->q(), r = config.bin_rank();
    RandomStream stream(config.seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k)});
    FieldMatrix G = sample_basis(*field, n, stream);
    FieldVector b(n);
    for (auto& e : b) e = {stream.uniform(q)};
    GeneratorDomain g;
    g.m = i;
    g.r = r;
    if (i <= n) {
        g.regime = Regime::CosetUnion;
        std::vector<std::uint32_t> radices(n, q);
        for (std::size_t j = n - i; j < n; ++j) radices[j] = r;
        g.domain = std::make_shared<ParametricDomain>(make_parametric_domain(
            field, ParametricDomain::Kind::Product, std::move(radices), 0, std::move(G), std::move(b)));
    } else {
        g.regime = Regime::LexSet;
        const LexBound lb = lex_set(q, n, i, r);
        g.domain = std::make_shared<ParametricDomain>(make_parametric_domain(
            field, ParametricDomain::Kind::LexPrefix, {}, lb.size, std::move(G), std::move(b)));
    }
    return g;
}

ImageAudit image_membership_audit(const GeneratorDomain& g) {
    const ParametricDomain& d = *g.domain;
    const std::size_t n = d.n();
    const std::uint32_t q = d.field->q();
    const auto qn = domain_size(q, n, 1'000'000);
    if (!qn) throw std::invalid_argument("image audit: q^n too large");
    ImageAudit a;
    a.regime = g.regime;
    if (g.regime == Regime::CosetUnion) {
        a.expected_size = 1;
        for (std::size_t j = 0; j < n - g.m; ++j) a.expected_size *= q;
        for (std::size_t j = 0; j < g.m; ++j) a.expected_size *= g.r;
    } else {
        a.expected_size = lex_set(q, n, g.m, g.r).size;
    }
    std::unordered_set<std::uint64_t> image;
    std::vector<std::uint32_t> p(n, 0), s(n);
    const std::uint64_t size = d.size();
    for (std::uint64_t idx = 0; idx < size; ++idx) {
        if (d.kind == ParametricDomain::Kind::LexPrefix) {
            config_unrank(idx, q, p);
        }
        d.map(p.data(), s.data());
        image.insert(config_rank(s, q));
        if (d.kind == ParametricDomain::Kind::Product) {
            for (std::size_t j = n; j-- > 0;) {
                if (++p[j] < d.radices[j]) break;
                p[j] = 0;
            }
        }
    }
    a.measured_size = image.size();
    return a;
}

MembershipStatistics membership_statistics(std::uint32_t q, std::size_t n, std::size_t m, std::uint32_t r,
                                           std::size_t draws, std::uint64_t seed) {
    const auto qn = domain_size(q, n, 4096);
    if (!qn) throw std::invalid_argument("membership statistics: q^n too large");
    if (draws < 1) throw std::invalid_argument("membership statistics: need draws >= 1");
    EstimatorConfig cfg;
    cfg.q = q;
    cfg.n = n;
    cfg.r = r;
    cfg.seed = seed;
    const auto field = Field::make(q);
    const std::size_t N = *qn;
    std::vector<std::uint64_t> marg(N, 0), joint(N * N, 0);
    std::vector<std::uint32_t> s(n), p(n);
    std::vector<std::size_t> in;
    for (std::size_t k = 0; k < draws; ++k) {
        const GeneratorDomain g = level_domain(cfg, field, m, k);
        in.clear();
        for (std::size_t x = 0; x < N; ++x) {
            config_unrank(x, q, s);
            g.domain->preimage(s.data(), p.data());
            if (g.domain->contains(p.data())) in.push_back(x);
        }
        for (std::size_t a = 0; a < in.size(); ++a) {
            ++marg[in[a]];
            for (std::size_t b = a + 1; b < in.size(); ++b) ++joint[in[a] * N + in[b]];
        }
    }
    MembershipStatistics st;
    st.q = q;
    st.r = r;
    st.n = n;
    st.m = m;
    st.draws = draws;
    st.target = m <= n ? std::pow(static_cast<double>(r) / q, static_cast<double>(m))
                       : static_cast<double>(lex_set(q, n, m, r).size) / static_cast<double>(N);
    const double D = static_cast<double>(draws);
    st.marginal_slack = 3 * std::sqrt(st.target * (1 - st.target) / D) + 1e-12;
    const double t2 = st.target * st.target;
    st.joint_slack = 3 * std::sqrt(t2 * (1 - t2) / D) + 1e-12;
    st.max_joint_excess = -1;
    for (std::size_t x = 0; x < N; ++x) {
        st.max_marginal_deviation = std::max(st.max_marginal_deviation, std::abs(marg[x] / D - st.target));
        for (std::size_t y = x + 1; y < N; ++y)
            st.max_joint_excess = std::max(st.max_joint_excess, joint[x * N + y] / D - t2);
    }
    return st;
}

EstimateReport run_unconstrained_mb_wish(const EstimatorConfig& config, const WeightPtr& weight,
                                         const MaxOracle& oracle) {
    config.validate();
    const auto field = Field::make(config.q);
    LevelPlan plan;
    plan.variant = "unconstrained";
    plan.level0 = [&] { return OracleQuery::unconstrained(weight); };
    plan.query = [&](std::size_t i, std::size_t k) {
        return OracleQuery::parametric(weight, level_domain(config, field, i, k).domain);
    };
    plan.regime = [&](std::size_t i) { return to_string(i <= config.n ? Regime::CosetUnion : Regime::LexSet); };
    return run_estimator(config, weight, oracle, plan);
}

}  // namespace mbwish
