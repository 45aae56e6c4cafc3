#include "mbwish/hash_family.hpp"

#include <cmath>
#include <stdexcept>

namespace mbwish {

namespace {

std::uint64_t checked_pow(std::uint64_t base, std::uint64_t exp, std::uint64_t limit) {
    std::uint64_t r = 1;
    for (std::uint64_t i = 0; i < exp; ++i) {
        if (r > limit / base) return limit + 1;
        r *= base;
    }
    return r;
}

void decode_digits(std::uint64_t code, std::uint32_t q, std::span<std::uint32_t> out) {
    for (auto& d : out) {
        d = static_cast<std::uint32_t>(code % q);
        code /= q;
    }
}

}  // namespace

std::string to_string(Construction c) {
    switch (c) {
        case Construction::Dense: return "dense";
        case Construction::Toeplitz: return "toeplitz";
        case Construction::SparseToeplitz: return "sparse-toeplitz";
        case Construction::FieldMult: return "fieldmult";
    }
    return "dense";
}

Construction construction_from_string(const std::string& name) {
    if (name == "dense") return Construction::Dense;
    if (name == "toeplitz") return Construction::Toeplitz;
    if (name == "sparse-toeplitz") return Construction::SparseToeplitz;
    if (name == "fieldmult") return Construction::FieldMult;
    throw std::invalid_argument("unknown hash construction '" + name + "'");
}

FieldVector MultiBinHash::evaluate(std::span<const FieldElement> x) const {
    if (x.size() != n()) throw std::invalid_argument("hash evaluate: dimension mismatch");
    FieldVector y = multiply(*field, A, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = field->add(y[i], b[i]);
    return y;
}

bool MultiBinHash::accepts(std::span<const FieldElement> sigma) const {
    if (sigma.size() != n()) throw std::invalid_argument("accepts: dimension mismatch");
    const FieldVector y = evaluate(sigma);
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i].index >= threshold[i]) return false;
    return true;
}

bool MultiBinHash::operator==(const MultiBinHash& other) const {
    return field->spec() == other.field->spec() && construction == other.construction &&
           A == other.A && b == other.b && r == other.r && threshold == other.threshold &&
           seed == other.seed && density == other.density;
}

bool accepts(const MultiBinHash& h, std::span<const FieldElement> sigma) {
    return h.accepts(sigma);
}

MultiBinHash make_hash(std::shared_ptr<const Field> field, Construction construction,
                       FieldMatrix A, FieldVector b, std::uint32_t r, std::uint64_t seed) {
    if (!field) throw std::invalid_argument("make_hash: null field");
    if (b.size() != A.rows) throw std::invalid_argument("make_hash: b length must equal rows of A");
    if (r < 1 || r > field->q()) throw std::invalid_argument("make_hash: bin rank out of range");
    for (auto e : A.data) (void)field->element(e.index);
    for (auto e : b) (void)field->element(e.index);
    MultiBinHash h;
    h.field = std::move(field);
    h.construction = construction;
    h.A = std::move(A);
    h.b = std::move(b);
    h.r = r;
    h.threshold.assign(h.A.rows, r);
    h.seed = seed;
    return h;
}

void to_json(nlohmann::json& j, const MultiBinHash& h) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < h.m(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < h.n(); ++c) row.push_back(h.A.at(i, c).index);
        rows.push_back(std::move(row));
    }
    nlohmann::json b = nlohmann::json::array();
    for (auto e : h.b) b.push_back(e.index);
    j = nlohmann::json{{"construction", to_string(h.construction)},
                       {"q", h.field->q()},
                       {"m", h.m()},
                       {"n", h.n()},
                       {"r", h.r},
                       {"A", std::move(rows)},
                       {"b", std::move(b)},
                       {"seed", h.seed},
                       {"field", h.field->spec()}};
    bool uniform = true;
    for (auto t : h.threshold) uniform = uniform && t == h.r;
    if (!uniform) j["threshold"] = h.threshold;
    if (h.construction == Construction::SparseToeplitz) j["density"] = h.density;
}

MultiBinHash hash_from_json(const nlohmann::json& j) {
    const auto q = j.at("q").get<std::uint32_t>();
    std::shared_ptr<const Field> field;
    if (j.contains("field")) {
        field = std::make_shared<const Field>(j.at("field").get<FieldSpec>());
        if (field->q() != q) throw std::invalid_argument("hash JSON: field spec disagrees with q");
    } else {
        field = Field::make(q);
    }
    const auto m = j.at("m").get<std::size_t>();
    const auto n = j.at("n").get<std::size_t>();
    FieldMatrix A(m, n);
    const auto& rows = j.at("A");
    if (rows.size() != m) throw std::invalid_argument("hash JSON: A has wrong row count");
    for (std::size_t i = 0; i < m; ++i) {
        if (rows[i].size() != n) throw std::invalid_argument("hash JSON: A has wrong column count");
        for (std::size_t c = 0; c < n; ++c) A.at(i, c) = {rows[i][c].get<std::uint32_t>()};
    }
    FieldVector b;
    for (const auto& e : j.at("b")) b.push_back({e.get<std::uint32_t>()});
    MultiBinHash h = make_hash(field, construction_from_string(j.at("construction").get<std::string>()),
                               std::move(A), std::move(b), j.at("r").get<std::uint32_t>(),
                               j.at("seed").get<std::uint64_t>());
    if (j.contains("threshold")) {
        h.threshold = j.at("threshold").get<std::vector<std::uint32_t>>();
        if (h.threshold.size() != m) throw std::invalid_argument("hash JSON: threshold length");
    }
    if (j.contains("density")) h.density = j.at("density").get<double>();
    return h;
}

HashSampler::HashSampler(std::shared_ptr<const Field> field, std::size_t m, std::size_t n,
                         Construction construction, std::uint64_t seed, std::uint32_t r,
                         double density)
    : field_(std::move(field)), m_(m), n_(n), construction_(construction), seed_(seed), r_(r),
      density_(density), stream_(seed) {
    validate();
}

HashSampler::HashSampler(std::shared_ptr<const Field> field, std::size_t m, std::size_t n,
                         Construction construction, RandomStream stream, std::uint32_t r,
                         double density)
    : field_(std::move(field)), m_(m), n_(n), construction_(construction), seed_(stream.key()),
      r_(r), density_(density), stream_(stream) {
    validate();
}

void HashSampler::validate() const {
    if (!field_) throw std::invalid_argument("HashSampler: null field");
    if (n_ < 1) throw std::invalid_argument("HashSampler: n must be >= 1");
    if (r_ < 1 || r_ > field_->q()) throw std::invalid_argument("HashSampler: bin rank out of range");
    if (construction_ == Construction::FieldMult && m_ > n_)
        throw std::invalid_argument("fieldmult construction requires m <= n");
    if (construction_ == Construction::SparseToeplitz) {
        if (field_->q() != 2) throw std::invalid_argument("sparse Toeplitz construction requires q = 2");
        if (!(density_ > 0.0 && density_ <= 0.5))
            throw std::invalid_argument("sparse Toeplitz density must lie in (0, 0.5]");
    }
}

MultiBinHash HashSampler::sample() {
    switch (construction_) {
        case Construction::Dense: return sample_dense(*this);
        case Construction::Toeplitz: return sample_toeplitz(*this);
        case Construction::SparseToeplitz: return sample_sparse_toeplitz(*this, density_);
        case Construction::FieldMult: return sample_fieldmult(*this);
    }
    throw std::logic_error("unreachable construction");
}

namespace {

FieldVector uniform_vector(HashSampler& s, std::size_t len) {
    FieldVector v(len);
    for (auto& e : v) e = {s.stream().uniform(s.field().q())};
    return v;
}

}  // namespace

MultiBinHash sample_dense(HashSampler& s) {
    if (s.m() < 1) throw std::invalid_argument("sample_dense: m must be >= 1");
    FieldMatrix A(s.m(), s.n());
    for (auto& e : A.data) e = {s.stream().uniform(s.field().q())};
    FieldVector b = uniform_vector(s, s.m());
    return make_hash(s.field_ptr(), Construction::Dense, std::move(A), std::move(b), s.r(), s.seed());
}

FieldMatrix toeplitz_matrix(std::span<const FieldElement> diagonals, std::size_t m, std::size_t n) {
    if (diagonals.size() != m + n - 1) throw std::invalid_argument("toeplitz_matrix: need m + n - 1 diagonals");
    FieldMatrix A(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) A.at(i, j) = diagonals[j + m - 1 - i];
    return A;
}

MultiBinHash sample_toeplitz(HashSampler& s) {
    if (s.m() < 1) throw std::invalid_argument("sample_toeplitz: m must be >= 1");
    const FieldVector diagonals = uniform_vector(s, s.m() + s.n() - 1);
    FieldVector b = uniform_vector(s, s.m());
    return make_hash(s.field_ptr(), Construction::Toeplitz, toeplitz_matrix(diagonals, s.m(), s.n()),
                     std::move(b), s.r(), s.seed());
}

MultiBinHash sample_sparse_toeplitz(HashSampler& s, double density) {
    if (s.m() < 1) throw std::invalid_argument("sample_sparse_toeplitz: m must be >= 1");
    if (s.field().q() != 2) throw std::invalid_argument("sparse Toeplitz construction requires q = 2");
    if (!(density > 0.0 && density <= 0.5))
        throw std::invalid_argument("sparse Toeplitz density must lie in (0, 0.5]");
    FieldVector diagonals(s.m() + s.n() - 1);
    for (auto& e : diagonals) e = {s.stream().bernoulli(density) ? 1U : 0U};
    FieldVector b = uniform_vector(s, s.m());
    MultiBinHash h = make_hash(s.field_ptr(), Construction::SparseToeplitz,
                               toeplitz_matrix(diagonals, s.m(), s.n()), std::move(b), s.r(), s.seed());
    h.density = density;
    return h;
}

FieldMatrix fieldmult_matrix(const Field& field, std::span<const FieldElement> nu, std::size_t m) {
    const std::size_t n = nu.size();
    if (n < 1 || m > n) throw std::invalid_argument("fieldmult_matrix: need 1 <= m <= n");
    const Polynomial f = find_irreducible_over(field, static_cast<std::uint32_t>(n));
    const std::size_t wide = 2 * n - 1;
    // Column c of the reduction matrix: coefficients of zeta^c mod f.
    FieldMatrix reduce(n, wide);
    for (std::size_t c = 0; c < wide; ++c) {
        Polynomial mono(c + 1, 0);
        mono[c] = 1;
        const Polynomial rem = poly_mod(field, mono, f);
        for (std::size_t i = 0; i < rem.size(); ++i) reduce.at(i, c) = {rem[i]};
    }
    // Convolution matrix of nu.
    FieldMatrix conv(wide, n);
    for (std::size_t i = 0; i < wide; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i >= j && i - j < n) conv.at(i, j) = nu[i - j];
    FieldMatrix A(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::uint32_t acc = 0;
            for (std::size_t c = 0; c < wide; ++c)
                acc = field.add_raw(acc, field.mul_raw(reduce.at(i, c).index, conv.at(c, j).index));
            A.at(i, j) = {acc};
        }
    }
    return A;
}

MultiBinHash sample_fieldmult(HashSampler& s) {
    if (s.m() < 1) throw std::invalid_argument("sample_fieldmult: m must be >= 1");
    if (s.m() > s.n()) throw std::invalid_argument("fieldmult construction requires m <= n");
    const FieldVector nu = uniform_vector(s, s.n());
    FieldVector b = uniform_vector(s, s.m());
    return make_hash(s.field_ptr(), Construction::FieldMult, fieldmult_matrix(s.field(), nu, s.m()),
                     std::move(b), s.r(), s.seed());
}

void to_json(nlohmann::json& j, const AuditReport& a) {
    j = nlohmann::json{{"construction", to_string(a.construction)},
                       {"q", a.q},
                       {"r", a.r},
                       {"m", a.m},
                       {"n", a.n},
                       {"family_size", a.family_size},
                       {"target_marginal", a.target_marginal},
                       {"target_joint", a.target_joint},
                       {"max_marginal_deviation", a.max_marginal_deviation},
                       {"max_joint_deviation", a.max_joint_deviation},
                       {"marginals_exact", a.marginals_exact},
                       {"joints_exact", a.joints_exact},
                       {"exactness_required", a.exactness_required},
                       {"passed", a.passed()}};
    if (a.construction == Construction::SparseToeplitz) j["density"] = a.density;
}

AuditReport pairwise_independence_audit(Construction construction, std::uint32_t q, std::uint32_t r,
                                        std::size_t m, std::size_t n, double density) {
    constexpr std::uint64_t kFamilyLimit = 1ULL << 24;
    const auto field = Field::make(q);
    if (r < 1 || r >= q) throw std::invalid_argument("audit: r must lie in [1, q-1]");
    if (m < 1 || n < 1 || n > 4) throw std::invalid_argument("audit: need m >= 1 and 1 <= n <= 4");
    if (construction == Construction::FieldMult && m > n)
        throw std::invalid_argument("fieldmult construction requires m <= n");
    if (construction == Construction::SparseToeplitz &&
        (q != 2 || !(density > 0.0 && density <= 0.5)))
        throw std::invalid_argument("sparse Toeplitz audit requires q = 2 and density in (0, 0.5]");

    // Random symbols that index a family member.
    std::size_t a_symbols = 0;
    switch (construction) {
        case Construction::Dense: a_symbols = m * n; break;
        case Construction::Toeplitz:
        case Construction::SparseToeplitz: a_symbols = m + n - 1; break;
        case Construction::FieldMult: a_symbols = n; break;
    }
    const std::uint64_t family = checked_pow(q, a_symbols + m, kFamilyLimit);
    if (family > kFamilyLimit) throw std::invalid_argument("audit: family too large to enumerate");
    const std::uint64_t configs = checked_pow(q, n, kFamilyLimit);

    std::vector<std::vector<FieldElement>> sigmas(configs, FieldVector(n));
    for (std::uint64_t s = 0; s < configs; ++s) {
        std::uint64_t c = s;
        for (std::size_t i = n; i-- > 0;) {
            sigmas[s][i] = {static_cast<std::uint32_t>(c % q)};
            c /= q;
        }
    }

    const bool weighted = construction == Construction::SparseToeplitz;
    std::vector<std::uint64_t> marginal(configs, 0);
    std::vector<std::uint64_t> joint(configs * configs, 0);
    std::vector<double> marginal_w(weighted ? configs : 0, 0.0);
    std::vector<double> joint_w(weighted ? configs * configs : 0, 0.0);
    double total_weight = 0;

    std::vector<std::uint32_t> a_digits(a_symbols);
    std::vector<std::uint32_t> b_digits(m);
    std::vector<std::uint64_t> accepted;
    const std::uint64_t a_count = checked_pow(q, a_symbols, kFamilyLimit);
    const std::uint64_t b_count = checked_pow(q, m, kFamilyLimit);
    for (std::uint64_t ac = 0; ac < a_count; ++ac) {
        decode_digits(ac, q, a_digits);
        FieldVector symbols(a_symbols);
        std::size_t ones = 0;
        for (std::size_t i = 0; i < a_symbols; ++i) {
            symbols[i] = {a_digits[i]};
            ones += a_digits[i] != 0;
        }
        FieldMatrix A;
        switch (construction) {
            case Construction::Dense:
                A = FieldMatrix(m, n);
                A.data = symbols;
                break;
            case Construction::Toeplitz:
            case Construction::SparseToeplitz: A = toeplitz_matrix(symbols, m, n); break;
            case Construction::FieldMult: A = fieldmult_matrix(*field, symbols, m); break;
        }
        const double weight =
            weighted ? std::pow(density, static_cast<double>(ones)) *
                           std::pow(1.0 - density, static_cast<double>(a_symbols - ones)) /
                           static_cast<double>(b_count)
                     : 1.0;
        for (std::uint64_t bc = 0; bc < b_count; ++bc) {
            decode_digits(bc, q, b_digits);
            FieldVector b(m);
            for (std::size_t i = 0; i < m; ++i) b[i] = {b_digits[i]};
            const MultiBinHash h = make_hash(field, construction, A, b, r);
            accepted.clear();
            for (std::uint64_t s = 0; s < configs; ++s)
                if (h.accepts(sigmas[s])) accepted.push_back(s);
            for (std::size_t x = 0; x < accepted.size(); ++x) {
                ++marginal[accepted[x]];
                if (weighted) marginal_w[accepted[x]] += weight;
                for (std::size_t y = x + 1; y < accepted.size(); ++y) {
                    ++joint[accepted[x] * configs + accepted[y]];
                    if (weighted) joint_w[accepted[x] * configs + accepted[y]] += weight;
                }
            }
            total_weight += weight;
        }
    }

    AuditReport report;
    report.construction = construction;
    report.q = q;
    report.r = r;
    report.m = m;
    report.n = n;
    report.density = density;
    report.family_size = family;
    report.target_marginal = std::pow(static_cast<double>(r) / q, static_cast<double>(m));
    report.target_joint = report.target_marginal * report.target_marginal;
    report.exactness_required = !weighted;

    // count / family == r^m / q^m  <=>  count * q^m == r^m * family, in 128-bit integers.
    using u128 = unsigned __int128;
    u128 qm = 1;
    u128 rm = 1;
    for (std::size_t i = 0; i < m; ++i) {
        qm *= q;
        rm *= r;
    }
    bool marg_exact = true;
    bool joint_exact = true;
    for (std::uint64_t s = 0; s < configs; ++s) {
        const double p = weighted ? marginal_w[s] / total_weight
                                  : static_cast<double>(marginal[s]) / static_cast<double>(family);
        report.max_marginal_deviation =
            std::max(report.max_marginal_deviation, std::abs(p - report.target_marginal));
        marg_exact = marg_exact && static_cast<u128>(marginal[s]) * qm == rm * family;
        for (std::uint64_t t = s + 1; t < configs; ++t) {
            const std::uint64_t c = joint[s * configs + t];
            const double pj = weighted ? joint_w[s * configs + t] / total_weight
                                       : static_cast<double>(c) / static_cast<double>(family);
            report.max_joint_deviation =
                std::max(report.max_joint_deviation, std::abs(pj - report.target_joint));
            joint_exact = joint_exact && static_cast<u128>(c) * qm * qm == rm * rm * family;
        }
    }
    report.marginals_exact = !weighted && marg_exact;
    report.joints_exact = !weighted && joint_exact;
    return report;
}

}  // namespace mbwish
