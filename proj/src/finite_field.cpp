#include "mbwish/finite_field.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mbwish {

namespace {

constexpr std::uint32_t kTableLimit = 256;
constexpr std::uint64_t kSearchLimit = 1ULL << 20;

std::uint64_t ipow(std::uint64_t base, std::uint32_t exp) {
    std::uint64_t r = 1;
    for (std::uint32_t i = 0; i < exp; ++i) r *= base;
    return r;
}

void trim(Polynomial& a) {
    while (!a.empty() && a.back() == 0) a.pop_back();
}

/// Polynomial over F_p from base-p digits of an index, k coefficients.
Polynomial digits(std::uint32_t index, std::uint32_t p, std::uint32_t k) {
    Polynomial d(k);
    for (std::uint32_t i = 0; i < k; ++i) {
        d[i] = index % p;
        index /= p;
    }
    return d;
}

std::uint32_t undigits(const Polynomial& d, std::uint32_t p, std::uint32_t k) {
    std::uint32_t index = 0;
    for (std::uint32_t i = k; i-- > 0;) index = index * p + (i < d.size() ? d[i] : 0);
    return index;
}

}  // namespace

void to_json(nlohmann::json& j, const FieldSpec& spec) {
    j = nlohmann::json{{"p", spec.p}, {"k", spec.k}, {"modulus", spec.modulus}};
}

void from_json(const nlohmann::json& j, FieldSpec& spec) {
    spec.p = j.at("p").get<std::uint32_t>();
    spec.k = j.at("k").get<std::uint32_t>();
    spec.modulus = j.value("modulus", Polynomial{});
    spec.q = static_cast<std::uint32_t>(ipow(spec.p, spec.k));
}

bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

bool prime_power(std::uint64_t q, std::uint32_t& p, std::uint32_t& k) {
    if (q < 2) return false;
    std::uint64_t d = 2;
    while (d * d <= q && q % d != 0) ++d;
    if (q % d != 0) d = q;
    std::uint32_t e = 0;
    std::uint64_t rest = q;
    while (rest % d == 0) {
        rest /= d;
        ++e;
    }
    if (rest != 1) return false;
    p = static_cast<std::uint32_t>(d);
    k = e;
    return true;
}

std::uint32_t smallest_prime_power_above(std::uint32_t n) {
    std::uint32_t p = 0;
    std::uint32_t k = 0;
    for (std::uint32_t q = n + 1;; ++q)
        if (prime_power(q, p, k)) return q;
}

Field::Field(std::uint32_t p, std::uint32_t k) {
    if (!is_prime(p)) throw std::invalid_argument("field characteristic must be prime");
    if (k == 0) throw std::invalid_argument("field extension degree must be >= 1");
    const std::uint64_t q = ipow(p, k);
    if (q > kSearchLimit) throw std::invalid_argument("field too large: q > 2^20");
    spec_.p = p;
    spec_.k = k;
    spec_.q = static_cast<std::uint32_t>(q);
    if (k > 1) spec_.modulus = find_irreducible(p, k);
    build_tables();
}

Field::Field(FieldSpec spec) : spec_(std::move(spec)) {
    if (!is_prime(spec_.p)) throw std::invalid_argument("field characteristic must be prime");
    if (spec_.k == 0) throw std::invalid_argument("field extension degree must be >= 1");
    const std::uint64_t q = ipow(spec_.p, spec_.k);
    if (q > kSearchLimit) throw std::invalid_argument("field too large: q > 2^20");
    spec_.q = static_cast<std::uint32_t>(q);
    if (spec_.k == 1) {
        spec_.modulus.clear();
    } else {
        if (spec_.modulus.size() != spec_.k + 1 || spec_.modulus.back() != 1)
            throw std::invalid_argument("modulus must be monic of degree k");
        for (auto c : spec_.modulus)
            if (c >= spec_.p) throw std::invalid_argument("modulus coefficient out of range");
        const Field prime(spec_.p, 1);
        if (!is_irreducible_over(prime, spec_.modulus))
            throw std::invalid_argument("modulus is not irreducible");
    }
    build_tables();
}

std::shared_ptr<const Field> Field::make(std::uint32_t q) {
    std::uint32_t p = 0;
    std::uint32_t k = 0;
    if (!prime_power(q, p, k))
        throw std::invalid_argument("q = " + std::to_string(q) + " is not a prime power");
    return std::make_shared<const Field>(p, k);
}

void Field::build_tables() {
    if (spec_.q > kTableLimit) return;
    const std::uint32_t q = spec_.q;
    add_table_.resize(q * q);
    mul_table_.resize(q * q);
    inv_table_.assign(q, 0);
    for (std::uint32_t a = 0; a < q; ++a) {
        for (std::uint32_t b = 0; b < q; ++b) {
            add_table_[a * q + b] = static_cast<std::uint16_t>(add_slow(a, b));
            const auto prod = mul_slow(a, b);
            mul_table_[a * q + b] = static_cast<std::uint16_t>(prod);
            if (prod == 1) inv_table_[a] = static_cast<std::uint16_t>(b);
        }
    }
    tabulated_ = true;
}

std::uint32_t Field::add_slow(std::uint32_t a, std::uint32_t b) const noexcept {
    const std::uint32_t p = spec_.p;
    if (spec_.k == 1) return (a + b) % p;
    std::uint32_t out = 0;
    std::uint32_t place = 1;
    for (std::uint32_t i = 0; i < spec_.k; ++i) {
        out += ((a % p + b % p) % p) * place;
        a /= p;
        b /= p;
        place *= p;
    }
    return out;
}

std::uint32_t Field::mul_slow(std::uint32_t a, std::uint32_t b) const noexcept {
    const std::uint32_t p = spec_.p;
    if (spec_.k == 1)
        return static_cast<std::uint32_t>((static_cast<std::uint64_t>(a) * b) % p);
    const std::uint32_t k = spec_.k;
    const Polynomial x = digits(a, p, k);
    const Polynomial y = digits(b, p, k);
    Polynomial prod(2 * k - 1, 0);
    for (std::uint32_t i = 0; i < k; ++i)
        for (std::uint32_t j = 0; j < k; ++j) prod[i + j] = (prod[i + j] + x[i] * y[j]) % p;
    // Reduce with the monic modulus from the top degree down.
    for (std::uint32_t d = 2 * k - 1; d-- > k;) {
        const std::uint32_t c = prod[d];
        if (c == 0) continue;
        for (std::uint32_t i = 0; i <= k; ++i) {
            const std::uint32_t sub = (c * spec_.modulus[i]) % p;
            prod[d - k + i] = (prod[d - k + i] + p - sub) % p;
        }
    }
    return undigits(prod, p, k);
}

std::uint32_t Field::neg_raw(std::uint32_t a) const noexcept {
    const std::uint32_t p = spec_.p;
    std::uint32_t out = 0;
    std::uint32_t place = 1;
    for (std::uint32_t i = 0; i < spec_.k; ++i) {
        out += ((p - a % p) % p) * place;
        a /= p;
        place *= p;
    }
    return out;
}

void Field::validate(FieldElement a) const {
    if (a.index >= spec_.q)
        throw std::out_of_range("element index " + std::to_string(a.index) +
                                " outside F_" + std::to_string(spec_.q));
}

FieldElement Field::element(std::uint32_t index) const {
    validate({index});
    return {index};
}

FieldElement Field::add(FieldElement a, FieldElement b) const {
    validate(a);
    validate(b);
    return {add_raw(a.index, b.index)};
}

FieldElement Field::sub(FieldElement a, FieldElement b) const {
    validate(a);
    validate(b);
    return {sub_raw(a.index, b.index)};
}

FieldElement Field::neg(FieldElement a) const {
    validate(a);
    return {neg_raw(a.index)};
}

FieldElement Field::mul(FieldElement a, FieldElement b) const {
    validate(a);
    validate(b);
    return {mul_raw(a.index, b.index)};
}

FieldElement Field::inv(FieldElement a) const {
    validate(a);
    if (a.index == 0) throw std::domain_error("zero has no multiplicative inverse");
    if (tabulated_) return {inv_table_[a.index]};
    // a^(q-2) by square-and-multiply.
    std::uint32_t result = 1;
    std::uint32_t base = a.index;
    for (std::uint64_t e = spec_.q - 2; e > 0; e >>= 1) {
        if (e & 1U) result = mul_slow(result, base);
        base = mul_slow(base, base);
    }
    return {result};
}

std::uint32_t Field::coefficient(FieldElement a, std::uint32_t c) const {
    validate(a);
    std::uint32_t v = a.index;
    for (std::uint32_t i = 0; i < c; ++i) v /= spec_.p;
    return v % spec_.p;
}

bool vector_less(std::span<const FieldElement> x, std::span<const FieldElement> y) {
    if (x.size() != y.size()) throw std::invalid_argument("vector_less: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] < y[i])) return false;
    return true;
}

Polynomial poly_mul(const Field& base, const Polynomial& a, const Polynomial& b) {
    if (a.empty() || b.empty()) return {};
    Polynomial out(a.size() + b.size() - 1, 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            out[i + j] = base.add_raw(out[i + j], base.mul_raw(a[i], b[j]));
    trim(out);
    return out;
}

Polynomial poly_mod(const Field& base, Polynomial a, const Polynomial& f) {
    if (f.empty() || f.back() != 1) throw std::invalid_argument("poly_mod: modulus must be monic");
    const std::size_t deg = f.size() - 1;
    trim(a);
    while (a.size() > deg) {
        const std::uint32_t c = a.back();
        const std::size_t shift = a.size() - 1 - deg;
        for (std::size_t i = 0; i <= deg; ++i)
            a[shift + i] = base.sub_raw(a[shift + i], base.mul_raw(c, f[i]));
        trim(a);
    }
    return a;
}

bool is_irreducible_over(const Field& base, const Polynomial& f) {
    if (f.size() < 2 || f.back() != 1) return false;
    const std::uint32_t degree = static_cast<std::uint32_t>(f.size() - 1);
    if (degree == 1) return true;
    const std::uint32_t q = base.q();
    for (std::uint32_t d = 1; d <= degree / 2; ++d) {
        const std::uint64_t count = ipow(q, d);
        for (std::uint64_t code = 0; code < count; ++code) {
            Polynomial g(d + 1);
            std::uint64_t c = code;
            for (std::uint32_t i = 0; i < d; ++i) {
                g[i] = static_cast<std::uint32_t>(c % q);
                c /= q;
            }
            g[d] = 1;
            if (poly_mod(base, f, g).empty()) return false;
        }
    }
    return true;
}

Polynomial find_irreducible_over(const Field& base, std::uint32_t degree) {
    if (degree == 0) throw std::invalid_argument("irreducible polynomial degree must be >= 1");
    const std::uint32_t q = base.q();
    if (degree == 1) return {0, 1};
    const std::uint64_t count = ipow(q, degree);
    if (count > kSearchLimit) throw std::invalid_argument("irreducible search space exceeds 2^20");
    for (std::uint64_t code = 0; code < count; ++code) {
        Polynomial f(degree + 1);
        std::uint64_t c = code;
        for (std::uint32_t i = 0; i < degree; ++i) {
            f[i] = static_cast<std::uint32_t>(c % q);
            c /= q;
        }
        f[degree] = 1;
        if (is_irreducible_over(base, f)) return f;
    }
    throw std::logic_error("no irreducible polynomial found");
}

Polynomial find_irreducible(std::uint32_t p, std::uint32_t k) {
    if (!is_prime(p)) throw std::invalid_argument("find_irreducible: p must be prime");
    return find_irreducible_over(Field(p, 1), k);
}

std::vector<std::size_t> rref(const Field& field, FieldMatrix& m, std::size_t col_limit) {
    const std::size_t limit = std::min(col_limit, m.cols);
    std::vector<std::size_t> pivots;
    std::size_t r = 0;
    for (std::size_t col = 0; col < limit && r < m.rows; ++col) {
        std::size_t pivot = r;
        while (pivot < m.rows && m.at(pivot, col).index == 0) ++pivot;
        if (pivot == m.rows) continue;
        for (std::size_t j = 0; j < m.cols; ++j) std::swap(m.at(r, j), m.at(pivot, j));
        const FieldElement inv = field.inv(m.at(r, col));
        for (std::size_t j = 0; j < m.cols; ++j) m.at(r, j) = field.mul(m.at(r, j), inv);
        for (std::size_t i = 0; i < m.rows; ++i) {
            if (i == r || m.at(i, col).index == 0) continue;
            const FieldElement factor = m.at(i, col);
            for (std::size_t j = 0; j < m.cols; ++j)
                m.at(i, j) = field.sub(m.at(i, j), field.mul(factor, m.at(r, j)));
        }
        pivots.push_back(col);
        ++r;
    }
    return pivots;
}

std::size_t rank(const Field& field, FieldMatrix m) {
    return rref(field, m, m.cols).size();
}

std::optional<FieldMatrix> inverse(const Field& field, const FieldMatrix& m) {
    if (m.rows != m.cols) throw std::invalid_argument("inverse: matrix must be square");
    const std::size_t n = m.rows;
    FieldMatrix aug(n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) aug.at(i, j) = m.at(i, j);
        aug.at(i, n + i) = field.one();
    }
    if (rref(field, aug, n).size() != n) return std::nullopt;
    FieldMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = aug.at(i, n + j);
    return out;
}

FieldVector multiply(const Field& field, const FieldMatrix& m, std::span<const FieldElement> x) {
    if (x.size() != m.cols) throw std::invalid_argument("multiply: dimension mismatch");
    FieldVector y(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        std::uint32_t acc = 0;
        for (std::size_t j = 0; j < m.cols; ++j)
            acc = field.add_raw(acc, field.mul_raw(m.at(i, j).index, x[j].index));
        y[i] = {acc};
    }
    return y;
}

}  // namespace mbwish
