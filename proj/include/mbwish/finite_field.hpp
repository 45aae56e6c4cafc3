#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace mbwish {

/// An element of F_q, identified by its position alpha_index in the fixed
/// ordering alpha_0 < alpha_1 < ... < alpha_{q-1}. For q = p^k the index is the
/// base-p encoding of the residue polynomial, least significant coefficient first.
struct FieldElement {
    std::uint32_t index = 0;

    friend constexpr auto operator<=>(FieldElement, FieldElement) = default;
};

using FieldVector = std::vector<FieldElement>;

/// Coefficients c_0..c_deg of a polynomial over F_p (or over F_q, depending on
/// context), lowest degree first.
using Polynomial = std::vector<std::uint32_t>;

struct FieldSpec {
    std::uint32_t p = 2;
    std::uint32_t k = 1;
    std::uint32_t q = 2;
    /// Monic degree-k irreducible modulus, c_0..c_k. Empty when k == 1.
    Polynomial modulus;

    friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

void to_json(nlohmann::json& j, const FieldSpec& spec);
void from_json(const nlohmann::json& j, FieldSpec& spec);

bool is_prime(std::uint64_t n);

/// Decomposes q = p^k; returns false when q is not a prime power.
bool prime_power(std::uint64_t q, std::uint32_t& p, std::uint32_t& k);

/// Smallest prime power strictly greater than n.
std::uint32_t smallest_prime_power_above(std::uint32_t n);

/// Immutable F_q with the canonical element ordering. Tables are built for q <= 256.
class Field {
public:
    /// Builds F_{p^k} using the lexicographically smallest irreducible modulus.
    Field(std::uint32_t p, std::uint32_t k);
    explicit Field(FieldSpec spec);

    /// F_q for a prime power q.
    static std::shared_ptr<const Field> make(std::uint32_t q);

    const FieldSpec& spec() const noexcept { return spec_; }
    std::uint32_t q() const noexcept { return spec_.q; }
    std::uint32_t p() const noexcept { return spec_.p; }
    std::uint32_t k() const noexcept { return spec_.k; }

    FieldElement zero() const noexcept { return {0}; }
    FieldElement one() const noexcept { return {1}; }
    FieldElement element(std::uint32_t index) const;

    FieldElement add(FieldElement a, FieldElement b) const;
    FieldElement sub(FieldElement a, FieldElement b) const;
    FieldElement neg(FieldElement a) const;
    FieldElement mul(FieldElement a, FieldElement b) const;
    FieldElement inv(FieldElement a) const;

    // Unchecked variants for enumeration hot loops; indices must already be < q.
    std::uint32_t add_raw(std::uint32_t a, std::uint32_t b) const noexcept {
        return tabulated_ ? add_table_[a * spec_.q + b] : add_slow(a, b);
    }
    std::uint32_t mul_raw(std::uint32_t a, std::uint32_t b) const noexcept {
        return tabulated_ ? mul_table_[a * spec_.q + b] : mul_slow(a, b);
    }
    std::uint32_t sub_raw(std::uint32_t a, std::uint32_t b) const noexcept {
        return add_raw(a, neg_raw(b));
    }
    std::uint32_t neg_raw(std::uint32_t a) const noexcept;

    /// Coefficient c of the residue polynomial of element a (the base-p digit).
    std::uint32_t coefficient(FieldElement a, std::uint32_t c) const;

    bool tabulated() const noexcept { return tabulated_; }

private:
    void validate(FieldElement a) const;
    std::uint32_t add_slow(std::uint32_t a, std::uint32_t b) const noexcept;
    std::uint32_t mul_slow(std::uint32_t a, std::uint32_t b) const noexcept;
    void build_tables();

    FieldSpec spec_;
    bool tabulated_ = false;
    std::vector<std::uint16_t> add_table_;
    std::vector<std::uint16_t> mul_table_;
    std::vector<std::uint16_t> inv_table_;
};

/// True iff every coordinate satisfies x_i < y_i in the element ordering.
bool vector_less(std::span<const FieldElement> x, std::span<const FieldElement> y);

/// Lexicographically smallest monic irreducible polynomial of degree k over F_p
/// (ordering: the integer sum c_i p^i over the non-leading coefficients).
/// For k == 1 returns x, the convention marker.
Polynomial find_irreducible(std::uint32_t p, std::uint32_t k);

/// Same search with coefficients taken from an arbitrary base field F_q
/// (coefficients are element indices of `base`).
Polynomial find_irreducible_over(const Field& base, std::uint32_t degree);

/// Irreducibility by trial division with every monic factor of degree <= deg/2.
bool is_irreducible_over(const Field& base, const Polynomial& f);

/// Remainder of a modulo the monic polynomial f over `base`.
Polynomial poly_mod(const Field& base, Polynomial a, const Polynomial& f);

/// Product of two polynomials over `base`.
Polynomial poly_mul(const Field& base, const Polynomial& a, const Polynomial& b);

/// Row-major dense matrix over F_q.
struct FieldMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<FieldElement> data;

    FieldMatrix() = default;
    FieldMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    FieldElement& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    FieldElement at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<const FieldElement> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }

    friend bool operator==(const FieldMatrix&, const FieldMatrix&) = default;
};

/// Reduced row echelon form in place, pivoting only in columns < col_limit.
/// Returns the pivot columns.
std::vector<std::size_t> rref(const Field& field, FieldMatrix& m, std::size_t col_limit);

/// Inverse of a square matrix, or nullopt when singular.
std::optional<FieldMatrix> inverse(const Field& field, const FieldMatrix& m);

/// Rank by Gaussian elimination over F_q.
std::size_t rank(const Field& field, FieldMatrix m);

/// y = M x over F_q.
FieldVector multiply(const Field& field, const FieldMatrix& m, std::span<const FieldElement> x);

}  // namespace mbwish
