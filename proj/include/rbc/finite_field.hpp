#pragma once

#include "rbc/errors.hpp"
#include "rbc/random.hpp"

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>

namespace rbc {

namespace detail {

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
    std::uint64_t result = 1 % m;
    base %= m;
    while (exp > 0) {
        if (exp & 1U) result = mulmod(result, base, m);
        base = mulmod(base, base, m);
        exp >>= 1U;
    }
    return result;
}

}  // namespace detail

/// Deterministic Miller-Rabin; the first twelve prime bases are exact for all
/// 64-bit inputs.
inline bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    constexpr std::uint64_t bases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    for (std::uint64_t p : bases) {
        if (n % p == 0) return n == p;
    }
    std::uint64_t d = n - 1;
    int s = 0;
    while ((d & 1U) == 0) {
        d >>= 1U;
        ++s;
    }
    for (std::uint64_t a : bases) {
        std::uint64_t x = detail::powmod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int r = 1; r < s; ++r) {
            x = detail::mulmod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

class FieldElement;

/// The prime field F_q. Moduli must be prime and below 2^63 so that a sum of
/// two residues fits in 64 bits; products go through 128-bit intermediates.
class FieldSpec {
public:
    static constexpr std::uint64_t max_modulus = (std::uint64_t{1} << 63) - 1;

    FieldSpec() = default;

    explicit FieldSpec(std::uint64_t q) : q_(q) {
        if (q < 2) throw std::domain_error("field modulus must be >= 2, got " + std::to_string(q));
        if (q > max_modulus) throw std::domain_error("field modulus exceeds 2^63 - 1: " + std::to_string(q));
        if (!is_prime(q)) throw std::domain_error("field modulus is not prime: " + std::to_string(q));
    }

    std::uint64_t q() const noexcept { return q_; }
    double log2q() const noexcept { return std::log2(static_cast<double>(q_)); }

    FieldElement element(std::uint64_t value) const;
    FieldElement zero() const;
    FieldElement one() const;

    friend bool operator==(const FieldSpec&, const FieldSpec&) = default;

private:
    std::uint64_t q_ = 2;
};

/// A residue in [0, q). A default-constructed element belongs to no field and
/// only serves as a placeholder in containers.
class FieldElement {
public:
    FieldElement() = default;

    FieldElement(const FieldSpec& spec, std::uint64_t value) : value_(value % spec.q()), q_(spec.q()) {}

    std::uint64_t value() const noexcept { return value_; }
    std::uint64_t modulus() const noexcept { return q_; }
    bool is_zero() const noexcept { return value_ == 0; }
    FieldSpec spec() const { return FieldSpec(q_); }

    /// Element of the same field; skips the primality check spec() would repeat.
    FieldElement same_field(std::uint64_t v) const {
        FieldElement r;
        r.q_ = q_;
        r.value_ = q_ == 0 ? 0 : v % q_;
        return r;
    }

    FieldElement& operator+=(const FieldElement& o) {
        check(o);
        value_ += o.value_;
        if (value_ >= q_) value_ -= q_;
        return *this;
    }

    FieldElement& operator-=(const FieldElement& o) {
        check(o);
        value_ = value_ >= o.value_ ? value_ - o.value_ : value_ + (q_ - o.value_);
        return *this;
    }

    FieldElement& operator*=(const FieldElement& o) {
        check(o);
        value_ = detail::mulmod(value_, o.value_, q_);
        return *this;
    }

    friend FieldElement operator+(FieldElement a, const FieldElement& b) { return a += b; }
    friend FieldElement operator-(FieldElement a, const FieldElement& b) { return a -= b; }
    friend FieldElement operator*(FieldElement a, const FieldElement& b) { return a *= b; }

    FieldElement operator-() const {
        FieldElement r = *this;
        r.value_ = value_ == 0 ? 0 : q_ - value_;
        return r;
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    FieldElement inverse() const {
        if (q_ == 0) throw usage_error("inverse of an element with no field");
        if (value_ == 0) throw std::domain_error("zero has no multiplicative inverse");
        __int128 r0 = static_cast<__int128>(q_), r1 = static_cast<__int128>(value_);
        __int128 t0 = 0, t1 = 1;
        while (r1 != 0) {
            const __int128 quot = r0 / r1;
            const __int128 r2 = r0 - quot * r1;
            r0 = r1;
            r1 = r2;
            const __int128 t2 = t0 - quot * t1;
            t0 = t1;
            t1 = t2;
        }
        if (t0 < 0) t0 += static_cast<__int128>(q_);
        FieldElement r = *this;
        r.value_ = static_cast<std::uint64_t>(t0);
        return r;
    }

    friend bool operator==(const FieldElement& a, const FieldElement& b) {
        return a.value_ == b.value_ && a.q_ == b.q_;
    }

    friend std::ostream& operator<<(std::ostream& os, const FieldElement& e) {
        return os << e.value_ << " (mod " << e.q_ << ")";
    }

private:
    void check(const FieldElement& o) const {
        if (q_ != o.q_ || q_ == 0) {
            throw usage_error("field elements from different fields: mod " + std::to_string(q_) + " vs mod " +
                              std::to_string(o.q_));
        }
    }

    std::uint64_t value_ = 0;
    std::uint64_t q_ = 0;
};

inline FieldElement FieldSpec::element(std::uint64_t value) const { return FieldElement(*this, value); }
inline FieldElement FieldSpec::zero() const { return FieldElement(*this, 0); }
inline FieldElement FieldSpec::one() const { return FieldElement(*this, 1); }

enum class FieldOp { add, sub, mul };

inline FieldElement fe_arith(const FieldElement& a, const FieldElement& b, FieldOp op) {
    switch (op) {
        case FieldOp::add: return a + b;
        case FieldOp::sub: return a - b;
        case FieldOp::mul: return a * b;
    }
    throw usage_error("unknown field operation");
}

inline FieldElement fe_inv(const FieldElement& a) { return a.inverse(); }

/// Uniform element of F_q drawn by rejection sampling from `rng`.
template <class URBG>
FieldElement fe_sample(const FieldSpec& spec, URBG& rng) {
    return FieldElement(spec, uniform_below(rng, spec.q()));
}

}  // namespace rbc
