#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace coredel {

// Arbitrary-precision signed integer, base 2^32 limbs, little-endian.
// Supports exactly what exact rational arithmetic needs: ring ops,
// comparison, gcd, small division (for decimal printing), and conversion
// to double.
class BigInt {
public:
    BigInt() = default;
    BigInt(long long v);
    static BigInt from_decimal(const std::string& digits); // nonempty, [0-9]+

    bool is_zero() const { return mag_.empty(); }
    bool is_negative() const { return neg_; }
    bool is_one() const { return !neg_ && mag_.size() == 1 && mag_[0] == 1; }

    BigInt operator-() const;
    BigInt operator+(const BigInt& o) const;
    BigInt operator-(const BigInt& o) const;
    BigInt operator*(const BigInt& o) const;

    // -1, 0, +1
    static int cmp(const BigInt& a, const BigInt& b);
    bool operator==(const BigInt& o) const { return cmp(*this, o) == 0; }
    bool operator!=(const BigInt& o) const { return cmp(*this, o) != 0; }
    bool operator<(const BigInt& o) const { return cmp(*this, o) < 0; }

    static BigInt gcd(BigInt a, BigInt b); // gcd of |a|, |b|

    BigInt abs() const;
    // quotient of |this| / d, also yields remainder; d > 0
    BigInt div_small(std::uint32_t d, std::uint32_t* rem = nullptr) const;

    bool fits_longlong() const;
    long long to_longlong() const; // precondition: fits_longlong()
    double to_double() const;
    std::string to_string() const;

private:
    bool neg_ = false;
    std::vector<std::uint32_t> mag_;

    void trim();
    bool even() const { return mag_.empty() || (mag_[0] & 1u) == 0; }
    void shr1();
    void shl(unsigned bits);
    static std::vector<std::uint32_t> mag_add(const std::vector<std::uint32_t>&, const std::vector<std::uint32_t>&);
    static std::vector<std::uint32_t> mag_sub(const std::vector<std::uint32_t>&, const std::vector<std::uint32_t>&); // a >= b
    static int mag_cmp(const std::vector<std::uint32_t>&, const std::vector<std::uint32_t>&);
};

// Exact rational, always normalized: lowest terms, positive denominator,
// zero is 0/1.
class Rational {
public:
    Rational() : num_(0), den_(1) {}
    Rational(long long v) : num_(v), den_(1) {}
    Rational(BigInt num, BigInt den); // den != 0
    static Rational from_decimal_string(const std::string& text); // "12", "0.044", "-3.5"

    const BigInt& num() const { return num_; }
    const BigInt& den() const { return den_; }

    bool is_zero() const { return num_.is_zero(); }
    bool is_negative() const { return num_.is_negative(); }
    bool is_integer() const { return den_.is_one(); }

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    Rational operator/(const Rational& o) const; // o != 0
    Rational operator-() const;

    Rational pow(unsigned long long e) const;

    static int cmp(const Rational& a, const Rational& b);
    bool operator==(const Rational& o) const { return cmp(*this, o) == 0; }
    bool operator!=(const Rational& o) const { return cmp(*this, o) != 0; }
    bool operator<(const Rational& o) const { return cmp(*this, o) < 0; }

    double to_double() const;

    // "p/q", or just "p" when integral
    std::string to_string() const;
    // finite decimal ("9.8") when den = 2^a 5^b, otherwise empty
    std::string to_decimal_string() const;

private:
    BigInt num_, den_;
    void normalize();
};

} // namespace coredel
