#include "coredel/rational.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace coredel {

namespace {

// Exact division q = a / g where g divides a. Binary long division; only
// used by Rational::normalize, where operands are usually small enough for
// the native fast path anyway.
BigInt divide_exact(const BigInt& a, const BigInt& g) {
    BigInt rem;
    BigInt quot;
    BigInt absA = a.abs(), absG = g.abs();
    std::string bits;
    {
        BigInt cur = absA;
        while (!cur.is_zero()) {
            std::uint32_t r = 0;
            cur = cur.div_small(2, &r);
            bits.push_back(r ? '1' : '0');
        }
        std::reverse(bits.begin(), bits.end());
    }
    for (char b : bits) {
        rem = rem * BigInt(2) + BigInt(b == '1' ? 1 : 0);
        quot = quot * BigInt(2);
        if (!(BigInt::cmp(rem, absG) < 0)) {
            rem = rem - absG;
            quot = quot + BigInt(1);
        }
    }
    if (a.is_negative() != g.is_negative()) quot = -quot;
    return quot;
}

} // namespace

BigInt::BigInt(long long v) {
    neg_ = v < 0;
    unsigned long long u = neg_ ? (~static_cast<unsigned long long>(v) + 1ull) : static_cast<unsigned long long>(v);
    while (u) {
        mag_.push_back(static_cast<std::uint32_t>(u & 0xffffffffull));
        u >>= 32;
    }
}

void BigInt::trim() {
    while (!mag_.empty() && mag_.back() == 0) mag_.pop_back();
    if (mag_.empty()) neg_ = false;
}

int BigInt::mag_cmp(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
    for (size_t i = a.size(); i-- > 0;)
        if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
    return 0;
}

std::vector<std::uint32_t> BigInt::mag_add(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    std::vector<std::uint32_t> r;
    r.reserve(std::max(a.size(), b.size()) + 1);
    std::uint64_t carry = 0;
    for (size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
        std::uint64_t s = carry;
        if (i < a.size()) s += a[i];
        if (i < b.size()) s += b[i];
        r.push_back(static_cast<std::uint32_t>(s & 0xffffffffull));
        carry = s >> 32;
    }
    if (carry) r.push_back(static_cast<std::uint32_t>(carry));
    return r;
}

std::vector<std::uint32_t> BigInt::mag_sub(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    std::vector<std::uint32_t> r = a;
    std::int64_t borrow = 0;
    for (size_t i = 0; i < r.size(); ++i) {
        std::int64_t d = static_cast<std::int64_t>(r[i]) - borrow - (i < b.size() ? b[i] : 0);
        if (d < 0) {
            d += (1ll << 32);
            borrow = 1;
        } else {
            borrow = 0;
        }
        r[i] = static_cast<std::uint32_t>(d);
    }
    while (!r.empty() && r.back() == 0) r.pop_back();
    return r;
}

BigInt BigInt::operator-() const {
    BigInt r = *this;
    if (!r.mag_.empty()) r.neg_ = !r.neg_;
    return r;
}

BigInt BigInt::operator+(const BigInt& o) const {
    BigInt r;
    if (neg_ == o.neg_) {
        r.mag_ = mag_add(mag_, o.mag_);
        r.neg_ = neg_;
    } else {
        int c = mag_cmp(mag_, o.mag_);
        if (c == 0) return BigInt();
        if (c > 0) {
            r.mag_ = mag_sub(mag_, o.mag_);
            r.neg_ = neg_;
        } else {
            r.mag_ = mag_sub(o.mag_, mag_);
            r.neg_ = o.neg_;
        }
    }
    r.trim();
    return r;
}

BigInt BigInt::operator-(const BigInt& o) const { return *this + (-o); }

BigInt BigInt::operator*(const BigInt& o) const {
    if (is_zero() || o.is_zero()) return BigInt();
    BigInt r;
    r.mag_.assign(mag_.size() + o.mag_.size(), 0);
    for (size_t i = 0; i < mag_.size(); ++i) {
        std::uint64_t carry = 0;
        for (size_t j = 0; j < o.mag_.size(); ++j) {
            std::uint64_t cur = r.mag_[i + j] + static_cast<std::uint64_t>(mag_[i]) * o.mag_[j] + carry;
            r.mag_[i + j] = static_cast<std::uint32_t>(cur & 0xffffffffull);
            carry = cur >> 32;
        }
        size_t k = i + o.mag_.size();
        while (carry) {
            std::uint64_t cur = r.mag_[k] + carry;
            r.mag_[k] = static_cast<std::uint32_t>(cur & 0xffffffffull);
            carry = cur >> 32;
            ++k;
        }
    }
    r.neg_ = neg_ != o.neg_;
    r.trim();
    return r;
}

int BigInt::cmp(const BigInt& a, const BigInt& b) {
    if (a.neg_ != b.neg_) return a.neg_ ? -1 : 1;
    int c = mag_cmp(a.mag_, b.mag_);
    return a.neg_ ? -c : c;
}

BigInt BigInt::abs() const {
    BigInt r = *this;
    r.neg_ = false;
    return r;
}

void BigInt::shr1() {
    std::uint32_t carry = 0;
    for (size_t i = mag_.size(); i-- > 0;) {
        std::uint32_t next = mag_[i] & 1u;
        mag_[i] = (mag_[i] >> 1) | (carry << 31);
        carry = next;
    }
    trim();
}

void BigInt::shl(unsigned bits) {
    if (is_zero() || bits == 0) return;
    unsigned words = bits / 32, rem = bits % 32;
    if (rem) {
        std::uint32_t carry = 0;
        for (size_t i = 0; i < mag_.size(); ++i) {
            std::uint32_t next = mag_[i] >> (32 - rem);
            mag_[i] = (mag_[i] << rem) | carry;
            carry = next;
        }
        if (carry) mag_.push_back(carry);
    }
    mag_.insert(mag_.begin(), words, 0);
}

BigInt BigInt::gcd(BigInt a, BigInt b) {
    a.neg_ = false;
    b.neg_ = false;
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    // binary gcd: pull out common twos, then subtract odd values
    unsigned shift = 0;
    while (a.even() && b.even()) {
        a.shr1();
        b.shr1();
        ++shift;
    }
    while (a.even()) a.shr1();
    while (!b.is_zero()) {
        while (b.even()) b.shr1();
        if (mag_cmp(a.mag_, b.mag_) > 0) std::swap(a.mag_, b.mag_);
        b.mag_ = mag_sub(b.mag_, a.mag_);
    }
    a.shl(shift);
    return a;
}

BigInt BigInt::div_small(std::uint32_t d, std::uint32_t* rem) const {
    BigInt q;
    q.mag_.assign(mag_.size(), 0);
    std::uint64_t r = 0;
    for (size_t i = mag_.size(); i-- > 0;) {
        std::uint64_t cur = (r << 32) | mag_[i];
        q.mag_[i] = static_cast<std::uint32_t>(cur / d);
        r = cur % d;
    }
    if (rem) *rem = static_cast<std::uint32_t>(r);
    q.trim();
    return q;
}

BigInt BigInt::from_decimal(const std::string& digits) {
    BigInt r;
    for (char c : digits) {
        if (c < '0' || c > '9') throw std::invalid_argument("BigInt::from_decimal: bad digit");
        r = r * BigInt(10) + BigInt(c - '0');
    }
    return r;
}

bool BigInt::fits_longlong() const {
    if (mag_.size() > 2) return false;
    unsigned long long u = 0;
    for (size_t i = mag_.size(); i-- > 0;) u = (u << 32) | mag_[i];
    return neg_ ? u <= 0x8000000000000000ull : u <= 0x7fffffffffffffffull;
}

long long BigInt::to_longlong() const {
    unsigned long long u = 0;
    for (size_t i = mag_.size(); i-- > 0;) u = (u << 32) | mag_[i];
    return neg_ ? -static_cast<long long>(u) : static_cast<long long>(u);
}

double BigInt::to_double() const {
    double v = 0;
    for (size_t i = mag_.size(); i-- > 0;) v = v * 4294967296.0 + mag_[i];
    return neg_ ? -v : v;
}

std::string BigInt::to_string() const {
    if (is_zero()) return "0";
    std::string out;
    BigInt cur = abs();
    while (!cur.is_zero()) {
        std::uint32_t rem = 0;
        cur = cur.div_small(1000000000u, &rem);
        for (int i = 0; i < 9; ++i) {
            out.push_back(static_cast<char>('0' + rem % 10));
            rem /= 10;
        }
    }
    while (out.size() > 1 && out.back() == '0') out.pop_back();
    if (neg_) out.push_back('-');
    std::reverse(out.begin(), out.end());
    return out;
}

Rational::Rational(BigInt num, BigInt den) : num_(std::move(num)), den_(std::move(den)) {
    if (den_.is_zero()) throw std::domain_error("Rational: zero denominator");
    normalize();
}

void Rational::normalize() {
    if (den_.is_negative()) {
        num_ = -num_;
        den_ = -den_;
    }
    if (num_.is_zero()) {
        den_ = BigInt(1);
        return;
    }
    if (num_.fits_longlong() && den_.fits_longlong()) {
        long long n = num_.to_longlong(), d = den_.to_longlong();
        long long g = std::gcd(n < 0 ? -n : n, d);
        if (g > 1) {
            num_ = BigInt(n / g);
            den_ = BigInt(d / g);
        }
        return;
    }
    BigInt g = BigInt::gcd(num_, den_);
    if (!g.is_one()) {
        num_ = divide_exact(num_, g);
        den_ = divide_exact(den_, g);
    }
}

Rational Rational::from_decimal_string(const std::string& text) {
    const std::string& t = text;
    bool neg = false;
    size_t pos = 0;
    if (pos < t.size() && (t[pos] == '+' || t[pos] == '-')) {
        neg = t[pos] == '-';
        ++pos;
    }
    std::string intpart, fracpart;
    while (pos < t.size() && isdigit(static_cast<unsigned char>(t[pos]))) intpart.push_back(t[pos++]);
    if (pos < t.size() && t[pos] == '.') {
        ++pos;
        while (pos < t.size() && isdigit(static_cast<unsigned char>(t[pos]))) fracpart.push_back(t[pos++]);
    }
    if (pos != t.size() || (intpart.empty() && fracpart.empty()))
        throw std::invalid_argument("Rational::from_decimal_string: bad literal '" + text + "'");
    BigInt num = BigInt::from_decimal(intpart.empty() ? "0" : intpart);
    BigInt den(1);
    for (char c : fracpart) {
        num = num * BigInt(10) + BigInt(c - '0');
        den = den * BigInt(10);
    }
    if (neg) num = -num;
    return Rational(std::move(num), std::move(den));
}

Rational Rational::operator+(const Rational& o) const {
    return Rational(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
}
Rational Rational::operator-(const Rational& o) const {
    return Rational(num_ * o.den_ - o.num_ * den_, den_ * o.den_);
}
Rational Rational::operator*(const Rational& o) const { return Rational(num_ * o.num_, den_ * o.den_); }
Rational Rational::operator/(const Rational& o) const {
    if (o.is_zero()) throw std::domain_error("Rational: division by zero");
    return Rational(num_ * o.den_, den_ * o.num_);
}
Rational Rational::operator-() const {
    Rational r = *this;
    r.num_ = -r.num_;
    return r;
}

Rational Rational::pow(unsigned long long e) const {
    Rational base = *this, acc(1);
    while (e) {
        if (e & 1ull) acc = acc * base;
        base = base * base;
        e >>= 1;
    }
    return acc;
}

int Rational::cmp(const Rational& a, const Rational& b) {
    return BigInt::cmp(a.num_ * b.den_, b.num_ * a.den_);
}

double Rational::to_double() const { return num_.to_double() / den_.to_double(); }

std::string Rational::to_string() const {
    if (is_integer()) return num_.to_string();
    return num_.to_string() + "/" + den_.to_string();
}

std::string Rational::to_decimal_string() const {
    if (is_integer()) return num_.to_string();
    BigInt d = den_;
    int twos = 0, fives = 0;
    std::uint32_t rem = 0;
    for (;;) {
        BigInt q = d.div_small(2, &rem);
        if (rem != 0) break;
        d = q;
        ++twos;
    }
    for (;;) {
        BigInt q = d.div_small(5, &rem);
        if (rem != 0) break;
        d = q;
        ++fives;
    }
    if (!d.is_one()) return "";
    int digits = std::max(twos, fives);
    BigInt scaled = num_.abs();
    for (int i = twos; i < digits; ++i) scaled = scaled * BigInt(2);
    for (int i = fives; i < digits; ++i) scaled = scaled * BigInt(5);
    std::string s = scaled.to_string();
    while (static_cast<int>(s.size()) <= digits) s.insert(s.begin(), '0');
    s.insert(s.end() - digits, '.');
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    if (is_negative()) s.insert(s.begin(), '-');
    return s;
}

} // namespace coredel
