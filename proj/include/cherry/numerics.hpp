#pragma once

// Arbitrary-precision scalars and log-magnitude bookkeeping.
//
// Real wraps one mpfr_t; every value carries its own precision and all
// operations are correctly rounded (MPFR_RNDN) at the precision of the
// widest operand.  LogMag stores a number as {sign, log|x|} so that chained
// products, quotients and real-exponent powers over dynamic ranges far
// beyond any fixed-width exponent stay exact in the log domain.

#include <mpfr.h>

#include <cstdio>
#include <string>
#include <utility>

#include "cherry/errors.hpp"

namespace cherry {

class Real {
  public:
    explicit Real(mpfr_prec_t prec) {
        mpfr_init2(v_, prec);
        mpfr_set_zero(v_, 1);
    }
    Real(const Real& o) {
        mpfr_init2(v_, mpfr_get_prec(o.v_));
        mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    Real(Real&& o) noexcept {
        mpfr_init2(v_, mpfr_get_prec(o.v_));
        mpfr_swap(v_, o.v_);
    }
    Real& operator=(const Real& o) {
        if (this != &o) {
            mpfr_set_prec(v_, mpfr_get_prec(o.v_));
            mpfr_set(v_, o.v_, MPFR_RNDN);
        }
        return *this;
    }
    Real& operator=(Real&& o) noexcept {
        if (this != &o) mpfr_swap(v_, o.v_);
        return *this;
    }
    ~Real() { mpfr_clear(v_); }

    static Real from_str(const std::string& s, mpfr_prec_t prec) {
        Real r(prec);
        int base = 10;
        std::string body = s;
        if (s.size() > 1 && (s.rfind("0x", 0) == 0 || s.rfind("-0x", 0) == 0 ||
                             s.rfind("0X", 0) == 0 || s.rfind("-0X", 0) == 0))
            base = 0;  // auto-detect hex floats
        if (mpfr_set_str(r.v_, body.c_str(), base, MPFR_RNDN) != 0 || mpfr_nan_p(r.v_))
            throw ConfigError("unparseable numeric literal: " + s);
        return r;
    }
    static Real from_double(double d, mpfr_prec_t prec) {
        Real r(prec);
        mpfr_set_d(r.v_, d, MPFR_RNDN);
        return r;
    }
    static Real from_long(long n, mpfr_prec_t prec) {
        Real r(prec);
        mpfr_set_si(r.v_, n, MPFR_RNDN);
        return r;
    }
    // 2^e
    static Real pow2(long e, mpfr_prec_t prec) {
        Real r(prec);
        mpfr_set_ui_2exp(r.v_, 1, e, MPFR_RNDN);
        return r;
    }
    static Real neg_inf(mpfr_prec_t prec) {
        Real r(prec);
        mpfr_set_inf(r.v_, -1);
        return r;
    }

    mpfr_prec_t prec() const { return mpfr_get_prec(v_); }
    mpfr_ptr raw() { return v_; }
    mpfr_srcptr raw() const { return v_; }

    double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
    long to_long() const { return mpfr_get_si(v_, MPFR_RNDN); }
    bool is_nan() const { return mpfr_nan_p(v_) != 0; }
    bool is_inf() const { return mpfr_inf_p(v_) != 0; }
    bool is_zero() const { return mpfr_zero_p(v_) != 0; }
    int sgn() const { return mpfr_sgn(v_); }

    // exact round-trip form (hex mantissa, binary exponent)
    std::string str_hex() const {
        char* s = nullptr;
        mpfr_asprintf(&s, "%Ra", v_);
        std::string out(s);
        mpfr_free_str(s);
        return out;
    }
    std::string str_dec(int digits = 0) const {
        if (digits <= 0) digits = (int)(prec() * 0.30103) + 3;
        char* s = nullptr;
        mpfr_asprintf(&s, "%.*Rg", digits, v_);
        std::string out(s);
        mpfr_free_str(s);
        return out;
    }

    friend Real operator+(const Real& a, const Real& b) {
        Real r(widest(a, b));
        mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN);
        return r;
    }
    friend Real operator-(const Real& a, const Real& b) {
        Real r(widest(a, b));
        mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN);
        return r;
    }
    friend Real operator*(const Real& a, const Real& b) {
        Real r(widest(a, b));
        mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN);
        return r;
    }
    friend Real operator/(const Real& a, const Real& b) {
        Real r(widest(a, b));
        mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN);
        return r;
    }
    friend Real operator-(const Real& a) {
        Real r(a.prec());
        mpfr_neg(r.v_, a.v_, MPFR_RNDN);
        return r;
    }
    Real& operator+=(const Real& b) {
        mpfr_add(v_, v_, b.v_, MPFR_RNDN);
        return *this;
    }
    Real& operator-=(const Real& b) {
        mpfr_sub(v_, v_, b.v_, MPFR_RNDN);
        return *this;
    }
    Real& operator*=(const Real& b) {
        mpfr_mul(v_, v_, b.v_, MPFR_RNDN);
        return *this;
    }
    Real& operator/=(const Real& b) {
        mpfr_div(v_, v_, b.v_, MPFR_RNDN);
        return *this;
    }

    friend Real operator*(const Real& a, long b) {
        Real r(a.prec());
        mpfr_mul_si(r.v_, a.v_, b, MPFR_RNDN);
        return r;
    }
    friend Real operator/(const Real& a, long b) {
        Real r(a.prec());
        mpfr_div_si(r.v_, a.v_, b, MPFR_RNDN);
        return r;
    }
    friend Real operator+(const Real& a, long b) {
        Real r(a.prec());
        mpfr_add_si(r.v_, a.v_, b, MPFR_RNDN);
        return r;
    }
    friend Real operator-(const Real& a, long b) {
        Real r(a.prec());
        mpfr_sub_si(r.v_, a.v_, b, MPFR_RNDN);
        return r;
    }

    friend bool operator<(const Real& a, const Real& b) { return mpfr_less_p(a.v_, b.v_) != 0; }
    friend bool operator>(const Real& a, const Real& b) { return mpfr_greater_p(a.v_, b.v_) != 0; }
    friend bool operator<=(const Real& a, const Real& b) { return mpfr_lessequal_p(a.v_, b.v_) != 0; }
    friend bool operator>=(const Real& a, const Real& b) { return mpfr_greaterequal_p(a.v_, b.v_) != 0; }
    friend bool operator==(const Real& a, const Real& b) { return mpfr_equal_p(a.v_, b.v_) != 0; }
    friend bool operator!=(const Real& a, const Real& b) { return !(a == b); }
    friend bool operator<(const Real& a, long b) { return mpfr_cmp_si(a.v_, b) < 0; }
    friend bool operator>(const Real& a, long b) { return mpfr_cmp_si(a.v_, b) > 0; }
    friend bool operator<=(const Real& a, long b) { return mpfr_cmp_si(a.v_, b) <= 0; }
    friend bool operator>=(const Real& a, long b) { return mpfr_cmp_si(a.v_, b) >= 0; }
    friend bool operator==(const Real& a, long b) { return mpfr_cmp_si(a.v_, b) == 0; }

  private:
    static mpfr_prec_t widest(const Real& a, const Real& b) {
        return a.prec() > b.prec() ? a.prec() : b.prec();
    }
    mpfr_t v_;
};

inline Real abs(const Real& a) {
    Real r(a.prec());
    mpfr_abs(r.raw(), a.raw(), MPFR_RNDN);
    return r;
}
inline Real log(const Real& a) {
    Real r(a.prec());
    mpfr_log(r.raw(), a.raw(), MPFR_RNDN);
    return r;
}
inline Real log2(const Real& a) {
    Real r(a.prec());
    mpfr_log2(r.raw(), a.raw(), MPFR_RNDN);
    return r;
}
inline Real exp(const Real& a) {
    Real r(a.prec());
    mpfr_exp(r.raw(), a.raw(), MPFR_RNDN);
    return r;
}
inline Real pow(const Real& a, const Real& e) {
    Real r(a.prec() > e.prec() ? a.prec() : e.prec());
    mpfr_pow(r.raw(), a.raw(), e.raw(), MPFR_RNDN);
    return r;
}
inline Real sqrt(const Real& a) {
    Real r(a.prec());
    mpfr_sqrt(r.raw(), a.raw(), MPFR_RNDN);
    return r;
}
inline Real floor(const Real& a) {
    Real r(a.prec());
    mpfr_floor(r.raw(), a.raw());
    return r;
}
inline Real cos(const Real& a) {
    Real r(a.prec());
    mpfr_cos(r.raw(), a.raw(), MPFR_RNDN);
    return r;
}
inline Real min(const Real& a, const Real& b) { return a < b ? a : b; }
inline Real max(const Real& a, const Real& b) { return a > b ? a : b; }

// same binary value carried at another precision (widening is exact)
inline Real with_precision(const Real& x, mpfr_prec_t prec) {
    Real r(prec);
    mpfr_set(r.raw(), x.raw(), MPFR_RNDN);
    return r;
}

class NumericContext {
  public:
    explicit NumericContext(long bits) : bits_(bits) {
        if (bits < 64) throw ConfigError("precision below 64 bits");
    }
    long precision_bits() const { return bits_; }

    Real real(const std::string& s) const { return Real::from_str(s, bits_); }
    Real real(double d) const { return Real::from_double(d, bits_); }
    Real real(long n) const { return Real::from_long(n, bits_); }
    Real real(int n) const { return Real::from_long(n, bits_); }
    Real zero() const { return Real::from_long(0, bits_); }
    Real one() const { return Real::from_long(1, bits_); }
    // 2^(-P+offset): guard bands and tolerances are all expressed this way
    Real eps(long offset = 0) const { return Real::pow2(-bits_ + offset, bits_); }
    Real pi() const {
        Real r(bits_);
        mpfr_const_pi(r.raw(), MPFR_RNDN);
        return r;
    }

  private:
    long bits_;
};

inline NumericContext make_context(long bits) { return NumericContext(bits); }

// signed log-magnitude value: x = sign * exp(logAbs); sign==0 <=> x==0
struct LogMag {
    int sign;
    Real logAbs;

    static LogMag zero(mpfr_prec_t prec) { return {0, Real::neg_inf(prec)}; }
    static LogMag one(mpfr_prec_t prec) { return {1, Real::from_long(0, prec)}; }

    bool is_zero() const { return sign == 0; }
    // magnitude as a plain Real; underflows to 0 / overflows to inf only
    // beyond the mpfr exponent range itself
    Real magnitude() const {
        if (sign == 0) return Real::from_long(0, logAbs.prec());
        return exp(logAbs);
    }
    Real value() const {
        Real m = magnitude();
        return sign < 0 ? -m : m;
    }
    double log10_abs() const {
        return logAbs.to_double() / 2.302585092994045684;
    }
};

// logAbs carries 64 guard bits beyond the input so that the round trip
// from_logmag(to_logmag(x)) stays within relative 2^(1-P) even when
// |log|x|| is large
inline LogMag to_logmag(const Real& x) {
    int s = x.sgn();
    if (s == 0 || x.is_zero()) return LogMag::zero(x.prec());
    Real wide(x.prec() + 64);
    mpfr_set(wide.raw(), x.raw(), MPFR_RNDN);
    mpfr_abs(wide.raw(), wide.raw(), MPFR_RNDN);
    mpfr_log(wide.raw(), wide.raw(), MPFR_RNDN);
    return {s, wide};
}

inline Real from_logmag(const LogMag& m) { return m.value(); }

inline LogMag lm_mul(const LogMag& a, const LogMag& b) {
    if (a.sign == 0 || b.sign == 0) return LogMag::zero(a.logAbs.prec());
    return {a.sign * b.sign, a.logAbs + b.logAbs};
}

inline LogMag lm_div(const LogMag& a, const LogMag& b) {
    if (b.sign == 0) throw Error("log-magnitude division by zero");
    if (a.sign == 0) return LogMag::zero(a.logAbs.prec());
    return {a.sign * b.sign, a.logAbs - b.logAbs};
}

// |a|^e with the sign of a preserved; a must not be negative unless e is
// conceptually integer (callers manage that; distances here are positive)
inline LogMag lm_pow(const LogMag& a, const Real& e) {
    if (a.sign == 0) return LogMag::zero(a.logAbs.prec());
    return {a.sign, a.logAbs * e};
}

// signed addition via log-sum-exp; exact cancellation yields zero
inline LogMag lm_add(const LogMag& a, const LogMag& b) {
    if (a.sign == 0) return b;
    if (b.sign == 0) return a;
    mpfr_prec_t p = a.logAbs.prec() > b.logAbs.prec() ? a.logAbs.prec() : b.logAbs.prec();
    const LogMag* big = &a;
    const LogMag* small = &b;
    if (b.logAbs > a.logAbs) std::swap(big, small);
    Real d = small->logAbs - big->logAbs;  // <= 0
    Real t(p);
    if (a.sign == b.sign) {
        // log(1 + e^d)
        mpfr_exp(t.raw(), d.raw(), MPFR_RNDN);
        mpfr_log1p(t.raw(), t.raw(), MPFR_RNDN);
        return {big->sign, big->logAbs + t};
    }
    if (d.is_zero()) return LogMag::zero(p);
    // log(1 - e^d), d < 0
    mpfr_exp(t.raw(), d.raw(), MPFR_RNDN);
    mpfr_neg(t.raw(), t.raw(), MPFR_RNDN);
    mpfr_log1p(t.raw(), t.raw(), MPFR_RNDN);
    return {big->sign, big->logAbs + t};
}

inline LogMag lm_sub(const LogMag& a, const LogMag& b) {
    LogMag nb = b;
    nb.sign = -nb.sign;
    return lm_add(a, nb);
}

inline LogMag lm_neg(const LogMag& a) { return {-a.sign, a.logAbs}; }

inline bool lm_abs_less(const LogMag& a, const LogMag& b) {
    if (a.sign == 0) return b.sign != 0;
    if (b.sign == 0) return false;
    return a.logAbs < b.logAbs;
}

inline bool lm_less(const LogMag& a, const LogMag& b) {
    if (a.sign != b.sign) return a.sign < b.sign;
    if (a.sign == 0) return false;
    return a.sign > 0 ? a.logAbs < b.logAbs : b.logAbs < a.logAbs;
}

} // namespace cherry
