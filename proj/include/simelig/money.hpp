#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>

#include "simelig/common.hpp"

namespace simelig {

/// Money is integer cents throughout. All threshold comparisons on money are
/// exact integer comparisons, so eligibility decisions are reproducible
/// bit-for-bit across runs and platforms.
struct Money {
    std::int64_t cents = 0;

    friend auto operator<=>(const Money&, const Money&) = default;

    friend Money operator+(Money a, Money b) { return Money{a.cents + b.cents}; }
    friend Money operator-(Money a, Money b) { return Money{a.cents - b.cents}; }
    Money& operator+=(Money b) { cents += b.cents; return *this; }
    Money& operator-=(Money b) { cents -= b.cents; return *this; }

    friend Money operator*(Money a, std::int64_t k) { return Money{a.cents * k}; }
    friend Money operator*(std::int64_t k, Money a) { return Money{a.cents * k}; }

    /// Integer division truncating toward zero (monthly income = annual / 12).
    friend Money operator/(Money a, std::int64_t k) { return Money{a.cents / k}; }

    double dollars() const { return static_cast<double>(cents) / 100.0; }
};

inline Money from_dollars(std::int64_t d) { return Money{d * 100}; }

/// Parses a decimal string into an integer scaled by 10^scale_digits,
/// rejecting inputs with more fractional digits than the scale admits.
/// Exact: no floating point is involved.
inline std::int64_t parse_scaled_decimal(const std::string& s, int scale_digits,
                                         const std::string& what) {
    if (s.empty()) throw ValidationError(what + ": empty number");
    std::size_t i = 0;
    bool neg = false;
    if (s[i] == '-' || s[i] == '+') {
        neg = s[i] == '-';
        ++i;
    }
    std::int64_t whole = 0;
    bool any_digit = false;
    for (; i < s.size() && s[i] != '.'; ++i) {
        if (s[i] < '0' || s[i] > '9')
            throw ValidationError(what + ": bad number '" + s + "'");
        whole = whole * 10 + (s[i] - '0');
        any_digit = true;
    }
    std::int64_t frac = 0;
    int frac_digits = 0;
    if (i < s.size() && s[i] == '.') {
        ++i;
        for (; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9')
                throw ValidationError(what + ": bad number '" + s + "'");
            if (frac_digits == scale_digits)
                throw ValidationError(what + ": '" + s + "' has more than " +
                                      std::to_string(scale_digits) +
                                      " decimal places");
            frac = frac * 10 + (s[i] - '0');
            ++frac_digits;
            any_digit = true;
        }
    }
    if (!any_digit) throw ValidationError(what + ": bad number '" + s + "'");
    for (int k = frac_digits; k < scale_digits; ++k) frac *= 10;
    std::int64_t scale = 1;
    for (int k = 0; k < scale_digits; ++k) scale *= 10;
    std::int64_t v = whole * scale + frac;
    return neg ? -v : v;
}

/// Dollars with at most 2 decimals -> cents.
inline Money parse_money(const std::string& s, const std::string& what) {
    return Money{parse_scaled_decimal(s, 2, what)};
}

/// Ratio with at most 4 decimals -> basis points ("1.33" -> 13300).
inline std::int64_t parse_ratio_bp(const std::string& s, const std::string& what) {
    return parse_scaled_decimal(s, 4, what);
}

inline std::string money_to_string(Money m) {
    std::int64_t c = m.cents;
    bool neg = c < 0;
    if (neg) c = -c;
    std::string s = std::to_string(c / 100);
    std::int64_t rem = c % 100;
    if (rem != 0) {
        char buf[8];
        std::snprintf(buf, sizeof buf, ".%02lld", static_cast<long long>(rem));
        s += buf;
    }
    return neg ? "-" + s : s;
}

inline std::string ratio_bp_to_string(std::int64_t bp) {
    bool neg = bp < 0;
    if (neg) bp = -bp;
    std::string s = std::to_string(bp / 10000);
    std::int64_t rem = bp % 10000;
    if (rem != 0) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "%04lld", static_cast<long long>(rem));
        std::string f = buf;
        while (!f.empty() && f.back() == '0') f.pop_back();
        s += "." + f;
    }
    return neg ? "-" + s : s;
}

} // namespace simelig
