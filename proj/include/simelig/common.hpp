#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace simelig {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Bad input data: a file that does not parse, a missing column, an I/O
/// failure. CLI exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Data that parses but violates a documented invariant or precondition.
/// CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class MaritalStatus : std::uint8_t { single = 0, married = 1 };

inline const char* to_string(MaritalStatus m) {
    return m == MaritalStatus::single ? "single" : "married";
}

inline MaritalStatus marital_from_string(const std::string& s) {
    if (s == "single") return MaritalStatus::single;
    if (s == "married") return MaritalStatus::married;
    throw ValidationError("unknown marital status '" + s + "'");
}

enum class Sex : std::uint8_t { female = 0, male = 1 };

inline Sex sex_from_string(const std::string& s) {
    if (s == "f" || s == "female") return Sex::female;
    if (s == "m" || s == "male") return Sex::male;
    throw ValidationError("unknown sex code '" + s + "'");
}

inline const char* to_string(Sex s) { return s == Sex::female ? "f" : "m"; }

/// Calendar date at day granularity. Comparisons are lexicographic.
struct Date {
    int year = 0;
    int month = 1;
    int day = 1;

    friend auto operator<=>(const Date&, const Date&) = default;
};

inline Date date_from_string(const std::string& s) {
    // ISO "YYYY-MM-DD"
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw ValidationError("bad date '" + s + "', expected YYYY-MM-DD");
    Date d;
    try {
        d.year = std::stoi(s.substr(0, 4));
        d.month = std::stoi(s.substr(5, 2));
        d.day = std::stoi(s.substr(8, 2));
    } catch (const std::exception&) {
        throw ValidationError("bad date '" + s + "', expected YYYY-MM-DD");
    }
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
        throw ValidationError("bad date '" + s + "'");
    return d;
}

inline std::string to_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

} // namespace simelig
