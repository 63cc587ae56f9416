#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simelig/common.hpp"
#include "simelig/csv.hpp"
#include "simelig/money.hpp"

namespace simelig {

inline constexpr const char* kRulesVersionLine = "#simelig-rules v1";

/// Eligibility pathways, in reporting order. A child eligible through several
/// pathways in the same month is tagged with the highest-precedence one.
enum class Pathway : std::uint8_t {
    afdc,
    afdc_up,
    ribicoff,
    medically_needy,
    poverty_expansion,
    section_1931,
    targeted,
    schip,
};

inline const char* to_string(Pathway p) {
    switch (p) {
        case Pathway::afdc: return "afdc";
        case Pathway::afdc_up: return "afdc_up";
        case Pathway::ribicoff: return "ribicoff";
        case Pathway::medically_needy: return "medically_needy";
        case Pathway::poverty_expansion: return "poverty_expansion";
        case Pathway::section_1931: return "section_1931";
        case Pathway::targeted: return "targeted";
        case Pathway::schip: return "schip";
    }
    return "?";
}

/// One-letter codes used in the per-month audit string ('.' = ineligible).
inline char pathway_code(Pathway p) {
    switch (p) {
        case Pathway::afdc: return 'A';
        case Pathway::afdc_up: return 'U';
        case Pathway::ribicoff: return 'R';
        case Pathway::medically_needy: return 'N';
        case Pathway::poverty_expansion: return 'P';
        case Pathway::section_1931: return '1';
        case Pathway::targeted: return 'T';
        case Pathway::schip: return 'S';
    }
    return '?';
}

/// One earned-income disregard rule: applies while months worked does not
/// exceed `months_worked_limit`. Rows are kept sorted by the limit and the
/// first admissible row wins. The disregard is flat + frac * (earned - flat),
/// fractions evaluated in exact integer arithmetic with truncation.
struct DisregardRule {
    int months_worked_limit = 0;
    Money flat{};
    std::int64_t frac_num = 0;
    std::int64_t frac_den = 1;
};

struct AfdcParams {
    std::vector<Money> needs_standard;    // [family_size - 1], monthly
    std::vector<Money> payment_standard;  // [family_size - 1], monthly
    int gross_income_limit_pct = 185;     // test 3, percent of needs standard
    Money flat_disregard{};               // monthly, household level
    std::vector<DisregardRule> earnings_disregards;
    Money work_expense_deduction{};       // monthly, per worker

    int max_family_size() const { return static_cast<int>(needs_standard.size()); }

    /// Family-size lookup clamps beyond the table range (callers that must
    /// reject instead check max_family_size themselves).
    Money needs(int family_size) const {
        return at(needs_standard, family_size);
    }
    Money payment(int family_size) const {
        return at(payment_standard, family_size);
    }

private:
    static Money at(const std::vector<Money>& v, int family_size) {
        if (v.empty()) throw ValidationError("needs_standard: empty table");
        if (family_size < 1)
            throw ValidationError("family_size must be >= 1, found " +
                                  std::to_string(family_size));
        int i = std::min(family_size, static_cast<int>(v.size()));
        return v[static_cast<std::size_t>(i - 1)];
    }
};

enum class ExpansionSource : std::uint8_t { poverty_expansion, schip, targeted, pregnancy };

inline const char* to_string(ExpansionSource s) {
    switch (s) {
        case ExpansionSource::poverty_expansion: return "poverty_expansion";
        case ExpansionSource::schip: return "schip";
        case ExpansionSource::targeted: return "targeted";
        case ExpansionSource::pregnancy: return "pregnancy";
    }
    return "?";
}

inline ExpansionSource expansion_source_from_string(const std::string& s) {
    if (s == "poverty_expansion") return ExpansionSource::poverty_expansion;
    if (s == "schip") return ExpansionSource::schip;
    if (s == "targeted") return ExpansionSource::targeted;
    if (s == "pregnancy") return ExpansionSource::pregnancy;
    throw ValidationError("unknown expansion source '" + s + "'");
}

/// Income-based eligibility threshold: family income below fpl_multiple times
/// the poverty guideline, gated by child age and optionally by birth date.
struct ExpansionThreshold {
    int min_age = 0;
    int max_age = 18;
    std::int64_t fpl_multiple_bp = 0;  // basis points: 1.33 -> 13300
    std::optional<Date> birthdate_cutoff;  // eligible only if born strictly after
    ExpansionSource source = ExpansionSource::poverty_expansion;
};

struct SchipParams {
    Money work_expense_deduction{};  // monthly, per worker
};

struct ProgramFlags {
    bool afdc_up = false;
    bool ribicoff = false;
    bool medically_needy = false;
    bool schip_separate = false;
    bool targeted_medicaid = false;
};

/// All eligibility parameters for one (state, year).
struct RuleVintage {
    std::string state;
    int year = 0;
    AfdcParams afdc;
    ProgramFlags flags;
    std::vector<ExpansionThreshold> expansions;
    std::optional<SchipParams> schip;
    std::optional<std::int64_t> medically_needy_limit_bp;  // <= 13300
    std::optional<AfdcParams> frozen_1931;  // July-1996 snapshot
    bool post_prwora = false;               // true iff year >= 1997
};

enum class GuidelineRegion : std::uint8_t { contiguous, alaska, hawaii };

inline const char* to_string(GuidelineRegion r) {
    switch (r) {
        case GuidelineRegion::contiguous: return "contiguous";
        case GuidelineRegion::alaska: return "alaska";
        case GuidelineRegion::hawaii: return "hawaii";
    }
    return "?";
}

inline GuidelineRegion region_from_string(const std::string& s) {
    if (s == "contiguous") return GuidelineRegion::contiguous;
    if (s == "alaska") return GuidelineRegion::alaska;
    if (s == "hawaii") return GuidelineRegion::hawaii;
    throw ValidationError("unknown guideline region '" + s + "'");
}

/// All states except Alaska and Hawaii share one guideline schedule; the
/// state codes "AK" and "HI" select the other two.
inline GuidelineRegion region_for_state(const std::string& state) {
    if (state == "AK") return GuidelineRegion::alaska;
    if (state == "HI") return GuidelineRegion::hawaii;
    return GuidelineRegion::contiguous;
}

class PovertyGuidelineTable {
public:
    void set(int year, GuidelineRegion region, int family_size, Money annual) {
        table_[key(year, region, family_size)] = annual;
        max_size_[{year, static_cast<int>(region)}] =
            std::max(max_size_[{year, static_cast<int>(region)}], family_size);
    }

    /// Annual guideline; family sizes beyond the table clamp to the largest
    /// size on record (and the clamp is reported through `clamped`).
    Money lookup(int year, GuidelineRegion region, int family_size,
                 bool* clamped = nullptr) const {
        auto ms = max_size_.find({year, static_cast<int>(region)});
        if (ms == max_size_.end())
            throw ValidationError("no poverty guideline for year " +
                                  std::to_string(year) + " region " +
                                  std::string(to_string(region)));
        int size = family_size;
        if (size > ms->second) {
            size = ms->second;
            if (clamped) *clamped = true;
        }
        auto it = table_.find(key(year, region, size));
        if (it == table_.end())
            throw ValidationError("no poverty guideline for year " +
                                  std::to_string(year) + " region " +
                                  std::string(to_string(region)) + " family size " +
                                  std::to_string(size));
        return it->second;
    }

    bool empty() const { return table_.empty(); }

    /// Strictly increasing in family size within each (year, region).
    void validate() const {
        for (const auto& [yr_region, max_size] : max_size_) {
            Money prev{-1};
            for (int s = 1; s <= max_size; ++s) {
                auto it = table_.find(key(yr_region.first,
                                          static_cast<GuidelineRegion>(yr_region.second), s));
                if (it == table_.end())
                    throw ValidationError(
                        "poverty guidelines: year " + std::to_string(yr_region.first) +
                        " missing family size " + std::to_string(s));
                if (it->second <= prev)
                    throw ValidationError(
                        "poverty guidelines: amounts must increase with family size "
                        "(year " + std::to_string(yr_region.first) + ", size " +
                        std::to_string(s) + ")");
                prev = it->second;
            }
        }
    }

private:
    static std::int64_t key(int year, GuidelineRegion region, int family_size) {
        return (static_cast<std::int64_t>(year) << 16) |
               (static_cast<std::int64_t>(region) << 8) |
               static_cast<std::int64_t>(family_size);
    }

    std::map<std::int64_t, Money> table_;
    std::map<std::pair<int, int>, int> max_size_;
};

/// Immutable collection of vintages keyed by (state, year).
class RuleSet {
public:
    void add(RuleVintage v) {
        auto k = std::make_pair(v.state, v.year);
        if (index_.count(k))
            throw ValidationError("duplicate rule vintage (" + v.state + "," +
                                  std::to_string(v.year) + ")");
        index_[k] = vintages_.size();
        vintages_.push_back(std::move(v));
    }

    const RuleVintage* find(const std::string& state, int year) const {
        auto it = index_.find({state, year});
        if (it == index_.end()) return nullptr;
        return &vintages_[it->second];
    }

    const RuleVintage& at(const std::string& state, int year) const {
        const RuleVintage* v = find(state, year);
        if (!v)
            throw ValidationError("no rule vintage for (" + state + "," +
                                  std::to_string(year) + ")");
        return *v;
    }

    const std::vector<RuleVintage>& vintages() const { return vintages_; }
    std::size_t size() const { return vintages_.size(); }

    std::vector<std::string> states() const {
        std::vector<std::string> out;
        for (const auto& v : vintages_)
            if (std::find(out.begin(), out.end(), v.state) == out.end())
                out.push_back(v.state);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<int> years() const {
        std::vector<int> out;
        for (const auto& v : vintages_)
            if (std::find(out.begin(), out.end(), v.year) == out.end())
                out.push_back(v.year);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::vector<RuleVintage> vintages_;
    std::map<std::pair<std::string, int>, std::size_t> index_;
};

struct RuleBundle {
    RuleSet rules;
    PovertyGuidelineTable guidelines;
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void validate_afdc(const AfdcParams& p, const std::string& where,
                          std::vector<std::string>& issues) {
    if (p.needs_standard.empty())
        issues.push_back(where + ": needs_standard: no family sizes defined");
    if (p.needs_standard.size() != p.payment_standard.size())
        issues.push_back(where + ": needs_standard and payment_standard cover "
                                 "different family sizes");
    for (const auto& m : p.needs_standard)
        if (m.cents < 0) issues.push_back(where + ": needs_standard: negative amount");
    for (const auto& m : p.payment_standard)
        if (m.cents < 0) issues.push_back(where + ": payment_standard: negative amount");
    if (p.gross_income_limit_pct < 100)
        issues.push_back(where + ": gross_income_limit_pct: must be >= 100, found " +
                         std::to_string(p.gross_income_limit_pct));
    if (p.flat_disregard.cents < 0)
        issues.push_back(where + ": flat_disregard: negative amount");
    if (p.work_expense_deduction.cents < 0)
        issues.push_back(where + ": work_expense_deduction: negative amount");
    int prev_limit = 0;
    for (const auto& r : p.earnings_disregards) {
        if (r.months_worked_limit <= prev_limit)
            issues.push_back(where + ": earnings_disregards: months limits must be "
                                     "strictly increasing");
        prev_limit = r.months_worked_limit;
        if (r.flat.cents < 0)
            issues.push_back(where + ": earnings_disregards: negative flat amount");
        if (r.frac_den <= 0 || r.frac_num < 0 || r.frac_num > r.frac_den)
            issues.push_back(where + ": earnings_disregards: fraction must be in [0,1]");
    }
}

} // namespace detail

/// Checks every invariant of one vintage; violations name the field.
inline void validate_vintage(const RuleVintage& v, std::vector<std::string>& issues) {
    const std::string where = "(" + v.state + "," + std::to_string(v.year) + ")";
    detail::validate_afdc(v.afdc, where + " afdc", issues);
    if (v.post_prwora != (v.year >= 1997))
        issues.push_back(where + ": post_prwora: must be true iff year >= 1997");
    if (v.flags.medically_needy && !v.medically_needy_limit_bp)
        issues.push_back(where + ": medically_needy_limit: required when the "
                                 "medically_needy flag is set");
    if (v.medically_needy_limit_bp && *v.medically_needy_limit_bp > 13300)
        issues.push_back(where + ": medically_needy_limit: must be <= 1.33, found " +
                         ratio_bp_to_string(*v.medically_needy_limit_bp));
    if (v.medically_needy_limit_bp && *v.medically_needy_limit_bp <= 0)
        issues.push_back(where + ": medically_needy_limit: must be positive");
    for (const auto& e : v.expansions) {
        // Pregnancy rows gate on the mother's age, so the child age bound
        // does not apply to them.
        const int age_cap = e.source == ExpansionSource::pregnancy ? 120 : 18;
        if (e.min_age < 0 || e.min_age > e.max_age || e.max_age > age_cap)
            issues.push_back(where + ": expansion: requires 0 <= min_age <= max_age <= " +
                             std::to_string(age_cap));
        if (e.fpl_multiple_bp <= 0)
            issues.push_back(where + ": expansion: fpl_multiple must be positive");
        if (!v.post_prwora && (e.source == ExpansionSource::schip ||
                               e.source == ExpansionSource::targeted))
            issues.push_back(where + ": expansion: " +
                             std::string(to_string(e.source)) +
                             " rows cannot apply before 1997");
    }
    if (v.post_prwora && !v.frozen_1931)
        issues.push_back(where + ": frozen_1931: required for post-1996 vintages");
    if (v.frozen_1931)
        detail::validate_afdc(*v.frozen_1931, where + " frozen_1931", issues);
    if (v.schip && v.schip->work_expense_deduction.cents < 0)
        issues.push_back(where + ": schip work_expense_deduction: negative amount");
}

// ---------------------------------------------------------------------------
// Rule-file loading. A rules directory holds one file per parameter family:
//   afdc_params.csv, expansions.csv, flags.csv, schip.csv, frozen_1931.csv,
//   poverty_guidelines.csv
// each beginning with the "#simelig-rules v1" version line.

namespace detail {

inline std::vector<DisregardRule> parse_disregard_schedule(const std::string& text,
                                                           const CsvReader& reader) {
    // "months:flat:num/den;months:flat:num/den", e.g. "4:30:1/3;12:30:0/1".
    // Empty text selects the documented default: $30 plus one-third for four
    // months of work, then $30 flat through month twelve.
    if (text.empty())
        return {{4, from_dollars(30), 1, 3}, {12, from_dollars(30), 0, 1}};
    std::vector<DisregardRule> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(';', pos);
        if (end == std::string::npos) end = text.size();
        const std::string part = text.substr(pos, end - pos);
        const std::size_t c1 = part.find(':');
        const std::size_t c2 = part.find(':', c1 == std::string::npos ? 0 : c1 + 1);
        const std::size_t slash = part.find('/');
        if (c1 == std::string::npos || c2 == std::string::npos ||
            slash == std::string::npos || slash < c2)
            reader.fail("earnings_disregards: bad rule '" + part +
                        "', expected months:flat:num/den");
        DisregardRule r;
        try {
            r.months_worked_limit = std::stoi(part.substr(0, c1));
            r.flat = parse_money(part.substr(c1 + 1, c2 - c1 - 1), "earnings_disregards flat");
            r.frac_num = std::stoll(part.substr(c2 + 1, slash - c2 - 1));
            r.frac_den = std::stoll(part.substr(slash + 1));
        } catch (const std::exception& e) {
            reader.fail("earnings_disregards: bad rule '" + part + "': " + e.what());
        }
        out.push_back(r);
        pos = end + 1;
        if (end == text.size()) break;
    }
    return out;
}

inline std::string format_disregard_schedule(const std::vector<DisregardRule>& rules) {
    std::string out;
    for (const auto& r : rules) {
        if (!out.empty()) out += ';';
        out += std::to_string(r.months_worked_limit) + ":" + money_to_string(r.flat) +
               ":" + std::to_string(r.frac_num) + "/" + std::to_string(r.frac_den);
    }
    return out;
}

struct AfdcScalarRow {
    int gross_income_limit_pct;
    Money flat_disregard;
    Money work_expense_deduction;
    std::string schedule_text;
    int first_line;
};

/// Shared loader for afdc_params.csv and frozen_1931.csv (same schema).
inline std::map<std::pair<std::string, int>, AfdcParams>
load_afdc_file(const std::string& path) {
    std::map<std::pair<std::string, int>, AfdcParams> out;
    std::map<std::pair<std::string, int>, AfdcScalarRow> scalars;
    std::map<std::pair<std::string, int>, std::vector<bool>> seen_sizes;

    CsvReader reader(path, kRulesVersionLine);
    ColumnMap cm(reader, {"state", "year", "family_size", "needs_standard",
                          "payment_standard", "gross_income_limit_pct",
                          "flat_disregard", "work_expense_deduction",
                          "earnings_disregards"});
    std::vector<std::string> row;
    while (reader.next(row)) {
        const std::string state = row[cm["state"]];
        const int year = static_cast<int>(parse_int(row[cm["year"]], reader, "year"));
        const int size = static_cast<int>(parse_int(row[cm["family_size"]], reader,
                                                    "family_size"));
        if (size < 1 || size > 32) reader.fail("family_size out of range");
        auto key = std::make_pair(state, year);
        auto& p = out[key];
        auto& seen = seen_sizes[key];
        if (static_cast<int>(seen.size()) < size) seen.resize(size, false);
        if (seen[size - 1])
            reader.fail("duplicate row for (" + state + "," + std::to_string(year) +
                        ") family_size " + std::to_string(size));
        seen[size - 1] = true;
        if (static_cast<int>(p.needs_standard.size()) < size) {
            p.needs_standard.resize(size);
            p.payment_standard.resize(size);
        }
        try {
            p.needs_standard[size - 1] = parse_money(row[cm["needs_standard"]],
                                                     "needs_standard");
            p.payment_standard[size - 1] = parse_money(row[cm["payment_standard"]],
                                                       "payment_standard");
        } catch (const ValidationError& e) {
            reader.fail(e.what());
        }

        AfdcScalarRow sc;
        sc.gross_income_limit_pct = static_cast<int>(
            parse_int(row[cm["gross_income_limit_pct"]], reader, "gross_income_limit_pct"));
        try {
            sc.flat_disregard = parse_money(row[cm["flat_disregard"]], "flat_disregard");
            sc.work_expense_deduction =
                parse_money(row[cm["work_expense_deduction"]], "work_expense_deduction");
        } catch (const ValidationError& e) {
            reader.fail(e.what());
        }
        sc.schedule_text = row[cm["earnings_disregards"]];
        sc.first_line = reader.line();
        auto it = scalars.find(key);
        if (it == scalars.end()) {
            scalars[key] = sc;
            auto& dst = out[key];
            dst.gross_income_limit_pct = sc.gross_income_limit_pct;
            dst.flat_disregard = sc.flat_disregard;
            dst.work_expense_deduction = sc.work_expense_deduction;
            dst.earnings_disregards = parse_disregard_schedule(sc.schedule_text, reader);
        } else if (it->second.gross_income_limit_pct != sc.gross_income_limit_pct ||
                   it->second.flat_disregard != sc.flat_disregard ||
                   it->second.work_expense_deduction != sc.work_expense_deduction ||
                   it->second.schedule_text != sc.schedule_text) {
            reader.fail("(" + state + "," + std::to_string(year) +
                        "): vintage-level columns differ across family_size rows "
                        "(first row at line " + std::to_string(it->second.first_line) + ")");
        }
    }

    for (const auto& [key, seen] : seen_sizes)
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (!seen[i])
                throw IoError(path + ": (" + key.first + "," +
                              std::to_string(key.second) + "): family_size " +
                              std::to_string(i + 1) +
                              " missing (sizes must cover 1..max without gaps)");
    return out;
}

} // namespace detail

/// Loads a rules directory into a validated RuleBundle.
///
/// With `issues == nullptr`, any invariant violation throws ValidationError.
/// With a collector, violating vintages are skipped and each problem is
/// recorded, which is what `rules validate` uses for its report.
inline RuleBundle load_rules(const std::string& dir,
                             std::vector<std::string>* issues = nullptr) {
    RuleBundle bundle;
    const std::string sep = dir.empty() || dir.back() == '/' ? "" : "/";

    auto afdc = detail::load_afdc_file(dir + sep + "afdc_params.csv");
    auto frozen = detail::load_afdc_file(dir + sep + "frozen_1931.csv");

    struct FlagRow {
        ProgramFlags flags;
        std::optional<std::int64_t> mn_limit_bp;
    };
    std::map<std::pair<std::string, int>, FlagRow> flag_rows;
    {
        CsvReader reader(dir + sep + "flags.csv", kRulesVersionLine);
        ColumnMap cm(reader, {"state", "year", "afdc_up", "ribicoff", "medically_needy",
                              "schip_separate", "targeted_medicaid",
                              "medically_needy_limit"});
        std::vector<std::string> row;
        while (reader.next(row)) {
            const std::string state = row[cm["state"]];
            const int year = static_cast<int>(parse_int(row[cm["year"]], reader, "year"));
            auto key = std::make_pair(state, year);
            if (flag_rows.count(key))
                reader.fail("duplicate flags row for (" + state + "," +
                            std::to_string(year) + ")");
            FlagRow fr;
            fr.flags.afdc_up = parse_bool01(row[cm["afdc_up"]], reader, "afdc_up");
            fr.flags.ribicoff = parse_bool01(row[cm["ribicoff"]], reader, "ribicoff");
            fr.flags.medically_needy =
                parse_bool01(row[cm["medically_needy"]], reader, "medically_needy");
            fr.flags.schip_separate =
                parse_bool01(row[cm["schip_separate"]], reader, "schip_separate");
            fr.flags.targeted_medicaid =
                parse_bool01(row[cm["targeted_medicaid"]], reader, "targeted_medicaid");
            const std::string& mn = row[cm["medically_needy_limit"]];
            if (!mn.empty()) {
                try {
                    fr.mn_limit_bp = parse_ratio_bp(mn, "medically_needy_limit");
                } catch (const ValidationError& e) {
                    reader.fail(e.what());
                }
            }
            flag_rows[key] = fr;
        }
    }

    std::map<std::pair<std::string, int>, std::vector<ExpansionThreshold>> expansion_rows;
    {
        CsvReader reader(dir + sep + "expansions.csv", kRulesVersionLine);
        ColumnMap cm(reader, {"state", "year", "min_age", "max_age", "fpl_multiple",
                              "birthdate_cutoff", "source"});
        std::vector<std::string> row;
        while (reader.next(row)) {
            const std::string state = row[cm["state"]];
            const int year = static_cast<int>(parse_int(row[cm["year"]], reader, "year"));
            ExpansionThreshold e;
            e.min_age = static_cast<int>(parse_int(row[cm["min_age"]], reader, "min_age"));
            e.max_age = static_cast<int>(parse_int(row[cm["max_age"]], reader, "max_age"));
            try {
                e.fpl_multiple_bp = parse_ratio_bp(row[cm["fpl_multiple"]], "fpl_multiple");
                if (!row[cm["birthdate_cutoff"]].empty())
                    e.birthdate_cutoff = date_from_string(row[cm["birthdate_cutoff"]]);
                e.source = expansion_source_from_string(row[cm["source"]]);
            } catch (const ValidationError& err) {
                reader.fail(err.what());
            }
            expansion_rows[{state, year}].push_back(e);
        }
    }

    std::map<std::pair<std::string, int>, SchipParams> schip_rows;
    {
        CsvReader reader(dir + sep + "schip.csv", kRulesVersionLine);
        ColumnMap cm(reader, {"state", "year", "work_expense_deduction"});
        std::vector<std::string> row;
        while (reader.next(row)) {
            const std::string state = row[cm["state"]];
            const int year = static_cast<int>(parse_int(row[cm["year"]], reader, "year"));
            auto key = std::make_pair(state, year);
            if (schip_rows.count(key))
                reader.fail("duplicate schip row for (" + state + "," +
                            std::to_string(year) + ")");
            SchipParams sp;
            try {
                sp.work_expense_deduction =
                    parse_money(row[cm["work_expense_deduction"]], "work_expense_deduction");
            } catch (const ValidationError& e) {
                reader.fail(e.what());
            }
            schip_rows[key] = sp;
        }
    }

    {
        CsvReader reader(dir + sep + "poverty_guidelines.csv", kRulesVersionLine);
        ColumnMap cm(reader, {"year", "region", "family_size", "annual_amount"});
        std::vector<std::string> row;
        while (reader.next(row)) {
            const int year = static_cast<int>(parse_int(row[cm["year"]], reader, "year"));
            try {
                bundle.guidelines.set(
                    year, region_from_string(row[cm["region"]]),
                    static_cast<int>(parse_int(row[cm["family_size"]], reader,
                                               "family_size")),
                    parse_money(row[cm["annual_amount"]], "annual_amount"));
            } catch (const ValidationError& e) {
                reader.fail(e.what());
            }
        }
        bundle.guidelines.validate();
    }

    // Every auxiliary row must belong to a vintage declared in flags.csv;
    // silently dropping a mistyped key would hide data.
    auto check_orphans = [&](const auto& m, const char* file) {
        for (const auto& [key, unused] : m) {
            (void)unused;
            if (!flag_rows.count(key)) {
                const std::string msg = std::string(file) + " row (" + key.first + "," +
                                        std::to_string(key.second) +
                                        ") has no matching flags.csv vintage";
                if (issues)
                    issues->push_back(msg);
                else
                    throw ValidationError(msg);
            }
        }
    };
    check_orphans(afdc, "afdc_params.csv");
    check_orphans(frozen, "frozen_1931.csv");
    check_orphans(expansion_rows, "expansions.csv");
    check_orphans(schip_rows, "schip.csv");

    // Assemble vintages: flags.csv defines which (state, year) vintages exist.
    for (const auto& [key, fr] : flag_rows) {
        RuleVintage v;
        v.state = key.first;
        v.year = key.second;
        v.post_prwora = v.year >= 1997;
        auto ap = afdc.find(key);
        if (ap == afdc.end()) {
            const std::string msg = "(" + key.first + "," + std::to_string(key.second) +
                                    "): no afdc_params rows for this vintage";
            if (issues) {
                issues->push_back(msg);
                continue;
            }
            throw ValidationError(msg);
        }
        v.afdc = ap->second;
        v.flags = fr.flags;
        v.medically_needy_limit_bp = fr.mn_limit_bp;
        if (auto it = expansion_rows.find(key); it != expansion_rows.end())
            v.expansions = it->second;
        if (auto it = schip_rows.find(key); it != schip_rows.end())
            v.schip = it->second;
        if (auto it = frozen.find(key); it != frozen.end())
            v.frozen_1931 = it->second;

        std::vector<std::string> vintage_issues;
        validate_vintage(v, vintage_issues);
        if (!vintage_issues.empty()) {
            if (issues) {
                issues->insert(issues->end(), vintage_issues.begin(), vintage_issues.end());
                continue;
            }
            throw ValidationError(vintage_issues.front());
        }
        bundle.rules.add(std::move(v));
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Rule-file writing (fixtures, demo rules).

inline void write_rules(const std::string& dir, const RuleBundle& bundle) {
    const std::string sep = dir.empty() || dir.back() == '/' ? "" : "/";

    auto write_afdc = [&](const std::string& path, bool frozen) {
        CsvWriter w(path, kRulesVersionLine,
                    {"state", "year", "family_size", "needs_standard", "payment_standard",
                     "gross_income_limit_pct", "flat_disregard", "work_expense_deduction",
                     "earnings_disregards"});
        for (const auto& v : bundle.rules.vintages()) {
            const AfdcParams* p = frozen ? (v.frozen_1931 ? &*v.frozen_1931 : nullptr)
                                         : &v.afdc;
            if (!p) continue;
            for (int s = 1; s <= p->max_family_size(); ++s) {
                w.write_row_strings({v.state, std::to_string(v.year), std::to_string(s),
                                     money_to_string(p->needs_standard[s - 1]),
                                     money_to_string(p->payment_standard[s - 1]),
                                     std::to_string(p->gross_income_limit_pct),
                                     money_to_string(p->flat_disregard),
                                     money_to_string(p->work_expense_deduction),
                                     detail::format_disregard_schedule(p->earnings_disregards)});
            }
        }
        w.close();
    };
    write_afdc(dir + sep + "afdc_params.csv", false);
    write_afdc(dir + sep + "frozen_1931.csv", true);

    {
        CsvWriter w(dir + sep + "flags.csv", kRulesVersionLine,
                    {"state", "year", "afdc_up", "ribicoff", "medically_needy",
                     "schip_separate", "targeted_medicaid", "medically_needy_limit"});
        for (const auto& v : bundle.rules.vintages()) {
            w.write_row_strings({v.state, std::to_string(v.year),
                                 v.flags.afdc_up ? "1" : "0",
                                 v.flags.ribicoff ? "1" : "0",
                                 v.flags.medically_needy ? "1" : "0",
                                 v.flags.schip_separate ? "1" : "0",
                                 v.flags.targeted_medicaid ? "1" : "0",
                                 v.medically_needy_limit_bp
                                     ? ratio_bp_to_string(*v.medically_needy_limit_bp)
                                     : ""});
        }
        w.close();
    }
    {
        CsvWriter w(dir + sep + "expansions.csv", kRulesVersionLine,
                    {"state", "year", "min_age", "max_age", "fpl_multiple",
                     "birthdate_cutoff", "source"});
        for (const auto& v : bundle.rules.vintages())
            for (const auto& e : v.expansions)
                w.write_row_strings(
                    {v.state, std::to_string(v.year), std::to_string(e.min_age),
                     std::to_string(e.max_age), ratio_bp_to_string(e.fpl_multiple_bp),
                     e.birthdate_cutoff ? to_string(*e.birthdate_cutoff) : "",
                     to_string(e.source)});
        w.close();
    }
    {
        CsvWriter w(dir + sep + "schip.csv", kRulesVersionLine,
                    {"state", "year", "work_expense_deduction"});
        for (const auto& v : bundle.rules.vintages())
            if (v.schip)
                w.write_row_strings({v.state, std::to_string(v.year),
                                     money_to_string(v.schip->work_expense_deduction)});
        w.close();
    }
    {
        CsvWriter w(dir + sep + "poverty_guidelines.csv", kRulesVersionLine,
                    {"year", "region", "family_size", "annual_amount"});
        // Re-emit in deterministic key order by probing sizes upward.
        // The table interface is lookup-oriented, so writing walks years 1900..2100.
        for (int year = 1900; year <= 2100; ++year) {
            for (GuidelineRegion r : {GuidelineRegion::contiguous, GuidelineRegion::alaska,
                                      GuidelineRegion::hawaii}) {
                for (int s = 1; s <= 32; ++s) {
                    try {
                        bool clamped = false;
                        Money m = bundle.guidelines.lookup(year, r, s, &clamped);
                        if (clamped) break;
                        w.write_row_strings({std::to_string(year), to_string(r),
                                             std::to_string(s), money_to_string(m)});
                    } catch (const ValidationError&) {
                        break;
                    }
                }
            }
        }
        w.close();
    }
}

} // namespace simelig
