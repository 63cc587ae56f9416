#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "simelig/common.hpp"
#include "simelig/csv.hpp"
#include "simelig/eligibility.hpp"
#include "simelig/money.hpp"
#include "simelig/parallel.hpp"
#include "simelig/population.hpp"
#include "simelig/rules.hpp"

namespace simelig {

inline constexpr const char* kSimTableVersionLine = "#simelig-sim v1";
inline constexpr const char* kFamilySimtVersionLine = "#simelig-simt v1";

enum class SimVariant : std::uint8_t { annual, fixed_cpi, fixed_rcpi, fixed_wage };

inline const char* to_string(SimVariant v) {
    switch (v) {
        case SimVariant::annual: return "annual";
        case SimVariant::fixed_cpi: return "fixed_cpi";
        case SimVariant::fixed_rcpi: return "fixed_rcpi";
        case SimVariant::fixed_wage: return "fixed_wage";
    }
    return "?";
}

inline SimVariant sim_variant_from_string(const std::string& s) {
    if (s == "annual") return SimVariant::annual;
    if (s == "fixed_cpi") return SimVariant::fixed_cpi;
    if (s == "fixed_rcpi") return SimVariant::fixed_rcpi;
    if (s == "fixed_wage") return SimVariant::fixed_wage;
    throw ValidationError("unknown variant '" + s + "'");
}

// ---------------------------------------------------------------------------
// Simulated-eligibility tables

struct SimCellKey {
    std::string state;
    int year = 0;
    int age = 0;  // 0 for maternal tables
    std::string group;

    auto operator<=>(const SimCellKey&) const = default;

    std::string to_string() const {
        return "(" + state + "," + std::to_string(year) + ",age " +
               std::to_string(age) + "," + group + ")";
    }
};

struct SimCell {
    double num = 0.0;  // sum of weight x eligibility
    double den = 0.0;  // sum of weight
};

/// Weighted eligible fraction per (state, year, age, group) cell, built from
/// donors outside the target state and evaluated under the target state's
/// rules. Cells exist only where the donor set is nonempty; reading a missing
/// cell is an error rather than a zero.
struct SimTable {
    SimVariant variant = SimVariant::annual;
    bool leave_one_out = true;
    std::string grouping = "marital";  // "marital" | "pooled" | "race"
    std::map<SimCellKey, SimCell> cells;

    bool defined(const SimCellKey& key) const {
        const auto it = cells.find(key);
        return it != cells.end() && it->second.den > 0.0;
    }

    std::optional<double> find(const SimCellKey& key) const {
        const auto it = cells.find(key);
        if (it == cells.end() || it->second.den <= 0.0) return std::nullopt;
        return it->second.num / it->second.den;
    }

    double value(const SimCellKey& key) const {
        const auto v = find(key);
        if (!v)
            throw ValidationError("simulated eligibility undefined for cell " +
                                  key.to_string());
        return *v;
    }
};

/// One child of the national donor sample, carrying enough family context to
/// re-evaluate eligibility under any target state's rules.
struct DonorChild {
    std::string home_state;
    int year = 0;       // rule year the donor represents
    int age = 0;        // age as of March, the table key
    std::string group;  // per the table's grouping
    double weight = 0.0;
    FamilyView family;
    ChildView child;
    std::string region;  // inflator region tag, empty for national series
};

struct SimOptions {
    bool leave_one_out = true;
    Reference reference = Reference::last_year;
    SimVariant variant = SimVariant::annual;
    std::string grouping = "marital";
    int workers = 1;
    std::vector<std::string> target_states;  // empty: every donor home state
};

using DonorEvaluator =
    std::function<double(const DonorChild&, const std::string& target_state)>;

/// Engine-backed evaluation: the donor family is moved to the target state
/// and scored under that state's rules for the donor's year. Last-year
/// reference contributes the eligible fraction of months; last-week
/// contributes the March indicator.
inline DonorEvaluator make_rules_evaluator(const RuleBundle& bundle,
                                           Reference reference) {
    return [&bundle, reference](const DonorChild& d, const std::string& target) {
        FamilyView fv = d.family;
        fv.state = target;
        fv.year = d.year;
        const EligibilityResult r =
            annualize_eligibility(d.child, fv, bundle.rules, bundle.guidelines,
                                  reference);
        if (reference == Reference::last_week) return r.march_eligible ? 1.0 : 0.0;
        return r.annual_fraction;
    };
}

inline SimTable compute_sim_table(const std::vector<DonorChild>& donors,
                                  const DonorEvaluator& evaluate,
                                  const SimOptions& options) {
    std::vector<std::string> targets = options.target_states;
    if (targets.empty()) {
        std::set<std::string> seen;
        for (const auto& d : donors) seen.insert(d.home_state);
        targets.assign(seen.begin(), seen.end());
    } else {
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    }

    using StateCells = std::map<SimCellKey, SimCell>;
    auto build_state = [&](std::size_t ti) {
        const std::string& target = targets[ti];
        StateCells cells;
        for (const auto& d : donors) {
            if (options.leave_one_out && d.home_state == target) continue;
            if (d.weight < 0.0)
                throw ValidationError("donor weight must be nonnegative");
            const double e = evaluate(d, target);
            if (e < 0.0 || e > 1.0)
                throw ValidationError("donor eligibility must lie in [0,1]");
            SimCell& c = cells[SimCellKey{target, d.year, d.age, d.group}];
            c.num += d.weight * e;
            c.den += d.weight;
        }
        return cells;
    };

    const auto per_state = parallel_index_map<StateCells>(
        targets.size(), build_state, options.workers);

    SimTable table;
    table.variant = options.variant;
    table.leave_one_out = options.leave_one_out;
    table.grouping = options.grouping;
    for (const auto& cells : per_state)
        for (const auto& [key, cell] : cells)
            if (cell.den > 0.0) table.cells[key] = cell;
    return table;
}

inline SimTable compute_sim_table(const std::vector<DonorChild>& donors,
                                  const RuleBundle& bundle,
                                  const SimOptions& options) {
    return compute_sim_table(donors, make_rules_evaluator(bundle, options.reference),
                             options);
}

/// Donor rows for every child of the linked families, grouped per the
/// grouping tag ("marital" or "pooled"). Weights are the children's own
/// survey weights.
inline std::vector<DonorChild> donors_from_families(
    const std::vector<NuclearFamily>& families, const std::string& grouping,
    bool survey_timed = false) {
    if (grouping != "marital" && grouping != "pooled")
        throw ValidationError("child donor grouping must be marital or pooled");
    std::vector<DonorChild> out;
    for (const auto& fam : families) {
        const FamilyView fv = family_view(fam, survey_timed);
        for (const auto& kid : fam.children) {
            DonorChild d;
            d.home_state = fam.state_id;
            d.year = fv.year;
            d.age = kid.age;
            d.group = grouping == "marital"
                          ? std::string(to_string(fam.marital_status))
                          : std::string("all");
            d.weight = kid.survey_weight;
            d.family = fv;
            d.child = child_view(kid);
            out.push_back(std::move(d));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Family totals

inline std::string family_group_tag(const SimTable& table, const NuclearFamily& fam) {
    if (table.grouping == "marital") return to_string(fam.marital_status);
    if (table.grouping == "pooled") return "all";
    if (table.grouping == "race") return fam.mother.race_ethnicity;
    throw ValidationError("unknown table grouping '" + table.grouping + "'");
}

/// Expected eligible children in the family: the sum of the family's cell
/// values across its children. Throws, naming the cell, when the table has
/// no donors for a needed cell.
inline double family_simt(const NuclearFamily& fam, const SimTable& table,
                          bool survey_timed = false) {
    const int year = survey_timed ? fam.year - 1 : fam.year;
    const std::string group = family_group_tag(table, fam);
    double total = 0.0;
    for (const auto& kid : fam.children)
        total += table.value(SimCellKey{fam.state_id, year, kid.age, group});
    return total;
}

inline std::optional<double> family_simt_if_defined(const NuclearFamily& fam,
                                                    const SimTable& table,
                                                    bool survey_timed = false,
                                                    std::string* missing_cell = nullptr) {
    const int year = survey_timed ? fam.year - 1 : fam.year;
    const std::string group = family_group_tag(table, fam);
    double total = 0.0;
    for (const auto& kid : fam.children) {
        const SimCellKey key{fam.state_id, year, kid.age, group};
        const auto v = table.find(key);
        if (!v) {
            if (missing_cell) *missing_cell = key.to_string();
            return std::nullopt;
        }
        total += *v;
    }
    return total;
}

/// Parent-type encoding: counts[a] children of age a. Equals the per-child
/// sum for any family with that age composition.
inline double family_simt_from_counts(const std::string& state, int year,
                                      const std::string& group,
                                      const std::array<int, 19>& counts,
                                      const SimTable& table) {
    double total = 0.0;
    for (int age = 0; age <= 18; ++age)
        if (counts[static_cast<std::size_t>(age)] > 0)
            total += counts[static_cast<std::size_t>(age)] *
                     table.value(SimCellKey{state, year, age, group});
    return total;
}

// ---------------------------------------------------------------------------
// Fixed-eligibility donor variants

/// Price or wage index series. Levels are keyed by year with an optional
/// region tag; lookups fall back from (year, region) to the national (year)
/// level.
struct IncomeInflator {
    std::string series;  // "cpi" | "rcpi" | "wage"
    std::map<std::pair<int, std::string>, double> levels;

    void set(int year, double level, const std::string& region = "") {
        if (!(level > 0.0))
            throw ValidationError(series + " index for " + std::to_string(year) +
                                  ": level must be positive");
        levels[{year, region}] = level;
    }

    double level_at(int year, const std::string& region = "") const {
        auto it = levels.find({year, region});
        if (it == levels.end() && !region.empty()) it = levels.find({year, ""});
        if (it == levels.end())
            throw ValidationError(series + " index missing year " +
                                  std::to_string(year));
        return it->second;
    }

    double ratio(int base_year, int target_year, const std::string& region = "") const {
        return level_at(target_year, region) / level_at(base_year, region);
    }
};

inline SimVariant sim_variant_for_series(const std::string& series) {
    if (series == "cpi") return SimVariant::fixed_cpi;
    if (series == "rcpi") return SimVariant::fixed_rcpi;
    if (series == "wage") return SimVariant::fixed_wage;
    throw ValidationError("unknown inflator series '" + series + "'");
}

/// Re-labels a fixed base-year donor sample to the target year: incomes are
/// scaled by the index ratio, birth years shift so ages stay put, and
/// everything else is untouched.
inline std::vector<DonorChild> fixed_eligibility_inputs(
    const std::vector<DonorChild>& base, const IncomeInflator& inflator,
    int target_year) {
    std::vector<DonorChild> out;
    out.reserve(base.size());
    for (const auto& d : base) {
        const double r = inflator.ratio(d.year, target_year, d.region);
        DonorChild n = d;
        n.year = target_year;
        n.family.year = target_year;
        n.family.annual_income_ex_welfare = Money{std::llround(
            static_cast<double>(d.family.annual_income_ex_welfare.cents) * r)};
        n.family.annual_earned_income = Money{std::llround(
            static_cast<double>(d.family.annual_earned_income.cents) * r)};
        n.child = child_with_march_age(d.age, d.child.birth_month, target_year);
        out.push_back(std::move(n));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Maternal eligibility

enum class MaternalMode : std::uint8_t { all_women_15_44, mothers_of_infants };

inline const char* to_string(MaternalMode m) {
    return m == MaternalMode::all_women_15_44 ? "all_women_15_44"
                                              : "mothers_of_infants";
}

/// Donor rows for the mothers themselves, one per qualifying woman. The
/// "child" view carries the woman's own birth facts so pregnancy rows can
/// gate on her age; the table key uses age 0 throughout.
inline std::vector<DonorChild> maternal_donors(
    const std::vector<NuclearFamily>& families, MaternalMode mode,
    const std::string& grouping = "race", bool survey_timed = false) {
    std::vector<DonorChild> out;
    for (const auto& fam : families) {
        const PersonRecord& mom = fam.mother;
        if (mom.age < 15 || mom.age > 44) continue;
        if (mode == MaternalMode::mothers_of_infants) {
            bool has_infant = false;
            for (const auto& kid : fam.children)
                if (kid.age == 0) has_infant = true;
            if (!has_infant) continue;
        }
        DonorChild d;
        d.home_state = fam.state_id;
        d.family = family_view(fam, survey_timed);
        d.year = d.family.year;
        d.age = 0;
        if (grouping == "race")
            d.group = mom.race_ethnicity;
        else if (grouping == "marital")
            d.group = to_string(fam.marital_status);
        else if (grouping == "pooled")
            d.group = "all";
        else
            throw ValidationError("unknown maternal grouping '" + grouping + "'");
        d.weight = mom.survey_weight;
        d.child = child_view(mom);
        out.push_back(std::move(d));
    }
    return out;
}

/// Scores a woman against the pregnancy-source rows of the target state,
/// averaging over months for the last-year reference or taking March for
/// last-week.
inline DonorEvaluator make_pregnancy_evaluator(const RuleBundle& bundle,
                                               Reference reference) {
    return [&bundle, reference](const DonorChild& d, const std::string& target) {
        FamilyView fv = d.family;
        fv.state = target;
        fv.year = d.year;
        const RuleVintage& vintage = bundle.rules.at(target, d.year);
        if (reference == Reference::last_week)
            return pregnancy_eligible(d.child, fv, vintage, bundle.guidelines, 3)
                       ? 1.0
                       : 0.0;
        int eligible = 0;
        for (int m = 1; m <= 12; ++m)
            if (pregnancy_eligible(d.child, fv, vintage, bundle.guidelines, m))
                ++eligible;
        return eligible / 12.0;
    };
}

/// Leave-one-out eligible fraction of women per (state, year, group). Cells
/// carry age 0 so the table joins directly to zero-year-old children.
inline SimTable maternal_sim_eligibility(const std::vector<DonorChild>& women,
                                         const RuleBundle& bundle,
                                         SimOptions options) {
    if (options.grouping.empty()) options.grouping = "race";
    return compute_sim_table(
        women, make_pregnancy_evaluator(bundle, options.reference), options);
}

/// Family total where zero-year-old children take the maternal table's cell
/// and older children the child table's.
inline double family_simt_with_maternal(const NuclearFamily& fam,
                                        const SimTable& child_table,
                                        const SimTable& maternal_table,
                                        bool survey_timed = false) {
    const int year = survey_timed ? fam.year - 1 : fam.year;
    const std::string child_group = family_group_tag(child_table, fam);
    const std::string maternal_group = family_group_tag(maternal_table, fam);
    double total = 0.0;
    for (const auto& kid : fam.children) {
        if (kid.age == 0)
            total += maternal_table.value(SimCellKey{fam.state_id, year, 0,
                                                     maternal_group});
        else
            total += child_table.value(SimCellKey{fam.state_id, year, kid.age,
                                                  child_group});
    }
    return total;
}

// ---------------------------------------------------------------------------
// Serialization

inline void write_sim_table(const std::string& path, const SimTable& table) {
    CsvWriter w(path, kSimTableVersionLine,
                {"state", "year", "age", "group", "grouping", "variant",
                 "leave_one_out", "value", "donor_weight"});
    for (const auto& [key, cell] : table.cells) {
        if (cell.den <= 0.0) continue;
        w.write_row_strings({key.state, std::to_string(key.year),
                             std::to_string(key.age), key.group, table.grouping,
                             to_string(table.variant),
                             table.leave_one_out ? "1" : "0",
                             format_double(cell.num / cell.den),
                             format_double(cell.den)});
    }
    w.close();
}

inline SimTable read_sim_table(const std::string& path) {
    CsvReader reader(path, kSimTableVersionLine);
    ColumnMap cm(reader,
                 {"state", "year", "age", "group", "grouping", "variant",
                  "leave_one_out", "value", "donor_weight"});
    SimTable table;
    bool first = true;
    std::vector<std::string> row;
    while (reader.next(row)) {
        SimCellKey key;
        key.state = row[cm["state"]];
        key.year = static_cast<int>(parse_int(row[cm["year"]], reader, "year"));
        key.age = static_cast<int>(parse_int(row[cm["age"]], reader, "age"));
        key.group = row[cm["group"]];
        const std::string grouping = row[cm["grouping"]];
        SimVariant variant = SimVariant::annual;
        try {
            variant = sim_variant_from_string(row[cm["variant"]]);
        } catch (const ValidationError& e) {
            reader.fail(e.what());
        }
        const bool loo = parse_bool01(row[cm["leave_one_out"]], reader,
                                      "leave_one_out");
        const double value = parse_double(row[cm["value"]], reader, "value");
        const double den =
            parse_double(row[cm["donor_weight"]], reader, "donor_weight");
        if (value < 0.0 || value > 1.0) reader.fail("value must lie in [0,1]");
        if (!(den > 0.0)) reader.fail("donor_weight must be positive");
        if (first) {
            table.grouping = grouping;
            table.variant = variant;
            table.leave_one_out = loo;
            first = false;
        } else if (grouping != table.grouping || variant != table.variant ||
                   loo != table.leave_one_out) {
            reader.fail("mixed table metadata within one file");
        }
        if (table.cells.count(key)) reader.fail("duplicate cell " + key.to_string());
        table.cells[key] = SimCell{value * den, den};
    }
    return table;
}

struct FamilySimtRow {
    std::string family_id;
    int n_children = 0;
    double simt = 0.0;
};

inline void write_family_simt(const std::string& path,
                              const std::vector<FamilySimtRow>& rows) {
    CsvWriter w(path, kFamilySimtVersionLine, {"family_id", "n_children", "simt"});
    for (const auto& r : rows)
        w.write_row_strings({r.family_id, std::to_string(r.n_children),
                             format_double(r.simt)});
    w.close();
}

inline std::vector<FamilySimtRow> read_family_simt(const std::string& path) {
    CsvReader reader(path, kFamilySimtVersionLine);
    ColumnMap cm(reader, {"family_id", "n_children", "simt"});
    std::vector<FamilySimtRow> out;
    std::set<std::string> seen;
    std::vector<std::string> row;
    while (reader.next(row)) {
        FamilySimtRow r;
        r.family_id = row[cm["family_id"]];
        r.n_children =
            static_cast<int>(parse_int(row[cm["n_children"]], reader, "n_children"));
        r.simt = parse_double(row[cm["simt"]], reader, "simt");
        if (!seen.insert(r.family_id).second)
            reader.fail("duplicate family_id '" + r.family_id + "'");
        if (r.simt < -1e-9 || r.simt > r.n_children + 1e-9)
            reader.fail("simt outside [0, n_children]");
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace simelig
