#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simelig/common.hpp"
#include "simelig/csv.hpp"
#include "simelig/eligibility.hpp"
#include "simelig/money.hpp"
#include "simelig/rng.hpp"

namespace simelig {

inline constexpr const char* kPopulationVersionLine = "#simelig-pop v1";
inline constexpr const char* kLedgerVersionLine = "#simelig-ledger v1";

enum class Relationship : std::uint8_t { head, spouse, child };

inline const char* to_string(Relationship r) {
    switch (r) {
        case Relationship::head: return "head";
        case Relationship::spouse: return "spouse";
        case Relationship::child: return "child";
    }
    return "?";
}

inline Relationship relationship_from_string(const std::string& s) {
    if (s == "head") return Relationship::head;
    if (s == "spouse") return Relationship::spouse;
    if (s == "child") return Relationship::child;
    throw ValidationError("unknown relationship '" + s + "'");
}

/// One survey row. survey_year is the calendar year the incomes refer to
/// unless the file is survey-timed (see family_view). Ages are as of March.
struct PersonRecord {
    std::string person_id;
    std::string household_id;
    std::string state_id;
    int survey_year = 0;
    int age = 0;
    Sex sex = Sex::female;
    MaritalStatus marital_status = MaritalStatus::single;
    std::string prior_marital_status;  // free tag, may be empty
    Relationship relationship = Relationship::head;
    int subfamily_id = 0;  // 0 = primary family within the household
    std::string race_ethnicity;
    Money income_earned{};
    Money income_selfemp{};
    Money income_other{};
    Money income_public_assistance{};
    int weeks_worked = 0;
    double usual_hours = 0.0;
    double hours_last_week = 0.0;
    bool labor_force = false;
    double max_monthly_hours = 0.0;
    bool imputed_hours = false;
    bool imputed_weeks = false;
    bool imputed_earnings = false;
    double survey_weight = 1.0;
    std::optional<int> birth_month;  // 1..12 once assigned

    Money earned_total() const { return income_earned + income_selfemp; }
    Money income_ex_welfare() const {
        return income_earned + income_selfemp + income_other;
    }
};

inline void validate_person(const PersonRecord& p) {
    auto fail = [&](const std::string& msg) {
        throw ValidationError("person " + p.person_id + ": " + msg);
    };
    if (p.person_id.empty()) throw ValidationError("person with empty person_id");
    if (p.household_id.empty()) fail("empty household_id");
    if (p.age < 0 || p.age > 120) fail("age out of range");
    if (p.survey_weight < 0.0 || !std::isfinite(p.survey_weight))
        fail("survey_weight must be a nonnegative finite number");
    if (p.subfamily_id < 0) fail("subfamily_id must be nonnegative");
    if (p.weeks_worked < 0 || p.weeks_worked > 52) fail("weeks_worked out of range");
    if (p.usual_hours < 0.0 || !std::isfinite(p.usual_hours))
        fail("usual_hours out of range");
    if (p.hours_last_week < 0.0 || !std::isfinite(p.hours_last_week))
        fail("hours_last_week out of range");
    if (p.max_monthly_hours < 0.0 || !std::isfinite(p.max_monthly_hours))
        fail("max_monthly_hours out of range");
    if (p.birth_month && (*p.birth_month < 1 || *p.birth_month > 12))
        fail("birth_month out of range");
}

// ---------------------------------------------------------------------------
// Population CSV

namespace detail {

inline const std::vector<std::string>& population_columns() {
    static const std::vector<std::string> cols = {
        "person_id", "household_id", "state_id", "survey_year", "age", "sex",
        "marital_status", "prior_marital_status", "relationship", "subfamily_id",
        "race_ethnicity", "income_earned", "income_selfemp", "income_other",
        "income_public_assistance", "weeks_worked", "usual_hours", "hours_last_week",
        "labor_force", "max_monthly_hours", "imputed_hours", "imputed_weeks",
        "imputed_earnings", "survey_weight", "birth_month"};
    return cols;
}

} // namespace detail

inline std::vector<PersonRecord> read_population(const std::string& path) {
    CsvReader reader(path, kPopulationVersionLine);
    ColumnMap cm(reader, detail::population_columns());
    std::vector<PersonRecord> out;
    std::vector<std::string> row;
    while (reader.next(row)) {
        PersonRecord p;
        p.person_id = row[cm["person_id"]];
        p.household_id = row[cm["household_id"]];
        p.state_id = row[cm["state_id"]];
        p.survey_year = static_cast<int>(parse_int(row[cm["survey_year"]], reader,
                                                   "survey_year"));
        p.age = static_cast<int>(parse_int(row[cm["age"]], reader, "age"));
        try {
            p.sex = sex_from_string(row[cm["sex"]]);
            p.marital_status = marital_from_string(row[cm["marital_status"]]);
            p.relationship = relationship_from_string(row[cm["relationship"]]);
            p.income_earned = parse_money(row[cm["income_earned"]], "income_earned");
            p.income_selfemp = parse_money(row[cm["income_selfemp"]], "income_selfemp");
            p.income_other = parse_money(row[cm["income_other"]], "income_other");
            p.income_public_assistance = parse_money(
                row[cm["income_public_assistance"]], "income_public_assistance");
        } catch (const ValidationError& e) {
            reader.fail(e.what());
        }
        p.prior_marital_status = row[cm["prior_marital_status"]];
        p.subfamily_id = static_cast<int>(parse_int(row[cm["subfamily_id"]], reader,
                                                    "subfamily_id"));
        p.race_ethnicity = row[cm["race_ethnicity"]];
        p.weeks_worked = static_cast<int>(parse_int(row[cm["weeks_worked"]], reader,
                                                    "weeks_worked"));
        p.usual_hours = parse_double(row[cm["usual_hours"]], reader, "usual_hours");
        p.hours_last_week =
            parse_double(row[cm["hours_last_week"]], reader, "hours_last_week");
        p.labor_force = parse_bool01(row[cm["labor_force"]], reader, "labor_force");
        p.max_monthly_hours =
            parse_double(row[cm["max_monthly_hours"]], reader, "max_monthly_hours");
        p.imputed_hours = parse_bool01(row[cm["imputed_hours"]], reader, "imputed_hours");
        p.imputed_weeks = parse_bool01(row[cm["imputed_weeks"]], reader, "imputed_weeks");
        p.imputed_earnings =
            parse_bool01(row[cm["imputed_earnings"]], reader, "imputed_earnings");
        p.survey_weight =
            parse_double(row[cm["survey_weight"]], reader, "survey_weight");
        const std::string& bm = row[cm["birth_month"]];
        if (!bm.empty())
            p.birth_month = static_cast<int>(parse_int(bm, reader, "birth_month"));
        try {
            validate_person(p);
        } catch (const ValidationError& e) {
            reader.fail(e.what());
        }
        out.push_back(std::move(p));
    }
    return out;
}

inline void write_population(const std::string& path,
                             const std::vector<PersonRecord>& records) {
    CsvWriter w(path, kPopulationVersionLine, detail::population_columns());
    for (const auto& p : records) {
        w.write_row_strings(
            {p.person_id, p.household_id, p.state_id, std::to_string(p.survey_year),
             std::to_string(p.age), to_string(p.sex), to_string(p.marital_status),
             p.prior_marital_status, to_string(p.relationship),
             std::to_string(p.subfamily_id), p.race_ethnicity,
             money_to_string(p.income_earned), money_to_string(p.income_selfemp),
             money_to_string(p.income_other),
             money_to_string(p.income_public_assistance),
             std::to_string(p.weeks_worked), format_double(p.usual_hours),
             format_double(p.hours_last_week), p.labor_force ? "1" : "0",
             format_double(p.max_monthly_hours), p.imputed_hours ? "1" : "0",
             p.imputed_weeks ? "1" : "0", p.imputed_earnings ? "1" : "0",
             format_double(p.survey_weight),
             p.birth_month ? std::to_string(*p.birth_month) : ""});
    }
    w.close();
}

// ---------------------------------------------------------------------------
// Birth months

struct BirthMonthAssignment {
    std::uint64_t seed = 0;
    std::map<std::string, int> month;  // person_id -> 1..12
};

/// Keyed-hash assignment: independent of record order, uniform over months,
/// reproduced exactly by the same seed.
inline BirthMonthAssignment assign_birth_months(const std::vector<PersonRecord>& records,
                                                std::uint64_t seed) {
    BirthMonthAssignment a;
    a.seed = seed;
    for (const auto& p : records)
        a.month[p.person_id] = 1 + static_cast<int>(keyed_hash(seed, p.person_id) % 12);
    return a;
}

/// Sets birth_month wherever the record lacks one.
inline void fill_birth_months(std::vector<PersonRecord>& records, std::uint64_t seed) {
    for (auto& p : records)
        if (!p.birth_month)
            p.birth_month = 1 + static_cast<int>(keyed_hash(seed, p.person_id) % 12);
}

// ---------------------------------------------------------------------------
// Nuclear families

struct NuclearFamily {
    std::string family_id;  // household_id + "-" + subfamily_id
    PersonRecord mother;
    std::optional<PersonRecord> spouse;      // the second parent when married
    std::vector<PersonRecord> children;      // ages 0..18
    Money family_income_ex_welfare{};        // parents only, excluding assistance
    int family_size = 0;
    std::string state_id;
    int year = 0;  // survey_year of the mother
    MaritalStatus marital_status = MaritalStatus::single;
};

struct DropEntry {
    std::string household_id;
    int subfamily_id = 0;
    std::string reason;  // childless | no_mother | mother_age | orphan_child | adult_child
    int person_count = 0;
    std::string person_ids;  // semicolon-joined
};

struct LinkageResult {
    std::vector<NuclearFamily> families;
    std::vector<DropEntry> ledger;

    int ledger_person_count() const {
        int n = 0;
        for (const auto& e : ledger) n += e.person_count;
        return n;
    }
    int family_person_count() const {
        int n = 0;
        for (const auto& f : families) n += f.family_size;
        return n;
    }
};

namespace detail {

inline DropEntry drop_entry(const std::string& household_id, int subfamily_id,
                            const std::string& reason,
                            const std::vector<const PersonRecord*>& persons) {
    DropEntry e;
    e.household_id = household_id;
    e.subfamily_id = subfamily_id;
    e.reason = reason;
    e.person_count = static_cast<int>(persons.size());
    for (const auto* p : persons) {
        if (!e.person_ids.empty()) e.person_ids += ';';
        e.person_ids += p->person_id;
    }
    return e;
}

} // namespace detail

/// Links household members into nuclear family units: within each household,
/// each subfamily's head and spouse become the parents, and child records
/// ages 0-18 attach to the parents of their own subfamily, falling back to
/// the primary family's parents when their subfamily has none (the closest
/// available couple wins). Units survive only with a mother age 20-64 and at
/// least one child; everyone else lands in the drop ledger, so family sizes
/// plus ledger person counts always add back up to the input count.
inline LinkageResult build_nuclear_families(const std::vector<PersonRecord>& records) {
    LinkageResult out;

    // Households in first-appearance order; members keep input order.
    std::vector<std::string> household_order;
    std::map<std::string, std::vector<const PersonRecord*>> households;
    for (const auto& p : records) {
        auto [it, inserted] = households.try_emplace(p.household_id);
        if (inserted) household_order.push_back(p.household_id);
        it->second.push_back(&p);
    }

    for (const auto& hid : household_order) {
        const auto& members = households[hid];

        struct Unit {
            const PersonRecord* head = nullptr;
            const PersonRecord* spouse = nullptr;
            std::vector<const PersonRecord*> kids;     // age 0..18
            std::vector<const PersonRecord*> adults;   // "child" rows above 18
        };
        std::map<int, Unit> units;
        for (const auto* p : members) {
            Unit& u = units[p->subfamily_id];
            switch (p->relationship) {
                case Relationship::head:
                    if (u.head)
                        throw ValidationError("household " + hid + " subfamily " +
                                              std::to_string(p->subfamily_id) +
                                              " has more than one head");
                    u.head = p;
                    break;
                case Relationship::spouse:
                    if (u.spouse)
                        throw ValidationError("household " + hid + " subfamily " +
                                              std::to_string(p->subfamily_id) +
                                              " has more than one spouse");
                    u.spouse = p;
                    break;
                case Relationship::child:
                    if (p->age > 18)
                        u.adults.push_back(p);
                    else
                        u.kids.push_back(p);
                    break;
            }
        }

        // Children in a parentless subfamily fall back to the primary couple.
        for (auto& [sub_id, u] : units) {
            if (u.head || u.spouse) continue;
            Unit* primary = nullptr;
            if (sub_id != 0) {
                auto it = units.find(0);
                if (it != units.end() && (it->second.head || it->second.spouse))
                    primary = &it->second;
            }
            for (const auto* kid : u.kids) {
                if (primary)
                    primary->kids.push_back(kid);
                else
                    out.ledger.push_back(
                        detail::drop_entry(hid, sub_id, "orphan_child", {kid}));
            }
            u.kids.clear();
        }

        for (auto& [sub_id, u] : units) {
            // Grown "child" rows are never family members of the analysis set.
            for (const auto* a : u.adults)
                out.ledger.push_back(detail::drop_entry(hid, sub_id, "adult_child", {a}));
            if (!u.head && !u.spouse) continue;  // kids already routed

            std::vector<const PersonRecord*> unit_members;
            if (u.head) unit_members.push_back(u.head);
            if (u.spouse) unit_members.push_back(u.spouse);
            for (const auto* k : u.kids) unit_members.push_back(k);

            // The mother is the female parent, heads checked first.
            const PersonRecord* mother = nullptr;
            if (u.head && u.head->sex == Sex::female) mother = u.head;
            else if (u.spouse && u.spouse->sex == Sex::female) mother = u.spouse;

            if (!mother) {
                out.ledger.push_back(
                    detail::drop_entry(hid, sub_id, "no_mother", unit_members));
                continue;
            }
            if (mother->age < 20 || mother->age > 64) {
                out.ledger.push_back(
                    detail::drop_entry(hid, sub_id, "mother_age", unit_members));
                continue;
            }
            if (u.kids.empty()) {
                out.ledger.push_back(
                    detail::drop_entry(hid, sub_id, "childless", unit_members));
                continue;
            }

            NuclearFamily f;
            f.family_id = hid + "-" + std::to_string(sub_id);
            f.mother = *mother;
            const PersonRecord* other = mother == u.head ? u.spouse : u.head;
            if (other) f.spouse = *other;
            for (const auto* k : u.kids) f.children.push_back(*k);
            f.family_income_ex_welfare = mother->income_ex_welfare();
            if (other)
                f.family_income_ex_welfare =
                    f.family_income_ex_welfare + other->income_ex_welfare();
            f.family_size = 1 + (other ? 1 : 0) + static_cast<int>(f.children.size());
            f.state_id = mother->state_id;
            f.year = mother->survey_year;
            f.marital_status = other ? MaritalStatus::married : MaritalStatus::single;
            out.families.push_back(std::move(f));
        }
    }
    return out;
}

inline void write_drop_ledger(const std::string& path,
                              const std::vector<DropEntry>& ledger) {
    CsvWriter w(path, kLedgerVersionLine,
                {"household_id", "subfamily_id", "reason", "person_count",
                 "person_ids"});
    for (const auto& e : ledger)
        w.write_row_strings({e.household_id, std::to_string(e.subfamily_id), e.reason,
                             std::to_string(e.person_count), e.person_ids});
    w.close();
}

// ---------------------------------------------------------------------------
// Rule-engine views

/// Family-level rule inputs from a linked family. With survey_timed set, the
/// record's incomes describe the calendar year before the interview, so the
/// rule year shifts back one; ages stay anchored at March of the survey year
/// through the birth-year arithmetic either way.
inline FamilyView family_view(const NuclearFamily& fam, bool survey_timed = false) {
    FamilyView v;
    v.state = fam.state_id;
    v.year = survey_timed ? fam.year - 1 : fam.year;
    v.marital = fam.marital_status;
    v.family_size = fam.family_size;
    v.annual_income_ex_welfare = fam.family_income_ex_welfare;
    v.annual_earned_income = fam.mother.earned_total();
    if (fam.spouse)
        v.annual_earned_income = v.annual_earned_income + fam.spouse->earned_total();
    v.n_workers = (fam.mother.earned_total().cents > 0 ? 1 : 0) +
                  (fam.spouse && fam.spouse->earned_total().cents > 0 ? 1 : 0);
    v.months_worked = 1;

    const PersonRecord* primary = &fam.mother;
    if (fam.spouse && fam.spouse->earned_total() > fam.mother.earned_total())
        primary = &*fam.spouse;
    v.primary_earner_monthly_hours = primary->max_monthly_hours;

    const double mother_annual =
        static_cast<double>(fam.mother.weeks_worked) * fam.mother.usual_hours;
    double spouse_annual = 0.0;
    if (fam.spouse)
        spouse_annual =
            static_cast<double>(fam.spouse->weeks_worked) * fam.spouse->usual_hours;
    v.max_parent_annual_hours = std::max(mother_annual, spouse_annual);
    return v;
}

/// Child view anchored at the record's survey year; requires birth_month.
inline ChildView child_view(const PersonRecord& child) {
    if (!child.birth_month)
        throw ValidationError("person " + child.person_id +
                              ": birth_month not assigned");
    return child_with_march_age(child.age, *child.birth_month, child.survey_year);
}

// ---------------------------------------------------------------------------
// Inverse-probability reweighting

struct ReweightResult {
    std::vector<double> weights;  // parallel to the input records
    std::vector<std::string> flagged_cells;
    int dropped_count = 0;
};

/// Divides survivors' weights by the retention share of their
/// state x year x marital cell and zeroes dropped records, preserving each
/// cell's weight total. Cells losing everything keep their original weights
/// and are flagged instead.
template <typename DropPredicate>
ReweightResult inverse_probability_reweight(const std::vector<PersonRecord>& records,
                                            DropPredicate dropped) {
    struct Cell {
        double total = 0.0;
        double kept = 0.0;
    };
    auto cell_key = [](const PersonRecord& p) {
        return p.state_id + "/" + std::to_string(p.survey_year) + "/" +
               to_string(p.marital_status);
    };
    std::map<std::string, Cell> cells;
    std::vector<bool> is_dropped(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const bool d = dropped(records[i]);
        is_dropped[i] = d;
        Cell& c = cells[cell_key(records[i])];
        c.total += records[i].survey_weight;
        if (!d) c.kept += records[i].survey_weight;
    }

    ReweightResult out;
    out.weights.resize(records.size());
    std::map<std::string, bool> flagged;
    for (const auto& [key, c] : cells)
        if (c.total > 0.0 && c.kept == 0.0) {
            flagged[key] = true;
            out.flagged_cells.push_back(key);
        }

    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::string key = cell_key(records[i]);
        const Cell& c = cells[key];
        if (flagged.count(key)) {
            out.weights[i] = records[i].survey_weight;
            continue;
        }
        if (is_dropped[i]) {
            out.weights[i] = 0.0;
            ++out.dropped_count;
            continue;
        }
        const double retention = c.total > 0.0 ? c.kept / c.total : 1.0;
        out.weights[i] =
            retention > 0.0 ? records[i].survey_weight / retention : 0.0;
    }
    return out;
}

} // namespace simelig
