#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "simelig/common.hpp"
#include "simelig/money.hpp"
#include "simelig/rules.hpp"

namespace simelig {

/// Family-level inputs to the eligibility rules, already reduced from person
/// records. Incomes are annual and exclude public assistance and welfare.
/// The hours fields summarize the parents: the primary earner is the parent
/// with the higher earned plus self-employment income (ties go to the
/// mother), and max_parent_annual_hours is the larger weeks*usual product.
struct FamilyView {
    std::string state;
    int year = 0;
    MaritalStatus marital = MaritalStatus::single;
    int family_size = 1;
    Money annual_income_ex_welfare{};
    Money annual_earned_income{};
    int n_workers = 0;
    int months_worked = 1;
    double primary_earner_monthly_hours = 0.0;
    double max_parent_annual_hours = 0.0;
};

/// A child is identified to the rules only by when it was born. Age in any
/// calendar month follows from birth year and month; months before the birth
/// month of the birth year get a negative age and fail every age gate.
struct ChildView {
    int birth_year = 0;
    int birth_month = 1;  // 1..12
};

/// Age in completed years during `month` (1..12) of calendar year `year`.
inline int age_in_month(const ChildView& c, int year, int month) {
    return (year - c.birth_year) - (month < c.birth_month ? 1 : 0);
}

/// Recovers the birth year from an age recorded as of March. A birth month
/// of January..March means the birthday has already passed in March.
inline ChildView child_with_march_age(int age_at_march, int birth_month, int year) {
    ChildView c;
    c.birth_month = birth_month;
    c.birth_year = birth_month <= 3 ? year - age_at_march : year - age_at_march - 1;
    return c;
}

inline Date birth_date(const ChildView& c) {
    return Date{c.birth_year, c.birth_month, 1};
}

// ---------------------------------------------------------------------------
// AFDC financial tests

struct AfdcTestResult {
    Money countable{};        // monthly income after disregards, floored at zero
    bool benefit_positive = false;   // payment standard minus countable > 0
    bool below_needs = false;        // countable < needs standard
    bool within_gross_limit = false; // gross < pct of needs standard
    bool overall = false;
};

/// Earned-income disregard for the first schedule row admitting
/// months_worked; zero when every row's limit is exceeded. The disregard
/// never exceeds the earned income itself.
inline Money earned_income_disregard(Money monthly_earned, int months_worked,
                                     const AfdcParams& params) {
    for (const auto& r : params.earnings_disregards) {
        if (months_worked > r.months_worked_limit) continue;
        if (monthly_earned <= r.flat) return monthly_earned;
        const Money excess = monthly_earned - r.flat;
        return r.flat + Money{excess.cents * r.frac_num / r.frac_den};
    }
    return Money{0};
}

/// The three AFDC income tests. monthly_income is total family income from
/// all sources except public assistance; monthly_earned is the earned share
/// the disregard schedule applies to. Child-care costs are taken as zero and
/// months_worked defaults to one month.
inline AfdcTestResult afdc_financial_tests(Money monthly_income, int family_size,
                                           int months_worked, const AfdcParams& params,
                                           Money monthly_earned = Money{0},
                                           int n_workers = 0) {
    const Money needs = params.needs(family_size);
    const Money payment = params.payment(family_size);

    Money countable = monthly_income - params.flat_disregard -
                      earned_income_disregard(monthly_earned, months_worked, params) -
                      params.work_expense_deduction * n_workers;
    if (countable.cents < 0) countable = Money{0};

    AfdcTestResult r;
    r.countable = countable;
    r.benefit_positive = (payment - countable).cents > 0;
    r.below_needs = countable < needs;
    r.within_gross_limit =
        monthly_income.cents * 100 <
        static_cast<std::int64_t>(params.gross_income_limit_pct) * needs.cents;
    r.overall = r.benefit_positive && r.below_needs && r.within_gross_limit;
    return r;
}

namespace detail {

/// Annual income is converted to a monthly figure by exact division with
/// truncation toward zero.
inline Money monthly_total(const FamilyView& f) {
    return f.annual_income_ex_welfare / 12;
}

inline Money monthly_earned(const FamilyView& f) {
    return f.annual_earned_income / 12;
}

inline AfdcTestResult afdc_tests_for_family(const FamilyView& f, const AfdcParams& p) {
    return afdc_financial_tests(monthly_total(f), f.family_size, f.months_worked, p,
                                monthly_earned(f), f.n_workers);
}

/// Unemployed-parent hour rules: the primary earner works under 100 hours a
/// month and no parent's annual hours exceed 1200.
inline bool up_hour_rules(const FamilyView& f) {
    return f.primary_earner_monthly_hours < 100.0 &&
           f.max_parent_annual_hours <= 1200.0;
}

/// Income side of an expansion threshold: annual family income net of twelve
/// months of the per-worker deduction, compared against fpl_multiple times
/// the annual poverty guideline. Both sides stay in exact integer arithmetic.
inline bool expansion_income_ok(const FamilyView& f, const ExpansionThreshold& e,
                                const PovertyGuidelineTable& fpl,
                                Money monthly_work_expense) {
    const Money deduction = monthly_work_expense * 12 * f.n_workers;
    const Money net = f.annual_income_ex_welfare - deduction;
    const Money guideline =
        fpl.lookup(f.year, region_for_state(f.state), f.family_size);
    return net.cents * 10000 < e.fpl_multiple_bp * guideline.cents;
}

inline bool expansion_row_applies(const ExpansionThreshold& e, const ChildView& c,
                                  const FamilyView& f, const PovertyGuidelineTable& fpl,
                                  int month, Money monthly_work_expense) {
    const int age = age_in_month(c, f.year, month);
    if (age < e.min_age || age > e.max_age) return false;
    if (e.birthdate_cutoff && !(birth_date(c) > *e.birthdate_cutoff)) return false;
    return expansion_income_ok(f, e, fpl, monthly_work_expense);
}

inline bool any_expansion(ExpansionSource source, const ChildView& c,
                          const FamilyView& f, const RuleVintage& v,
                          const PovertyGuidelineTable& fpl, int month) {
    const Money deduction = source == ExpansionSource::schip
                                ? (v.schip ? v.schip->work_expense_deduction : Money{0})
                                : v.afdc.work_expense_deduction;
    for (const auto& e : v.expansions)
        if (e.source == source && expansion_row_applies(e, c, f, fpl, month, deduction))
            return true;
    return false;
}

inline void require_flag(bool flag, const char* name, const RuleVintage& v) {
    if (!flag)
        throw ValidationError(std::string(name) + " not offered by (" + v.state + "," +
                              std::to_string(v.year) + ")");
}

} // namespace detail

/// Evaluates one pathway in isolation. Pure function of its inputs; asking
/// for a pathway whose program flag is off in the vintage is an error (the
/// monthly dispatcher only asks for enabled pathways).
inline bool pathway_eligible(Pathway pathway, const ChildView& child,
                             const FamilyView& family, const RuleVintage& vintage,
                             const PovertyGuidelineTable& fpl, int month) {
    using detail::afdc_tests_for_family;
    switch (pathway) {
        case Pathway::afdc: {
            if (family.marital != MaritalStatus::single) return false;
            const int age = age_in_month(child, family.year, month);
            if (age < 0 || age > 17) return false;
            return afdc_tests_for_family(family, vintage.afdc).overall;
        }
        case Pathway::afdc_up: {
            detail::require_flag(vintage.flags.afdc_up, "afdc_up", vintage);
            if (family.marital != MaritalStatus::married) return false;
            if (!detail::up_hour_rules(family)) return false;
            return afdc_tests_for_family(family, vintage.afdc).overall;
        }
        case Pathway::ribicoff: {
            detail::require_flag(vintage.flags.ribicoff, "ribicoff", vintage);
            if (family.marital != MaritalStatus::married) return false;
            return afdc_tests_for_family(family, vintage.afdc).overall;
        }
        case Pathway::medically_needy: {
            detail::require_flag(vintage.flags.medically_needy, "medically_needy",
                                 vintage);
            const Money needs = vintage.afdc.needs(family.family_size);
            return detail::monthly_total(family).cents * 10000 <
                   *vintage.medically_needy_limit_bp * needs.cents;
        }
        case Pathway::poverty_expansion:
            return detail::any_expansion(ExpansionSource::poverty_expansion, child,
                                         family, vintage, fpl, month);
        case Pathway::targeted:
            detail::require_flag(vintage.flags.targeted_medicaid, "targeted_medicaid",
                                 vintage);
            return detail::any_expansion(ExpansionSource::targeted, child, family,
                                         vintage, fpl, month);
        case Pathway::schip:
            detail::require_flag(vintage.flags.schip_separate, "schip_separate",
                                 vintage);
            return detail::any_expansion(ExpansionSource::schip, child, family,
                                         vintage, fpl, month);
        case Pathway::section_1931: {
            if (!vintage.frozen_1931)
                throw ValidationError("section_1931 requested but (" + vintage.state +
                                      "," + std::to_string(vintage.year) +
                                      ") has no frozen_1931 parameters");
            const AfdcParams& frozen = *vintage.frozen_1931;
            if (family.marital == MaritalStatus::single) {
                const int age = age_in_month(child, family.year, month);
                if (age < 0 || age > 17) return false;
                return afdc_tests_for_family(family, frozen).overall;
            }
            // Unemployed-parent coverage was federally mandated from October
            // 1990, so the frozen July-1996 rules always include it.
            if (!detail::up_hour_rules(family)) return false;
            return afdc_tests_for_family(family, frozen).overall;
        }
    }
    throw ValidationError("unknown pathway");
}

/// First true pathway under the fixed precedence order, or absent when every
/// applicable pathway is false. The applicable set depends on the era:
/// before 1997 it is AFDC, AFDC-UP, Ribicoff, Medically Needy, then poverty
/// expansions; from 1997 it is Section 1931, then poverty and targeted rows
/// in rule-file order, then separate-program SCHIP.
inline std::optional<Pathway> determine_monthly_eligibility(
    const ChildView& child, const FamilyView& family, const RuleVintage& vintage,
    const PovertyGuidelineTable& fpl, int month) {
    auto is = [&](Pathway p) {
        return pathway_eligible(p, child, family, vintage, fpl, month);
    };
    if (!vintage.post_prwora) {
        if (is(Pathway::afdc)) return Pathway::afdc;
        if (vintage.flags.afdc_up && is(Pathway::afdc_up)) return Pathway::afdc_up;
        if (vintage.flags.ribicoff && is(Pathway::ribicoff)) return Pathway::ribicoff;
        if (vintage.flags.medically_needy && is(Pathway::medically_needy))
            return Pathway::medically_needy;
        if (is(Pathway::poverty_expansion)) return Pathway::poverty_expansion;
        return std::nullopt;
    }
    if (is(Pathway::section_1931)) return Pathway::section_1931;
    // Poverty and targeted rows share the income computation; the reported
    // tag is the source of the first matching row in file order.
    for (const auto& e : vintage.expansions) {
        if (e.source != ExpansionSource::poverty_expansion &&
            e.source != ExpansionSource::targeted)
            continue;
        if (e.source == ExpansionSource::targeted && !vintage.flags.targeted_medicaid)
            continue;
        if (detail::expansion_row_applies(e, child, family, fpl, month,
                                          vintage.afdc.work_expense_deduction))
            return e.source == ExpansionSource::targeted ? Pathway::targeted
                                                         : Pathway::poverty_expansion;
    }
    if (vintage.flags.schip_separate && is(Pathway::schip)) return Pathway::schip;
    return std::nullopt;
}

/// Pregnancy-related coverage applied to a woman's own age and her family's
/// income: true when any pregnancy-source expansion row admits her in the
/// given month. Vintages without pregnancy rows simply return false.
inline bool pregnancy_eligible(const ChildView& woman, const FamilyView& family,
                               const RuleVintage& vintage,
                               const PovertyGuidelineTable& fpl, int month) {
    return detail::any_expansion(ExpansionSource::pregnancy, woman, family, vintage,
                                 fpl, month);
}

// ---------------------------------------------------------------------------
// Annualization

enum class Reference : std::uint8_t { last_year, last_week };

inline const char* to_string(Reference r) {
    return r == Reference::last_year ? "last_year" : "last_week";
}

inline Reference reference_from_string(const std::string& s) {
    if (s == "last_year") return Reference::last_year;
    if (s == "last_week") return Reference::last_week;
    throw ValidationError("unknown reference mode '" + s + "'");
}

struct EligibilityResult {
    std::string child_id;
    std::array<std::optional<Pathway>, 12> months;  // index 0 = January
    double annual_fraction = 0.0;  // eligible months / 12, exact
    bool march_eligible = false;

    int eligible_month_count() const {
        int n = 0;
        for (const auto& m : months) n += m.has_value() ? 1 : 0;
        return n;
    }

    /// Audit string, one code per month, '.' for ineligible.
    std::string month_codes() const {
        std::string s(12, '.');
        for (int i = 0; i < 12; ++i)
            if (months[static_cast<std::size_t>(i)])
                s[static_cast<std::size_t>(i)] =
                    pathway_code(*months[static_cast<std::size_t>(i)]);
        return s;
    }
};

/// last_year evaluates all twelve months with the child's age recomputed per
/// month; last_week evaluates March only. annual_fraction counts eligible
/// months over twelve in both modes.
inline EligibilityResult annualize_eligibility(const ChildView& child,
                                               const FamilyView& family,
                                               const RuleSet& rules,
                                               const PovertyGuidelineTable& fpl,
                                               Reference reference = Reference::last_year) {
    const RuleVintage& vintage = rules.at(family.state, family.year);
    EligibilityResult r;
    if (reference == Reference::last_week) {
        r.months[2] = determine_monthly_eligibility(child, family, vintage, fpl, 3);
    } else {
        for (int m = 1; m <= 12; ++m)
            r.months[static_cast<std::size_t>(m - 1)] =
                determine_monthly_eligibility(child, family, vintage, fpl, m);
    }
    r.annual_fraction = r.eligible_month_count() / 12.0;
    r.march_eligible = r.months[2].has_value();
    return r;
}

} // namespace simelig
