#pragma once

// Reference eligibility evaluation written independently of the library
// engine: one straight-line pass over the program rules in raw integer
// cents, no shared helpers. The agreement test checks the engine against
// this function draw by draw.

#include <cstdint>
#include <optional>

#include "simelig/eligibility.hpp"

namespace oracle {

using simelig::ChildView;
using simelig::FamilyView;
using simelig::Pathway;
using simelig::PovertyGuidelineTable;
using simelig::RuleVintage;

inline std::optional<Pathway> reference_monthly_eligibility(
    const ChildView& child, const FamilyView& family, const RuleVintage& vintage,
    const PovertyGuidelineTable& fpl_table, int month) {
    // Age during the evaluated month: one less than the age reached in the
    // birthday month whenever the month precedes the birthday.
    int age = family.year - child.birth_year;
    if (month < child.birth_month) age = age - 1;

    // Monthly figures, truncated.
    const std::int64_t monthly_total_c = family.annual_income_ex_welfare.cents / 12;
    const std::int64_t monthly_earned_c = family.annual_earned_income.cents / 12;
    const bool married = family.marital == simelig::MaritalStatus::married;

    // AFDC financial tests against a given parameter block.
    auto afdc_financially_eligible = [&](const simelig::AfdcParams& p) {
        int size = family.family_size;
        if (size > static_cast<int>(p.needs_standard.size()))
            size = static_cast<int>(p.needs_standard.size());
        const std::int64_t needs_c = p.needs_standard[size - 1].cents;
        const std::int64_t payment_c = p.payment_standard[size - 1].cents;

        std::int64_t earned_disregard_c = 0;
        for (std::size_t i = 0; i < p.earnings_disregards.size(); ++i) {
            if (family.months_worked <= p.earnings_disregards[i].months_worked_limit) {
                const std::int64_t flat_c = p.earnings_disregards[i].flat.cents;
                if (monthly_earned_c <= flat_c) {
                    earned_disregard_c = monthly_earned_c;
                } else {
                    earned_disregard_c = flat_c + (monthly_earned_c - flat_c) *
                                                      p.earnings_disregards[i].frac_num /
                                                      p.earnings_disregards[i].frac_den;
                }
                break;
            }
        }

        std::int64_t countable_c = monthly_total_c - p.flat_disregard.cents -
                                   earned_disregard_c -
                                   p.work_expense_deduction.cents * family.n_workers;
        if (countable_c < 0) countable_c = 0;

        const bool test1 = payment_c - countable_c > 0;
        const bool test2 = countable_c < needs_c;
        const bool test3 =
            monthly_total_c * 100 <
            static_cast<std::int64_t>(p.gross_income_limit_pct) * needs_c;
        return test1 && test2 && test3;
    };

    // Unemployed-parent hour conditions.
    const bool hours_ok = family.primary_earner_monthly_hours < 100.0 &&
                          family.max_parent_annual_hours <= 1200.0;

    // Expansion threshold comparison for one row.
    auto expansion_matches = [&](const simelig::ExpansionThreshold& e,
                                 std::int64_t deduction_monthly_c) {
        if (age < e.min_age) return false;
        if (age > e.max_age) return false;
        if (e.birthdate_cutoff.has_value()) {
            const simelig::Date b{child.birth_year, child.birth_month, 1};
            const simelig::Date cut = *e.birthdate_cutoff;
            const bool after = b.year > cut.year ||
                               (b.year == cut.year && b.month > cut.month) ||
                               (b.year == cut.year && b.month == cut.month &&
                                b.day > cut.day);
            if (!after) return false;
        }
        const std::int64_t net_c = family.annual_income_ex_welfare.cents -
                                   deduction_monthly_c * 12 * family.n_workers;
        const std::int64_t guideline_c =
            fpl_table
                .lookup(family.year, simelig::region_for_state(family.state),
                        family.family_size)
                .cents;
        return net_c * 10000 < e.fpl_multiple_bp * guideline_c;
    };

    if (!vintage.post_prwora) {
        // AFDC: three financial tests plus single-parent structure and child
        // age 0-17 at determination.
        if (!married && age >= 0 && age <= 17 && afdc_financially_eligible(vintage.afdc))
            return Pathway::afdc;

        // AFDC-UP: program offered, financially eligible, hour limits,
        // married parents.
        if (vintage.flags.afdc_up && married && hours_ok &&
            afdc_financially_eligible(vintage.afdc))
            return Pathway::afdc_up;

        // Ribicoff: income-eligible but married.
        if (vintage.flags.ribicoff && married && afdc_financially_eligible(vintage.afdc))
            return Pathway::ribicoff;

        // Medically needy: monthly income below the needs-standard multiple.
        if (vintage.flags.medically_needy) {
            int size = family.family_size;
            if (size > static_cast<int>(vintage.afdc.needs_standard.size()))
                size = static_cast<int>(vintage.afdc.needs_standard.size());
            const std::int64_t needs_c = vintage.afdc.needs_standard[size - 1].cents;
            if (monthly_total_c * 10000 < *vintage.medically_needy_limit_bp * needs_c)
                return Pathway::medically_needy;
        }

        // Poverty-related expansions with the AFDC work expense deduction.
        for (const auto& e : vintage.expansions) {
            if (e.source != simelig::ExpansionSource::poverty_expansion) continue;
            if (expansion_matches(e, vintage.afdc.work_expense_deduction.cents))
                return Pathway::poverty_expansion;
        }
        return std::nullopt;
    }

    // Section 1931: frozen July-1996 AFDC rules; single-parent families also
    // need age 0-17, two-parent families the unemployed-parent hour rules.
    if (vintage.frozen_1931.has_value()) {
        if (!married && age >= 0 && age <= 17 &&
            afdc_financially_eligible(*vintage.frozen_1931))
            return Pathway::section_1931;
        if (married && hours_ok && afdc_financially_eligible(*vintage.frozen_1931))
            return Pathway::section_1931;
    }

    // Poverty and targeted rows share the medicaid work expense deduction and
    // report whichever row matches first.
    for (const auto& e : vintage.expansions) {
        if (e.source == simelig::ExpansionSource::poverty_expansion) {
            if (expansion_matches(e, vintage.afdc.work_expense_deduction.cents))
                return Pathway::poverty_expansion;
        } else if (e.source == simelig::ExpansionSource::targeted &&
                   vintage.flags.targeted_medicaid) {
            if (expansion_matches(e, vintage.afdc.work_expense_deduction.cents))
                return Pathway::targeted;
        }
    }

    // Separate SCHIP programs with their own deduction.
    if (vintage.flags.schip_separate) {
        std::int64_t ded_c = 0;
        if (vintage.schip.has_value()) ded_c = vintage.schip->work_expense_deduction.cents;
        for (const auto& e : vintage.expansions) {
            if (e.source != simelig::ExpansionSource::schip) continue;
            if (expansion_matches(e, ded_c)) return Pathway::schip;
        }
    }
    return std::nullopt;
}

} // namespace oracle
