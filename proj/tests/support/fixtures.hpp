#pragma once

// Builders for the synthetic rule vintages, guideline tables, and families
// the test suite runs against. Every number here is made up; the shapes
// mirror what the loaders accept.

#include <string>
#include <vector>

#include "simelig/eligibility.hpp"
#include "simelig/money.hpp"
#include "simelig/rules.hpp"

namespace fixtures {

using namespace simelig;

/// AFDC parameter block where every family size 1..8 shares one needs and
/// payment standard. Keeps hand-computed examples independent of size.
inline AfdcParams flat_afdc(std::int64_t needs_dollars, std::int64_t payment_dollars,
                            int gross_pct = 185, std::int64_t flat_dollars = 90,
                            std::int64_t work_expense_dollars = 0) {
    AfdcParams p;
    p.needs_standard.assign(8, from_dollars(needs_dollars));
    p.payment_standard.assign(8, from_dollars(payment_dollars));
    p.gross_income_limit_pct = gross_pct;
    p.flat_disregard = from_dollars(flat_dollars);
    p.work_expense_deduction = from_dollars(work_expense_dollars);
    return p;
}

/// Guideline table for one year where the contiguous-region guideline is
/// base + step per extra member, sizes 1..8.
inline void add_guideline_year(PovertyGuidelineTable& t, int year,
                               std::int64_t base_dollars = 8000,
                               std::int64_t step_dollars = 2000) {
    for (int s = 1; s <= 8; ++s) {
        const Money amount = from_dollars(base_dollars + step_dollars * (s - 1));
        t.set(year, GuidelineRegion::contiguous, s, amount);
        t.set(year, GuidelineRegion::alaska, s, amount + from_dollars(2000));
        t.set(year, GuidelineRegion::hawaii, s, amount + from_dollars(1000));
    }
}

inline PovertyGuidelineTable guidelines_for_years(const std::vector<int>& years,
                                                  std::int64_t base_dollars = 8000,
                                                  std::int64_t step_dollars = 2000) {
    PovertyGuidelineTable t;
    for (int y : years) add_guideline_year(t, y, base_dollars, step_dollars);
    return t;
}

/// Vintage with AFDC only (all optional programs off).
inline RuleVintage plain_vintage(const std::string& state, int year,
                                 AfdcParams afdc = flat_afdc(500, 450)) {
    RuleVintage v;
    v.state = state;
    v.year = year;
    v.post_prwora = year >= 1997;
    v.afdc = std::move(afdc);
    if (v.post_prwora) v.frozen_1931 = v.afdc;
    return v;
}

/// Vintage with every optional pre-1997 program switched on.
inline RuleVintage full_pre_vintage(const std::string& state, int year) {
    RuleVintage v = plain_vintage(state, year);
    v.flags.afdc_up = true;
    v.flags.ribicoff = true;
    v.flags.medically_needy = true;
    v.medically_needy_limit_bp = 13300;
    ExpansionThreshold e;
    e.min_age = 0;
    e.max_age = 5;
    e.fpl_multiple_bp = 13300;
    e.source = ExpansionSource::poverty_expansion;
    v.expansions.push_back(e);
    return v;
}

/// Post-1996 vintage with frozen rules, a poverty row, a targeted row, and a
/// separate SCHIP program.
inline RuleVintage full_post_vintage(const std::string& state, int year) {
    RuleVintage v = plain_vintage(state, year);
    v.flags.targeted_medicaid = true;
    v.flags.schip_separate = true;
    ExpansionThreshold pov;
    pov.min_age = 0;
    pov.max_age = 18;
    pov.fpl_multiple_bp = 10000;
    pov.source = ExpansionSource::poverty_expansion;
    v.expansions.push_back(pov);
    ExpansionThreshold tgt;
    tgt.min_age = 0;
    tgt.max_age = 18;
    tgt.fpl_multiple_bp = 15000;
    tgt.source = ExpansionSource::targeted;
    v.expansions.push_back(tgt);
    ExpansionThreshold sch;
    sch.min_age = 0;
    sch.max_age = 18;
    sch.fpl_multiple_bp = 20000;
    sch.source = ExpansionSource::schip;
    v.expansions.push_back(sch);
    v.schip = SchipParams{from_dollars(50)};
    return v;
}

inline FamilyView family(const std::string& state, int year, MaritalStatus marital,
                         int family_size, std::int64_t annual_income_dollars,
                         std::int64_t annual_earned_dollars = 0, int n_workers = 0) {
    FamilyView f;
    f.state = state;
    f.year = year;
    f.marital = marital;
    f.family_size = family_size;
    f.annual_income_ex_welfare = from_dollars(annual_income_dollars);
    f.annual_earned_income = from_dollars(annual_earned_dollars);
    f.n_workers = n_workers;
    return f;
}

/// Child of the given age for every month of `year` (born in January).
inline ChildView child_aged(int age, int year) {
    return ChildView{year - age, 1};
}

} // namespace fixtures
