#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "simelig/common.hpp"
#include "simelig/eligibility.hpp"
#include "simelig/money.hpp"
#include "simelig/population.hpp"
#include "simelig/rng.hpp"
#include "simelig/rules.hpp"

namespace simelig {

inline constexpr const char* kDgpVersionLine = "#simelig-dgp v1";

/// Data-generating-process parameters for synthetic populations. The planted
/// effect adds effect_hours_per_eligible_child x (sum of each child's eligible
/// fraction of the year) to the mother's usual weekly hours.
struct DgpConfig {
    int n_states = 4;
    int year_first = 1985;
    int year_last = 1988;
    int families_per_cell = 50;
    double p_married = 0.5;
    double p_mother_works = 0.75;
    double log_income_mean = 9.2;  // annual dollars, lognormal
    double log_income_sd = 0.9;
    int children_min = 1;
    int children_max = 3;
    int child_age_max = 17;
    double weight_min = 0.5;
    double weight_max = 2.0;
    double baseline_hours = 20.0;
    double effect_hours_per_eligible_child = 0.0;
    double noise_sd = 4.0;
    double p_imputed_outcome = 0.0;
    std::uint64_t seed = 1;
};

inline void validate_dgp_config(const DgpConfig& c) {
    auto fail = [](const std::string& msg) {
        throw ValidationError("dgp config: " + msg);
    };
    if (c.n_states < 1) fail("n_states must be at least 1");
    if (c.n_states > 99) fail("n_states must be at most 99");
    if (c.year_first > c.year_last) fail("year_first must not exceed year_last");
    if (c.year_first < 1977 || c.year_last > 2017) fail("years must lie in 1977..2017");
    if (c.families_per_cell < 1) fail("families_per_cell must be at least 1");
    if (c.p_married < 0.0 || c.p_married > 1.0) fail("p_married must lie in [0,1]");
    if (c.p_mother_works < 0.0 || c.p_mother_works > 1.0)
        fail("p_mother_works must lie in [0,1]");
    if (!(c.log_income_sd >= 0.0)) fail("log_income_sd must be nonnegative");
    if (c.children_min < 0 || c.children_min > c.children_max)
        fail("children_min must lie in [0, children_max]");
    if (c.children_max > 8) fail("children_max must be at most 8");
    if (c.child_age_max < 0 || c.child_age_max > 18)
        fail("child_age_max must lie in [0,18]");
    if (!(c.weight_min > 0.0) || c.weight_min > c.weight_max)
        fail("weights must satisfy 0 < weight_min <= weight_max");
    if (!(c.noise_sd >= 0.0)) fail("noise_sd must be nonnegative");
    if (c.p_imputed_outcome < 0.0 || c.p_imputed_outcome > 1.0)
        fail("p_imputed_outcome must lie in [0,1]");
}

namespace detail {

inline std::int64_t dgp_parse_int(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    std::int64_t out = 0;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        throw ValidationError(key + ": not an integer: '" + v + "'");
    }
    if (pos != v.size())
        throw ValidationError(key + ": not an integer: '" + v + "'");
    return out;
}

inline double dgp_parse_double(const std::string& v, const std::string& key) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ValidationError(key + ": not a number: '" + v + "'");
    }
    if (pos != v.size() || !std::isfinite(out))
        throw ValidationError(key + ": not a finite number: '" + v + "'");
    return out;
}

inline std::string dgp_trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace detail

inline DgpConfig parse_dgp_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || detail::dgp_trim(line) != kDgpVersionLine)
        throw IoError(path + ":1: expected version line '" +
                      std::string(kDgpVersionLine) + "'");

    DgpConfig c;
    bool seed_seen = false;
    std::map<std::string, bool> seen;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::dgp_trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
        const std::string key = detail::dgp_trim(t.substr(0, eq));
        const std::string value = detail::dgp_trim(t.substr(eq + 1));
        if (key.empty() || value.empty())
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
        if (seen[key])
            throw IoError(path + ":" + std::to_string(lineno) + ": duplicate key '" +
                          key + "'");
        seen[key] = true;

        try {
            if (key == "n_states")
                c.n_states = static_cast<int>(detail::dgp_parse_int(value, key));
            else if (key == "year_first")
                c.year_first = static_cast<int>(detail::dgp_parse_int(value, key));
            else if (key == "year_last")
                c.year_last = static_cast<int>(detail::dgp_parse_int(value, key));
            else if (key == "families_per_cell")
                c.families_per_cell =
                    static_cast<int>(detail::dgp_parse_int(value, key));
            else if (key == "p_married")
                c.p_married = detail::dgp_parse_double(value, key);
            else if (key == "p_mother_works")
                c.p_mother_works = detail::dgp_parse_double(value, key);
            else if (key == "log_income_mean")
                c.log_income_mean = detail::dgp_parse_double(value, key);
            else if (key == "log_income_sd")
                c.log_income_sd = detail::dgp_parse_double(value, key);
            else if (key == "children_min")
                c.children_min = static_cast<int>(detail::dgp_parse_int(value, key));
            else if (key == "children_max")
                c.children_max = static_cast<int>(detail::dgp_parse_int(value, key));
            else if (key == "child_age_max")
                c.child_age_max = static_cast<int>(detail::dgp_parse_int(value, key));
            else if (key == "weight_min")
                c.weight_min = detail::dgp_parse_double(value, key);
            else if (key == "weight_max")
                c.weight_max = detail::dgp_parse_double(value, key);
            else if (key == "baseline_hours")
                c.baseline_hours = detail::dgp_parse_double(value, key);
            else if (key == "effect_hours_per_eligible_child")
                c.effect_hours_per_eligible_child =
                    detail::dgp_parse_double(value, key);
            else if (key == "noise_sd")
                c.noise_sd = detail::dgp_parse_double(value, key);
            else if (key == "p_imputed_outcome")
                c.p_imputed_outcome = detail::dgp_parse_double(value, key);
            else if (key == "seed") {
                c.seed = static_cast<std::uint64_t>(detail::dgp_parse_int(value, key));
                seed_seen = true;
            } else {
                throw ValidationError("unknown key '" + key + "'");
            }
        } catch (const ValidationError& e) {
            throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!seed_seen) throw ValidationError(path + ": missing required key 'seed'");
    validate_dgp_config(c);
    return c;
}

inline void write_dgp_config(const std::string& path, const DgpConfig& c) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << kDgpVersionLine << "\n";
    out << "n_states = " << c.n_states << "\n";
    out << "year_first = " << c.year_first << "\n";
    out << "year_last = " << c.year_last << "\n";
    out << "families_per_cell = " << c.families_per_cell << "\n";
    out << "p_married = " << format_double(c.p_married) << "\n";
    out << "p_mother_works = " << format_double(c.p_mother_works) << "\n";
    out << "log_income_mean = " << format_double(c.log_income_mean) << "\n";
    out << "log_income_sd = " << format_double(c.log_income_sd) << "\n";
    out << "children_min = " << c.children_min << "\n";
    out << "children_max = " << c.children_max << "\n";
    out << "child_age_max = " << c.child_age_max << "\n";
    out << "weight_min = " << format_double(c.weight_min) << "\n";
    out << "weight_max = " << format_double(c.weight_max) << "\n";
    out << "baseline_hours = " << format_double(c.baseline_hours) << "\n";
    out << "effect_hours_per_eligible_child = "
        << format_double(c.effect_hours_per_eligible_child) << "\n";
    out << "noise_sd = " << format_double(c.noise_sd) << "\n";
    out << "p_imputed_outcome = " << format_double(c.p_imputed_outcome) << "\n";
    out << "seed = " << c.seed << "\n";
    if (!out) throw IoError("failed writing " + path);
}

inline std::string demo_state_id(int index) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "S%02d", index + 1);
    return buf;
}

namespace detail {

inline AfdcParams demo_afdc(int k, int year, int year_first) {
    const int d = std::max(0, year - year_first);
    AfdcParams a;
    for (int size = 1; size <= 8; ++size) {
        const std::int64_t needs = 320 + 30 * k + 8 * d + 70 * (size - 1);
        a.needs_standard.push_back(from_dollars(needs));
        a.payment_standard.push_back(from_dollars(needs - 30 - 5 * (k % 3)));
    }
    a.gross_income_limit_pct = 185;
    a.flat_disregard = from_dollars(90);
    a.work_expense_deduction = from_dollars(50 + 5 * (k % 3));
    return a;
}

} // namespace detail

/// Synthesizes a deterministic rule set with state-by-year variation in
/// benefit levels, cutoffs, and covered ages so simulated eligibility keeps
/// residual variation after additive fixed effects are removed.
inline RuleBundle make_demo_rules(const DgpConfig& c) {
    validate_dgp_config(c);
    RuleBundle bundle;

    for (int year = c.year_first; year <= c.year_last; ++year) {
        const int d = year - c.year_first;
        for (int size = 1; size <= 8; ++size) {
            const std::int64_t base = 4800 + 200 * d + (1600 + 50 * d) * (size - 1);
            bundle.guidelines.set(year, GuidelineRegion::contiguous, size,
                                  from_dollars(base));
        }
    }

    for (int k = 0; k < c.n_states; ++k) {
        const std::string state = demo_state_id(k);
        for (int year = c.year_first; year <= c.year_last; ++year) {
            const int d = year - c.year_first;
            RuleVintage v;
            v.state = state;
            v.year = year;
            v.afdc = detail::demo_afdc(k, year, c.year_first);
            v.post_prwora = year >= 1997;
            v.flags.afdc_up = v.post_prwora || (k % 3 != 2);
            v.flags.ribicoff = !v.post_prwora && (k % 2 == 0);
            v.flags.medically_needy = (k % 2 == 1);
            if (v.flags.medically_needy) v.medically_needy_limit_bp = 13300;

            ExpansionThreshold young;
            young.min_age = 0;
            young.max_age = std::min(18, 2 + (k + d) % 6);
            young.fpl_multiple_bp = 10000 + 500 * ((k + d) % 8);
            young.source = ExpansionSource::poverty_expansion;
            v.expansions.push_back(young);

            if (d >= 2) {
                ExpansionThreshold older;
                older.min_age = 0;
                older.max_age = std::min(18, 5 + d + k % 3);
                older.fpl_multiple_bp = 10000;
                older.source = ExpansionSource::poverty_expansion;
                if (k % 2 == 0) older.birthdate_cutoff = Date{year - 8, 9, 30};
                v.expansions.push_back(older);
            }

            ExpansionThreshold maternal;
            maternal.min_age = 15;
            maternal.max_age = 44;
            maternal.fpl_multiple_bp = 12000 + 500 * (k % 3);
            maternal.source = ExpansionSource::pregnancy;
            v.expansions.push_back(maternal);

            if (v.post_prwora) {
                v.frozen_1931 = detail::demo_afdc(k, 1996, c.year_first);
                v.flags.targeted_medicaid = (k % 2 == 0);
                if (v.flags.targeted_medicaid) {
                    ExpansionThreshold targeted;
                    targeted.min_age = 0;
                    targeted.max_age = 18;
                    targeted.fpl_multiple_bp = 15000 + 250 * k;
                    targeted.source = ExpansionSource::targeted;
                    v.expansions.push_back(targeted);
                }
                v.flags.schip_separate = true;
                ExpansionThreshold schip;
                schip.min_age = 0;
                schip.max_age = 18;
                schip.fpl_multiple_bp = 20000;
                schip.source = ExpansionSource::schip;
                v.expansions.push_back(schip);
                v.schip = SchipParams{from_dollars(90)};
            }

            std::vector<std::string> issues;
            validate_vintage(v, issues);
            if (!issues.empty())
                throw ValidationError("demo rules: " + issues.front());
            bundle.rules.add(std::move(v));
        }
    }
    return bundle;
}

namespace detail {

inline Money lognormal_dollars(Rng& rng, double mu, double sigma) {
    const double dollars =
        std::min(5.0e6, std::exp(mu + sigma * rng.normal()));
    return Money{std::llround(dollars * 100.0)};
}

inline std::string pad6(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", i);
    return buf;
}

} // namespace detail

/// Draws one family per (state, year, index) substream so output is identical
/// under any worker partitioning. The mother's usual_hours carries the planted
/// response; her weeks_worked stays zero so the outcome never feeds back into
/// the hour-based eligibility rules.
inline std::vector<PersonRecord> generate_synthetic_population(
    const DgpConfig& c, const RuleBundle& bundle, std::uint64_t seed) {
    validate_dgp_config(c);
    const std::uint64_t gen_seed = derive_seed(seed, "gen");
    std::vector<PersonRecord> out;

    for (int k = 0; k < c.n_states; ++k) {
        const std::string state = demo_state_id(k);
        for (int year = c.year_first; year <= c.year_last; ++year) {
            const std::uint64_t cell_seed =
                keyed_hash(gen_seed, state + "/" + std::to_string(year));
            for (int i = 0; i < c.families_per_cell; ++i) {
                Rng rng(keyed_hash(cell_seed, static_cast<std::uint64_t>(i)));
                const std::string hid =
                    state + "-" + std::to_string(year) + "-" + detail::pad6(i);

                const bool married = rng.bernoulli(c.p_married);
                const int n_children = static_cast<int>(
                    rng.uniform_int(c.children_min, c.children_max));
                const int mother_age = static_cast<int>(rng.uniform_int(22, 44));
                const double weight =
                    c.weight_min + (c.weight_max - c.weight_min) * rng.u01();
                const std::string group = rng.bernoulli(0.5) ? "grp1" : "grp2";

                const Money total_earned =
                    detail::lognormal_dollars(rng, c.log_income_mean, c.log_income_sd);
                const bool mother_works = rng.bernoulli(c.p_mother_works);
                Money mother_earned{}, spouse_earned{};
                if (married) {
                    const double spouse_share =
                        mother_works ? 0.4 + 0.5 * rng.u01() : 1.0;
                    spouse_earned = Money{std::llround(
                        static_cast<double>(total_earned.cents) * spouse_share)};
                    mother_earned = total_earned - spouse_earned;
                } else {
                    mother_earned = mother_works ? total_earned : Money{};
                }
                const Money mother_other =
                    rng.bernoulli(0.3)
                        ? Money{std::llround(static_cast<double>(total_earned.cents) *
                                             0.1 * rng.u01())}
                        : Money{};
                const Money assistance =
                    rng.bernoulli(0.2)
                        ? from_dollars(rng.uniform_int(500, 3000))
                        : Money{};

                PersonRecord mother;
                mother.person_id = hid + "-m";
                mother.household_id = hid;
                mother.state_id = state;
                mother.survey_year = year;
                mother.age = mother_age;
                mother.sex = Sex::female;
                mother.marital_status =
                    married ? MaritalStatus::married : MaritalStatus::single;
                mother.relationship = Relationship::head;
                mother.race_ethnicity = group;
                mother.income_earned = mother_earned;
                mother.income_other = mother_other;
                mother.income_public_assistance = assistance;
                mother.weeks_worked = 0;
                mother.max_monthly_hours = 40.0 + 160.0 * rng.u01();
                mother.labor_force = mother_works;
                mother.survey_weight = weight;
                mother.imputed_hours = rng.bernoulli(c.p_imputed_outcome);
                mother.birth_month = static_cast<int>(rng.uniform_int(1, 12));

                PersonRecord spouse;
                if (married) {
                    spouse = mother;
                    spouse.person_id = hid + "-s";
                    spouse.sex = Sex::male;
                    spouse.relationship = Relationship::spouse;
                    spouse.age = std::max(
                        20, mother_age + static_cast<int>(rng.uniform_int(-3, 6)));
                    spouse.income_earned = spouse_earned;
                    spouse.income_other = Money{};
                    spouse.income_public_assistance = Money{};
                    spouse.weeks_worked = static_cast<int>(rng.uniform_int(0, 52));
                    spouse.usual_hours = 50.0 * rng.u01();
                    spouse.hours_last_week = spouse.usual_hours;
                    spouse.max_monthly_hours = 40.0 + 160.0 * rng.u01();
                    spouse.labor_force = spouse.income_earned.cents > 0;
                    spouse.imputed_hours = false;
                    spouse.birth_month = static_cast<int>(rng.uniform_int(1, 12));
                }

                std::vector<PersonRecord> kids;
                for (int ci = 0; ci < n_children; ++ci) {
                    PersonRecord kid;
                    kid.person_id = hid + "-c" + std::to_string(ci);
                    kid.household_id = hid;
                    kid.state_id = state;
                    kid.survey_year = year;
                    kid.age = static_cast<int>(rng.uniform_int(0, c.child_age_max));
                    kid.sex = rng.bernoulli(0.5) ? Sex::female : Sex::male;
                    kid.marital_status = MaritalStatus::single;
                    kid.relationship = Relationship::child;
                    kid.race_ethnicity = group;
                    kid.survey_weight = weight;
                    kid.birth_month = static_cast<int>(rng.uniform_int(1, 12));
                    kids.push_back(std::move(kid));
                }

                const double noise = c.noise_sd * rng.normal();

                NuclearFamily fam;
                fam.mother = mother;
                if (married) fam.spouse = spouse;
                fam.children = kids;
                fam.family_income_ex_welfare = mother.income_ex_welfare();
                if (married)
                    fam.family_income_ex_welfare =
                        fam.family_income_ex_welfare + spouse.income_ex_welfare();
                fam.family_size = 1 + (married ? 1 : 0) + n_children;
                fam.state_id = state;
                fam.year = year;
                fam.marital_status = mother.marital_status;

                const FamilyView fv = family_view(fam);
                double eligible_children = 0.0;
                for (const auto& kid : kids) {
                    const auto res = annualize_eligibility(
                        child_view(kid), fv, bundle.rules, bundle.guidelines);
                    eligible_children += res.annual_fraction;
                }

                double hours = 0.0;
                if (mother_works)
                    hours = std::max(
                        0.0, c.baseline_hours +
                                 c.effect_hours_per_eligible_child * eligible_children +
                                 noise);
                mother.usual_hours = hours;
                mother.hours_last_week = hours;
                mother.labor_force = mother_works && hours > 0.0;

                validate_person(mother);
                out.push_back(std::move(mother));
                if (married) {
                    validate_person(spouse);
                    out.push_back(std::move(spouse));
                }
                for (auto& kid : kids) {
                    validate_person(kid);
                    out.push_back(std::move(kid));
                }
            }
        }
    }
    return out;
}

} // namespace simelig
