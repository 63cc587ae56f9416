#include <catch2/catch_amalgamated.hpp>

#include "simelig/eligibility.hpp"
#include "simelig/rng.hpp"
#include "support/draws.hpp"
#include "support/oracle_rules.hpp"

using namespace simelig;
using namespace fixtures;

TEST_CASE("engine agrees with the straight-line reference on random draws") {
    Rng rng(880011);
    int eligible = 0;
    int disagreements = 0;
    const int trials = 3000;
    for (int trial = 0; trial < trials; ++trial) {
        Draw d = random_draw(rng);
        auto engine =
            determine_monthly_eligibility(d.child, d.family, d.vintage, d.fpl, d.month);
        auto reference = oracle::reference_monthly_eligibility(d.child, d.family,
                                                               d.vintage, d.fpl, d.month);
        if (engine != reference) {
            ++disagreements;
            if (disagreements <= 3) {
                CAPTURE(trial, d.family.year, d.family.family_size,
                        d.family.annual_income_ex_welfare.cents,
                        d.family.annual_earned_income.cents, d.month,
                        to_string(d.family.marital),
                        engine ? to_string(*engine) : "none",
                        reference ? to_string(*reference) : "none");
                CHECK(engine == reference);
            }
        }
        if (engine.has_value()) ++eligible;
    }
    CHECK(disagreements == 0);
    // The draw distribution must exercise both outcomes heavily.
    CHECK(eligible > trials / 10);
    CHECK(eligible < trials * 9 / 10);
}

TEST_CASE("engine agrees with the reference month by month over full years") {
    Rng rng(990022);
    int disagreements = 0;
    for (int trial = 0; trial < 250; ++trial) {
        Draw d = random_draw(rng);
        for (int month = 1; month <= 12; ++month) {
            auto engine =
                determine_monthly_eligibility(d.child, d.family, d.vintage, d.fpl, month);
            auto reference = oracle::reference_monthly_eligibility(
                d.child, d.family, d.vintage, d.fpl, month);
            if (engine != reference) ++disagreements;
        }
    }
    CHECK(disagreements == 0);
}
