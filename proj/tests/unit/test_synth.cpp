#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "simelig/synth.hpp"
#include "support/tempdir.hpp"

using namespace simelig;
using fixtures::TempDir;
using fixtures::write_text;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

DgpConfig small_config() {
    DgpConfig c;
    c.n_states = 3;
    c.year_first = 1985;
    c.year_last = 1986;
    c.families_per_cell = 40;
    c.seed = 11;
    return c;
}

} // namespace

TEST_CASE("dgp config writes and parses back unchanged") {
    DgpConfig c = small_config();
    c.p_married = 0.35;
    c.log_income_mean = 9.05;
    c.children_max = 4;
    c.effect_hours_per_eligible_child = 1.5;
    c.p_imputed_outcome = 0.1;
    c.seed = 987654321;

    TempDir dir;
    const std::string path = dir.file("dgp.txt");
    write_dgp_config(path, c);
    DgpConfig got = parse_dgp_config(path);

    CHECK(got.n_states == c.n_states);
    CHECK(got.year_first == c.year_first);
    CHECK(got.year_last == c.year_last);
    CHECK(got.families_per_cell == c.families_per_cell);
    CHECK(got.p_married == c.p_married);
    CHECK(got.p_mother_works == c.p_mother_works);
    CHECK(got.log_income_mean == c.log_income_mean);
    CHECK(got.log_income_sd == c.log_income_sd);
    CHECK(got.children_min == c.children_min);
    CHECK(got.children_max == c.children_max);
    CHECK(got.child_age_max == c.child_age_max);
    CHECK(got.weight_min == c.weight_min);
    CHECK(got.weight_max == c.weight_max);
    CHECK(got.baseline_hours == c.baseline_hours);
    CHECK(got.effect_hours_per_eligible_child == c.effect_hours_per_eligible_child);
    CHECK(got.noise_sd == c.noise_sd);
    CHECK(got.p_imputed_outcome == c.p_imputed_outcome);
    CHECK(got.seed == c.seed);
}

TEST_CASE("dgp config parser rejects malformed input") {
    TempDir dir;
    const std::string path = dir.file("dgp.txt");

    write_text(path, "n_states = 3\nseed = 1\n");
    CHECK_THROWS_AS(parse_dgp_config(path), IoError);

    write_text(path, "#simelig-dgp v1\nnot_a_key = 3\nseed = 1\n");
    CHECK_THROWS_WITH(parse_dgp_config(path),
                      Catch::Matchers::ContainsSubstring("not_a_key"));

    write_text(path, "#simelig-dgp v1\nseed = 1\nseed = 2\n");
    CHECK_THROWS_WITH(parse_dgp_config(path),
                      Catch::Matchers::ContainsSubstring("duplicate"));

    write_text(path, "#simelig-dgp v1\nn_states = three\nseed = 1\n");
    CHECK_THROWS_WITH(parse_dgp_config(path),
                      Catch::Matchers::ContainsSubstring("integer"));

    write_text(path, "#simelig-dgp v1\nn_states = 3\n");
    CHECK_THROWS_WITH(parse_dgp_config(path),
                      Catch::Matchers::ContainsSubstring("seed"));

    write_text(path, "#simelig-dgp v1\nnoise_sd\nseed = 1\n");
    CHECK_THROWS_WITH(parse_dgp_config(path),
                      Catch::Matchers::ContainsSubstring("key = value"));

    // Comments and blank lines are fine.
    write_text(path, "#simelig-dgp v1\n\n# a note\nseed = 5\n");
    CHECK(parse_dgp_config(path).seed == 5);
}

TEST_CASE("dgp config validation blocks infeasible setups") {
    DgpConfig c = small_config();
    c.n_states = 0;
    CHECK_THROWS_WITH(validate_dgp_config(c),
                      Catch::Matchers::ContainsSubstring("n_states"));
    c = small_config();
    c.year_first = 1990;
    c.year_last = 1985;
    CHECK_THROWS_AS(validate_dgp_config(c), ValidationError);
    c = small_config();
    c.families_per_cell = 0;
    CHECK_THROWS_AS(validate_dgp_config(c), ValidationError);
    c = small_config();
    c.p_married = 1.5;
    CHECK_THROWS_AS(validate_dgp_config(c), ValidationError);
    c = small_config();
    c.children_min = 3;
    c.children_max = 2;
    CHECK_THROWS_AS(validate_dgp_config(c), ValidationError);
    c = small_config();
    c.weight_min = 0.0;
    CHECK_THROWS_AS(validate_dgp_config(c), ValidationError);
    c = small_config();
    c.child_age_max = 19;
    CHECK_THROWS_AS(validate_dgp_config(c), ValidationError);
}

TEST_CASE("demo rules cover every configured state and year") {
    DgpConfig c = small_config();
    RuleBundle b = make_demo_rules(c);

    CHECK(b.rules.vintages().size() == 6);
    for (int k = 0; k < 3; ++k)
        for (int year = 1985; year <= 1986; ++year) {
            const RuleVintage& v = b.rules.at(demo_state_id(k), year);
            CHECK_FALSE(v.post_prwora);
            CHECK_FALSE(v.frozen_1931.has_value());
            CHECK(!v.expansions.empty());
        }
    CHECK(b.guidelines.lookup(1985, GuidelineRegion::contiguous, 3) ==
          from_dollars(4800 + 2 * 1600));

    DgpConfig post = small_config();
    post.year_first = 1998;
    post.year_last = 1999;
    RuleBundle pb = make_demo_rules(post);
    for (int k = 0; k < 3; ++k) {
        const RuleVintage& v = pb.rules.at(demo_state_id(k), 1998);
        CHECK(v.post_prwora);
        REQUIRE(v.frozen_1931.has_value());
        CHECK(v.flags.schip_separate);
        bool has_schip_row = false;
        for (const auto& e : v.expansions)
            if (e.source == ExpansionSource::schip) has_schip_row = true;
        CHECK(has_schip_row);
    }
}

TEST_CASE("demo rules vary across states and serialize round trip") {
    DgpConfig c = small_config();
    RuleBundle b = make_demo_rules(c);

    const RuleVintage& s1 = b.rules.at("S01", 1985);
    const RuleVintage& s2 = b.rules.at("S02", 1985);
    CHECK(s1.afdc.needs(3) != s2.afdc.needs(3));
    CHECK(s1.expansions[0].fpl_multiple_bp != s2.expansions[0].fpl_multiple_bp);

    TempDir d1, d2;
    write_rules(d1.path.string(), b);
    write_rules(d2.path.string(), make_demo_rules(c));
    for (const char* f :
         {"afdc_params.csv", "expansions.csv", "flags.csv", "schip.csv",
          "frozen_1931.csv", "poverty_guidelines.csv"}) {
        CHECK(slurp(d1.path.string() + "/" + f) == slurp(d2.path.string() + "/" + f));
    }
    RuleBundle reloaded = load_rules(d1.path.string());
    CHECK(reloaded.rules.vintages().size() == b.rules.vintages().size());
}

TEST_CASE("generator output is byte identical for a fixed seed") {
    DgpConfig c = small_config();
    RuleBundle b = make_demo_rules(c);

    auto r1 = generate_synthetic_population(c, b, 7);
    auto r2 = generate_synthetic_population(c, b, 7);
    REQUIRE(r1.size() == r2.size());

    TempDir dir;
    const std::string p1 = dir.file("a.csv"), p2 = dir.file("b.csv");
    write_population(p1, r1);
    write_population(p2, r2);
    CHECK(slurp(p1) == slurp(p2));

    auto r3 = generate_synthetic_population(c, b, 8);
    const std::string p3 = dir.file("c.csv");
    write_population(p3, r3);
    CHECK(slurp(p1) != slurp(p3));
}

TEST_CASE("generated records link into complete analysis families") {
    DgpConfig c = small_config();
    RuleBundle b = make_demo_rules(c);
    auto records = generate_synthetic_population(c, b, 21);

    auto reread = [&] {
        TempDir dir;
        const std::string p = dir.file("pop.csv");
        write_population(p, records);
        return read_population(p);
    }();
    CHECK(reread.size() == records.size());

    auto linked = build_nuclear_families(records);
    CHECK(linked.families.size() == 3u * 2u * 40u);
    CHECK(linked.ledger.empty());
    CHECK(linked.family_person_count() == static_cast<int>(records.size()));

    int married = 0;
    for (const auto& f : linked.families) {
        CHECK(f.mother.sex == Sex::female);
        CHECK(f.mother.weeks_worked == 0);
        CHECK(f.mother.age >= 20);
        CHECK(f.mother.age <= 64);
        CHECK(!f.children.empty());
        for (const auto& kid : f.children) {
            CHECK(kid.age <= 17);
            CHECK(kid.birth_month.has_value());
        }
        if (f.spouse) {
            ++married;
            CHECK(f.spouse->sex == Sex::male);
            CHECK(f.marital_status == MaritalStatus::married);
        }
    }
    CHECK(married > 30);
    CHECK(married < 210);
}

TEST_CASE("planted effect shifts hours by the eligible child total") {
    DgpConfig c0 = small_config();
    c0.families_per_cell = 60;
    RuleBundle b = make_demo_rules(c0);
    DgpConfig c1 = c0;
    c1.effect_hours_per_eligible_child = 10.0;

    auto base = generate_synthetic_population(c0, b, 33);
    auto shifted = generate_synthetic_population(c1, b, 33);
    REQUIRE(base.size() == shifted.size());

    auto linked = build_nuclear_families(base);
    std::map<std::string, double> simt;
    for (const auto& fam : linked.families) {
        double total = 0.0;
        const FamilyView fv = family_view(fam);
        for (const auto& kid : fam.children)
            total += annualize_eligibility(child_view(kid), fv, b.rules, b.guidelines)
                         .annual_fraction;
        simt[fam.mother.person_id] = total;
    }

    int checked = 0, moved = 0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (base[i].relationship != Relationship::head &&
            base[i].relationship != Relationship::spouse)
            continue;
        if (base[i].sex != Sex::female) {
            CHECK(base[i].usual_hours == shifted[i].usual_hours);
            continue;
        }
        REQUIRE(shifted[i].person_id == base[i].person_id);
        const auto it = simt.find(base[i].person_id);
        REQUIRE(it != simt.end());
        if (base[i].usual_hours > 0.0 && shifted[i].usual_hours > 0.0) {
            CHECK(shifted[i].usual_hours - base[i].usual_hours ==
                  Catch::Approx(10.0 * it->second).margin(1e-9));
            ++checked;
            if (it->second > 0.0) ++moved;
        }
    }
    CHECK(checked > 100);
    CHECK(moved > 30);
}

TEST_CASE("degenerate noise settings reproduce the baseline exactly") {
    DgpConfig c = small_config();
    c.p_mother_works = 1.0;
    c.noise_sd = 0.0;
    c.effect_hours_per_eligible_child = 0.0;
    c.baseline_hours = 17.25;
    RuleBundle b = make_demo_rules(c);

    auto records = generate_synthetic_population(c, b, 3);
    int mothers = 0;
    for (const auto& p : records)
        if (p.relationship == Relationship::head && p.sex == Sex::female) {
            CHECK(p.usual_hours == 17.25);
            CHECK(p.labor_force);
            ++mothers;
        }
    CHECK(mothers == 3 * 2 * 40);
}

TEST_CASE("imputation marks land only on mothers at the configured rate") {
    DgpConfig c = small_config();
    c.families_per_cell = 150;
    c.p_imputed_outcome = 0.3;
    RuleBundle b = make_demo_rules(c);

    auto records = generate_synthetic_population(c, b, 5);
    int mothers = 0, imputed = 0;
    for (const auto& p : records) {
        if (p.relationship == Relationship::head && p.sex == Sex::female) {
            ++mothers;
            if (p.imputed_hours) ++imputed;
        } else {
            CHECK_FALSE(p.imputed_hours);
        }
    }
    REQUIRE(mothers == 3 * 2 * 150);
    const double share = static_cast<double>(imputed) / mothers;
    CHECK(share > 0.2);
    CHECK(share < 0.4);
}
