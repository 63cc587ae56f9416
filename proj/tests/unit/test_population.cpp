#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "simelig/population.hpp"
#include "support/tempdir.hpp"

using namespace simelig;
using fixtures::TempDir;
using fixtures::write_text;

namespace {

PersonRecord make_person(std::string id, std::string household, Relationship rel,
                         int age, Sex sex, int subfamily = 0) {
    PersonRecord p;
    p.person_id = std::move(id);
    p.household_id = std::move(household);
    p.state_id = "ST_A";
    p.survey_year = 1985;
    p.age = age;
    p.sex = sex;
    p.marital_status = MaritalStatus::single;
    p.relationship = rel;
    p.subfamily_id = subfamily;
    p.race_ethnicity = "grp1";
    p.survey_weight = 1.0;
    return p;
}

} // namespace

TEST_CASE("population csv round trip preserves every field") {
    PersonRecord a = make_person("p1", "h1", Relationship::head, 35, Sex::female);
    a.marital_status = MaritalStatus::married;
    a.prior_marital_status = "widowed";
    a.income_earned = from_dollars(12'345) + Money{67};
    a.income_selfemp = from_dollars(500);
    a.income_other = Money{25};
    a.income_public_assistance = from_dollars(1'200);
    a.weeks_worked = 48;
    a.usual_hours = 37.5;
    a.hours_last_week = 40.25;
    a.labor_force = true;
    a.max_monthly_hours = 160.0;
    a.imputed_hours = true;
    a.survey_weight = 1543.75;
    a.birth_month = 9;

    PersonRecord b = make_person("p2", "h1", Relationship::child, 4, Sex::male);
    b.imputed_earnings = true;

    TempDir dir;
    const std::string path = dir.file("pop.csv");
    write_population(path, {a, b});
    auto got = read_population(path);

    REQUIRE(got.size() == 2);
    CHECK(got[0].person_id == "p1");
    CHECK(got[0].prior_marital_status == "widowed");
    CHECK(got[0].marital_status == MaritalStatus::married);
    CHECK(got[0].income_earned == a.income_earned);
    CHECK(got[0].income_selfemp == a.income_selfemp);
    CHECK(got[0].income_other == a.income_other);
    CHECK(got[0].income_public_assistance == a.income_public_assistance);
    CHECK(got[0].weeks_worked == 48);
    CHECK(got[0].usual_hours == 37.5);
    CHECK(got[0].hours_last_week == 40.25);
    CHECK(got[0].labor_force);
    CHECK(got[0].max_monthly_hours == 160.0);
    CHECK(got[0].imputed_hours);
    CHECK_FALSE(got[0].imputed_weeks);
    CHECK(got[0].survey_weight == 1543.75);
    CHECK(got[0].birth_month == 9);
    CHECK(got[1].relationship == Relationship::child);
    CHECK_FALSE(got[1].birth_month.has_value());
    CHECK(got[1].imputed_earnings);

    const std::string path2 = dir.file("pop2.csv");
    write_population(path2, got);
    std::ifstream f1(path), f2(path2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
}

TEST_CASE("population reader reports invalid rows with file position") {
    TempDir dir;
    const std::string path = dir.file("bad.csv");
    PersonRecord a = make_person("p1", "h1", Relationship::head, 35, Sex::female);
    write_population(path, {a});

    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    const auto pos = text.find(",35,");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 4, ",130,");
    write_text(path, text);

    try {
        read_population(path);
        FAIL("expected a failure for age 130");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("age out of range") != std::string::npos);
        CHECK(msg.find(":3:") != std::string::npos);
    }
}

TEST_CASE("person validation rejects out-of-range fields") {
    PersonRecord p = make_person("p1", "h1", Relationship::head, 30, Sex::female);
    CHECK_NOTHROW(validate_person(p));

    PersonRecord bad = p;
    bad.survey_weight = -1.0;
    CHECK_THROWS_AS(validate_person(bad), ValidationError);
    bad = p;
    bad.weeks_worked = 53;
    CHECK_THROWS_AS(validate_person(bad), ValidationError);
    bad = p;
    bad.birth_month = 13;
    CHECK_THROWS_AS(validate_person(bad), ValidationError);
    bad = p;
    bad.usual_hours = -4.0;
    CHECK_THROWS_AS(validate_person(bad), ValidationError);
    bad = p;
    bad.age = 121;
    CHECK_THROWS_WITH(validate_person(bad), Catch::Matchers::ContainsSubstring("p1"));
}

TEST_CASE("single mother and child form one family") {
    PersonRecord mom = make_person("m1", "h1", Relationship::head, 35, Sex::female);
    mom.income_earned = from_dollars(9'000);
    mom.income_other = from_dollars(400);
    mom.income_public_assistance = from_dollars(2'000);
    PersonRecord kid = make_person("c1", "h1", Relationship::child, 4, Sex::male);
    kid.income_other = from_dollars(50);

    auto res = build_nuclear_families({mom, kid});
    REQUIRE(res.families.size() == 1);
    CHECK(res.ledger.empty());
    const auto& f = res.families[0];
    CHECK(f.family_id == "h1-0");
    CHECK(f.family_size == 2);
    CHECK(f.marital_status == MaritalStatus::single);
    CHECK(f.mother.person_id == "m1");
    CHECK_FALSE(f.spouse.has_value());
    REQUIRE(f.children.size() == 1);
    CHECK(f.children[0].person_id == "c1");
    CHECK(f.family_income_ex_welfare == from_dollars(9'400));
}

TEST_CASE("subfamily pointers split a shared household into two families") {
    PersonRecord dad = make_person("d", "h2", Relationship::head, 45, Sex::male);
    dad.income_earned = from_dollars(20'000);
    PersonRecord mom = make_person("m", "h2", Relationship::spouse, 43, Sex::female);
    mom.income_earned = from_dollars(8'000);
    PersonRecord teen = make_person("t", "h2", Relationship::child, 15, Sex::male);
    PersonRecord daughter =
        make_person("dd", "h2", Relationship::head, 22, Sex::female, 1);
    daughter.income_earned = from_dollars(5'000);
    PersonRecord infant = make_person("i", "h2", Relationship::child, 0, Sex::female, 1);

    auto res = build_nuclear_families({dad, mom, teen, daughter, infant});
    REQUIRE(res.families.size() == 2);
    CHECK(res.ledger.empty());
    CHECK(res.family_person_count() == 5);

    const auto& primary = res.families[0];
    CHECK(primary.family_id == "h2-0");
    CHECK(primary.family_size == 3);
    CHECK(primary.marital_status == MaritalStatus::married);
    CHECK(primary.mother.person_id == "m");
    REQUIRE(primary.spouse.has_value());
    CHECK(primary.spouse->person_id == "d");
    REQUIRE(primary.children.size() == 1);
    CHECK(primary.children[0].person_id == "t");
    CHECK(primary.family_income_ex_welfare == from_dollars(28'000));

    const auto& sub = res.families[1];
    CHECK(sub.family_id == "h2-1");
    CHECK(sub.family_size == 2);
    CHECK(sub.marital_status == MaritalStatus::single);
    CHECK(sub.mother.person_id == "dd");
    REQUIRE(sub.children.size() == 1);
    CHECK(sub.children[0].person_id == "i");
    CHECK(sub.family_income_ex_welfare == from_dollars(5'000));
}

TEST_CASE("childless couple yields no family and one ledger entry") {
    PersonRecord h = make_person("h", "h3", Relationship::head, 40, Sex::male);
    PersonRecord s = make_person("s", "h3", Relationship::spouse, 39, Sex::female);

    auto res = build_nuclear_families({h, s});
    CHECK(res.families.empty());
    REQUIRE(res.ledger.size() == 1);
    CHECK(res.ledger[0].reason == "childless");
    CHECK(res.ledger[0].person_count == 2);
    CHECK(res.ledger[0].household_id == "h3");
    CHECK(res.ledger[0].person_ids == "h;s");
}

TEST_CASE("lone child with no linkable parent goes to the ledger") {
    PersonRecord kid = make_person("k", "h4", Relationship::child, 6, Sex::male);
    auto res = build_nuclear_families({kid});
    CHECK(res.families.empty());
    REQUIRE(res.ledger.size() == 1);
    CHECK(res.ledger[0].reason == "orphan_child");
    CHECK(res.ledger[0].person_count == 1);
}

TEST_CASE("child in a parentless subfamily joins the primary couple") {
    PersonRecord dad = make_person("d", "h5", Relationship::head, 40, Sex::male);
    PersonRecord mom = make_person("m", "h5", Relationship::spouse, 38, Sex::female);
    PersonRecord own = make_person("k0", "h5", Relationship::child, 8, Sex::female);
    PersonRecord stray = make_person("k2", "h5", Relationship::child, 3, Sex::male, 2);

    auto res = build_nuclear_families({dad, mom, own, stray});
    REQUIRE(res.families.size() == 1);
    CHECK(res.ledger.empty());
    CHECK(res.families[0].family_size == 4);
    std::vector<std::string> ids;
    for (const auto& c : res.families[0].children) ids.push_back(c.person_id);
    std::sort(ids.begin(), ids.end());
    CHECK(ids == std::vector<std::string>{"k0", "k2"});
}

TEST_CASE("grown child records are ledgered individually") {
    PersonRecord mom = make_person("m", "h6", Relationship::head, 55, Sex::female);
    PersonRecord adult = make_person("a", "h6", Relationship::child, 25, Sex::male);
    PersonRecord teen = make_person("t", "h6", Relationship::child, 17, Sex::female);

    auto res = build_nuclear_families({mom, adult, teen});
    REQUIRE(res.families.size() == 1);
    CHECK(res.families[0].family_size == 2);
    REQUIRE(res.ledger.size() == 1);
    CHECK(res.ledger[0].reason == "adult_child");
    CHECK(res.ledger[0].person_ids == "a");
    CHECK(res.family_person_count() + res.ledger_person_count() == 3);
}

TEST_CASE("units without a mother or outside the age gate are ledgered") {
    PersonRecord dad = make_person("d", "h7", Relationship::head, 40, Sex::male);
    PersonRecord kid = make_person("k", "h7", Relationship::child, 5, Sex::male);
    auto res = build_nuclear_families({dad, kid});
    CHECK(res.families.empty());
    REQUIRE(res.ledger.size() == 1);
    CHECK(res.ledger[0].reason == "no_mother");
    CHECK(res.ledger[0].person_count == 2);

    PersonRecord young = make_person("y", "h8", Relationship::head, 19, Sex::female);
    PersonRecord kid2 = make_person("k2", "h8", Relationship::child, 2, Sex::female);
    auto res2 = build_nuclear_families({young, kid2});
    CHECK(res2.families.empty());
    REQUIRE(res2.ledger.size() == 1);
    CHECK(res2.ledger[0].reason == "mother_age");

    PersonRecord old = make_person("o", "h9", Relationship::head, 65, Sex::female);
    PersonRecord kid3 = make_person("k3", "h9", Relationship::child, 10, Sex::male);
    auto res3 = build_nuclear_families({old, kid3});
    CHECK(res3.families.empty());
    REQUIRE(res3.ledger.size() == 1);
    CHECK(res3.ledger[0].reason == "mother_age");

    PersonRecord edge = make_person("e", "h10", Relationship::head, 20, Sex::female);
    PersonRecord kid4 = make_person("k4", "h10", Relationship::child, 1, Sex::male);
    auto res4 = build_nuclear_families({edge, kid4});
    CHECK(res4.families.size() == 1);
}

TEST_CASE("conflicting relationship codes are fatal and name the household") {
    PersonRecord h1 = make_person("a", "h11", Relationship::head, 40, Sex::male);
    PersonRecord h2 = make_person("b", "h11", Relationship::head, 41, Sex::female);
    CHECK_THROWS_WITH(build_nuclear_families({h1, h2}),
                      Catch::Matchers::ContainsSubstring("h11"));

    PersonRecord s1 = make_person("c", "h12", Relationship::spouse, 40, Sex::male);
    PersonRecord s2 = make_person("d", "h12", Relationship::spouse, 41, Sex::female);
    PersonRecord hd = make_person("e", "h12", Relationship::head, 42, Sex::female);
    CHECK_THROWS_AS(build_nuclear_families({hd, s1, s2}), ValidationError);
}

TEST_CASE("every input person lands in a family or the ledger") {
    Rng rng(derive_seed(99, "linkage-conservation"));
    std::vector<PersonRecord> records;
    int next_id = 0;
    for (int hh = 0; hh < 300; ++hh) {
        const std::string hid = "hh" + std::to_string(hh);
        const int shape = static_cast<int>(rng.uniform_int(0, 7));
        auto add = [&](Relationship rel, int age, Sex sex, int sub) {
            records.push_back(make_person("p" + std::to_string(next_id++), hid, rel,
                                          age, sex, sub));
        };
        const int mother_age = static_cast<int>(rng.uniform_int(16, 70));
        switch (shape) {
            case 0:
                add(Relationship::head, mother_age, Sex::female, 0);
                break;
            case 1:
                add(Relationship::head, mother_age, Sex::female, 0);
                add(Relationship::child, static_cast<int>(rng.uniform_int(0, 18)),
                    Sex::male, 0);
                break;
            case 2:
                add(Relationship::head, 40, Sex::male, 0);
                add(Relationship::spouse, mother_age, Sex::female, 0);
                add(Relationship::child, static_cast<int>(rng.uniform_int(0, 25)),
                    Sex::female, 0);
                break;
            case 3:
                add(Relationship::head, 40, Sex::male, 0);
                add(Relationship::spouse, 38, Sex::female, 0);
                break;
            case 4:
                add(Relationship::head, 45, Sex::male, 0);
                add(Relationship::spouse, 44, Sex::female, 0);
                add(Relationship::child, 12, Sex::male, 0);
                add(Relationship::head, 22, Sex::female, 1);
                add(Relationship::child, 1, Sex::female, 1);
                break;
            case 5:
                add(Relationship::child, 9, Sex::male, 0);
                break;
            case 6:
                add(Relationship::head, mother_age, Sex::female, 0);
                add(Relationship::child, 4, Sex::male, 2);
                break;
            default:
                add(Relationship::head, 50, Sex::male, 0);
                add(Relationship::child, 30, Sex::female, 0);
                break;
        }
    }
    auto res = build_nuclear_families(records);
    CHECK(res.family_person_count() + res.ledger_person_count() ==
          static_cast<int>(records.size()));
    CHECK(res.families.size() > 20);
    CHECK(!res.ledger.empty());
}

TEST_CASE("drop ledger serializes with its column set") {
    TempDir dir;
    const std::string path = dir.file("ledger.csv");
    DropEntry e;
    e.household_id = "h1";
    e.subfamily_id = 1;
    e.reason = "childless";
    e.person_count = 2;
    e.person_ids = "a;b";
    write_drop_ledger(path, {e});

    CsvReader reader(path, kLedgerVersionLine);
    CHECK(reader.columns() == std::vector<std::string>{"household_id", "subfamily_id",
                                                       "reason", "person_count",
                                                       "person_ids"});
    std::vector<std::string> row;
    REQUIRE(reader.next(row));
    CHECK(row[2] == "childless");
    CHECK(row[3] == "2");
    CHECK_FALSE(reader.next(row));
}

TEST_CASE("birth month assignment is deterministic and order independent") {
    std::vector<PersonRecord> records;
    for (int i = 0; i < 50; ++i)
        records.push_back(make_person("p" + std::to_string(i), "h", Relationship::child,
                                      5, Sex::male));

    auto a = assign_birth_months(records, 42);
    auto b = assign_birth_months(records, 42);
    CHECK(a.month == b.month);

    std::reverse(records.begin(), records.end());
    auto c = assign_birth_months(records, 42);
    CHECK(a.month == c.month);

    auto d = assign_birth_months(records, 43);
    CHECK(a.month != d.month);

    auto empty = assign_birth_months({}, 42);
    CHECK(empty.month.empty());
}

TEST_CASE("birth months spread nearly uniformly over a large population") {
    std::vector<PersonRecord> records;
    records.reserve(120'000);
    for (int i = 0; i < 120'000; ++i)
        records.push_back(make_person("person-" + std::to_string(i), "h",
                                      Relationship::child, 5, Sex::male));
    auto a = assign_birth_months(records, 7);

    std::array<int, 13> counts{};
    for (const auto& [id, m] : a.month) {
        REQUIRE(m >= 1);
        REQUIRE(m <= 12);
        ++counts[m];
    }
    for (int m = 1; m <= 12; ++m) {
        const double share = counts[m] / 120'000.0;
        CHECK(std::abs(share - 1.0 / 12.0) < 0.012);
    }
}

TEST_CASE("fill_birth_months only touches unassigned records") {
    std::vector<PersonRecord> records;
    for (int i = 0; i < 20; ++i)
        records.push_back(make_person("p" + std::to_string(i), "h", Relationship::child,
                                      5, Sex::male));
    records[3].birth_month = 12;
    auto expected = assign_birth_months(records, 11);

    fill_birth_months(records, 11);
    for (std::size_t i = 0; i < records.size(); ++i) {
        REQUIRE(records[i].birth_month.has_value());
        if (i == 3)
            CHECK(records[i].birth_month == 12);
        else
            CHECK(records[i].birth_month == expected.month[records[i].person_id]);
    }
}

TEST_CASE("family view maps linked families onto rule inputs") {
    PersonRecord dad = make_person("d", "h1", Relationship::head, 40, Sex::male);
    dad.income_earned = from_dollars(14'000);
    dad.income_selfemp = from_dollars(1'000);
    dad.income_other = from_dollars(500);
    dad.income_public_assistance = from_dollars(800);
    dad.max_monthly_hours = 120.0;
    dad.weeks_worked = 50;
    dad.usual_hours = 44.0;
    PersonRecord mom = make_person("m", "h1", Relationship::spouse, 38, Sex::female);
    mom.income_earned = from_dollars(6'000);
    mom.income_other = from_dollars(200);
    mom.max_monthly_hours = 80.0;
    mom.weeks_worked = 30;
    mom.usual_hours = 20.0;
    PersonRecord kid = make_person("k", "h1", Relationship::child, 4, Sex::female);
    kid.income_earned = from_dollars(9'999);

    auto res = build_nuclear_families({dad, mom, kid});
    REQUIRE(res.families.size() == 1);
    FamilyView v = family_view(res.families[0]);

    CHECK(v.state == "ST_A");
    CHECK(v.year == 1985);
    CHECK(v.marital == MaritalStatus::married);
    CHECK(v.family_size == 3);
    CHECK(v.annual_income_ex_welfare == from_dollars(21'700));
    CHECK(v.annual_earned_income == from_dollars(21'000));
    CHECK(v.n_workers == 2);
    CHECK(v.months_worked == 1);
    CHECK(v.primary_earner_monthly_hours == 120.0);
    CHECK(v.max_parent_annual_hours == 2200.0);

    FamilyView shifted = family_view(res.families[0], true);
    CHECK(shifted.year == 1984);
    CHECK(shifted.annual_income_ex_welfare == v.annual_income_ex_welfare);
}

TEST_CASE("family view ties break toward the mother as primary earner") {
    PersonRecord dad = make_person("d", "h1", Relationship::head, 40, Sex::male);
    dad.income_earned = from_dollars(10'000);
    dad.max_monthly_hours = 150.0;
    PersonRecord mom = make_person("m", "h1", Relationship::spouse, 38, Sex::female);
    mom.income_earned = from_dollars(10'000);
    mom.max_monthly_hours = 60.0;
    PersonRecord kid = make_person("k", "h1", Relationship::child, 2, Sex::male);

    auto res = build_nuclear_families({dad, mom, kid});
    REQUIRE(res.families.size() == 1);
    FamilyView v = family_view(res.families[0]);
    CHECK(v.primary_earner_monthly_hours == 60.0);
}

TEST_CASE("child view needs an assigned birth month") {
    PersonRecord kid = make_person("k7", "h1", Relationship::child, 4, Sex::male);
    CHECK_THROWS_WITH(child_view(kid), Catch::Matchers::ContainsSubstring("k7"));

    kid.birth_month = 7;
    ChildView c = child_view(kid);
    CHECK(c.birth_month == 7);
    CHECK(age_in_month(c, 1985, 3) == 4);
    CHECK(age_in_month(c, 1985, 7) == 5);
}

TEST_CASE("reweighting leaves untouched samples alone") {
    std::vector<PersonRecord> records;
    for (int i = 0; i < 10; ++i) {
        auto p = make_person("p" + std::to_string(i), "h", Relationship::head, 30,
                             Sex::female);
        p.survey_weight = 10.0 + i;
        records.push_back(p);
    }
    auto res = inverse_probability_reweight(records,
                                            [](const PersonRecord&) { return false; });
    CHECK(res.dropped_count == 0);
    CHECK(res.flagged_cells.empty());
    for (std::size_t i = 0; i < records.size(); ++i)
        CHECK(res.weights[i] == records[i].survey_weight);
}

TEST_CASE("reweighting preserves cell weight totals") {
    std::vector<PersonRecord> records;
    auto cell_person = [&](std::string id, const std::string& state, int year,
                           MaritalStatus ms, double w, bool imputed) {
        auto p = make_person(std::move(id), "h", Relationship::head, 30, Sex::female);
        p.state_id = state;
        p.survey_year = year;
        p.marital_status = ms;
        p.survey_weight = w;
        p.imputed_hours = imputed;
        records.push_back(p);
    };
    // Half the weight imputed: survivors double.
    cell_person("a1", "ST_A", 1985, MaritalStatus::single, 2.0, false);
    cell_person("a2", "ST_A", 1985, MaritalStatus::single, 2.0, true);
    // Uneven split in a second cell.
    cell_person("b1", "ST_B", 1985, MaritalStatus::single, 3.0, false);
    cell_person("b2", "ST_B", 1985, MaritalStatus::single, 1.0, true);
    // Untouched cell sharing the state but differing in marital status.
    cell_person("c1", "ST_A", 1985, MaritalStatus::married, 5.0, false);

    auto res = inverse_probability_reweight(
        records, [](const PersonRecord& p) { return p.imputed_hours; });

    CHECK(res.dropped_count == 2);
    CHECK(res.flagged_cells.empty());
    CHECK(res.weights[0] == Catch::Approx(4.0).epsilon(1e-9));
    CHECK(res.weights[1] == 0.0);
    CHECK(res.weights[2] == Catch::Approx(4.0).epsilon(1e-9));
    CHECK(res.weights[3] == 0.0);
    CHECK(res.weights[4] == 5.0);

    const double cell_a = res.weights[0] + res.weights[1];
    CHECK(cell_a == Catch::Approx(4.0).epsilon(1e-9));
    const double cell_b = res.weights[2] + res.weights[3];
    CHECK(cell_b == Catch::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("fully imputed cells are flagged and left alone") {
    std::vector<PersonRecord> records;
    auto p1 = make_person("p1", "h", Relationship::head, 30, Sex::female);
    p1.survey_weight = 2.5;
    p1.imputed_hours = true;
    auto p2 = make_person("p2", "h", Relationship::head, 31, Sex::female);
    p2.survey_weight = 1.5;
    p2.imputed_hours = true;
    records = {p1, p2};

    auto res = inverse_probability_reweight(
        records, [](const PersonRecord& p) { return p.imputed_hours; });

    REQUIRE(res.flagged_cells.size() == 1);
    CHECK(res.flagged_cells[0] == "ST_A/1985/single");
    CHECK(res.dropped_count == 0);
    CHECK(res.weights[0] == 2.5);
    CHECK(res.weights[1] == 1.5);
}
