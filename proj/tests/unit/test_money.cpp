#include <catch2/catch_amalgamated.hpp>

#include "simelig/money.hpp"

using namespace simelig;

TEST_CASE("money arithmetic stays in integer cents") {
    Money a = from_dollars(10);
    Money b{250};
    CHECK((a + b).cents == 1250);
    CHECK((a - b).cents == 750);
    CHECK((b * 3).cents == 750);
    CHECK((3 * b).cents == 750);
    CHECK(a.dollars() == 10.0);
    CHECK(Money{1} < Money{2});
    CHECK(Money{2} == Money{2});
}

TEST_CASE("money division truncates toward zero") {
    CHECK((Money{100} / 12).cents == 8);
    CHECK((Money{-100} / 12).cents == -8);
    CHECK((Money{1199} / 12).cents == 99);
    CHECK((Money{1200} / 12).cents == 100);
}

TEST_CASE("parse_money is exact") {
    CHECK(parse_money("0", "x").cents == 0);
    CHECK(parse_money("10", "x").cents == 1000);
    CHECK(parse_money("10.01", "x").cents == 1001);
    CHECK(parse_money("0.1", "x").cents == 10);
    CHECK(parse_money("-3.25", "x").cents == -325);
    CHECK(parse_money("12345678.99", "x").cents == 1234567899);
}

TEST_CASE("parse_money rejects malformed input") {
    CHECK_THROWS_AS(parse_money("", "x"), ValidationError);
    CHECK_THROWS_AS(parse_money("1.234", "x"), ValidationError);
    CHECK_THROWS_AS(parse_money("1.2.3", "x"), ValidationError);
    CHECK_THROWS_AS(parse_money("abc", "x"), ValidationError);
    CHECK_THROWS_AS(parse_money("1e5", "x"), ValidationError);
    CHECK_THROWS_AS(parse_money(".", "x"), ValidationError);
}

TEST_CASE("parse_ratio_bp reads four decimal places") {
    CHECK(parse_ratio_bp("1.33", "x") == 13300);
    CHECK(parse_ratio_bp("1", "x") == 10000);
    CHECK(parse_ratio_bp("0.5", "x") == 5000);
    CHECK(parse_ratio_bp("2.0001", "x") == 20001);
    CHECK_THROWS_AS(parse_ratio_bp("1.00001", "x"), ValidationError);
}

TEST_CASE("money formatting round-trips") {
    for (std::int64_t cents : {0LL, 1LL, -1LL, 99LL, 100LL, 101LL, -12345LL,
                               987654321LL}) {
        Money m{cents};
        CHECK(parse_money(money_to_string(m), "x") == m);
    }
    CHECK(money_to_string(Money{1001}) == "10.01");
    CHECK(money_to_string(Money{-5}) == "-0.05");
    CHECK(money_to_string(Money{500}) == "5");
}

TEST_CASE("ratio formatting round-trips") {
    for (std::int64_t bp : {0LL, 1LL, 10000LL, 13300LL, 20001LL}) {
        CHECK(parse_ratio_bp(ratio_bp_to_string(bp), "x") == bp);
    }
    CHECK(ratio_bp_to_string(13300) == "1.33");
    CHECK(ratio_bp_to_string(10000) == "1");
}
