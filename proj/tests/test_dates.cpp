#include <doctest.h>

#include "portopt/dates.hpp"
#include "portopt/errors.hpp"

using namespace portopt;

TEST_CASE("date parse/format round-trip and ordering") {
    const Date d = Date::parse("2024-03-29");
    CHECK(d.to_string() == "2024-03-29");
    CHECK(Date::parse("1970-01-01").days == 0);
    CHECK(Date::parse("1970-01-02").days == 1);
    CHECK(Date::parse("2024-02-29").to_string() == "2024-02-29");  // leap day
    CHECK(Date::parse("2018-01-05") < Date::parse("2018-01-12"));
    CHECK((Date::parse("2018-01-12") - Date::parse("2018-01-05")) == 7);
}

TEST_CASE("weekday indexing from Monday") {
    CHECK(Date::parse("1970-01-01").weekday() == kThursday);
    CHECK(Date::parse("2024-03-29").weekday() == kFriday);
    CHECK(Date::parse("2024-03-31").weekday() == kSunday);
    CHECK(Date::parse("2024-04-01").weekday() == kMonday);
    CHECK(parse_weekday("Friday") == kFriday);
    CHECK(parse_weekday("monday") == kMonday);
    CHECK_THROWS_AS(parse_weekday("someday"), InputError);
}

TEST_CASE("malformed dates are rejected") {
    CHECK_THROWS_AS(Date::parse("2024/03/29"), InputError);
    CHECK_THROWS_AS(Date::parse("2024-13-01"), InputError);
    CHECK_THROWS_AS(Date::parse("2024-02-30"), InputError);
    CHECK_THROWS_AS(Date::parse("24-02-01"), InputError);
}
