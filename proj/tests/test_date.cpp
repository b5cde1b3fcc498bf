#include <catch_amalgamated.hpp>

#include "shoulder/date.hpp"

using shoulder::Date;
using shoulder::Timestamp;

TEST_CASE("date parsing and day of year", "[date]") {
  const Date d = Date::parse("2020-03-01");
  CHECK(d.year() == 2020);
  CHECK(d.month() == 3);
  CHECK(d.day() == 1);
  CHECK(d.day_of_year() == 61);  // leap year
  CHECK(Date::parse("2021-03-01").day_of_year() == 60);
  CHECK(Date(2022, 12, 31).day_of_year() == 365);
  CHECK(d.iso() == "2020-03-01");
  CHECK((Date(2022, 1, 1) - Date(2021, 1, 1)) == 365);
  CHECK(shoulder::date_from_day_of_year(2022, 45) == Date(2022, 2, 14));

  CHECK_THROWS(Date::parse("2021-02-29"));
  CHECK_THROWS(Date::parse("2021-2-9"));
  CHECK_THROWS(Date::parse("20x1-02-09"));
}

TEST_CASE("timestamp parsing", "[date]") {
  const auto t = Timestamp::parse("2022-01-05T13:45");
  CHECK(t.date == Date(2022, 1, 5));
  CHECK(t.minute_of_day == 13 * 60 + 45);
  CHECK(Timestamp::parse("2022-01-05 13:45:00") == t);
  CHECK(t.iso() == "2022-01-05T13:45");
  CHECK_THROWS(Timestamp::parse("2022-01-05T24:00"));
  CHECK_THROWS(Timestamp::parse("2022-01-05T10:00:30"));
}
