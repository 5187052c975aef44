#include <cmath>
#include <sstream>

#include "doctest.h"
#include "qpol/budget.hpp"
#include "qpol/errors.hpp"

using namespace qpol;

namespace {

const char* kTableB1 =
    "# DSR type A row and the type B rows\n"
    "source,value,unit,divisor,distribution,sensitivity,std\n"
    "theta_out (dsr),0.1763,deg,1,N,0.293,0.0517\n"
    "specific rotation,0.41,deg dm^-1 g^-1 ml,1,N,0.05,0.0205\n"
    "cuvette length,0.0005,dm,1.732,R,17.07,0.0049\n"
    "input polarization,0.03,deg,1,N,0.586,0.0176\n";

// Round to 4 significant figures.
double sig4(double x) {
  const double e = std::floor(std::log10(std::abs(x)));
  const double s = std::pow(10.0, 3 - e);
  return std::round(x * s) / s;
}

}  // namespace

TEST_SUITE("budget") {

TEST_CASE("table B1 rows and total") {
  std::istringstream in(kTableB1);
  const auto entries = read_budget_csv(in);
  REQUIRE(entries.size() == 4);
  CHECK(entries[2].distribution == Distribution::Rectangular);
  const auto sum = combine_budget(entries);
  CHECK(sig4(sum.row_std[0]) == doctest::Approx(0.05166));
  CHECK(std::round(sum.row_std[1] * 1e4) / 1e4 == doctest::Approx(0.0205));
  CHECK(std::round(sum.row_std[2] * 1e4) / 1e4 == doctest::Approx(0.0049));
  CHECK(std::round(sum.row_std[3] * 1e4) / 1e4 == doctest::Approx(0.0176));
  CHECK(std::round(sum.total * 1e4) / 1e4 == doctest::Approx(0.0585));
  CHECK(sum.total == doctest::Approx(std::sqrt(0.05166 * 0.05166 + 0.0205 * 0.0205 + 0.004928 * 0.004928 +
                                               0.01758 * 0.01758))
                         .epsilon(1e-3));
}

TEST_CASE("the other type A rows") {
  CHECK(std::round(BudgetEntry{"s", 0.2708, "deg", 1, Distribution::Normal, 0.293}.standard_uncertainty() * 1e4) ==
        793);
  CHECK(std::round(BudgetEntry{"d", 0.1841, "deg", 1, Distribution::Normal, 0.293}.standard_uncertainty() * 1e4) ==
        539);
}

TEST_CASE("rss properties") {
  std::vector<BudgetEntry> one{{"a", 3, "u", 1, Distribution::Normal, 1.0}};
  CHECK(combine_budget(one).total == 3.0);
  std::vector<BudgetEntry> two{{"a", 3, "u", 1, Distribution::Normal, 1.0}, {"b", 4, "u", 1, Distribution::Normal, 1.0}};
  CHECK(combine_budget(two).total == doctest::Approx(5.0));
  CHECK(default_divisor(Distribution::Rectangular) == doctest::Approx(std::sqrt(3.0)));
  CHECK(default_divisor(Distribution::Normal) == 1.0);
}

TEST_CASE("errors") {
  std::vector<BudgetEntry> none;
  CHECK_THROWS_AS(combine_budget(none), DomainError);
  std::vector<BudgetEntry> nosens{{"a", 3, "u", 1, Distribution::Normal, std::nullopt}};
  CHECK_THROWS_AS(combine_budget(nosens), UnitMismatch);

  std::istringstream wrong_std("source,value,unit,divisor,distribution,sensitivity,std\nx,1,deg,1,N,0.5,0.6\n");
  try {
    read_budget_csv(wrong_std);
    FAIL("expected error");
  } catch (const DomainError& ex) {
    CHECK(std::string(ex.what()).find("line 2") != std::string::npos);
  }
  std::istringstream bad_header("source,value,units\n");
  CHECK_THROWS_AS(read_budget_csv(bad_header), DomainError);
  std::istringstream bad_dist("source,value,unit,divisor,distribution,sensitivity\nx,1,deg,1,Q,0.5\n");
  CHECK_THROWS_AS(read_budget_csv(bad_dist), DomainError);
}

TEST_CASE("written tables read back") {
  std::istringstream in(kTableB1);
  const auto entries = read_budget_csv(in);
  const auto sum = combine_budget(entries);
  std::ostringstream out;
  write_budget_csv(out, entries, sum);
  std::istringstream back(out.str());
  const auto again = read_budget_csv(back);
  REQUIRE(again.size() == entries.size());
  const auto sum2 = combine_budget(again);
  CHECK(sum2.total == sum.total);
  CHECK(out.str().find("total,,g/ml") != std::string::npos);
}

}
