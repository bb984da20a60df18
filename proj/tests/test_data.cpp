#include <sstream>

#include "doctest.h"
#include "rdx/data.hpp"
#include "rdx/errors.hpp"
#include "support.hpp"

using namespace rdx;

TEST_CASE("csv round trip keeps every double bit for bit") {
  const auto table = sim::generate({200, 11});
  std::stringstream buf;
  write_csv(table, buf);
  const auto back = read_csv(buf);
  REQUIRE(back.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(back.y()[i] == table.y()[i]);
    CHECK(back.x()[i] == table.x()[i]);
    CHECK(back.c()[i] == table.c()[i]);
  }
}

TEST_CASE("csv reader") {
  SUBCASE("columns are located by name and comments skipped") {
    std::istringstream in("# comment\nc,x,y,w\n5,6,1.5,a\n\n5,2,-3,b\n");
    const auto t = read_csv(in, {"w"});
    REQUIRE(t.size() == 2);
    CHECK(t.y()[0] == 1.5);
    CHECK(t.x()[1] == 2.0);
    CHECK(t.covariate_key(1) == "b");
    CHECK(t.treated(0) == 1);
    CHECK(t.treated(1) == 0);
  }
  SUBCASE("a d column is ignored; treatment is derived") {
    std::istringstream in("y,x,c,d\n1,1,5,1\n");
    const auto t = read_csv(in);
    CHECK(t.treated(0) == 0);
  }
  SUBCASE("errors name the line") {
    std::istringstream bad("y,x,c\n1,2,3\n1,abc,3\n");
    CHECK_THROWS_WITH_AS(read_csv(bad, {}, "f.csv"), doctest::Contains("f.csv:3"), DataError);
    std::istringstream short_row("y,x,c\n1,2\n");
    CHECK_THROWS_AS(read_csv(short_row), DataError);
    std::istringstream missing("y,x\n1,2\n");
    CHECK_THROWS_WITH_AS(read_csv(missing), doctest::Contains("'c'"), DataError);
    std::istringstream nan("y,x,c\nnan,1,1\n");
    CHECK_THROWS_AS(read_csv(nan), DataError);
    std::istringstream no_cov("y,x,c,w\n1,2,3,\n");
    CHECK_THROWS_AS(read_csv(no_cov, {"w"}), DataError);
  }
  SUBCASE("three cutoffs are a design error") {
    std::istringstream in("y,x,c\n1,1,1\n1,1,2\n1,1,3\n");
    CHECK_THROWS_WITH_AS(read_csv(in), doctest::Contains("design error"), DataError);
  }
}

TEST_CASE("load_csv reports a missing file as a data error") {
  CHECK_THROWS_AS(load_csv("/nonexistent/rdx.csv"), DataError);
}

TEST_CASE("design and target validation") {
  const auto t = sim::generate({400, 3});
  const auto d = DesignSpec::from_table(t);
  CHECK(d.multi());
  CHECK(d.low == 33.0);
  CHECK(d.high == 66.0);
  CHECK_NOTHROW(TargetSpec::point(50).validate(d));
  CHECK_THROWS_AS(TargetSpec::point(33).validate(d), PreconditionError);
  CHECK_THROWS_AS(TargetSpec::point(66).validate(d), PreconditionError);
  CHECK_THROWS_AS(TargetSpec::average(40, 30).validate(d), PreconditionError);

  const ObservationTable single({1, 2, 3}, {1, 2, 3}, {2, 2, 2});
  const auto s = DesignSpec::from_table(single);
  CHECK_FALSE(s.multi());
  CHECK_NOTHROW(TargetSpec::point(3).validate(s));
  CHECK_THROWS_AS(TargetSpec::point(3.5).validate(s), PreconditionError);

  const ObservationTable outside({1, 2}, {1, 2}, {9, 9});
  CHECK_THROWS_AS(DesignSpec::from_table(outside), DataError);
}

TEST_CASE("partition") {
  const auto t = sim::generate({2000, 5});
  const auto p = partition(t, DesignSpec::from_table(t));
  std::size_t total = 0;
  for (const auto& cell : p.cells) {
    total += cell.size();
    for (std::size_t k = 0; k < cell.size(); ++k) {
      const auto row = cell.rows[k];
      CHECK(t.treated(row) == cell.key.treated);
      CHECK(t.c()[row] == cell.cutoff);
    }
  }
  CHECK(total == t.size());
  CHECK(p.cell(kHighUntreated).label == "high:untreated");

  SUBCASE("empty cells are named") {
    const ObservationTable lopsided({1, 2, 3, 4}, {0, 1, 2, 9}, {5, 5, 7, 7});
    try {
      partition(lopsided, DesignSpec::from_table(lopsided));
      FAIL("expected InsufficientDataError");
    } catch (const InsufficientDataError& e) {
      CHECK(e.cell().find("low:treated") != std::string::npos);
    }
  }
  SUBCASE("small cells warn") {
    const ObservationTable tiny({1, 2, 3, 4}, {0, 1, 2, 3}, {2, 2, 2, 2});
    const auto q = partition(tiny, DesignSpec::from_table(tiny));
    CHECK(q.warnings.size() == 2);
  }
}

TEST_CASE("density estimate") {
  const auto t = sim::generate({20000, 9});
  const auto f = estimate_density(t);
  CHECK(trapezoid(f.grid(), f.values()) == doctest::Approx(1.0).epsilon(1e-12));
  // Uniform on [0, 100]: interior density near 0.01.
  CHECK(f(50.0) == doctest::Approx(0.01).epsilon(0.1));
  CHECK(f(-1.0) == 0.0);

  const auto g = f.conditional(40, 60);
  CHECK(trapezoid(g.grid(), g.values()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g(50.0) == doctest::Approx(0.05).epsilon(0.1));

  SUBCASE("row order does not matter") {
    std::vector<double> xs(t.x().begin(), t.x().end());
    const auto a = estimate_density(xs, 128);
    std::reverse(xs.begin(), xs.end());
    const auto b = estimate_density(xs, 128);
    for (std::size_t i = 0; i < a.values().size(); ++i) CHECK(a.values()[i] == b.values()[i]);
  }
  SUBCASE("preconditions") {
    std::vector<double> few(10, 1.0);
    CHECK_THROWS_AS(estimate_density(few), InsufficientDataError);
    std::vector<double> flat(100, 1.0);
    CHECK_THROWS_AS(estimate_density(flat), DataError);
    CHECK_THROWS_AS(estimate_density(t.x(), 10), PreconditionError);
  }
}
