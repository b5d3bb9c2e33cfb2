#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "olfsim/door.hpp"
#include "olfsim/error.hpp"
#include "support.hpp"

using namespace olfsim;
using door::ResponseMatrix;

namespace {

const char* kSmall =
    "\"\",\"Or1a\",\"ab1A\",\"Or2a\"\n"
    "\"ODOR-A\",0.5,NA,0.25\n"
    "\"SFR\",0.05,0.1,0\n"
    "\"ODOR-B\",NA,1,0.75\n";

}  // namespace

TEST_CASE("parse: header, NA cells and the SFR row") {
  auto m = door::parse_response_matrix(kSmall);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 3);
  CHECK(m.or_ids() == std::vector<std::string>{"Or1a", "ab1A", "Or2a"});
  CHECK(m.odor_ids() == std::vector<std::string>{"ODOR-A", "SFR", "ODOR-B"});
  REQUIRE(m.sfr_row_index().has_value());
  CHECK(*m.sfr_row_index() == 1);
  CHECK(m.odor_count() == 2);
  CHECK(m.at(0, 0) == 0.5);
  CHECK(m.is_missing(0, 1));
  CHECK(m.is_missing(2, 0));
  CHECK(m.missing_count() == 2);
  CHECK(m.at(2, 2) == 0.75);
}

TEST_CASE("parse: unquoted cells and CRLF line endings") {
  auto m = door::parse_response_matrix(",Or1a,Or2a\r\nX,0.1,0.2\r\nY,0.3,NA\r\n");
  CHECK(m.rows() == 2);
  CHECK(m.at(1, 0) == doctest::Approx(0.3));
  CHECK(m.is_missing(1, 1));
  CHECK_FALSE(m.sfr_row_index().has_value());
}

TEST_CASE("parse: short row is a parse error with its line number") {
  try {
    door::parse_response_matrix(",Or1a,Or2a\nX,0.1,0.2\nY,0.3\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("parse: out-of-range value names the cell") {
  try {
    door::parse_response_matrix(",Or1a,Or2a\nX,0.1,1.5\n");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("X") != std::string::npos);
    CHECK(msg.find("Or2a") != std::string::npos);
  }
  CHECK_THROWS_AS(door::parse_response_matrix(",Or1a\nX,abc\n"), ValidationError);
  CHECK_THROWS_AS(door::parse_response_matrix(",Or1a\nX,-0.1\n"), ValidationError);
}

TEST_CASE("parse: duplicate ids and empty input are rejected") {
  CHECK_THROWS_AS(door::parse_response_matrix(",Or1a,Or1a\nX,0.1,0.2\n"), ValidationError);
  CHECK_THROWS_AS(door::parse_response_matrix(",Or1a\nX,0.1\nX,0.2\n"), ValidationError);
  CHECK_THROWS_AS(door::parse_response_matrix(""), ValidationError);
}

TEST_CASE("constructor validates shape") {
  CHECK_THROWS_AS(ResponseMatrix({"a"}, {"x", "y"}, {0.1}), ValidationError);
  CHECK_THROWS_AS(ResponseMatrix({"a"}, {"x"}, {0.1}, std::size_t{3}), ValidationError);
  CHECK_NOTHROW(ResponseMatrix({"a"}, {"x"}, {std::nan("")}));
}

TEST_CASE("whitelist filter keeps matrix column order and reports unknown names") {
  auto m = door::parse_response_matrix(kSmall);
  std::vector<std::string> keep{"Or2a", "Or1a"};
  auto f = door::filter_single_or_units(m, keep);
  CHECK(f.or_ids() == std::vector<std::string>{"Or1a", "Or2a"});
  CHECK(f.at(0, 1) == 0.25);
  CHECK(f.sfr_row_index() == m.sfr_row_index());

  std::vector<std::string> bad{"Or1a", "Or99z", "Gr1"};
  try {
    door::filter_single_or_units(m, bad);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("Or99z") != std::string::npos);
    CHECK(msg.find("Gr1") != std::string::npos);
  }
  std::vector<std::string> none;
  CHECK_THROWS_AS(door::filter_single_or_units(m, none), ValidationError);
  std::vector<std::string> dup{"Or1a", "Or1a"};
  CHECK_THROWS_AS(door::filter_single_or_units(m, dup), ValidationError);
}

TEST_CASE("impute replaces only missing cells with zero") {
  auto m = door::parse_response_matrix(kSmall);
  auto f = door::impute_missing(m);
  CHECK(f.missing_count() == 0);
  CHECK(f.at(0, 1) == 0.0);
  CHECK(f.at(2, 0) == 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (!m.is_missing(r, c)) CHECK(f.at(r, c) == m.at(r, c));
}

TEST_CASE("select_odors orders rows as requested and appends SFR last") {
  auto m = door::impute_missing(door::parse_response_matrix(kSmall));
  std::vector<std::string> ids{"ODOR-B", "ODOR-A"};
  auto d = door::select_odors(m, ids, true);
  CHECK(d.odor_ids() == std::vector<std::string>{"ODOR-B", "ODOR-A", "SFR"});
  CHECK(*d.sfr_row_index() == 2);
  CHECK(d.at(2, 0) == 0.05);

  auto z = door::select_odors(m, ids, true, door::SfrSource::Zero);
  for (std::size_t c = 0; c < z.cols(); ++c) CHECK(z.at(2, c) == 0.0);

  auto no = door::select_odors(m, ids, false);
  CHECK(no.rows() == 2);
  CHECK_FALSE(no.sfr_row_index().has_value());

  std::vector<std::string> missing{"ODOR-A", "ODOR-Z"};
  CHECK_THROWS_AS(door::select_odors(m, missing, true), ValidationError);
  std::vector<std::string> dup{"ODOR-A", "ODOR-A"};
  CHECK_THROWS_AS(door::select_odors(m, dup, true), ValidationError);
}

TEST_CASE("SFR falls back to zeros when the matrix has none") {
  auto m = door::parse_response_matrix(",Or1a\nX,0.4\n");
  std::vector<std::string> ids{"X"};
  auto d = door::select_odors(m, ids, true);
  CHECK(d.rows() == 2);
  CHECK(d.at(1, 0) == 0.0);
}

TEST_CASE("whitelist file: comments and blank lines") {
  testing::TempDir dir("door");
  testing::write_file(dir / "w.txt", "# header\nOr1a\n\n  Or2a  # trailing\n");
  auto w = door::load_unit_whitelist(dir / "w.txt");
  CHECK(w == std::vector<std::string>{"Or1a", "Or2a"});
  CHECK_THROWS_AS(door::load_unit_whitelist(dir / "absent.txt"), ValidationError);
}

TEST_CASE("shipped stand-in matrix loads and filters to 52 single-Or units") {
  auto m = door::load_response_matrix(std::string(OLFSIM_DATA_DIR) + "/door_response_matrix_standin.csv");
  CHECK(m.cols() == 78);
  CHECK(m.odor_count() == 692);
  CHECK(m.sfr_row_index().has_value());
  auto w = door::load_unit_whitelist(std::string(OLFSIM_DATA_DIR) + "/single_or_units.txt");
  auto f = door::filter_single_or_units(m, w);
  CHECK(f.cols() == 52);
  // Every kept unit is a single odorant receptor.
  for (const auto& id : f.or_ids()) CHECK(id.rfind("Or", 0) == 0);
}
