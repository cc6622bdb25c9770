#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "hea/io.hpp"

using namespace hea;

TEST_CASE("parse and serialize") {
    Table t = parse_csv("a,b,c\n1,2,3\n4,5,6\n");
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1] == std::vector<std::string>{"4", "5", "6"});
    CHECK(to_csv(t) == "a,b,c\n1,2,3\n4,5,6\n");

    // Missing trailing newline and empty cells are fine.
    Table t2 = parse_csv("x,y\n,7");
    CHECK(t2.rows[0] == std::vector<std::string>{"", "7"});
}

TEST_CASE("column lookup") {
    Table t = parse_csv("composition,target\nFe1,3\n");
    CHECK(t.column("target") == 1);
    CHECK(t.column("absent") == -1);
    CHECK(t.require_column("composition") == 0);
    CHECK_THROWS_AS(t.require_column("absent"), IoError);
}

TEST_CASE("ragged rows are rejected") {
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), IoError);
    CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), IoError);
}

TEST_CASE("file round trip") {
    Table t;
    t.header = {"composition", "value"};
    t.rows = {{"Fe1 Ni1", "1.25"}, {"Co1", "-3"}};
    const char* path = "build/test_io_roundtrip.csv";
    write_csv(path, t);
    Table back = read_csv(path);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    std::remove(path);
    CHECK_THROWS_AS(read_csv("no/such/file.csv"), IoError);
}

TEST_CASE("split") {
    CHECK(split("a,b,,c", ',') ==
          std::vector<std::string>{"a", "b", "", "c"});
    CHECK(split("", ',') == std::vector<std::string>{""});
}

TEST_CASE("parse_double") {
    CHECK(parse_double("2.5", "ctx") == 2.5);
    CHECK(parse_double("-1e3", "ctx") == -1000.0);
    CHECK_THROWS_WITH_AS(parse_double("abc", "my context"),
                         doctest::Contains("my context"), IoError);
    CHECK_THROWS_AS(parse_double("", "ctx"), IoError);
    CHECK_THROWS_AS(parse_double("1.5x", "ctx"), IoError);
}
