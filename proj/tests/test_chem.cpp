#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "hea/chem.hpp"

using namespace hea;

TEST_CASE("parsing the documented forms") {
    Composition c = parse_composition("Co1.2 Fe0.8 Ni1");
    REQUIRE(c.entries.size() == 3);
    CHECK(c.entries[0] == CompositionEntry{"Co", 1.2});
    CHECK(c.entries[1] == CompositionEntry{"Fe", 0.8});
    CHECK(c.entries[2] == CompositionEntry{"Ni", 1.0});

    Composition fe = parse_composition("Fe");
    REQUIRE(fe.entries.size() == 1);
    CHECK(fe.entries[0] == CompositionEntry{"Fe", 1.0});

    // Uppercase letter starts a new symbol, no whitespace needed.
    Composition al = parse_composition("Al0.5CoCrFeNi");
    REQUIRE(al.entries.size() == 5);
    CHECK(al.entries[0] == CompositionEntry{"Al", 0.5});
    CHECK(al.entries[1] == CompositionEntry{"Co", 1.0});
    CHECK(al.entries[2] == CompositionEntry{"Cr", 1.0});
    CHECK(al.entries[3] == CompositionEntry{"Fe", 1.0});
    CHECK(al.entries[4] == CompositionEntry{"Ni", 1.0});
}

TEST_CASE("output order is canonical regardless of input order") {
    CHECK(parse_composition("Ni1 Co1.2 Fe0.8") ==
          parse_composition("Co1.2 Fe0.8 Ni1"));
    CHECK(parse_composition("  Co1.2   Fe0.8\tNi1 ") ==
          parse_composition("Co1.2Fe0.8Ni1"));
}

TEST_CASE("parser error cases") {
    CHECK_THROWS_AS(parse_composition(""), ChemError);
    CHECK_THROWS_AS(parse_composition("   "), ChemError);
    CHECK_THROWS_AS(parse_composition("Fe1 Fe2"), ChemError);
    CHECK_THROWS_AS(parse_composition("Fe0"), ChemError);
    CHECK_THROWS_AS(parse_composition("Fe."), ChemError);
    CHECK_THROWS_AS(parse_composition("Fe1.2.3"), ChemError);
    CHECK_THROWS_AS(parse_composition("1Fe"), ChemError);
    CHECK_THROWS_AS(parse_composition("fe1"), ChemError);
}

TEST_CASE("canonical_string matches the documented rendering") {
    Composition c{{{"Co", 1.2}, {"Fe", 0.8}, {"Ni", 1.0}}};
    CHECK(canonical_string(c) == "Co1.2 Fe0.8 Ni1");
    CHECK(canonical_string(Composition{{{"Fe", 1.0}}}) == "Fe1");
}

TEST_CASE("format_number") {
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(0.8) == "0.8");
    CHECK(format_number(1.5) == "1.5");
    CHECK(format_number(0.1234) == "0.1234");
    // At most 4 fractional digits.
    CHECK(format_number(0.123456) == "0.1235");
    CHECK(format_number(-0.00001) == "0");
    CHECK(format_number(13.3814) == "13.3814");
}

TEST_CASE("parse/print round trip on random compositions") {
    const char* symbols[] = {"Al", "Co", "Cr", "Cu", "Fe", "Mn", "Mo",
                             "Nb", "Ni", "Sc", "Si", "Sn", "Ti", "V"};
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> n_el(1, 8);
    std::uniform_real_distribution<double> coeff(0.1, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> pick(14);
        for (int j = 0; j < 14; ++j) pick[j] = j;
        std::shuffle(pick.begin(), pick.end(), rng);
        int n = n_el(rng);
        std::vector<CompositionEntry> entries;
        for (int j = 0; j < n; ++j) {
            // Quantized to the 4-decimal grid format_number can render.
            double q = std::round(coeff(rng) * 1e4) / 1e4;
            entries.push_back({symbols[pick[j]], q});
        }
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) {
                      return a.element < b.element;
                  });
        Composition c{entries};
        CHECK(parse_composition(canonical_string(c)) == c);
    }
}

TEST_CASE("atomic fractions") {
    auto x = atomic_fractions(parse_composition("Co1.2 Fe0.8 Ni1"));
    REQUIRE(x.size() == 3);
    CHECK(x[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(0.8 / 3.0).epsilon(1e-12));
    CHECK(x[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    auto eq = atomic_fractions(parse_composition("CoCrFeMnNi"));
    for (double v : eq) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

    auto single = atomic_fractions(parse_composition("Fe2"));
    CHECK(single == std::vector<double>{1.0});

    // Sum to 1 and ratio preservation under scaling.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coeff(0.1, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        Composition c{{{"Co", coeff(rng)}, {"Fe", coeff(rng)},
                       {"Ni", coeff(rng)}}};
        auto xs = atomic_fractions(c);
        double sum = xs[0] + xs[1] + xs[2];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        Composition scaled = c;
        for (auto& e : scaled.entries) e.coefficient *= 3.7;
        auto xs2 = atomic_fractions(scaled);
        for (int j = 0; j < 3; ++j)
            CHECK(xs[j] == doctest::Approx(xs2[j]).epsilon(1e-12));
    }
}

TEST_CASE("element table") {
    ElementTable t = ElementTable::load("data/element_table.csv");
    for (const char* s : {"Ni", "Fe", "Co", "Cr", "Mn", "Al", "Ti", "Cu", "V",
                          "Mo", "Nb", "Zr", "Si", "Sn", "Sc"})
        CHECK(t.contains(s));
    const ElementRecord& fe = t.lookup("Fe");
    CHECK(fe.symbol == "Fe");
    CHECK(fe.vec >= 1.0);
    // Idempotent lookup.
    CHECK(&t.lookup("Fe") == &fe);
    CHECK_THROWS_AS(t.lookup("Xx"), ChemError);
    CHECK_THROWS_WITH_AS(t.lookup("Xx"),
                         doctest::Contains("unknown element 'Xx'"), ChemError);

    // Positivity is enforced on load.
    ElementRecord bad = fe;
    bad.shear_modulus = -1;
    CHECK_THROWS_AS(ElementTable::from_records({bad}, "test"), ChemError);
    ElementRecord low_vec = fe;
    low_vec.vec = 0.5;
    CHECK_THROWS_AS(ElementTable::from_records({low_vec}, "test"), ChemError);
}

TEST_CASE("pair enthalpy table") {
    PairEnthalpyTable p = PairEnthalpyTable::load("data/pair_enthalpy.csv");
    CHECK(p.lookup("Fe", "Ni") == p.lookup("Ni", "Fe"));
    CHECK(p.lookup("Fe", "Fe") == 0.0);
    CHECK_THROWS_WITH_AS(p.lookup("Fe", "Xx"), doctest::Contains("Xx"),
                         ChemError);

    ElementTable t = ElementTable::load("data/element_table.csv");
    auto syms = t.symbols();
    // Complete over the element table.
    for (std::size_t i = 0; i < syms.size(); ++i)
        for (std::size_t j = i + 1; j < syms.size(); ++j)
            CHECK_NOTHROW(p.lookup(syms[i], syms[j]));
}
