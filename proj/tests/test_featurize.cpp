#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "hea/featurize.hpp"

using namespace hea;

namespace {

// Two synthetic elements with round numbers for hand-checkable fixtures.
ElementTable test_table() {
    ElementRecord a{"Aa", 6, 1.8, 100, 300, 80, 1800, 4.5, 4.0, 7.0};
    ElementRecord b{"Bb", 8, 2.2, 120, 150, 120, 1400, 5.0, 5.0, 8.0};
    return ElementTable::from_records({a, b}, "synthetic");
}

PairEnthalpyTable test_pairs() {
    return PairEnthalpyTable::from_pairs({{"Aa", "Bb", -4.0}}, "synthetic");
}

}  // namespace

TEST_CASE("weighted means") {
    ElementTable t = test_table();

    // Single element: every mean is that element's constant.
    Composition single{{{"Aa", 1.0}}};
    WeightedMeans m1 = weighted_means(single, t);
    CHECK(m1.mean_vec == 6.0);
    CHECK(m1.young_modulus == 300.0);
    CHECK(m1.work_function == 4.5);
    CHECK(m1.shear_modulus == 80.0);
    CHECK(m1.melting_temp == 1800.0);
    CHECK(m1.cohesive_energy == 4.0);
    CHECK(m1.ionization_energy == 7.0);

    // Equimolar pair: arithmetic mean.
    Composition pair{{{"Aa", 1.0}, {"Bb", 1.0}}};
    WeightedMeans m2 = weighted_means(pair, t);
    CHECK(m2.mean_vec == doctest::Approx(7.0).epsilon(1e-12));
    CHECK(m2.young_modulus == doctest::Approx(225.0).epsilon(1e-12));

    // x = (2/3, 1/3) over E = (300, 150) -> 250.
    Composition weighted{{{"Aa", 2.0}, {"Bb", 1.0}}};
    CHECK(weighted_means(weighted, t).young_modulus ==
          doctest::Approx(250.0).epsilon(1e-9));

    // Means stay inside the constituent range.
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> coeff(0.1, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        Composition c{{{"Aa", coeff(rng)}, {"Bb", coeff(rng)}}};
        WeightedMeans m = weighted_means(c, t);
        CHECK(m.mean_vec >= 6.0);
        CHECK(m.mean_vec <= 8.0);
        CHECK(m.shear_modulus >= 80.0);
        CHECK(m.shear_modulus <= 120.0);
    }
}

TEST_CASE("deviation features") {
    ElementTable t = test_table();

    DeviationFeatures zero = deviation_features(Composition{{{"Aa", 2.0}}}, t);
    CHECK(zero.delta_x == 0.0);
    CHECK(zero.delta_r == 0.0);
    CHECK(zero.modulus_mismatch == 0.0);
    CHECK(zero.shear_modulus_diff == 0.0);

    Composition pair{{{"Aa", 1.0}, {"Bb", 1.0}}};
    DeviationFeatures d = deviation_features(pair, t);

    // X = (1.8, 2.2), Xbar = 2.0: sqrt(0.5*0.04 + 0.5*0.04) = 0.2.
    CHECK(d.delta_x == doctest::Approx(0.2).epsilon(1e-9));

    // r = (100, 120), rbar = 110: (10/110)^2 * 100, no outer square root.
    CHECK(d.delta_r == doctest::Approx(100.0 / 121.0).epsilon(1e-9));

    // Independent oracle: direct loop evaluation of the printed formulas.
    double x[2] = {0.5, 0.5};
    double g[2] = {80, 120}, gbar = 100;
    double mm = 0, gd = 0;
    for (int i = 0; i < 2; ++i) {
        double q = 2.0 * (g[i] - gbar) / (g[i] + gbar);
        mm += x[i] * q * q;
        double s = 1.0 - g[i] / gbar;
        gd += x[i] * s * s;
    }
    CHECK(d.modulus_mismatch == doctest::Approx(mm).epsilon(1e-9));
    CHECK(d.shear_modulus_diff == doctest::Approx(gd).epsilon(1e-9));
}

TEST_CASE("pairwise features") {
    ElementTable t = test_table();
    PairEnthalpyTable p = test_pairs();

    PairwiseFeatures zero =
        pairwise_features(Composition{{{"Aa", 1.0}}}, t, p);
    CHECK(zero.mixing_enthalpy == 0.0);
    CHECK(zero.pauling_en_diff == 0.0);

    // Equimolar pair, dH = -4: both ordered pairs counted, 2*(0.25*-4) = -2.
    Composition pair{{{"Aa", 1.0}, {"Bb", 1.0}}};
    PairwiseFeatures f = pairwise_features(pair, t, p);
    CHECK(f.mixing_enthalpy == doctest::Approx(-2.0).epsilon(1e-9));

    // X_p = (1.8, 2.2): 2 * (0.25 * 0.16) = 0.08.
    CHECK(f.pauling_en_diff == doctest::Approx(0.08).epsilon(1e-9));

    // Linearity in the pair table.
    PairEnthalpyTable doubled =
        PairEnthalpyTable::from_pairs({{"Aa", "Bb", -8.0}}, "doubled");
    CHECK(pairwise_features(pair, t, doubled).mixing_enthalpy ==
          doctest::Approx(2.0 * f.mixing_enthalpy).epsilon(1e-12));
}

TEST_CASE("mixing entropy") {
    CHECK(mixing_entropy(Composition{{{"Aa", 3.0}}}) == 0.0);

    // Closed form R ln 5 for an equimolar 5-element alloy.
    Composition five{{{"Co", 1.0},
                      {"Cr", 1.0},
                      {"Fe", 1.0},
                      {"Mn", 1.0},
                      {"Ni", 1.0}}};
    CHECK(mixing_entropy(five) ==
          doctest::Approx(kGasConstant * std::log(5.0)).epsilon(1e-12));
    CHECK(mixing_entropy(five) == doctest::Approx(13.3814).epsilon(1e-4));

    // Hand evaluation at x = (0.75, 0.25).
    double hand = -kGasConstant *
                  (0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    Composition quarter{{{"Aa", 3.0}, {"Bb", 1.0}}};
    CHECK(mixing_entropy(quarter) == doctest::Approx(hand).epsilon(1e-12));
    CHECK(mixing_entropy(quarter) == doctest::Approx(4.6753).epsilon(1e-4));

    // Equimolar strictly maximizes entropy at fixed element count.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> coeff(0.1, 2.0);
    double eq = mixing_entropy(Composition{{{"Aa", 1.0}, {"Bb", 1.0}}});
    for (int trial = 0; trial < 50; ++trial) {
        double a = coeff(rng), b = coeff(rng);
        if (std::abs(a - b) < 1e-6) continue;
        CHECK(mixing_entropy(Composition{{{"Aa", a}, {"Bb", b}}}) < eq);
    }
}

TEST_CASE("featurize assembles the fixed 14-field schema") {
    ElementTable t = test_table();
    PairEnthalpyTable p = test_pairs();
    Composition pair{{{"Aa", 1.0}, {"Bb", 1.0}}};
    FeatureVector fv = featurize(pair, t, p);

    auto vals = fv.values();
    REQUIRE(vals.size() == 14);
    const auto& names = FeatureVector::names();
    CHECK(names[0] == "mean_vec");
    CHECK(names[5] == "mixing_entropy");
    CHECK(names[13] == "pauling_en_diff");
    CHECK(vals[0] == fv.mean_vec);
    CHECK(vals[4] == fv.mixing_enthalpy);
    CHECK(vals[5] == fv.mixing_entropy);
    CHECK(FeatureVector::from_values(vals).values() == vals);

    // Fields agree with the sub-operations.
    CHECK(fv.delta_x ==
          doctest::Approx(deviation_features(pair, t).delta_x).epsilon(1e-12));
    CHECK(fv.mixing_enthalpy ==
          doctest::Approx(pairwise_features(pair, t, p).mixing_enthalpy)
              .epsilon(1e-12));

    // Single element: deviation, pairwise, entropy all exactly zero.
    FeatureVector single = featurize(Composition{{{"Aa", 1.0}}}, t, p);
    CHECK(single.delta_x == 0.0);
    CHECK(single.delta_r == 0.0);
    CHECK(single.modulus_mismatch == 0.0);
    CHECK(single.shear_modulus_diff == 0.0);
    CHECK(single.mixing_enthalpy == 0.0);
    CHECK(single.pauling_en_diff == 0.0);
    CHECK(single.mixing_entropy == 0.0);
}

TEST_CASE("features depend only on atomic fractions") {
    ElementTable t = ElementTable::load("data/element_table.csv");
    PairEnthalpyTable p = PairEnthalpyTable::load("data/pair_enthalpy.csv");

    Composition c = parse_composition("Al0.5 Co1.2 Fe0.8 Ni1");
    auto base = featurize(c, t, p).values();

    // Scaling all coefficients changes nothing.
    Composition scaled = c;
    for (auto& e : scaled.entries) e.coefficient *= 2.5;
    auto v2 = featurize(scaled, t, p).values();
    for (int j = 0; j < kNumFeatures; ++j)
        CHECK(base[j] == doctest::Approx(v2[j]).epsilon(1e-12));

    // Entry order is canonical, so permuted input parses to the same thing.
    Composition reparsed = parse_composition("Ni1 Fe0.8 Al0.5 Co1.2");
    auto v3 = featurize(reparsed, t, p).values();
    for (int j = 0; j < kNumFeatures; ++j) CHECK(base[j] == v3[j]);
}

TEST_CASE("independent oracle over the real tables") {
    ElementTable t = ElementTable::load("data/element_table.csv");
    PairEnthalpyTable p = PairEnthalpyTable::load("data/pair_enthalpy.csv");
    Composition c = parse_composition("Co1.2 Cr0.5 Fe0.8 Ni1");
    auto x = atomic_fractions(c);
    FeatureVector fv = featurize(c, t, p);

    std::vector<const ElementRecord*> rec;
    for (const auto& e : c.entries) rec.push_back(&t.lookup(e.element));
    std::size_t n = rec.size();

    double vec = 0, xbar = 0, rbar = 0, gbar = 0;
    for (std::size_t i = 0; i < n; ++i) {
        vec += x[i] * rec[i]->vec;
        xbar += x[i] * rec[i]->electronegativity;
        rbar += x[i] * rec[i]->atomic_radius;
        gbar += x[i] * rec[i]->shear_modulus;
    }
    CHECK(fv.mean_vec == doctest::Approx(vec).epsilon(1e-12));

    double dx = 0, dr = 0, dh = 0, dxp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        dx += x[i] * std::pow(rec[i]->electronegativity - xbar, 2);
        dr += x[i] * std::pow((rec[i]->atomic_radius - rbar) / rbar, 2) * 100;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            dh += x[i] * x[j] *
                  p.lookup(c.entries[i].element, c.entries[j].element);
            dxp += x[i] * x[j] *
                   std::pow(rec[i]->electronegativity -
                                rec[j]->electronegativity,
                            2);
        }
    }
    CHECK(fv.delta_x == doctest::Approx(std::sqrt(dx)).epsilon(1e-9));
    CHECK(fv.delta_r == doctest::Approx(dr).epsilon(1e-9));
    CHECK(fv.mixing_enthalpy == doctest::Approx(dh).epsilon(1e-9));
    CHECK(fv.pauling_en_diff == doctest::Approx(dxp).epsilon(1e-9));
}
