#pragma once
// The 14 thermodynamic descriptors computed from a composition's atomic
// fractions plus per-element constants and pairwise mixing enthalpies.

#include <array>
#include <string>
#include <vector>

#include "hea/chem.hpp"

namespace hea {

/// Universal gas constant, J/(mol*K).
inline constexpr double kGasConstant = 8.314462618;

inline constexpr int kNumFeatures = 14;

struct FeatureVector {
    double mean_vec = 0;          // electrons/atom
    double delta_x = 0;           // dimensionless
    double delta_r = 0;           // percent
    double young_modulus = 0;     // GPa
    double mixing_enthalpy = 0;   // kJ/mol
    double mixing_entropy = 0;    // J/(mol*K)
    double work_function = 0;     // eV
    double shear_modulus = 0;     // GPa
    double modulus_mismatch = 0;  // dimensionless
    double shear_modulus_diff = 0;// dimensionless
    double melting_temp = 0;      // K
    double cohesive_energy = 0;   // eV/atom
    double ionization_energy = 0; // eV
    double pauling_en_diff = 0;   // dimensionless

    std::array<double, kNumFeatures> values() const;
    static const std::array<std::string, kNumFeatures>& names();
    static FeatureVector from_values(const std::array<double, kNumFeatures>& v);
};

struct WeightedMeans {
    double mean_vec, young_modulus, work_function, shear_modulus,
        melting_temp, cohesive_energy, ionization_energy;
};

struct DeviationFeatures {
    double delta_x, delta_r, modulus_mismatch, shear_modulus_diff;
};

struct PairwiseFeatures {
    double mixing_enthalpy, pauling_en_diff;
};

WeightedMeans weighted_means(const Composition& c, const ElementTable& t);

// delta_r follows the printed formula: sum x_i ((r_i - rbar)/rbar)^2 * 100,
// with no outer square root.
DeviationFeatures deviation_features(const Composition& c,
                                     const ElementTable& t);

// Double sums run over ordered pairs i != j, so each unordered pair
// contributes twice.
PairwiseFeatures pairwise_features(const Composition& c, const ElementTable& t,
                                   const PairEnthalpyTable& p);

double mixing_entropy(const Composition& c);

FeatureVector featurize(const Composition& c, const ElementTable& t,
                        const PairEnthalpyTable& p);

}  // namespace hea
