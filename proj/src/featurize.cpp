#include "hea/featurize.hpp"

#include <cmath>

namespace hea {

std::array<double, kNumFeatures> FeatureVector::values() const {
    return {mean_vec,        delta_x,        delta_r,
            young_modulus,   mixing_enthalpy, mixing_entropy,
            work_function,   shear_modulus,  modulus_mismatch,
            shear_modulus_diff, melting_temp, cohesive_energy,
            ionization_energy, pauling_en_diff};
}

const std::array<std::string, kNumFeatures>& FeatureVector::names() {
    static const std::array<std::string, kNumFeatures> n = {
        "mean_vec",        "delta_x",        "delta_r",
        "young_modulus",   "mixing_enthalpy", "mixing_entropy",
        "work_function",   "shear_modulus",  "modulus_mismatch",
        "shear_modulus_diff", "melting_temp", "cohesive_energy",
        "ionization_energy", "pauling_en_diff"};
    return n;
}

FeatureVector FeatureVector::from_values(
    const std::array<double, kNumFeatures>& v) {
    FeatureVector f;
    f.mean_vec = v[0];
    f.delta_x = v[1];
    f.delta_r = v[2];
    f.young_modulus = v[3];
    f.mixing_enthalpy = v[4];
    f.mixing_entropy = v[5];
    f.work_function = v[6];
    f.shear_modulus = v[7];
    f.modulus_mismatch = v[8];
    f.shear_modulus_diff = v[9];
    f.melting_temp = v[10];
    f.cohesive_energy = v[11];
    f.ionization_energy = v[12];
    f.pauling_en_diff = v[13];
    return f;
}

WeightedMeans weighted_means(const Composition& c, const ElementTable& t) {
    auto x = atomic_fractions(c);
    WeightedMeans m{};
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
        const ElementRecord& r = t.lookup(c.entries[i].element);
        m.mean_vec += x[i] * r.vec;
        m.young_modulus += x[i] * r.young_modulus;
        m.work_function += x[i] * r.work_function;
        m.shear_modulus += x[i] * r.shear_modulus;
        m.melting_temp += x[i] * r.melting_temp;
        m.cohesive_energy += x[i] * r.cohesive_energy;
        m.ionization_energy += x[i] * r.ionization_energy;
    }
    return m;
}

DeviationFeatures deviation_features(const Composition& c,
                                     const ElementTable& t) {
    auto x = atomic_fractions(c);
    double x_bar = 0, r_bar = 0, g_bar = 0;
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
        const ElementRecord& r = t.lookup(c.entries[i].element);
        x_bar += x[i] * r.electronegativity;
        r_bar += x[i] * r.atomic_radius;
        g_bar += x[i] * r.shear_modulus;
    }
    DeviationFeatures d{};
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
        const ElementRecord& r = t.lookup(c.entries[i].element);
        double dx = r.electronegativity - x_bar;
        d.delta_x += x[i] * dx * dx;
        double dr = (r.atomic_radius - r_bar) / r_bar;
        d.delta_r += x[i] * dr * dr * 100.0;
        double dm = 2.0 * (r.shear_modulus - g_bar) / (r.shear_modulus + g_bar);
        d.modulus_mismatch += x[i] * dm * dm;
        double dg = 1.0 - r.shear_modulus / g_bar;
        d.shear_modulus_diff += x[i] * dg * dg;
    }
    d.delta_x = std::sqrt(d.delta_x);
    return d;
}

PairwiseFeatures pairwise_features(const Composition& c, const ElementTable& t,
                                   const PairEnthalpyTable& p) {
    auto x = atomic_fractions(c);
    PairwiseFeatures f{};
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
        const ElementRecord& ri = t.lookup(c.entries[i].element);
        for (std::size_t j = 0; j < c.entries.size(); ++j) {
            if (i == j) continue;
            const ElementRecord& rj = t.lookup(c.entries[j].element);
            f.mixing_enthalpy +=
                x[i] * x[j] * p.lookup(c.entries[i].element, c.entries[j].element);
            double dx = ri.electronegativity - rj.electronegativity;
            f.pauling_en_diff += x[i] * x[j] * dx * dx;
        }
    }
    return f;
}

double mixing_entropy(const Composition& c) {
    auto x = atomic_fractions(c);
    double s = 0;
    for (double xi : x) s += xi * std::log(xi);
    return -kGasConstant * s;
}

FeatureVector featurize(const Composition& c, const ElementTable& t,
                        const PairEnthalpyTable& p) {
    WeightedMeans m = weighted_means(c, t);
    DeviationFeatures d = deviation_features(c, t);
    PairwiseFeatures pw = pairwise_features(c, t, p);
    FeatureVector f;
    f.mean_vec = m.mean_vec;
    f.delta_x = d.delta_x;
    f.delta_r = d.delta_r;
    f.young_modulus = m.young_modulus;
    f.mixing_enthalpy = pw.mixing_enthalpy;
    f.mixing_entropy = mixing_entropy(c);
    f.work_function = m.work_function;
    f.shear_modulus = m.shear_modulus;
    f.modulus_mismatch = d.modulus_mismatch;
    f.shear_modulus_diff = d.shear_modulus_diff;
    f.melting_temp = m.melting_temp;
    f.cohesive_energy = m.cohesive_energy;
    f.ionization_energy = m.ionization_energy;
    f.pauling_en_diff = pw.pauling_en_diff;
    return f;
}

}  // namespace hea
