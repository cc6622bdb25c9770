#pragma once
// Chemical formula parsing and elemental constant tables.
//
// A formula string is a sequence of element tokens, each an uppercase
// letter optionally followed by one lowercase letter, optionally followed
// by a decimal coefficient ("Al0.5CoCrFeNi", "Co1.2 Fe0.8 Ni1").
// Compositions are kept in canonical alphabetical order.

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hea {

class ChemError : public std::runtime_error {
public:
    explicit ChemError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CompositionEntry {
    std::string element;   // 1-2 char symbol, first letter uppercase
    double coefficient;    // stoichiometric amount f_i, > 0

    bool operator==(const CompositionEntry&) const = default;
};

/// Ordered list of (element, coefficient), alphabetical by symbol,
/// no element twice, all coefficients positive.
struct Composition {
    std::vector<CompositionEntry> entries;

    bool operator==(const Composition&) const = default;
};

struct ElementRecord {
    std::string symbol;
    double vec;              // valence electron count, electrons/atom
    double electronegativity;
    double atomic_radius;    // pm
    double young_modulus;    // GPa
    double shear_modulus;    // GPa
    double melting_temp;     // K
    double work_function;    // eV
    double cohesive_energy;  // eV/atom
    double ionization_energy;// eV
};

class ElementTable {
public:
    static ElementTable load(const std::string& path);
    static ElementTable from_records(std::vector<ElementRecord> records,
                                     std::string version);

    const ElementRecord& lookup(const std::string& symbol) const;
    bool contains(const std::string& symbol) const;
    std::vector<std::string> symbols() const;
    const std::string& version() const { return version_; }
    std::size_t size() const { return records_.size(); }

private:
    std::map<std::string, ElementRecord> records_;
    std::string version_;
};

class PairEnthalpyTable {
public:
    static PairEnthalpyTable load(const std::string& path);
    static PairEnthalpyTable from_pairs(
        const std::vector<std::tuple<std::string, std::string, double>>& pairs,
        std::string version);

    /// Mixing enthalpy dH_ij in kJ/mol for an unordered pair. dH_ii = 0.
    double lookup(const std::string& a, const std::string& b) const;
    const std::string& version() const { return version_; }

private:
    std::map<std::pair<std::string, std::string>, double> pairs_;
    std::string version_;
};

Composition parse_composition(const std::string& text);

std::string canonical_string(const Composition& c);

/// x_i = f_i / sum_j f_j, same canonical order, sums to 1.
std::vector<double> atomic_fractions(const Composition& c);

/// Shortest decimal rendering without trailing zeros, at most 4
/// fractional digits ("1" not "1.0").
std::string format_number(double x);

}  // namespace hea
