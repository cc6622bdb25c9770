#include "hea/chem.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "hea/io.hpp"

namespace hea {

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

Composition parse_composition(const std::string& text) {
    std::vector<CompositionEntry> entries;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == n) throw ChemError("empty composition string");

    while (i < n) {
        if (!is_upper(text[i]))
            throw ChemError("expected element symbol at position " +
                            std::to_string(i) + " in '" + text + "'");
        std::string symbol(1, text[i]);
        ++i;
        if (i < n && is_lower(text[i])) {
            symbol.push_back(text[i]);
            ++i;
        }

        double coeff = 1.0;
        std::size_t num_start = i;
        while (i < n && (is_digit(text[i]) || text[i] == '.')) ++i;
        if (i > num_start) {
            std::string num = text.substr(num_start, i - num_start);
            if (num == "." || std::count(num.begin(), num.end(), '.') > 1)
                throw ChemError("malformed coefficient '" + num + "' after '" +
                                symbol + "' in '" + text + "'");
            coeff = std::stod(num);
            if (coeff <= 0.0)
                throw ChemError("non-positive coefficient for '" + symbol +
                                "' in '" + text + "'");
        }
        for (const auto& e : entries)
            if (e.element == symbol)
                throw ChemError("duplicate element '" + symbol + "' in '" +
                                text + "'");
        entries.push_back({symbol, coeff});

        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    }

    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.element < b.element; });
    return Composition{std::move(entries)};
}

std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", x);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

std::string canonical_string(const Composition& c) {
    std::string out;
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
        if (i) out.push_back(' ');
        out += c.entries[i].element;
        out += format_number(c.entries[i].coefficient);
    }
    return out;
}

std::vector<double> atomic_fractions(const Composition& c) {
    double total = 0.0;
    for (const auto& e : c.entries) total += e.coefficient;
    std::vector<double> x;
    x.reserve(c.entries.size());
    for (const auto& e : c.entries) x.push_back(e.coefficient / total);
    return x;
}

ElementTable ElementTable::from_records(std::vector<ElementRecord> records,
                                        std::string version) {
    ElementTable t;
    t.version_ = std::move(version);
    for (auto& r : records) {
        const double vals[] = {r.vec,           r.electronegativity,
                               r.atomic_radius, r.young_modulus,
                               r.shear_modulus, r.melting_temp,
                               r.work_function, r.cohesive_energy,
                               r.ionization_energy};
        for (double v : vals)
            if (!(v > 0.0))
                throw ChemError("element '" + r.symbol +
                                "': all physical constants must be positive");
        if (r.vec < 1.0)
            throw ChemError("element '" + r.symbol + "': vec must be >= 1");
        t.records_[r.symbol] = std::move(r);
    }
    return t;
}

ElementTable ElementTable::load(const std::string& path) {
    Table csv = read_csv(path);
    const char* cols[] = {"symbol",        "vec",
                          "electronegativity", "atomic_radius_pm",
                          "young_gpa",     "shear_gpa",
                          "melting_k",     "work_function_ev",
                          "cohesive_ev",   "ionization_ev"};
    int idx[10];
    for (int i = 0; i < 10; ++i) idx[i] = csv.require_column(cols[i]);

    std::vector<ElementRecord> records;
    for (const auto& row : csv.rows) {
        ElementRecord r;
        r.symbol = row[idx[0]];
        auto num = [&](int k) {
            return parse_double(row[idx[k]], "element table row '" + r.symbol + "'");
        };
        r.vec = num(1);
        r.electronegativity = num(2);
        r.atomic_radius = num(3);
        r.young_modulus = num(4);
        r.shear_modulus = num(5);
        r.melting_temp = num(6);
        r.work_function = num(7);
        r.cohesive_energy = num(8);
        r.ionization_energy = num(9);
        records.push_back(std::move(r));
    }
    return from_records(std::move(records), path);
}

const ElementRecord& ElementTable::lookup(const std::string& symbol) const {
    auto it = records_.find(symbol);
    if (it == records_.end())
        throw ChemError("unknown element '" + symbol + "' (element table '" +
                        version_ + "')");
    return it->second;
}

bool ElementTable::contains(const std::string& symbol) const {
    return records_.count(symbol) != 0;
}

std::vector<std::string> ElementTable::symbols() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& [sym, rec] : records_) out.push_back(sym);
    return out;
}

PairEnthalpyTable PairEnthalpyTable::from_pairs(
    const std::vector<std::tuple<std::string, std::string, double>>& pairs,
    std::string version) {
    PairEnthalpyTable t;
    t.version_ = std::move(version);
    for (const auto& [a, b, dh] : pairs) {
        auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
        t.pairs_[key] = dh;
    }
    return t;
}

PairEnthalpyTable PairEnthalpyTable::load(const std::string& path) {
    Table csv = read_csv(path);
    int ia = csv.require_column("element_a");
    int ib = csv.require_column("element_b");
    int ih = csv.require_column("dh_kj_mol");
    std::vector<std::tuple<std::string, std::string, double>> pairs;
    for (const auto& row : csv.rows)
        pairs.emplace_back(row[ia], row[ib],
                           parse_double(row[ih], "pair enthalpy row " + row[ia] +
                                                     "-" + row[ib]));
    return from_pairs(pairs, path);
}

double PairEnthalpyTable::lookup(const std::string& a,
                                 const std::string& b) const {
    if (a == b) return 0.0;
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = pairs_.find(key);
    if (it == pairs_.end())
        throw ChemError("no mixing enthalpy for pair {" + a + ", " + b +
                        "} (pair table '" + version_ + "')");
    return it->second;
}

}  // namespace hea
