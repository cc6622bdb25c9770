#include "hea/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "hea/io.hpp"
#include "hea/rng.hpp"

namespace hea {

namespace {

std::string full_precision(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Composition sample_composition(const GeneratorConfig& cfg,
                               const ElementTable& t, std::mt19937_64& rng) {
    std::vector<std::string> pool = t.symbols();
    if (static_cast<std::size_t>(cfg.max_elements) > pool.size())
        throw std::invalid_argument(
            "element_count_range upper bound (" +
            std::to_string(cfg.max_elements) + ") exceeds table size (" +
            std::to_string(pool.size()) + ")");

    std::vector<double> weights;
    weights.reserve(pool.size());
    for (const auto& sym : pool) {
        auto it = cfg.element_weights.find(sym);
        double w = it == cfg.element_weights.end() ? 1.0 : it->second;
        if (!(w > 0))
            throw std::invalid_argument("non-positive weight for element " + sym);
        weights.push_back(w);
    }

    std::uniform_int_distribution<int> count_dist(cfg.min_elements,
                                                  cfg.max_elements);
    int n = count_dist(rng);

    // Weighted draws without replacement.
    std::vector<std::string> chosen;
    for (int k = 0; k < n; ++k) {
        std::discrete_distribution<std::size_t> pick(weights.begin(),
                                                     weights.end());
        std::size_t idx = pick(rng);
        chosen.push_back(pool[idx]);
        pool.erase(pool.begin() + static_cast<long>(idx));
        weights.erase(weights.begin() + static_cast<long>(idx));
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool equimolar = unit(rng) < cfg.equimolar_fraction;

    Composition c;
    for (const auto& sym : chosen) {
        double coeff = 1.0;
        if (!equimolar) {
            std::uniform_real_distribution<double> coeff_dist(
                cfg.min_coefficient, cfg.max_coefficient);
            // Round to the format_number precision so the canonical string
            // round-trips exactly.
            coeff = std::round(coeff_dist(rng) * 1e4) / 1e4;
            if (coeff <= 0) coeff = cfg.min_coefficient;
        }
        c.entries.push_back({sym, coeff});
    }
    std::sort(c.entries.begin(), c.entries.end(),
              [](const auto& a, const auto& b) { return a.element < b.element; });
    return c;
}

std::vector<CorpusEntry> generate_corpus(const GeneratorConfig& cfg,
                                         const ElementTable& t,
                                         const PairEnthalpyTable& p) {
    if (cfg.corpus_size < 1)
        throw std::invalid_argument("corpus_size must be >= 1");
    if (cfg.min_elements > cfg.max_elements ||
        cfg.min_coefficient > cfg.max_coefficient)
        throw std::invalid_argument("generator range bounds out of order");

    std::mt19937_64 rng = substream(cfg.seed, "datagen");
    std::vector<CorpusEntry> corpus;
    std::set<std::string> seen;
    const std::size_t max_attempts = 100 * cfg.corpus_size;
    std::size_t attempts = 0;
    while (corpus.size() < cfg.corpus_size) {
        if (++attempts > max_attempts)
            throw std::runtime_error(
                "could not reach " + std::to_string(cfg.corpus_size) +
                " unique compositions after " + std::to_string(attempts - 1) +
                " attempts");
        Composition c = sample_composition(cfg, t, rng);
        std::string canon = canonical_string(c);
        if (seen.count(canon)) continue;
        FeatureVector f = featurize(c, t, p);
        // Zero in a critical feature column marks a degenerate entry.
        if (f.mixing_entropy == 0 || f.melting_temp == 0 || f.mean_vec == 0)
            continue;
        seen.insert(canon);
        corpus.push_back({std::move(canon), f});
    }
    return corpus;
}

void write_corpus(const std::string& path,
                  const std::vector<CorpusEntry>& corpus) {
    Table t;
    t.header.push_back("composition");
    for (const auto& name : FeatureVector::names()) t.header.push_back(name);
    for (const auto& e : corpus) {
        std::vector<std::string> row;
        row.push_back(e.composition);
        for (double v : e.features.values()) row.push_back(full_precision(v));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

std::vector<CorpusEntry> read_corpus(const std::string& path) {
    Table t = read_csv(path);
    int comp_col = t.require_column("composition");
    std::array<int, kNumFeatures> cols;
    for (int i = 0; i < kNumFeatures; ++i)
        cols[i] = t.require_column(FeatureVector::names()[i]);
    std::vector<CorpusEntry> corpus;
    for (const auto& row : t.rows) {
        std::array<double, kNumFeatures> vals;
        for (int i = 0; i < kNumFeatures; ++i)
            vals[i] = parse_double(row[cols[i]], path);
        corpus.push_back({row[comp_col], FeatureVector::from_values(vals)});
    }
    return corpus;
}

}  // namespace hea
