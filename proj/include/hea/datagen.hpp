#pragma once
// Synthetic pre-training corpus: weighted element sampling without
// replacement, equimolar/non-equimolar split, dedup by canonical string,
// zero-filter on critical feature columns.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hea/chem.hpp"
#include "hea/featurize.hpp"

namespace hea {

struct GeneratorConfig {
    std::map<std::string, double> element_weights;  // empty = uniform
    std::size_t corpus_size = 1;
    double equimolar_fraction = 0.5;
    int min_elements = 4;
    int max_elements = 8;
    double min_coefficient = 0.1;
    double max_coefficient = 2.0;
    std::uint64_t seed = 0;
};

struct CorpusEntry {
    std::string composition;  // canonical string
    FeatureVector features;
};

Composition sample_composition(const GeneratorConfig& cfg,
                               const ElementTable& t, std::mt19937_64& rng);

std::vector<CorpusEntry> generate_corpus(const GeneratorConfig& cfg,
                                         const ElementTable& t,
                                         const PairEnthalpyTable& p);

void write_corpus(const std::string& path,
                  const std::vector<CorpusEntry>& corpus);
std::vector<CorpusEntry> read_corpus(const std::string& path);

}  // namespace hea
