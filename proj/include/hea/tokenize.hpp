#pragma once
// Whole-token vocabulary and sequence encoding. Tokens are the
// whitespace-separated units of the composed input text; element-fraction
// pairs like "Fe0.8" stay single tokens, so the token -> element mapping
// needed for attention interpretation is exact.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hea/chem.hpp"
#include "hea/featurize.hpp"

namespace hea {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kMaskId = 3;
inline constexpr int kNumReserved = 4;

class Vocabulary {
public:
    Vocabulary();

    /// Reserved tokens first, then every distinct whitespace token of the
    /// corpus in first-seen order.
    static Vocabulary build(const std::vector<std::string>& corpus_texts);

    int id(const std::string& token) const;       // kUnkId when absent
    const std::string& token(int id) const;
    std::size_t size() const { return tokens_.size(); }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    /// FNV-1a over all tokens in id order; used to pair model artifacts
    /// with the vocabulary they were trained under.
    std::uint64_t hash() const;

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> ids_;
};

struct TokenSequence {
    std::vector<int> ids;              // length max_len, ids[0] == [CLS]
    std::vector<int> attention_mask;   // 1 on the real prefix, 0 on pads
    std::map<int, std::string> element_spans;  // position -> element symbol
};

/// Canonical composition string, then (if given) the 14 feature values
/// quantized to tokens, space separated.
std::string compose_input(const Composition& c,
                          const std::optional<FeatureVector>& features);

/// Feature list variant for pre-standardized values.
std::string compose_input(const Composition& c,
                          const std::vector<double>& feature_values);

TokenSequence encode(const std::string& text, const Vocabulary& v,
                     int max_len);

struct MaskedSequence {
    TokenSequence seq;
    std::map<int, int> labels;  // masked position -> original id
};

MaskedSequence mask_tokens(const TokenSequence& seq, double mask_prob,
                           std::mt19937_64& rng);

/// Round to 3 significant digits and render with format_number; keeps the
/// numeric-token vocabulary finite. Idempotent on its own outputs.
std::string quantize_number(double x);

}  // namespace hea
