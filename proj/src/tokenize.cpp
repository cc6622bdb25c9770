#include "hea/tokenize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hea/rng.hpp"

namespace hea {

namespace {

const char* kReserved[kNumReserved] = {"[PAD]", "[UNK]", "[CLS]", "[MASK]"};

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

// "Fe0.8" -> "Fe"; empty when the token is not an element-fraction pair.
std::string element_of_token(const std::string& tok) {
    std::size_t i = 0;
    if (i >= tok.size() || tok[i] < 'A' || tok[i] > 'Z') return "";
    ++i;
    if (i < tok.size() && tok[i] >= 'a' && tok[i] <= 'z') ++i;
    std::string symbol = tok.substr(0, i);
    bool dot = false;
    for (; i < tok.size(); ++i) {
        if (tok[i] == '.') {
            if (dot) return "";
            dot = true;
        } else if (tok[i] < '0' || tok[i] > '9') {
            return "";
        }
    }
    return symbol;
}

}  // namespace

Vocabulary::Vocabulary() {
    for (int i = 0; i < kNumReserved; ++i) {
        tokens_.emplace_back(kReserved[i]);
        ids_[kReserved[i]] = i;
    }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus_texts) {
    if (corpus_texts.empty())
        throw std::invalid_argument("cannot build vocabulary from empty corpus");
    Vocabulary v;
    for (const auto& text : corpus_texts) {
        for (const auto& tok : whitespace_tokens(text)) {
            if (!v.ids_.count(tok)) {
                v.ids_[tok] = static_cast<int>(v.tokens_.size());
                v.tokens_.push_back(tok);
            }
        }
    }
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= static_cast<int>(tokens_.size()))
        throw std::out_of_range("token id " + std::to_string(id) +
                                " outside vocabulary of size " +
                                std::to_string(tokens_.size()));
    return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write vocabulary to '" + path + "'");
    for (const auto& t : tokens_) f << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read vocabulary from '" + path + "'");
    Vocabulary v;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno < kNumReserved) {
            if (line != kReserved[lineno])
                throw std::runtime_error("vocabulary file '" + path +
                                         "': reserved token mismatch at line " +
                                         std::to_string(lineno + 1));
        } else {
            v.ids_[line] = static_cast<int>(v.tokens_.size());
            v.tokens_.push_back(line);
        }
        ++lineno;
    }
    if (lineno < kNumReserved)
        throw std::runtime_error("vocabulary file '" + path + "' truncated");
    return v;
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& t : tokens_) {
        for (char c : t) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    }
    return h;
}

std::string quantize_number(double x) {
    if (!std::isfinite(x))
        throw std::invalid_argument("quantize_number: non-finite input");
    if (x == 0.0) return "0";
    double mag = std::floor(std::log10(std::fabs(x)));
    double scale = std::pow(10.0, 2.0 - mag);
    double rounded = std::round(x * scale) / scale;
    return format_number(rounded);
}

std::string compose_input(const Composition& c,
                          const std::optional<FeatureVector>& features) {
    std::string text = canonical_string(c);
    if (features) {
        for (double v : features->values()) {
            text.push_back(' ');
            text += quantize_number(v);
        }
    }
    return text;
}

std::string compose_input(const Composition& c,
                          const std::vector<double>& feature_values) {
    std::string text = canonical_string(c);
    for (double v : feature_values) {
        text.push_back(' ');
        text += quantize_number(v);
    }
    return text;
}

TokenSequence encode(const std::string& text, const Vocabulary& v,
                     int max_len) {
    if (max_len < 2) throw std::invalid_argument("max_len must be >= 2");
    TokenSequence seq;
    seq.ids.assign(static_cast<std::size_t>(max_len), kPadId);
    seq.attention_mask.assign(static_cast<std::size_t>(max_len), 0);
    seq.ids[0] = kClsId;
    seq.attention_mask[0] = 1;

    auto toks = whitespace_tokens(text);
    int pos = 1;
    for (const auto& tok : toks) {
        if (pos >= max_len) break;
        seq.ids[static_cast<std::size_t>(pos)] = v.id(tok);
        seq.attention_mask[static_cast<std::size_t>(pos)] = 1;
        std::string sym = element_of_token(tok);
        if (!sym.empty()) seq.element_spans[pos] = sym;
        ++pos;
    }
    return seq;
}

MaskedSequence mask_tokens(const TokenSequence& seq, double mask_prob,
                           std::mt19937_64& rng) {
    if (mask_prob < 0 || mask_prob > 1)
        throw std::invalid_argument("mask_prob must lie in [0, 1]");
    MaskedSequence out;
    out.seq = seq;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        if (!seq.attention_mask[i]) continue;
        if (seq.ids[i] < kNumReserved) continue;  // [CLS]/[UNK] never masked
        if (unit(rng) < mask_prob) {
            out.labels[static_cast<int>(i)] = seq.ids[i];
            out.seq.ids[i] = kMaskId;
        }
    }
    return out;
}

}  // namespace hea
