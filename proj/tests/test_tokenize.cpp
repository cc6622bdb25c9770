#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <random>

#include "hea/io.hpp"
#include "hea/rng.hpp"
#include "hea/tokenize.hpp"

using namespace hea;

TEST_CASE("compose_input") {
    Composition c{{{"Co", 1.2}, {"Fe", 0.8}, {"Ni", 1.0}}};
    CHECK(compose_input(c, std::nullopt) == "Co1.2 Fe0.8 Ni1");
    CHECK(compose_input(Composition{{{"Fe", 1.0}}}, std::nullopt) == "Fe1");

    // Feature values are appended quantized, space separated.
    CHECK(compose_input(c, std::vector<double>{300.0, 500.0}) ==
          "Co1.2 Fe0.8 Ni1 300 500");

    FeatureVector fv;
    fv.mean_vec = 13.3814;
    std::string text = compose_input(c, std::optional<FeatureVector>(fv));
    CHECK(text.rfind("Co1.2 Fe0.8 Ni1 13.4 ", 0) == 0);
    // All 14 features present: 3 composition tokens + 14 numbers.
    CHECK(split(text, ' ').size() == 17);
}

TEST_CASE("vocabulary build and reserved ids") {
    Vocabulary v = Vocabulary::build({"Fe1 Ni1"});
    CHECK(v.size() == 6);
    CHECK(v.id("[PAD]") == kPadId);
    CHECK(v.id("[UNK]") == kUnkId);
    CHECK(v.id("[CLS]") == kClsId);
    CHECK(v.id("[MASK]") == kMaskId);
    CHECK(v.id("Fe1") == 4);
    CHECK(v.id("Ni1") == 5);
    CHECK(v.id("absent") == kUnkId);

    // Duplicates add nothing; first-seen order is kept.
    Vocabulary v2 = Vocabulary::build({"Fe1 Ni1", "Ni1 Fe1", "Co1 Fe1"});
    CHECK(v2.size() == 7);
    CHECK(v2.id("Fe1") == 4);
    CHECK(v2.id("Ni1") == 5);
    CHECK(v2.id("Co1") == 6);

    // id -> token -> id identity.
    for (int i = 0; i < static_cast<int>(v2.size()); ++i)
        CHECK(v2.id(v2.token(i)) == i);

    CHECK_THROWS(Vocabulary::build({}));
}

TEST_CASE("vocabulary save/load and hash") {
    Vocabulary v = Vocabulary::build({"Fe1 Ni1 0.5 -1.3"});
    const char* path = "build/test_vocab.txt";
    v.save(path);
    Vocabulary back = Vocabulary::load(path);
    REQUIRE(back.size() == v.size());
    for (int i = 0; i < static_cast<int>(v.size()); ++i)
        CHECK(back.token(i) == v.token(i));
    CHECK(back.hash() == v.hash());
    CHECK(Vocabulary::build({"Co1"}).hash() != v.hash());
    std::remove(path);
}

TEST_CASE("encode") {
    Vocabulary v = Vocabulary::build({"Fe1 Ni1"});

    TokenSequence s = encode("Fe1 Ni1", v, 5);
    CHECK(s.ids == std::vector<int>{kClsId, 4, 5, kPadId, kPadId});
    CHECK(s.attention_mask == std::vector<int>{1, 1, 1, 0, 0});
    REQUIRE(s.element_spans.size() == 2);
    CHECK(s.element_spans.at(1) == "Fe");
    CHECK(s.element_spans.at(2) == "Ni");

    // Empty text: [CLS] plus pads.
    TokenSequence e = encode("", v, 4);
    CHECK(e.ids == std::vector<int>{kClsId, kPadId, kPadId, kPadId});
    CHECK(e.attention_mask == std::vector<int>{1, 0, 0, 0});
    CHECK(e.element_spans.empty());

    // Truncation keeps mask all 1.
    TokenSequence tr = encode("Fe1 Ni1 Fe1 Ni1 Fe1", v, 3);
    CHECK(tr.ids.size() == 3);
    CHECK(tr.attention_mask == std::vector<int>{1, 1, 1});

    // Unknown tokens map to [UNK] and are not element spans... unless they
    // still parse as element-fraction pairs.
    TokenSequence u = encode("Zz9 hello", v, 4);
    CHECK(u.ids[1] == kUnkId);
    CHECK(u.ids[2] == kUnkId);
    CHECK(u.element_spans.count(2) == 0);

    // Numeric feature tokens are not element spans.
    Vocabulary vf = Vocabulary::build({"Fe1 Ni1 300 500"});
    TokenSequence f = encode("Fe1 Ni1 300 500", vf, 6);
    CHECK(f.element_spans.size() == 2);
    CHECK(f.element_spans.count(3) == 0);
    CHECK(f.element_spans.count(4) == 0);
}

TEST_CASE("mask_tokens") {
    Vocabulary v = Vocabulary::build({"Co1 Fe1 Ni1 300"});
    TokenSequence s = encode("Co1 Fe1 Ni1 300", v, 8);
    std::mt19937_64 rng = substream(1, "mask");

    MaskedSequence none = mask_tokens(s, 0.0, rng);
    CHECK(none.labels.empty());
    CHECK(none.seq.ids == s.ids);

    MaskedSequence all = mask_tokens(s, 1.0, rng);
    CHECK(all.labels.size() == 4);  // every real non-[CLS] token
    for (int pos = 1; pos <= 4; ++pos) {
        CHECK(all.seq.ids[pos] == kMaskId);
        CHECK(all.labels.at(pos) == s.ids[pos]);
    }
    CHECK(all.seq.ids[0] == kClsId);   // [CLS] untouched
    CHECK(all.seq.ids[5] == kPadId);   // pads untouched

    // Binomial oracle: frequency of masking over 10k trials.
    int hits = 0;
    const int trials = 10000;
    const double p = 0.15;
    for (int i = 0; i < trials; ++i) {
        MaskedSequence m = mask_tokens(s, p, rng);
        hits += static_cast<int>(m.labels.size());
    }
    double expected = trials * 4 * p;
    double se = std::sqrt(trials * 4 * p * (1 - p));
    CHECK(std::abs(hits - expected) < 3 * se);

    // Determinism for a fixed rng state.
    std::mt19937_64 r1 = substream(9, "mask");
    std::mt19937_64 r2 = substream(9, "mask");
    MaskedSequence m1 = mask_tokens(s, 0.5, r1);
    MaskedSequence m2 = mask_tokens(s, 0.5, r2);
    CHECK(m1.seq.ids == m2.seq.ids);
    CHECK(m1.labels == m2.labels);
}

TEST_CASE("quantize_number") {
    CHECK(quantize_number(13.3814) == "13.4");
    CHECK(quantize_number(0.0) == "0");
    CHECK(quantize_number(-2.71828) == "-2.72");
    CHECK(quantize_number(123456.0) == "123000");
    CHECK(quantize_number(0.000123456) == "0.0001");

    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> val(-1e4, 1e4);
    for (int i = 0; i < 200; ++i) {
        std::string q = quantize_number(val(rng));
        // Idempotent on its own outputs.
        CHECK(quantize_number(std::stod(q)) == q);
    }
    CHECK_THROWS(quantize_number(std::nan("")));
}

TEST_CASE("sequence-level invariants") {
    Vocabulary v = Vocabulary::build({"Co1 Cr1 Fe1 Mn1 Ni1"});
    for (const char* text : {"Co1", "Co1 Cr1 Fe1", "Co1 Cr1 Fe1 Mn1 Ni1"}) {
        TokenSequence s = encode(text, v, 4);
        std::size_t tokens = split(text, ' ').size();
        std::size_t expect = std::min<std::size_t>(tokens + 1, 4);
        std::size_t ones = 0;
        for (int m : s.attention_mask) ones += static_cast<std::size_t>(m);
        CHECK(ones == expect);
        // Mask is 1 on a prefix then 0.
        for (std::size_t i = 1; i < s.attention_mask.size(); ++i)
            CHECK(s.attention_mask[i] <= s.attention_mask[i - 1]);
        // Element spans decode back to their symbols.
        for (const auto& [pos, sym] : s.element_spans) {
            CHECK(s.attention_mask[static_cast<std::size_t>(pos)] == 1);
            CHECK(v.token(s.ids[static_cast<std::size_t>(pos)]).rfind(sym, 0) ==
                  0);
        }
    }
}
