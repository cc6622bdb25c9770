#pragma once
// Element-pair attention extraction: last-layer attention, averaged over
// heads, grouped by element, symmetrized, diagonal masked.

#include <string>
#include <vector>

#include "hea/encoder.hpp"

namespace hea {

struct ElementAttentionMatrix {
    std::vector<std::string> elements;       // canonical alphabetical order
    std::vector<std::vector<double>> matrix; // symmetric, diagonal unused
    // diagonal entries are masked: excluded from statistics and written as
    // empty cells on export.
};

/// include_feature_tokens keeps numeric-feature token positions as one
/// "FEATURES" pseudo-group; otherwise only element tokens contribute.
/// Features-mode models need the row's feature values.
ElementAttentionMatrix element_attention(
    const RegressionModel& model, const Composition& c,
    const std::optional<std::array<double, kNumFeatures>>& features =
        std::nullopt,
    bool include_feature_tokens = false);

/// Heatmap data: element labels as header row/column, masked diagonal as
/// empty cells.
std::string attention_to_csv(const ElementAttentionMatrix& m);
void export_attention(const std::string& path,
                      const ElementAttentionMatrix& m);
ElementAttentionMatrix attention_from_csv(const std::string& content);

}  // namespace hea
