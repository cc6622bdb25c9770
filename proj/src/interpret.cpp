#include "hea/interpret.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "hea/io.hpp"

namespace hea {

ElementAttentionMatrix element_attention(
    const RegressionModel& model, const Composition& c,
    const std::optional<std::array<double, kNumFeatures>>& features,
    bool include_feature_tokens) {
    DatasetRow row{c, features, 0.0};
    TokenSequence seq = encode_row(model, row);

    AttentionRecord attn;
    regression_forward(model.state, seq, &attn);
    const auto& last_layer = attn.back();

    // Head-averaged L x L matrix.
    const std::size_t L = last_layer[0].rows;
    std::vector<std::vector<double>> a(L, std::vector<double>(L, 0.0));
    for (const auto& head : last_layer)
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = 0; j < L; ++j)
                a[i][j] += head.at(i, j) / static_cast<double>(last_layer.size());

    // Group positions by element; optionally keep feature tokens as one
    // pseudo-group. [CLS] and pads never contribute.
    std::map<std::string, std::vector<std::size_t>> groups;
    for (const auto& [pos, sym] : seq.element_spans)
        groups[sym].push_back(static_cast<std::size_t>(pos));
    if (groups.empty())
        throw std::invalid_argument(
            "element_attention: no element tokens after encoding '" +
            canonical_string(c) + "'");
    if (include_feature_tokens) {
        std::vector<std::size_t> feature_positions;
        for (std::size_t p = 1; p < seq.ids.size(); ++p)
            if (seq.attention_mask[p] &&
                !seq.element_spans.count(static_cast<int>(p)))
                feature_positions.push_back(p);
        if (!feature_positions.empty())
            groups["FEATURES"] = std::move(feature_positions);
    }

    ElementAttentionMatrix out;
    std::vector<std::vector<std::size_t>> positions;
    for (const auto& [name, pos] : groups) {
        out.elements.push_back(name);
        positions.push_back(pos);
    }
    const std::size_t g = out.elements.size();
    std::vector<std::vector<double>> reduced(g, std::vector<double>(g, 0.0));
    for (std::size_t gi = 0; gi < g; ++gi)
        for (std::size_t gj = 0; gj < g; ++gj) {
            double sum = 0;
            for (std::size_t p : positions[gi])
                for (std::size_t q : positions[gj]) sum += a[p][q];
            reduced[gi][gj] = sum / static_cast<double>(positions[gi].size() *
                                                        positions[gj].size());
        }

    out.matrix.assign(g, std::vector<double>(g, 0.0));
    for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j)
            out.matrix[i][j] = 0.5 * (reduced[i][j] + reduced[j][i]);
    for (std::size_t i = 0; i < g; ++i)
        out.matrix[i][i] = std::numeric_limits<double>::quiet_NaN();
    return out;
}

std::string attention_to_csv(const ElementAttentionMatrix& m) {
    std::ostringstream out;
    out << "element";
    for (const auto& e : m.elements) out << ',' << e;
    out << '\n';
    for (std::size_t i = 0; i < m.elements.size(); ++i) {
        out << m.elements[i];
        for (std::size_t j = 0; j < m.elements.size(); ++j) {
            out << ',';
            if (i != j) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.17g", m.matrix[i][j]);
                out << buf;
            }
        }
        out << '\n';
    }
    return out.str();
}

void export_attention(const std::string& path,
                      const ElementAttentionMatrix& m) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << attention_to_csv(m);
}

ElementAttentionMatrix attention_from_csv(const std::string& content) {
    Table t = parse_csv(content);
    ElementAttentionMatrix m;
    for (std::size_t j = 1; j < t.header.size(); ++j)
        m.elements.push_back(t.header[j]);
    const std::size_t g = m.elements.size();
    if (t.rows.size() != g)
        throw std::runtime_error("attention matrix is not square");
    m.matrix.assign(g, std::vector<double>(g, 0.0));
    for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j) {
            const std::string& cell = t.rows[i][j + 1];
            m.matrix[i][j] = cell.empty()
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : parse_double(cell, "attention matrix");
        }
    return m;
}

}  // namespace hea
