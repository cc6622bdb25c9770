#include "hea/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "hea/rng.hpp"

namespace hea {

DesignMatrix expand_design_matrix(
    const std::vector<DesignRow>& rows,
    const std::vector<std::string>& feature_names) {
    std::set<std::string> element_union;
    std::vector<Composition> comps;
    comps.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            comps.push_back(parse_composition(rows[i].composition));
        } catch (const ChemError& e) {
            throw ChemError("row " + std::to_string(i) + ": " + e.what());
        }
        for (const auto& e : comps.back().entries)
            element_union.insert(e.element);
    }

    DesignMatrix m;
    m.column_names = feature_names;
    for (const auto& sym : element_union) m.column_names.push_back(sym);

    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].features.size() != feature_names.size())
            throw std::invalid_argument(
                "row " + std::to_string(i) + ": expected " +
                std::to_string(feature_names.size()) + " feature values, got " +
                std::to_string(rows[i].features.size()));
        std::vector<double> r = rows[i].features;
        auto x = atomic_fractions(comps[i]);
        for (const auto& sym : element_union) {
            double frac = 0;
            for (std::size_t j = 0; j < comps[i].entries.size(); ++j)
                if (comps[i].entries[j].element == sym) frac = x[j];
            r.push_back(frac);
        }
        m.rows.push_back(std::move(r));
        m.target.push_back(rows[i].target);
    }
    return m;
}

// ---- Gaussian process ----

double rbf_kernel(const GpConfig& cfg, const std::vector<double>& a,
                  const std::vector<double>& b) {
    double sq = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        sq += (a[i] - b[i]) * (a[i] - b[i]);
    return cfg.constant *
           std::exp(-sq / (2.0 * cfg.length_scale * cfg.length_scale));
}

namespace {

// Lower Cholesky of a symmetric positive-definite matrix (in place copy).
std::vector<std::vector<double>> cholesky(
    std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j][j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j][k] * a[j][k];
        if (d <= 0)
            throw std::runtime_error(
                "GP covariance not positive definite (pivot " +
                std::to_string(d) + " at row " + std::to_string(j) +
                "); increase noise or jitter");
        a[j][j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
            a[i][j] = s / a[j][j];
        }
        for (std::size_t k = j + 1; k < n; ++k) a[j][k] = 0;
    }
    return a;
}

std::vector<double> chol_solve(const std::vector<std::vector<double>>& l,
                               std::vector<double> b) {
    const std::size_t n = l.size();
    // forward: L z = b
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= l[i][k] * b[k];
        b[i] /= l[i][i];
    }
    // backward: L^T x = z
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) b[ii] -= l[k][ii] * b[k];
        b[ii] /= l[ii][ii];
    }
    return b;
}

}  // namespace

GpModel gp_fit(const std::vector<std::vector<double>>& x,
               const std::vector<double>& y, const GpConfig& cfg) {
    if (x.empty() || x.size() != y.size())
        throw std::invalid_argument("gp_fit: empty or mismatched inputs");
    const std::size_t n = x.size();
    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    constexpr double jitter = 1e-10;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            k[i][j] = rbf_kernel(cfg, x[i], x[j]);
            if (i == j) k[i][j] += cfg.noise + jitter;
        }
    GpModel model;
    model.cfg = cfg;
    model.train_x = x;
    model.chol = cholesky(std::move(k));
    model.alpha = chol_solve(model.chol, y);
    return model;
}

GpPrediction gp_predict(const GpModel& model, const std::vector<double>& query) {
    const std::size_t n = model.train_x.size();
    std::vector<double> k_star(n);
    for (std::size_t i = 0; i < n; ++i)
        k_star[i] = rbf_kernel(model.cfg, query, model.train_x[i]);
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += k_star[i] * model.alpha[i];
    std::vector<double> v = chol_solve(model.chol, k_star);
    double var = rbf_kernel(model.cfg, query, query);
    for (std::size_t i = 0; i < n; ++i) var -= k_star[i] * v[i];
    if (var < 0) {
        if (var < -1e-10)
            throw std::runtime_error("gp_predict: variance " +
                                     std::to_string(var) +
                                     " below clamping tolerance");
        var = 0;
    }
    return {mean, var};
}

// ---- decision tree ----

namespace {

struct Split {
    int feature = -1;
    double threshold = 0;
    double score = 0;  // variance reduction achieved
};

double subset_mean(const std::vector<double>& y,
                   const std::vector<std::size_t>& idx) {
    double s = 0;
    for (std::size_t i : idx) s += y[i];
    return s / static_cast<double>(idx.size());
}

// Best variance-reduction split; candidate thresholds are midpoints
// between consecutive sorted unique feature values. Ties resolve to the
// lowest feature index, then the lowest threshold.
std::optional<Split> best_split(const std::vector<std::vector<double>>& x,
                                const std::vector<double>& y,
                                const std::vector<std::size_t>& idx,
                                const TreeConfig& cfg) {
    const int min_leaf = cfg.min_leaf;
    const std::size_t n = idx.size();
    double total_sum = 0, total_sq = 0;
    for (std::size_t i : idx) {
        total_sum += y[i];
        total_sq += y[i] * y[i];
    }
    double parent_sse = total_sq - total_sum * total_sum / static_cast<double>(n);

    std::optional<Split> best;
    std::vector<std::size_t> features = cfg.feature_subset;
    if (features.empty()) {
        features.resize(x[0].size());
        std::iota(features.begin(), features.end(), 0);
    }
    for (std::size_t f : features) {
        std::vector<std::size_t> sorted = idx;
        std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
            return x[a][f] < x[b][f];
        });
        double left_sum = 0, left_sq = 0;
        std::size_t left_n = 0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            std::size_t i = sorted[p];
            left_sum += y[i];
            left_sq += y[i] * y[i];
            ++left_n;
            if (x[sorted[p]][f] == x[sorted[p + 1]][f]) continue;
            if (left_n < static_cast<std::size_t>(min_leaf) ||
                n - left_n < static_cast<std::size_t>(min_leaf))
                continue;
            double right_sum = total_sum - left_sum;
            double right_sq = total_sq - left_sq;
            double sse =
                (left_sq - left_sum * left_sum / static_cast<double>(left_n)) +
                (right_sq -
                 right_sum * right_sum / static_cast<double>(n - left_n));
            double score = parent_sse - sse;
            double threshold = 0.5 * (x[sorted[p]][f] + x[sorted[p + 1]][f]);
            if (score > 1e-12 && (!best || score > best->score))
                best = Split{static_cast<int>(f), threshold, score};
        }
    }
    return best;
}

std::unique_ptr<TreeNode> grow(const std::vector<std::vector<double>>& x,
                               const std::vector<double>& y,
                               const std::vector<std::size_t>& idx, int depth,
                               const TreeConfig& cfg) {
    auto node = std::make_unique<TreeNode>();
    node->value = subset_mean(y, idx);
    if (static_cast<int>(idx.size()) <= cfg.min_leaf ||
        (cfg.max_depth >= 0 && depth >= cfg.max_depth))
        return node;
    auto split = best_split(x, y, idx, cfg);
    if (!split) return node;
    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx) {
        if (x[i][static_cast<std::size_t>(split->feature)] <= split->threshold)
            left_idx.push_back(i);
        else
            right_idx.push_back(i);
    }
    node->is_leaf = false;
    node->feature = split->feature;
    node->threshold = split->threshold;
    node->left = grow(x, y, left_idx, depth + 1, cfg);
    node->right = grow(x, y, right_idx, depth + 1, cfg);
    return node;
}

}  // namespace

std::unique_ptr<TreeNode> tree_fit(const std::vector<std::vector<double>>& x,
                                   const std::vector<double>& y,
                                   const TreeConfig& cfg) {
    if (x.empty() || x.size() != y.size())
        throw std::invalid_argument("tree_fit: empty or mismatched inputs");
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    return grow(x, y, idx, 0, cfg);
}

double tree_predict(const TreeNode& node, const std::vector<double>& query) {
    const TreeNode* cur = &node;
    while (!cur->is_leaf)
        cur = (query[static_cast<std::size_t>(cur->feature)] <= cur->threshold)
                  ? cur->left.get()
                  : cur->right.get();
    return cur->value;
}

// ---- random forest ----

ForestModel rf_fit(const std::vector<std::vector<double>>& x,
                   const std::vector<double>& y, const ForestConfig& cfg) {
    if (cfg.n_trees < 1)
        throw std::invalid_argument("rf_fit: n_trees must be >= 1");
    if (cfg.feature_subsample <= 0 || cfg.feature_subsample > 1)
        throw std::invalid_argument("rf_fit: feature_subsample must lie in (0,1]");
    ForestModel model;
    const std::size_t n_features = x.empty() ? 0 : x[0].size();
    for (int t = 0; t < cfg.n_trees; ++t) {
        std::mt19937_64 rng =
            substream(cfg.seed, "bootstrap", static_cast<std::uint64_t>(t));
        TreeConfig tree_cfg = cfg.tree;
        if (cfg.feature_subsample < 1.0) {
            std::vector<std::size_t> all(n_features);
            std::iota(all.begin(), all.end(), 0);
            std::shuffle(all.begin(), all.end(), rng);
            std::size_t keep = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(
                       cfg.feature_subsample * static_cast<double>(n_features))));
            all.resize(keep);
            std::sort(all.begin(), all.end());
            tree_cfg.feature_subset = std::move(all);
        }
        if (cfg.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
            std::vector<std::vector<double>> bx;
            std::vector<double> by;
            for (std::size_t i = 0; i < x.size(); ++i) {
                std::size_t j = pick(rng);
                bx.push_back(x[j]);
                by.push_back(y[j]);
            }
            model.trees.push_back(tree_fit(bx, by, tree_cfg));
        } else {
            model.trees.push_back(tree_fit(x, y, tree_cfg));
        }
    }
    return model;
}

double rf_predict(const ForestModel& model, const std::vector<double>& query) {
    double s = 0;
    for (const auto& t : model.trees) s += tree_predict(*t, query);
    return s / static_cast<double>(model.trees.size());
}

// ---- gradient boosting ----

GbrModel gbr_fit(const std::vector<std::vector<double>>& x,
                 const std::vector<double>& y, const GbrConfig& cfg) {
    if (cfg.n_stages < 1)
        throw std::invalid_argument("gbr_fit: n_stages must be >= 1");
    GbrModel model;
    model.learning_rate = cfg.learning_rate;
    model.init_value = std::accumulate(y.begin(), y.end(), 0.0) /
                       static_cast<double>(y.size());
    std::vector<double> pred(y.size(), model.init_value);
    for (int stage = 0; stage < cfg.n_stages; ++stage) {
        std::vector<double> residuals(y.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            residuals[i] = y[i] - pred[i];
        auto tree = tree_fit(x, residuals, cfg.tree);
        for (std::size_t i = 0; i < y.size(); ++i)
            pred[i] += cfg.learning_rate * tree_predict(*tree, x[i]);
        model.stages.push_back(std::move(tree));
    }
    return model;
}

double gbr_predict(const GbrModel& model, const std::vector<double>& query) {
    double y = model.init_value;
    for (const auto& t : model.stages)
        y += model.learning_rate * tree_predict(*t, query);
    return y;
}

// ---- k-nearest neighbors ----

double knn_predict(const std::vector<std::vector<double>>& train_x,
                   const std::vector<double>& train_y,
                   const std::vector<double>& query, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > train_x.size())
        throw std::invalid_argument("knn_predict: need 1 <= K <= n, got K=" +
                                    std::to_string(k) + " n=" +
                                    std::to_string(train_x.size()));
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(train_x.size());
    for (std::size_t i = 0; i < train_x.size(); ++i) {
        double sq = 0;
        for (std::size_t j = 0; j < query.size(); ++j)
            sq += (train_x[i][j] - query[j]) * (train_x[i][j] - query[j]);
        dist.emplace_back(sq, i);
    }
    // Ties resolve to the lower row index.
    std::stable_sort(dist.begin(), dist.end(),
                     [](const auto& a, const auto& b) {
                         return a.first < b.first ||
                                (a.first == b.first && a.second < b.second);
                     });
    double s = 0;
    for (int i = 0; i < k; ++i) s += train_y[dist[static_cast<std::size_t>(i)].second];
    return s / static_cast<double>(k);
}

}  // namespace hea
