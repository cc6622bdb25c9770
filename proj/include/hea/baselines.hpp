#pragma once
// The five classical regressors, built from their closed forms: Gaussian
// process posterior, decision tree, random forest, gradient boosting,
// K-nearest neighbors; plus the composition -> element-fraction design
// matrix expansion.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hea/chem.hpp"

namespace hea {

struct DesignMatrix {
    std::vector<std::string> column_names;  // features first, then elements
    std::vector<std::vector<double>> rows;  // n x m
    std::vector<double> target;
};

struct DesignRow {
    std::string composition;
    std::vector<double> features;  // may be empty (no-features mode)
    double target = 0;
};

/// Element columns hold atomic fractions; elements absent from a row are 0.
/// Column order: the given feature names, then the dataset's element union
/// alphabetically.
DesignMatrix expand_design_matrix(const std::vector<DesignRow>& rows,
                                  const std::vector<std::string>& feature_names);

// ---- Gaussian process ----

struct GpConfig {
    double constant = 1.0;      // kernel amplitude
    double length_scale = 1.0;  // RBF length scale
    double noise = 1e-2;        // sigma_n^2
};

struct GpModel {
    GpConfig cfg;
    std::vector<std::vector<double>> train_x;
    std::vector<double> alpha;               // (K + sigma_n^2 I)^-1 y
    std::vector<std::vector<double>> chol;   // lower Cholesky factor
};

struct GpPrediction {
    double mean;
    double variance;  // clamped at 0 within -1e-10
};

GpModel gp_fit(const std::vector<std::vector<double>>& x,
               const std::vector<double>& y, const GpConfig& cfg);
GpPrediction gp_predict(const GpModel& model, const std::vector<double>& query);

double rbf_kernel(const GpConfig& cfg, const std::vector<double>& a,
                  const std::vector<double>& b);

// ---- decision tree ----

struct TreeNode {
    bool is_leaf = true;
    double value = 0;        // leaf mean
    int feature = -1;
    double threshold = 0;    // x[feature] <= threshold -> left
    std::unique_ptr<TreeNode> left, right;
};

struct TreeConfig {
    int max_depth = -1;  // -1 = unlimited
    int min_leaf = 1;
    std::vector<std::size_t> feature_subset;  // empty = all features
};

std::unique_ptr<TreeNode> tree_fit(const std::vector<std::vector<double>>& x,
                                   const std::vector<double>& y,
                                   const TreeConfig& cfg);
double tree_predict(const TreeNode& node, const std::vector<double>& query);

// ---- random forest ----

struct ForestConfig {
    int n_trees = 100;
    bool bootstrap = true;
    double feature_subsample = 1.0;  // fraction of features per tree
    TreeConfig tree;
    std::uint64_t seed = 0;
};

struct ForestModel {
    std::vector<std::unique_ptr<TreeNode>> trees;
};

ForestModel rf_fit(const std::vector<std::vector<double>>& x,
                   const std::vector<double>& y, const ForestConfig& cfg);
double rf_predict(const ForestModel& model, const std::vector<double>& query);

// ---- gradient boosting ----

struct GbrConfig {
    int n_stages = 100;
    double learning_rate = 0.1;
    TreeConfig tree{3, 1};  // depth-3 stage trees
};

struct GbrModel {
    double init_value = 0;  // mean of y
    double learning_rate = 0.1;
    std::vector<std::unique_ptr<TreeNode>> stages;
};

GbrModel gbr_fit(const std::vector<std::vector<double>>& x,
                 const std::vector<double>& y, const GbrConfig& cfg);
double gbr_predict(const GbrModel& model, const std::vector<double>& query);

// ---- k-nearest neighbors ----

/// Euclidean distances, ties broken by lower row index, mean of the K
/// selected targets.
double knn_predict(const std::vector<std::vector<double>>& train_x,
                   const std::vector<double>& train_y,
                   const std::vector<double>& query, int k);

}  // namespace hea
