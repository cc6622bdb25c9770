#pragma once
// Leak-free K-fold evaluation: splits, standardization, metrics, Z-score
// outlier detection, dataset summaries, fold aggregation.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hea {

struct ScalerParams {
    std::vector<double> mu;
    std::vector<double> sigma;  // population std-dev, floored at 1e-12
};

struct FoldReport {
    int fold = 0;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices;
    std::vector<double> predictions;  // original scale, parallel to val_indices
    std::vector<double> actuals;
    std::vector<double> residuals;    // actual - prediction
    double mse = 0, mae = 0;
    std::optional<double> r2;         // unset when actuals are constant
    // Standardized-scale metrics, for model selection.
    double mse_scaled = 0, mae_scaled = 0;
    std::optional<double> r2_scaled;
    ScalerParams target_scaler;       // single-column mu/sigma of the target
};

struct Metrics {
    double mse = 0, mae = 0;
    std::optional<double> r2;  // unset when actuals are constant
};

struct OutlierFlag {
    std::size_t index;
    double z;
};

struct OutlierResult {
    std::vector<OutlierFlag> flagged;  // sorted by |z| descending
    bool constant_input = false;       // sigma == 0, nothing flaggable
};

struct DatasetSummary {
    std::map<std::string, double> element_totals;   // raw coefficient sums
    std::map<int, std::size_t> element_count_hist;  // #elements -> #rows
    std::vector<std::size_t> target_hist;           // bin counts
    double target_hist_min = 0, target_hist_max = 0;
    // feature name -> Pearson r with the target; unset when either side
    // is constant.
    std::vector<std::pair<std::string, std::optional<double>>> correlations;
};

struct AggregateReport {
    double mean_mse = 0, mean_mae = 0;
    std::optional<double> mean_r2;
    double best_mse = 0, best_mae = 0;
    std::optional<double> best_r2;
    // Combined per-row table ordered by original row index.
    std::vector<std::size_t> row_index;
    std::vector<int> fold;
    std::vector<double> actual, predicted, residual;
};

/// Seeded shuffle then contiguous partition; validation sets disjoint,
/// covering, sizes differing by at most 1.
std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
kfold_split(std::size_t n, int k, std::uint64_t seed);

/// columns[j][i] = value of column j at row i (training split only).
ScalerParams fit_scaler(const std::vector<std::vector<double>>& columns);
std::vector<std::vector<double>> apply_scaler(
    const ScalerParams& s, const std::vector<std::vector<double>>& columns);
std::vector<std::vector<double>> invert_scaler(
    const ScalerParams& s, const std::vector<std::vector<double>>& columns);

double apply_scaler1(const ScalerParams& s, std::size_t col, double v);
double invert_scaler1(const ScalerParams& s, std::size_t col, double v);

Metrics metrics(const std::vector<double>& pred,
                const std::vector<double>& actual);

OutlierResult zscore_outliers(const std::vector<double>& values,
                              double threshold = 3.0);

struct SummaryInput {
    std::string composition;              // canonical or raw formula
    std::vector<double> features;         // aligned with feature_names
    double target;
};

DatasetSummary dataset_summary(const std::vector<SummaryInput>& rows,
                               const std::vector<std::string>& feature_names,
                               int target_bins = 20);

AggregateReport aggregate(const std::vector<FoldReport>& reports);

std::optional<double> pearson(const std::vector<double>& x,
                              const std::vector<double>& y);

}  // namespace hea
