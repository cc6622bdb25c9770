#include "hea/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hea/chem.hpp"
#include "hea/rng.hpp"

namespace hea {

std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
kfold_split(std::size_t n, int k, std::uint64_t seed) {
    if (k < 1 || n < static_cast<std::size_t>(k))
        throw std::invalid_argument("kfold_split: need n >= K, got n=" +
                                    std::to_string(n) + " K=" +
                                    std::to_string(k));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng = substream(seed, "split");
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
        folds;
    std::size_t base = n / static_cast<std::size_t>(k);
    std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t start = 0;
    for (int f = 0; f < k; ++f) {
        std::size_t sz = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
        std::vector<std::size_t> val(idx.begin() + static_cast<long>(start),
                                     idx.begin() + static_cast<long>(start + sz));
        std::vector<std::size_t> train;
        train.reserve(n - sz);
        for (std::size_t i = 0; i < n; ++i)
            if (i < start || i >= start + sz) train.push_back(idx[i]);
        folds.emplace_back(std::move(train), std::move(val));
        start += sz;
    }
    return folds;
}

ScalerParams fit_scaler(const std::vector<std::vector<double>>& columns) {
    ScalerParams s;
    for (const auto& col : columns) {
        if (col.empty())
            throw std::invalid_argument("fit_scaler: empty training column");
        double mu = std::accumulate(col.begin(), col.end(), 0.0) /
                    static_cast<double>(col.size());
        double var = 0;
        for (double v : col) var += (v - mu) * (v - mu);
        var /= static_cast<double>(col.size());  // population
        s.mu.push_back(mu);
        s.sigma.push_back(std::max(std::sqrt(var), 1e-12));
    }
    return s;
}

double apply_scaler1(const ScalerParams& s, std::size_t col, double v) {
    return (v - s.mu[col]) / s.sigma[col];
}

double invert_scaler1(const ScalerParams& s, std::size_t col, double v) {
    return v * s.sigma[col] + s.mu[col];
}

std::vector<std::vector<double>> apply_scaler(
    const ScalerParams& s, const std::vector<std::vector<double>>& columns) {
    std::vector<std::vector<double>> out = columns;
    for (std::size_t j = 0; j < out.size(); ++j)
        for (double& v : out[j]) v = apply_scaler1(s, j, v);
    return out;
}

std::vector<std::vector<double>> invert_scaler(
    const ScalerParams& s, const std::vector<std::vector<double>>& columns) {
    std::vector<std::vector<double>> out = columns;
    for (std::size_t j = 0; j < out.size(); ++j)
        for (double& v : out[j]) v = invert_scaler1(s, j, v);
    return out;
}

Metrics metrics(const std::vector<double>& pred,
                const std::vector<double>& actual) {
    if (pred.empty() || pred.size() != actual.size())
        throw std::invalid_argument("metrics: length mismatch or empty input");
    const double n = static_cast<double>(pred.size());
    Metrics m;
    double y_bar = std::accumulate(actual.begin(), actual.end(), 0.0) / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - actual[i];
        m.mse += d * d;
        m.mae += std::fabs(d);
        ss_res += d * d;
        ss_tot += (actual[i] - y_bar) * (actual[i] - y_bar);
    }
    m.mse /= n;
    m.mae /= n;
    if (ss_tot > 0) m.r2 = 1.0 - ss_res / ss_tot;
    return m;
}

OutlierResult zscore_outliers(const std::vector<double>& values,
                              double threshold) {
    if (values.size() < 2)
        throw std::invalid_argument("zscore_outliers: need at least 2 values");
    double mu = std::accumulate(values.begin(), values.end(), 0.0) /
                static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mu) * (v - mu);
    var /= static_cast<double>(values.size());
    double sigma = std::sqrt(var);
    OutlierResult res;
    if (sigma == 0) {
        res.constant_input = true;
        return res;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        double z = (values[i] - mu) / sigma;
        if (std::fabs(z) > threshold) res.flagged.push_back({i, z});
    }
    std::stable_sort(res.flagged.begin(), res.flagged.end(),
                     [](const OutlierFlag& a, const OutlierFlag& b) {
                         return std::fabs(a.z) > std::fabs(b.z);
                     });
    return res;
}

std::optional<double> pearson(const std::vector<double>& x,
                              const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty())
        throw std::invalid_argument("pearson: length mismatch or empty input");
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

DatasetSummary dataset_summary(const std::vector<SummaryInput>& rows,
                               const std::vector<std::string>& feature_names,
                               int target_bins) {
    if (rows.empty())
        throw std::invalid_argument("dataset_summary: empty dataset");
    if (target_bins < 1)
        throw std::invalid_argument("dataset_summary: need >= 1 bin");
    DatasetSummary s;
    std::vector<double> targets;
    for (const auto& row : rows) {
        Composition c = parse_composition(row.composition);
        for (const auto& e : c.entries)
            s.element_totals[e.element] += e.coefficient;
        s.element_count_hist[static_cast<int>(c.entries.size())] += 1;
        targets.push_back(row.target);
    }

    auto [mn, mx] = std::minmax_element(targets.begin(), targets.end());
    s.target_hist_min = *mn;
    s.target_hist_max = *mx;
    s.target_hist.assign(static_cast<std::size_t>(target_bins), 0);
    double width = (*mx - *mn) / target_bins;
    for (double t : targets) {
        std::size_t bin = 0;
        if (width > 0)
            bin = std::min<std::size_t>(
                static_cast<std::size_t>((t - *mn) / width),
                static_cast<std::size_t>(target_bins - 1));
        s.target_hist[bin] += 1;
    }

    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        std::vector<double> col;
        col.reserve(rows.size());
        for (const auto& row : rows) {
            if (j >= row.features.size())
                throw std::invalid_argument(
                    "dataset_summary: row missing feature column '" +
                    feature_names[j] + "'");
            col.push_back(row.features[j]);
        }
        s.correlations.emplace_back(feature_names[j], pearson(col, targets));
    }
    return s;
}

AggregateReport aggregate(const std::vector<FoldReport>& reports) {
    if (reports.empty())
        throw std::invalid_argument("aggregate: no fold reports");
    AggregateReport a;
    double r2_sum = 0;
    bool all_r2 = true;
    a.best_mse = reports[0].mse;
    a.best_mae = reports[0].mae;
    for (const auto& r : reports) {
        a.mean_mse += r.mse;
        a.mean_mae += r.mae;
        a.best_mse = std::min(a.best_mse, r.mse);
        a.best_mae = std::min(a.best_mae, r.mae);
        if (r.r2) {
            r2_sum += *r.r2;
            if (!a.best_r2 || *r.r2 > *a.best_r2) a.best_r2 = *r.r2;
        } else {
            all_r2 = false;
        }
    }
    const double k = static_cast<double>(reports.size());
    a.mean_mse /= k;
    a.mean_mae /= k;
    if (all_r2) a.mean_r2 = r2_sum / k;

    struct Row {
        std::size_t idx;
        int fold;
        double actual, pred;
    };
    std::vector<Row> combined;
    for (const auto& r : reports)
        for (std::size_t i = 0; i < r.val_indices.size(); ++i)
            combined.push_back(
                {r.val_indices[i], r.fold, r.actuals[i], r.predictions[i]});
    std::sort(combined.begin(), combined.end(),
              [](const Row& x, const Row& y) { return x.idx < y.idx; });
    for (const auto& row : combined) {
        a.row_index.push_back(row.idx);
        a.fold.push_back(row.fold);
        a.actual.push_back(row.actual);
        a.predicted.push_back(row.pred);
        a.residual.push_back(row.actual - row.pred);
    }
    return a;
}

}  // namespace hea
