#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lolrec/errors.hpp"

namespace lolrec {

/// One local linear regression expert E(k, w): the k nearest length-w windows
/// of the return series, exponentially kernel-weighted, fit with a
/// ridge-regularized weighted least squares of degree 1.
struct ExpertSpec {
    int k = 1;                       // neighbour count
    int w = 1;                       // lookback window size
    double ridge = 0.01;             // L2 penalty on the slope terms
    static constexpr int degree = 1; // local *linear* regression, fixed

    void validate() const {
        if (k < 1) throw error("ExpertSpec: k must be >= 1, got " + std::to_string(k));
        if (w < 1) throw error("ExpertSpec: w must be >= 1, got " + std::to_string(w));
        if (!(ridge >= 0.0)) throw error("ExpertSpec: ridge must be >= 0");
    }
};

/// Sliding-window view of a series: the row for label series[t] carries
/// predictors (series[t-1], ..., series[t-w]), most recent first. A series of
/// length n yields n - w rows; row r has label index r + w.
struct WindowedSet {
    std::size_t width = 0;             // w
    std::size_t first_label_index = 0; // = w
    std::vector<double> labels;        // n - w entries
    std::vector<double> predictors;    // row-major, (n - w) x w

    std::size_t rows() const { return labels.size(); }

    std::span<const double> predictor_row(std::size_t r) const {
        return {predictors.data() + r * width, width};
    }
};

inline WindowedSet windowize(std::span<const double> series, int w) {
    if (w < 1) throw error("windowize: w must be >= 1");
    const auto width = static_cast<std::size_t>(w);
    if (series.size() <= width)
        throw error("windowize: series length " + std::to_string(series.size()) +
                    " leaves no trainable row for w=" + std::to_string(w));
    WindowedSet set;
    set.width = width;
    set.first_label_index = width;
    const std::size_t n_rows = series.size() - width;
    set.labels.reserve(n_rows);
    set.predictors.reserve(n_rows * width);
    for (std::size_t t = width; t < series.size(); ++t) {
        set.labels.push_back(series[t]);
        for (std::size_t j = 0; j < width; ++j)
            set.predictors.push_back(series[t - 1 - j]);
    }
    return set;
}

struct Neighbor {
    std::size_t row;     // index into the training set
    double distance;     // Euclidean distance from the query window
};

/// The min(k, row_limit) training rows closest to the query in Euclidean
/// distance, ascending; ties go to the older (lower-index) row. `row_limit`
/// restricts the search to the first rows of `train`, which is how a backtest
/// keeps training strictly causal while windowizing a series only once.
inline std::vector<Neighbor> knn_select(std::span<const double> query, const WindowedSet& train,
                                        int k, std::size_t row_limit) {
    if (k < 1) throw error("knn_select: k must be >= 1");
    if (query.size() != train.width)
        throw error("knn_select: query width " + std::to_string(query.size()) +
                    " != training width " + std::to_string(train.width));
    const std::size_t n = std::min(row_limit, train.rows());
    if (n == 0) throw error("knn_select: empty training set");

    std::vector<Neighbor> candidates;
    candidates.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* p = train.predictors.data() + r * train.width;
        double sq = 0.0;
        for (std::size_t j = 0; j < train.width; ++j) {
            const double diff = query[j] - p[j];
            sq += diff * diff;
        }
        candidates.push_back({r, std::sqrt(sq)});
    }
    const std::size_t kk = std::min(static_cast<std::size_t>(k), n);
    std::partial_sort(candidates.begin(), candidates.begin() + kk, candidates.end(),
                      [](const Neighbor& a, const Neighbor& b) {
                          return a.distance < b.distance ||
                                 (a.distance == b.distance && a.row < b.row);
                      });
    candidates.resize(kk);
    return candidates;
}

inline std::vector<Neighbor> knn_select(std::span<const double> query, const WindowedSet& train, int k) {
    return knn_select(query, train, k, train.rows());
}

/// Bandwidth floor: keeps exp(-d/h) defined when every neighbour sits at
/// distance zero.
inline constexpr double kernel_bandwidth_floor = 1e-12;

/// Exponential kernel with adaptive bandwidth: weight_i = exp(-d_i / h) where
/// h is the distance to the k-th (farthest selected) neighbour. Distances must
/// come in ascending, so all weights land in [1/e, 1].
inline std::vector<double> kernel_weights(std::span<const double> distances) {
    if (distances.empty()) throw error("kernel_weights: no distances");
    const double h = std::max(distances.back(), kernel_bandwidth_floor);
    std::vector<double> weights;
    weights.reserve(distances.size());
    for (double d : distances) weights.push_back(std::exp(-d / h));
    return weights;
}

/// A (label, predictors) pair viewed from some WindowedSet.
struct TrainingRow {
    double label;
    std::span<const double> predictors;
};

namespace detail {

/// Gaussian elimination with partial pivoting on a dense (dim x dim) system.
/// Throws singular_system when a pivot collapses, which with the ridge term in
/// place can only happen at ridge = 0.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t dim) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    const double tiny = scale * 1e-13;

    for (std::size_t col = 0; col < dim; ++col) {
        std::size_t pivot = col;
        double best = std::abs(a[col * dim + col]);
        for (std::size_t r = col + 1; r < dim; ++r) {
            const double mag = std::abs(a[r * dim + col]);
            if (mag > best) {
                best = mag;
                pivot = r;
            }
        }
        if (!(best > tiny) || !std::isfinite(best))
            throw singular_system("normal equations are singular (pivot " + std::to_string(best) +
                                  " at column " + std::to_string(col) + ")");
        if (pivot != col) {
            for (std::size_t c = col; c < dim; ++c)
                std::swap(a[pivot * dim + c], a[col * dim + c]);
            std::swap(b[pivot], b[col]);
        }
        for (std::size_t r = col + 1; r < dim; ++r) {
            const double f = a[r * dim + col] / a[col * dim + col];
            if (f == 0.0) continue;
            a[r * dim + col] = 0.0;
            for (std::size_t c = col + 1; c < dim; ++c)
                a[r * dim + c] -= f * a[col * dim + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> beta(dim);
    for (std::size_t i = dim; i-- > 0;) {
        double acc = b[i];
        for (std::size_t j = i + 1; j < dim; ++j)
            acc -= a[i * dim + j] * beta[j];
        beta[i] = acc / a[i * dim + i];
    }
    return beta;
}

} // namespace detail

/// Weighted ridge regression via the normal equations. Minimizes
///   sum_i weight_i * (label_i - b0 - b1 . predictors_i)^2 + ridge * |b1|^2
/// and returns (b0, b1...) with the intercept first. Only the slope terms are
/// penalized, never the intercept.
inline std::vector<double> fit_local_linear(std::span<const TrainingRow> rows,
                                            std::span<const double> weights, double ridge) {
    if (rows.empty()) throw error("fit_local_linear: no rows");
    if (rows.size() != weights.size())
        throw error("fit_local_linear: " + std::to_string(rows.size()) + " rows vs " +
                    std::to_string(weights.size()) + " weights");
    if (!(ridge >= 0.0)) throw error("fit_local_linear: ridge must be >= 0");
    const std::size_t w = rows[0].predictors.size();
    if (w == 0) throw error("fit_local_linear: empty predictor vectors");
    for (const auto& row : rows)
        if (row.predictors.size() != w)
            throw error("fit_local_linear: ragged predictor widths");
    for (double wt : weights)
        if (!(wt > 0.0) || !std::isfinite(wt))
            throw error("fit_local_linear: weights must be positive and finite");

    const std::size_t dim = w + 1;
    std::vector<double> a(dim * dim, 0.0), b(dim, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double wt = weights[i];
        const auto x = rows[i].predictors;
        const double y = rows[i].label;
        a[0] += wt;
        b[0] += wt * y;
        for (std::size_t j = 0; j < w; ++j) {
            const double wx = wt * x[j];
            a[(j + 1) * dim] += wx;              // column 0 of row j+1
            b[j + 1] += wx * y;
            for (std::size_t l = j; l < w; ++l)
                a[(j + 1) * dim + (l + 1)] += wx * x[l];
        }
    }
    // mirror the symmetric part and add the ridge to the slope diagonal
    for (std::size_t j = 1; j < dim; ++j)
        a[j] = a[j * dim];
    for (std::size_t j = 1; j < dim; ++j)
        for (std::size_t l = j + 1; l < dim; ++l)
            a[l * dim + j] = a[j * dim + l];
    for (std::size_t j = 1; j < dim; ++j)
        a[j * dim + j] += ridge;

    return detail::solve_dense(std::move(a), std::move(b), dim);
}

inline double evaluate_linear(std::span<const double> coefficients, std::span<const double> query) {
    if (coefficients.size() != query.size() + 1)
        throw error("evaluate_linear: coefficient/query size mismatch");
    double value = coefficients[0];
    for (std::size_t j = 0; j < query.size(); ++j)
        value += coefficients[j + 1] * query[j];
    return value;
}

/// Kernel-weight the neighbours, fit, and evaluate at the query window. The
/// single code path shared by expert_predict and the batched committee
/// evaluation, so the two are bit-identical by construction.
inline double knn_fit_predict(const WindowedSet& train, std::span<const Neighbor> neighbors,
                              double ridge, std::span<const double> query) {
    std::vector<double> distances;
    distances.reserve(neighbors.size());
    for (const auto& nb : neighbors) distances.push_back(nb.distance);
    const auto weights = kernel_weights(distances);
    std::vector<TrainingRow> rows;
    rows.reserve(neighbors.size());
    for (const auto& nb : neighbors)
        rows.push_back({train.labels[nb.row], train.predictor_row(nb.row)});
    const auto beta = fit_local_linear(rows, weights, ridge);
    return evaluate_linear(beta, query);
}

/// A single expert's one-step-ahead estimate e_ij.
struct ExpertEstimate {
    double value;
    std::string asset;
    std::size_t period;
    ExpertSpec spec;
};

/// Predict series[i] from the strict prefix series[0..i). Training rows use
/// only labels with index < i; the query window is the w most recent observed
/// values (series[i-1], ..., series[i-w]). Returns nullopt when i < w + 1,
/// i.e. when not a single training row exists yet. i == series.size() is
/// valid and predicts the first unseen value. No validation split of any kind.
inline std::optional<double> try_expert_predict(std::span<const double> series, std::size_t i,
                                                const ExpertSpec& spec) {
    spec.validate();
    const auto w = static_cast<std::size_t>(spec.w);
    if (i > series.size())
        throw error("expert_predict: period " + std::to_string(i) + " beyond series end");
    if (i < w + 1) return std::nullopt;

    const WindowedSet train = windowize(series.first(i), spec.w);
    std::vector<double> query(w);
    for (std::size_t j = 0; j < w; ++j) query[j] = series[i - 1 - j];
    const auto neighbors = knn_select(query, train, spec.k);
    return knn_fit_predict(train, neighbors, spec.ridge, query);
}

inline ExpertEstimate expert_predict(std::span<const double> series, std::size_t i,
                                     const ExpertSpec& spec, std::string asset = {}) {
    auto value = try_expert_predict(series, i, spec);
    if (!value)
        throw error("expert_predict: insufficient history at period " + std::to_string(i) +
                    " for w=" + std::to_string(spec.w));
    return ExpertEstimate{*value, std::move(asset), i, spec};
}

} // namespace lolrec
