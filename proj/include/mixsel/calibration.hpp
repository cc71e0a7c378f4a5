#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "errors.hpp"
#include "explorer.hpp"

namespace mixsel {

// Selected model per grid value; the parsimony tie-break makes the
// dimension sequence non-increasing, which is what the jump detector
// reads.
struct DimensionPath {
    std::vector<double> lambdas;
    std::vector<ModelIndex> selected;
    std::vector<long long> dims;

    int size() const { return static_cast<int>(lambdas.size()); }
};

inline DimensionPath dimension_path(const ModelPool& pool, const std::vector<double>& lambda_grid) {
    if (pool.empty()) throw EmptyPool("dimension path over an empty pool");
    for (std::size_t i = 1; i < lambda_grid.size(); ++i)
        if (!(lambda_grid[i] > lambda_grid[i - 1])) throw InputError("lambda grid must be ascending");
    const auto models = pool.as_vector();
    DimensionPath path;
    path.lambdas = lambda_grid;
    path.selected.reserve(lambda_grid.size());
    path.dims.reserve(lambda_grid.size());
    for (double lambda : lambda_grid) {
        const FittedModel& fm = select_fitted_under_penalty(models, Penalty::raw_lambda(lambda));
        path.selected.push_back(fm.index);
        path.dims.push_back(fm.dimension);
    }
    return path;
}

// Sliding-window jump: the window end is the smallest grid position
// maximizing the dimension drop across h intervals, the window start is
// the latest position inside the window still at the pre-jump level,
// and the estimate is the midpoint of the two lambdas.
struct JumpResult {
    double lambda_min_hat = 0.0;
    int i_init = 0;  // 0-based grid positions
    int i_end = 0;
    long long drop = 0;
};

inline JumpResult dimension_jump(const DimensionPath& path, int h) {
    const int r = path.size();
    if (h < 1 || h > r - 1) throw InputError("window h must satisfy 1 <= h <= r-1");
    long long best_drop = -1;
    int i_end = -1;
    for (int i = h; i < r; ++i) {
        const long long drop = path.dims[i - h] - path.dims[i];
        if (drop > best_drop) {
            best_drop = drop;
            i_end = i;
        }
    }
    if (best_drop <= 0)
        throw FlatPath("no dimension jump: the selected dimension never drops over the grid");
    int i_init = i_end - 1;
    for (int j = i_end - 1; j >= i_end - h; --j)
        if (path.dims[j] - path.dims[i_end] == best_drop) {
            i_init = j;
            break;
        }
    return JumpResult{(path.lambdas[i_init] + path.lambdas[i_end]) / 2.0, i_init, i_end, best_drop};
}

// Minimal-penalty estimate as the slope of contrast ~ D/n over the
// most complex part of the pool (default: largest-dimension half).
inline double slope_regression(const std::vector<FittedModel>& models) {
    if (models.empty()) throw EmptyPool("slope regression over an empty pool");
    std::vector<double> xs, ys;
    xs.reserve(models.size());
    ys.reserve(models.size());
    for (const auto& fm : models) {
        if (!std::isfinite(fm.contrast)) continue;
        xs.push_back(static_cast<double>(fm.dimension) / fm.n);
        ys.push_back(fm.contrast);
    }
    if (xs.size() < 2) throw DegenerateRegression("slope regression needs at least two finite fits");
    const double x_mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double y_mean = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - x_mean) * (xs[i] - x_mean);
        sxy += (xs[i] - x_mean) * (ys[i] - y_mean);
    }
    if (sxx == 0.0) throw DegenerateRegression("all models in the regression share one dimension");
    return -sxy / sxx;
}

// Default sub-pool: models whose dimension reaches the upper half of
// the pool's dimension range by rank.
inline std::vector<FittedModel> largest_dimension_half(const ModelPool& pool) {
    auto models = pool.as_vector();
    std::sort(models.begin(), models.end(), [](const FittedModel& a, const FittedModel& b) {
        if (a.dimension != b.dimension) return a.dimension > b.dimension;
        return a.index < b.index;
    });
    models.resize(std::max<std::size_t>(2, (models.size() + 1) / 2));
    return models;
}

inline double slope_regression(const ModelPool& pool) {
    return slope_regression(largest_dimension_half(pool));
}

// Window given either as a count of grid intervals or as a lambda
// width; widths convert on the uniform grid as h = max(1, round(w/d)).
struct WindowSpec {
    enum class Kind { Intervals, Width };
    Kind kind = Kind::Width;
    double value = 0.15;

    static WindowSpec intervals(int h) { return {Kind::Intervals, static_cast<double>(h)}; }
    static WindowSpec width(double w) { return {Kind::Width, w}; }

    int resolve(const std::vector<double>& grid) const {
        if (kind == Kind::Intervals) return static_cast<int>(value);
        if (!(value > 0)) throw InputError("window width must be positive");
        const double step = (grid.back() - grid.front()) / (static_cast<int>(grid.size()) - 1);
        const int h = std::max(1, static_cast<int>(std::lround(value / step)));
        return std::min<int>(h, static_cast<int>(grid.size()) - 1);
    }
};

struct CalibrationResult {
    std::vector<double> lambda_grid;
    std::vector<ModelIndex> selected_per_lambda;
    std::vector<long long> dims_per_lambda;
    double lambda_min_hat = 0.0;
    int window_h = 1;
    ModelIndex final_selection;
    long long final_dimension = 0;
    int jump_i_init = -1;  // -1 when the estimate came from a fallback
    int jump_i_end = -1;
    std::string method = "dimension_jump";  // or slope_regression / widened_grid
};

// Full calibration: dimension path, sliding-window jump, final
// selection under twice the estimated minimal multiplier. When the
// path is flat the fallback order is slope regression, then a grid
// widened to 2 ln n, then FlatPath.
inline CalibrationResult calibrate_and_select(const ModelPool& pool, const std::vector<double>& grid,
                                              const WindowSpec& window, long long n) {
    CalibrationResult result;
    DimensionPath path = dimension_path(pool, grid);
    result.lambda_grid = grid;
    result.selected_per_lambda = path.selected;
    result.dims_per_lambda = path.dims;
    result.window_h = window.resolve(grid);

    try {
        const JumpResult jump = dimension_jump(path, result.window_h);
        result.lambda_min_hat = jump.lambda_min_hat;
        result.jump_i_init = jump.i_init;
        result.jump_i_end = jump.i_end;
    } catch (const FlatPath&) {
        bool recovered = false;
        try {
            result.lambda_min_hat = slope_regression(pool);
            result.method = "slope_regression";
            recovered = result.lambda_min_hat > 0.0;
        } catch (const DegenerateRegression&) {
            recovered = false;
        }
        if (!recovered) {
            GridSpec wide;
            wide.lo = grid.front();
            wide.hi = 2.0 * std::log(static_cast<double>(n));
            wide.count = static_cast<int>(grid.size());
            if (wide.hi <= wide.lo)
                throw FlatPath("flat dimension path and no usable widened grid");
            const auto wide_grid = wide.resolve(n);
            DimensionPath wide_path = dimension_path(pool, wide_grid);
            const JumpResult jump = dimension_jump(wide_path, window.resolve(wide_grid));  // may rethrow
            result.lambda_grid = wide_grid;
            result.selected_per_lambda = wide_path.selected;
            result.dims_per_lambda = wide_path.dims;
            result.window_h = window.resolve(wide_grid);
            result.lambda_min_hat = jump.lambda_min_hat;
            result.jump_i_init = jump.i_init;
            result.jump_i_end = jump.i_end;
            result.method = "widened_grid";
        }
    }

    const FittedModel& final_fm = select_fitted_under_penalty(
        pool.as_vector(), Penalty::raw_lambda(2.0 * result.lambda_min_hat));
    result.final_selection = final_fm.index;
    result.final_dimension = final_fm.dimension;
    return result;
}

} // namespace mixsel
