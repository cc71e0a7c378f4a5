#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace mixsel {

// Penalized criteria share the shape lambda * D / n; the kinds differ
// in where the multiplier comes from.
struct Penalty {
    enum class Kind { Aic, Bic, Theoretical, SlopeCalibrated, RawLambda };

    Kind kind = Kind::Bic;
    double param = 0.0;  // kappa for Theoretical, lambda otherwise

    static Penalty aic() { return {Kind::Aic, 0.0}; }
    static Penalty bic() { return {Kind::Bic, 0.0}; }
    static Penalty theoretical(double kappa) { return {Kind::Theoretical, kappa}; }
    static Penalty slope_calibrated(double lambda) { return {Kind::SlopeCalibrated, lambda}; }
    static Penalty raw_lambda(double lambda) { return {Kind::RawLambda, lambda}; }

    double value(const ModelIndex& index, long long n, const std::vector<int>& states_per_variable) const;

    std::string name() const {
        switch (kind) {
            case Kind::Aic: return "aic";
            case Kind::Bic: return "bic";
            case Kind::Theoretical: return "theoretical";
            case Kind::SlopeCalibrated: return "slope";
            case Kind::RawLambda: return "raw";
        }
        return "?";
    }
};

inline double pen_aic(const ModelIndex& index, long long n, const std::vector<int>& states) {
    return static_cast<double>(dimension(index, states)) / n;
}

inline double pen_bic(const ModelIndex& index, long long n, const std::vector<int>& states) {
    return std::log(static_cast<double>(n)) / (2.0 * n) * static_cast<double>(dimension(index, states));
}

// Entropy-based penalty bound, up to the multiplier kappa:
//   kappa (5 + sqrt(max(ln(n)/2 + ln(L)/2, ln(2)/2 + ln(L))))^2 D / n.
// For n >= 2L the max resolves to the first branch.
inline double pen_theoretical(const ModelIndex& index, long long n, int L, double kappa,
                              const std::vector<int>& states) {
    const double branch_n = 0.5 * std::log(static_cast<double>(n)) + 0.5 * std::log(static_cast<double>(L));
    const double branch_l = 0.5 * std::log(2.0) + std::log(static_cast<double>(L));
    const double root = 5.0 + std::sqrt(std::max(branch_n, branch_l));
    return kappa * root * root * static_cast<double>(dimension(index, states)) / n;
}

inline double Penalty::value(const ModelIndex& index, long long n,
                             const std::vector<int>& states_per_variable) const {
    switch (kind) {
        case Kind::Aic: return pen_aic(index, n, states_per_variable);
        case Kind::Bic: return pen_bic(index, n, states_per_variable);
        case Kind::Theoretical:
            return pen_theoretical(index, n, static_cast<int>(states_per_variable.size()), param,
                                   states_per_variable);
        case Kind::SlopeCalibrated:
        case Kind::RawLambda:
            return param * static_cast<double>(dimension(index, states_per_variable)) / n;
    }
    return 0.0;
}

// crit(m) = gamma_n(m) + pen(m); +inf contrasts propagate.
inline double criterion(const FittedModel& fitted, const Penalty& penalty) {
    return fitted.contrast + penalty.value(fitted.index, fitted.n, fitted.states_per_variable);
}

// Ties go to the smaller dimension, then smaller K, then
// lexicographically smaller S. This tie-break is what makes the
// selected dimension non-increasing in lambda.
inline bool selection_precedes(const FittedModel& a, double crit_a, const FittedModel& b, double crit_b) {
    if (crit_a != crit_b) return crit_a < crit_b;
    if (a.dimension != b.dimension) return a.dimension < b.dimension;
    if (a.index.K != b.index.K) return a.index.K < b.index.K;
    return std::lexicographical_compare(a.index.S.begin(), a.index.S.end(), b.index.S.begin(),
                                        b.index.S.end());
}

inline const FittedModel& select_fitted_under_penalty(const std::vector<FittedModel>& pool,
                                                      const Penalty& penalty) {
    if (pool.empty()) throw EmptyPool("selection over an empty model pool");
    const FittedModel* best = &pool.front();
    double best_crit = criterion(pool.front(), penalty);
    for (std::size_t i = 1; i < pool.size(); ++i) {
        const double c = criterion(pool[i], penalty);
        if (selection_precedes(pool[i], c, *best, best_crit)) {
            best = &pool[i];
            best_crit = c;
        }
    }
    return *best;
}

inline ModelIndex select_under_penalty(const std::vector<FittedModel>& pool, const Penalty& penalty) {
    return select_fitted_under_penalty(pool, penalty).index;
}

} // namespace mixsel
