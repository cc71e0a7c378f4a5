#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace mixsel {

enum class CaseKind { Haploid, Diploid };

inline const char* to_string(CaseKind c) {
    return c == CaseKind::Haploid ? "haploid" : "diploid";
}

inline CaseKind case_kind_from_string(const std::string& s) {
    if (s == "haploid") return CaseKind::Haploid;
    if (s == "diploid") return CaseKind::Diploid;
    throw InputError("unknown case kind '" + s + "' (expected haploid|diploid)");
}

constexpr double kSimplexTol = 1e-10;

// A model is a pair (K, S): K clusters and the set S of clustering
// variables. K = 1 forces S empty; K >= 2 requires S non-empty.
// Variables are 0-based internally, 1-based in files and reports.
struct ModelIndex {
    int K = 1;
    std::vector<int> S;  // sorted ascending

    friend bool operator==(const ModelIndex& a, const ModelIndex& b) {
        return a.K == b.K && a.S == b.S;
    }
    // Ordering for map keys: K first, then lexicographic S.
    friend bool operator<(const ModelIndex& a, const ModelIndex& b) {
        if (a.K != b.K) return a.K < b.K;
        return std::lexicographical_compare(a.S.begin(), a.S.end(), b.S.begin(), b.S.end());
    }

    bool contains(int var) const {
        return std::binary_search(S.begin(), S.end(), var);
    }

    std::uint64_t hash() const {
        std::uint64_t h = detail::mix64(static_cast<std::uint64_t>(K));
        for (int v : S) h = detail::mix64(h ^ detail::mix64(static_cast<std::uint64_t>(v) + 1));
        return h;
    }

    std::string to_label() const {
        std::string out = "K=" + std::to_string(K) + ",S={";
        for (std::size_t i = 0; i < S.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(S[i] + 1);
        }
        out += "}";
        return out;
    }
};

inline ModelIndex make_model_index(int K, std::vector<int> S, int L) {
    std::sort(S.begin(), S.end());
    S.erase(std::unique(S.begin(), S.end()), S.end());
    ModelIndex m{K, std::move(S)};
    if (K < 1) throw InvalidModel("K must be >= 1");
    if (K == 1 && !m.S.empty()) throw InvalidModel("K = 1 requires S empty");
    if (K >= 2 && m.S.empty()) throw InvalidModel("K >= 2 requires a non-empty S");
    for (int v : m.S)
        if (v < 0 || v >= L)
            throw InvalidModel("clustering variable " + std::to_string(v + 1) + " outside 1.." + std::to_string(L));
    return m;
}

// theta = (pi, alpha, beta). alpha[k][s] aligns with sorted S;
// beta[c] aligns with the sorted complement of S.
struct MixtureParams {
    std::vector<double> pi;
    std::vector<std::vector<std::vector<double>>> alpha;
    std::vector<std::vector<double>> beta;
};

inline std::vector<int> complement_of(const ModelIndex& index, int L) {
    std::vector<int> out;
    out.reserve(L - index.S.size());
    for (int l = 0; l < L; ++l)
        if (!index.contains(l)) out.push_back(l);
    return out;
}

inline bool is_simplex(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= 0.0)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= kSimplexTol;
}

inline void renormalize(std::vector<double>& v) {
    double sum = std::accumulate(v.begin(), v.end(), 0.0);
    if (sum > 0.0)
        for (double& x : v) x /= sum;
}

inline void validate_params(const ModelIndex& index, const std::vector<int>& states_per_variable,
                            const MixtureParams& params) {
    const int K = index.K;
    const int L = static_cast<int>(states_per_variable.size());
    if (static_cast<int>(params.pi.size()) != K) throw InvalidModel("pi has wrong length");
    if (!is_simplex(params.pi)) throw InvalidModel("pi is not a probability vector");
    if (static_cast<int>(params.alpha.size()) != K) throw InvalidModel("alpha has wrong cluster count");
    for (int k = 0; k < K; ++k) {
        if (params.alpha[k].size() != index.S.size()) throw InvalidModel("alpha row has wrong variable count");
        for (std::size_t s = 0; s < index.S.size(); ++s) {
            const int l = index.S[s];
            if (static_cast<int>(params.alpha[k][s].size()) != states_per_variable[l])
                throw InvalidModel("alpha frequency vector length != A_l for variable " + std::to_string(l + 1));
            if (!is_simplex(params.alpha[k][s]))
                throw InvalidModel("alpha frequencies of variable " + std::to_string(l + 1) + " not a simplex");
        }
    }
    const auto comp = complement_of(index, L);
    if (params.beta.size() != comp.size()) throw InvalidModel("beta has wrong variable count");
    for (std::size_t c = 0; c < comp.size(); ++c) {
        if (static_cast<int>(params.beta[c].size()) != states_per_variable[comp[c]])
            throw InvalidModel("beta frequency vector length != A_l for variable " + std::to_string(comp[c] + 1));
        if (!is_simplex(params.beta[c]))
            throw InvalidModel("beta frequencies of variable " + std::to_string(comp[c] + 1) + " not a simplex");
    }
}

// Number of free parameters:
//   D = K-1 + K * sum_{l in S} (A_l - 1) + sum_{l not in S} (A_l - 1).
inline long long dimension(const ModelIndex& index, const std::vector<int>& states_per_variable) {
    long long d = index.K - 1;
    long long rest = 0;
    for (int l = 0; l < static_cast<int>(states_per_variable.size()); ++l) rest += states_per_variable[l] - 1;
    for (int l : index.S) {
        d += static_cast<long long>(index.K) * (states_per_variable[l] - 1);
        rest -= states_per_variable[l] - 1;
    }
    return d + rest;
}

// Complexity constant of a model:
//   C = 1/2 [ ln(2*pi*e) D + ln(4*pi*e)(1_{K>=2} + L + (K-1)|S|)
//             + 1_{K>=2} ln(K+1) + sum_l ln(A_l+1) + (K-1) sum_{l in S} ln(A_l+1) ].
inline double model_complexity_constant(const ModelIndex& index,
                                        const std::vector<int>& states_per_variable) {
    const int L = static_cast<int>(states_per_variable.size());
    const double D = static_cast<double>(dimension(index, states_per_variable));
    const double k_ind = index.K >= 2 ? 1.0 : 0.0;
    double sum_all = 0.0, sum_s = 0.0;
    for (int l = 0; l < L; ++l) sum_all += std::log(states_per_variable[l] + 1.0);
    for (int l : index.S) sum_s += std::log(states_per_variable[l] + 1.0);
    const double two_pi_e = 2.0 * M_PI * M_E;
    const double four_pi_e = 4.0 * M_PI * M_E;
    return 0.5 * (std::log(two_pi_e) * D +
                  std::log(four_pi_e) * (k_ind + L + (index.K - 1) * static_cast<double>(index.S.size())) +
                  k_ind * std::log(index.K + 1.0) + sum_all + (index.K - 1) * sum_s);
}

// Small-sample guard constant:
//   haploid  xi = 4 sqrt(A_max) sqrt(L) / (2^{L+1} - 1)
//   diploid  xi = 4 sqrt(A_max) sqrt(L) / (2 (1+3 sqrt 2)^L - 1)
inline double xi_constant(CaseKind case_kind, int L, int A_max) {
    const double num = 4.0 * std::sqrt(static_cast<double>(A_max)) * std::sqrt(static_cast<double>(L));
    if (case_kind == CaseKind::Haploid) return num / (std::pow(2.0, L + 1) - 1.0);
    return num / (2.0 * std::pow(1.0 + 3.0 * std::sqrt(2.0), L) - 1.0);
}

// The risk bound applies when xi < 1 or n > xi^2 K.
inline bool theorem_precondition(long long n, int K, double xi) {
    return xi < 1.0 || static_cast<double>(n) > xi * xi * K;
}

// Fit diagnostics travel with the estimate; contrast is the negative
// mean log-likelihood of the final parameters.
struct FittedModel {
    ModelIndex index;
    MixtureParams params;
    double contrast = 0.0;
    long long dimension = 0;
    std::vector<double> loglik_trace;
    int n_restarts_used = 0;
    bool converged = false;
    double rho_slack = 0.0;  // screening gap between best and runner-up restart
    int n = 0;
    CaseKind case_kind = CaseKind::Haploid;
    std::vector<int> states_per_variable;
};

} // namespace mixsel
