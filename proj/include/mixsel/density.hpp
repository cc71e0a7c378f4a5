#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "model.hpp"

namespace mixsel {

// A fully specified mixture distribution, detached from any sample.
// Serves both as simulation truth and as the evaluable form of a
// fitted estimate.
struct ModelSpec {
    CaseKind case_kind = CaseKind::Haploid;
    std::vector<int> states_per_variable;
    ModelIndex index;
    MixtureParams params;

    int L() const { return static_cast<int>(states_per_variable.size()); }
};

inline ModelSpec to_model_spec(const FittedModel& fm) {
    return ModelSpec{fm.case_kind, fm.states_per_variable, fm.index, fm.params};
}

inline void validate_model_spec(const ModelSpec& spec) {
    for (int a : spec.states_per_variable)
        if (a < 2) throw InvalidModel("states_per_variable entries must be >= 2");
    validate_params(spec.index, spec.states_per_variable, spec.params);
}

// One observation outside a Dataset; a2 is ignored for haploid rows.
struct GenotypeRow {
    std::vector<std::uint16_t> a1, a2;
};

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Sums a small buffer in ascending order; canonical under any
// permutation of the inputs.
inline double sorted_sum(double* buf, int k) {
    std::sort(buf, buf + k);
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += buf[i];
    return s;
}

// log(sum exp(s_k)) with max shift, addends consumed in sorted order.
inline double sorted_logsumexp(double* buf, int k) {
    std::sort(buf, buf + k);
    const double m = buf[k - 1];
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += std::exp(buf[i] - m);
    return m + std::log(s);
}

} // namespace detail

// Frequency vector governing variable l in cluster k (alpha when l is a
// clustering variable, the shared beta otherwise).
inline const std::vector<double>& frequencies_of(const ModelIndex& index, const MixtureParams& params,
                                                 int L, int l, int k) {
    auto pos = std::lower_bound(index.S.begin(), index.S.end(), l);
    if (pos != index.S.end() && *pos == l) return params.alpha[k][pos - index.S.begin()];
    // position of l within the sorted complement
    int c = l;
    for (int v : index.S) {
        if (v < l) --c;
        else break;
    }
    (void)L;
    return params.beta[c];
}

// Log-probability lookup tables for one (index, params) pair.
struct LogTables {
    std::vector<double> log_pi;
    std::vector<std::vector<std::vector<double>>> log_alpha;  // [K][|S|][A_l]
    std::vector<std::vector<double>> log_beta;                // [L-|S|][A_l]

    static LogTables build(const ModelIndex& index, const MixtureParams& params) {
        LogTables t;
        t.log_pi.resize(params.pi.size());
        for (std::size_t k = 0; k < params.pi.size(); ++k) t.log_pi[k] = std::log(params.pi[k]);
        t.log_alpha.resize(params.alpha.size());
        for (std::size_t k = 0; k < params.alpha.size(); ++k) {
            t.log_alpha[k].resize(params.alpha[k].size());
            for (std::size_t s = 0; s < params.alpha[k].size(); ++s) {
                t.log_alpha[k][s].resize(params.alpha[k][s].size());
                for (std::size_t j = 0; j < params.alpha[k][s].size(); ++j)
                    t.log_alpha[k][s][j] = std::log(params.alpha[k][s][j]);
            }
        }
        t.log_beta.resize(params.beta.size());
        for (std::size_t c = 0; c < params.beta.size(); ++c) {
            t.log_beta[c].resize(params.beta[c].size());
            for (std::size_t j = 0; j < params.beta[c].size(); ++j)
                t.log_beta[c][j] = std::log(params.beta[c][j]);
        }
        (void)index;
        return t;
    }
};

// Shared row kernels for Dataset columns and standalone rows. Cell is a
// callable l -> (a1, a2).
namespace detail {

template <typename Cell>
double row_component_log(const ModelIndex& index, const LogTables& t, CaseKind case_kind, int k, Cell&& cell) {
    double s = t.log_pi[k];
    for (std::size_t si = 0; si < index.S.size(); ++si) {
        const auto [a, b] = cell(index.S[si]);
        s += t.log_alpha[k][si][a];
        if (case_kind == CaseKind::Diploid) s += t.log_alpha[k][si][b];
    }
    return s;
}

// Everything outside the mixture bracket: the heterozygote doubling of
// clustering variables plus the full factors of non-clustering ones.
// One fixed accumulation order so every caller gets identical bits.
template <typename Cell>
double row_constant_log(const ModelIndex& index, const std::vector<int>& comp, const LogTables& t,
                        CaseKind case_kind, Cell&& cell) {
    constexpr double ln2 = 0.6931471805599453094;
    double c = 0.0;
    if (case_kind == CaseKind::Diploid) {
        for (int l : index.S) {
            const auto [a, b] = cell(l);
            if (a != b) c += ln2;
        }
    }
    for (std::size_t ci = 0; ci < comp.size(); ++ci) {
        const auto [a, b] = cell(comp[ci]);
        c += t.log_beta[ci][a];
        if (case_kind == CaseKind::Diploid) {
            c += t.log_beta[ci][b];
            if (a != b) c += ln2;
        }
    }
    return c;
}

template <typename Cell>
double row_log_density(const ModelIndex& index, const std::vector<int>& comp, const LogTables& t,
                       CaseKind case_kind, Cell&& cell, std::vector<double>& scratch) {
    const int K = index.K;
    scratch.resize(K);
    for (int k = 0; k < K; ++k) scratch[k] = row_component_log(index, t, case_kind, k, cell);
    return sorted_logsumexp(scratch.data(), K) + row_constant_log(index, comp, t, case_kind, cell);
}

} // namespace detail

// Exact density of one observation, evaluated in linear space with a
// canonical (sorted) component sum; returns 0.0 where a required
// frequency is 0.
template <typename Cell>
double density_cells(CaseKind case_kind, const std::vector<int>& states, const ModelIndex& index,
                     const MixtureParams& params, Cell&& cell) {
    const int L = static_cast<int>(states.size());
    const auto comp = complement_of(index, L);
    std::vector<double> terms(index.K);
    for (int k = 0; k < index.K; ++k) {
        double t = params.pi[k];
        for (std::size_t si = 0; si < index.S.size(); ++si) {
            const auto [a, b] = cell(index.S[si]);
            t *= params.alpha[k][si][a];
            if (case_kind == CaseKind::Diploid) t *= params.alpha[k][si][b];
        }
        terms[k] = t;
    }
    double p = detail::sorted_sum(terms.data(), index.K);
    if (case_kind == CaseKind::Diploid)
        for (int l : index.S) {
            const auto [a, b] = cell(l);
            if (a != b) p *= 2.0;
        }
    for (std::size_t ci = 0; ci < comp.size(); ++ci) {
        const auto [a, b] = cell(comp[ci]);
        p *= params.beta[ci][a];
        if (case_kind == CaseKind::Diploid) {
            p *= params.beta[ci][b];
            if (a != b) p *= 2.0;
        }
    }
    return p;
}

inline double density(const Dataset& ds, int row, const ModelIndex& index, const MixtureParams& params) {
    return density_cells(ds.case_kind, ds.states_per_variable, index, params, [&](int l) {
        return std::pair<std::uint16_t, std::uint16_t>(
            ds.a1[l][row], ds.case_kind == CaseKind::Diploid ? ds.a2[l][row] : ds.a1[l][row]);
    });
}

inline double density_point(const ModelSpec& spec, const GenotypeRow& row) {
    return density_cells(spec.case_kind, spec.states_per_variable, spec.index, spec.params, [&](int l) {
        return std::pair<std::uint16_t, std::uint16_t>(
            row.a1[l], spec.case_kind == CaseKind::Diploid ? row.a2[l] : row.a1[l]);
    });
}

inline double log_density_point(const ModelSpec& spec, const GenotypeRow& row) {
    const LogTables t = LogTables::build(spec.index, spec.params);
    const auto comp = complement_of(spec.index, spec.L());
    std::vector<double> scratch;
    return detail::row_log_density(spec.index, comp, t, spec.case_kind,
                                   [&](int l) {
                                       return std::pair<std::uint16_t, std::uint16_t>(
                                           row.a1[l],
                                           spec.case_kind == CaseKind::Diploid ? row.a2[l] : row.a1[l]);
                                   },
                                   scratch);
}

// Per-observation log of the mixture via max-shifted exponential sums;
// -inf when any observation has zero density.
inline double log_likelihood(const Dataset& ds, const ModelIndex& index, const MixtureParams& params) {
    const LogTables t = LogTables::build(index, params);
    const auto comp = complement_of(index, ds.L);
    std::vector<double> scratch;
    double ll = 0.0;
    for (int i = 0; i < ds.n; ++i) {
        ll += detail::row_log_density(index, comp, t, ds.case_kind,
                                      [&](int l) {
                                          return std::pair<std::uint16_t, std::uint16_t>(
                                              ds.a1[l][i],
                                              ds.case_kind == CaseKind::Diploid ? ds.a2[l][i] : ds.a1[l][i]);
                                      },
                                      scratch);
    }
    return ll;
}

inline double contrast(const Dataset& ds, const ModelIndex& index, const MixtureParams& params) {
    return -log_likelihood(ds, index, params) / ds.n;
}

// ---------------------------------------------------------------------------
// Full sample-space enumeration (haploid states, or unordered diploid
// genotypes with A_l(A_l+1)/2 cells per variable).

inline long long cell_count(CaseKind case_kind, int A) {
    return case_kind == CaseKind::Haploid ? A : static_cast<long long>(A) * (A + 1) / 2;
}

inline long long space_size(CaseKind case_kind, const std::vector<int>& states, long long cap) {
    long long size = 1;
    for (int a : states) {
        size *= cell_count(case_kind, a);
        if (size > cap)
            throw SpaceTooLarge("sample space exceeds " + std::to_string(cap) + " points; use the Monte Carlo path");
    }
    return size;
}

// Probabilities of every cell of variable l under cluster k, in
// canonical cell order (states ascending; genotype pairs (a,b), a <= b,
// lexicographic, heterozygotes carrying the factor 2).
inline std::vector<double> cell_probs(const ModelSpec& spec, int l, int k) {
    const auto& f = frequencies_of(spec.index, spec.params, spec.L(), l, k);
    const int A = spec.states_per_variable[l];
    std::vector<double> out;
    if (spec.case_kind == CaseKind::Haploid) {
        out = f;
    } else {
        out.reserve(static_cast<std::size_t>(cell_count(spec.case_kind, A)));
        for (int a = 0; a < A; ++a)
            for (int b = a; b < A; ++b) out.push_back(a == b ? f[a] * f[a] : 2.0 * f[a] * f[b]);
    }
    return out;
}

// Visits density values over the whole space in canonical point order
// (variable 0 slowest). Per-cluster partial products are carried down
// the variable tree; the component sum at each leaf is canonical.
template <typename F>
void for_each_point_density(const ModelSpec& spec, F&& f, long long cap = 1000000) {
    space_size(spec.case_kind, spec.states_per_variable, cap);
    const int L = spec.L();
    const int K = spec.index.K;
    std::vector<std::vector<std::vector<double>>> probs(K);  // [k][l][cell]
    for (int k = 0; k < K; ++k) {
        probs[k].resize(L);
        for (int l = 0; l < L; ++l) probs[k][l] = cell_probs(spec, l, k);
    }
    std::vector<std::vector<double>> partial(L + 1, std::vector<double>(K));
    for (int k = 0; k < K; ++k) partial[0][k] = spec.params.pi[k];
    std::vector<double> leaf(K);

    auto recurse = [&](auto&& self, int l) -> void {
        if (l == L) {
            std::copy(partial[L].begin(), partial[L].end(), leaf.begin());
            f(detail::sorted_sum(leaf.data(), K));
            return;
        }
        const std::size_t cells = probs[0][l].size();
        for (std::size_t c = 0; c < cells; ++c) {
            for (int k = 0; k < K; ++k) partial[l + 1][k] = partial[l][k] * probs[k][l][c];
            self(self, l + 1);
        }
    };
    recurse(recurse, 0);
}

// Total probability mass by enumeration; equals 1 for any valid model.
inline double total_mass(const ModelSpec& spec, long long cap = 1000000) {
    double sum = 0.0;
    for_each_point_density(spec, [&](double p) { sum += p; }, cap);
    return sum;
}

} // namespace mixsel
