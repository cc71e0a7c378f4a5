#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "density.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace mixsel {

struct EmConfig {
    int max_iterations = 500;
    double relative_tolerance = 1e-8;
    int n_restarts = 10;
    int short_run_iterations = 20;  // screening phase of each restart
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (max_iterations < 1 || n_restarts < 1 || short_run_iterations < 1)
            throw InputError("EM iteration/restart counts must be >= 1");
        if (!(relative_tolerance > 0)) throw InputError("EM tolerance must be > 0");
    }
};

// Posterior cluster memberships tau_{ik}, rows on the simplex.
struct Responsibilities {
    int n = 0;
    int K = 0;
    std::vector<double> tau;  // row-major n x K

    double at(int i, int k) const { return tau[static_cast<std::size_t>(i) * K + k]; }
    double& at(int i, int k) { return tau[static_cast<std::size_t>(i) * K + k]; }
};

// Pooled empirical state frequencies of one variable (allele counts over
// 2n for diploid data); this is the shared-beta maximizer.
inline std::vector<double> empirical_frequencies(const Dataset& ds, int l) {
    std::vector<double> counts(ds.states_per_variable[l], 0.0);
    for (int i = 0; i < ds.n; ++i) {
        counts[ds.a1[l][i]] += 1.0;
        if (ds.case_kind == CaseKind::Diploid) counts[ds.a2[l][i]] += 1.0;
    }
    const double total = ds.case_kind == CaseKind::Diploid ? 2.0 * ds.n : 1.0 * ds.n;
    for (double& c : counts) c /= total;
    return counts;
}

// tau_{ik} proportional to pi_k prod_{l in S} P(x_i^l | Z=k), normalized
// per row in log space; non-clustering variables cancel.
inline Responsibilities e_step(const Dataset& ds, const ModelIndex& index, const MixtureParams& params) {
    validate_params(index, ds.states_per_variable, params);
    const LogTables t = LogTables::build(index, params);
    Responsibilities resp{ds.n, index.K, std::vector<double>(static_cast<std::size_t>(ds.n) * index.K)};
    std::vector<double> s(index.K);
    for (int i = 0; i < ds.n; ++i) {
        auto cell = [&](int l) {
            return std::pair<std::uint16_t, std::uint16_t>(
                ds.a1[l][i], ds.case_kind == CaseKind::Diploid ? ds.a2[l][i] : ds.a1[l][i]);
        };
        for (int k = 0; k < index.K; ++k) s[k] = detail::row_component_log(index, t, ds.case_kind, k, cell);
        std::vector<double> sorted = s;
        const double lse = detail::sorted_logsumexp(sorted.data(), index.K);
        if (lse == detail::kNegInf)
            throw AllComponentsZero("observation " + std::to_string(i + 1) +
                                    " has zero density under every component");
        for (int k = 0; k < index.K; ++k) resp.at(i, k) = std::exp(s[k] - lse);
    }
    return resp;
}

// Weighted-count maximizer. Haploid clustering variables use state
// counts; diploid ones use allele counts c in {0,1,2} over 2*colsum.
// Every returned frequency vector is renormalized.
inline MixtureParams m_step(const Dataset& ds, const ModelIndex& index, const Responsibilities& resp) {
    const int K = index.K;
    std::vector<double> colsum(K, 0.0);
    for (int i = 0; i < ds.n; ++i)
        for (int k = 0; k < K; ++k) colsum[k] += resp.at(i, k);
    for (int k = 0; k < K; ++k)
        if (colsum[k] < 1e-10)
            throw EmptyCluster("component " + std::to_string(k + 1) + " has responsibility mass " +
                               std::to_string(colsum[k]));

    MixtureParams p;
    p.pi.resize(K);
    for (int k = 0; k < K; ++k) p.pi[k] = colsum[k] / ds.n;
    renormalize(p.pi);

    p.alpha.assign(K, std::vector<std::vector<double>>(index.S.size()));
    for (std::size_t si = 0; si < index.S.size(); ++si) {
        const int l = index.S[si];
        for (int k = 0; k < K; ++k) p.alpha[k][si].assign(ds.states_per_variable[l], 0.0);
        for (int i = 0; i < ds.n; ++i)
            for (int k = 0; k < K; ++k) {
                const double w = resp.at(i, k);
                p.alpha[k][si][ds.a1[l][i]] += w;
                if (ds.case_kind == CaseKind::Diploid) p.alpha[k][si][ds.a2[l][i]] += w;
            }
        const double denom_scale = ds.case_kind == CaseKind::Diploid ? 2.0 : 1.0;
        for (int k = 0; k < K; ++k) {
            for (double& v : p.alpha[k][si]) v /= denom_scale * colsum[k];
            renormalize(p.alpha[k][si]);
        }
    }

    const auto comp = complement_of(index, ds.L);
    p.beta.resize(comp.size());
    for (std::size_t ci = 0; ci < comp.size(); ++ci) {
        p.beta[ci] = empirical_frequencies(ds, comp[ci]);
        renormalize(p.beta[ci]);
    }
    return p;
}

namespace detail {

// Flat, cache-friendly EM kernels used by fit(). Tables are stored
// state-major with the cluster index contiguous, so the E-step inner
// loop walks both the data column and the table linearly.
class EmEngine {
public:
    EmEngine(const Dataset& ds, const ModelIndex& index) : ds_(ds), index_(index), K_(index.K) {
        offsets_.resize(index.S.size());
        int width = 0;
        for (std::size_t si = 0; si < index.S.size(); ++si) {
            offsets_[si] = width;
            width += ds.states_per_variable[index.S[si]];
        }
        width_ = width;
        log_alpha_.resize(static_cast<std::size_t>(width_) * K_);
        acc_.resize(log_alpha_.size());
        log_pi_.resize(K_);

        // Non-clustering factors never move during EM; bake the shared
        // beta and heterozygote constants into one per-row value.
        const auto comp = complement_of(index, ds.L);
        beta_.resize(comp.size());
        for (std::size_t ci = 0; ci < comp.size(); ++ci) beta_[ci] = empirical_frequencies(ds, comp[ci]);
        LogTables bt;
        bt.log_beta.resize(comp.size());
        for (std::size_t ci = 0; ci < comp.size(); ++ci) {
            bt.log_beta[ci].resize(beta_[ci].size());
            for (std::size_t j = 0; j < beta_[ci].size(); ++j) bt.log_beta[ci][j] = std::log(beta_[ci][j]);
        }
        row_const_.resize(ds.n);
        for (int i = 0; i < ds.n; ++i) {
            auto cell = [&](int l) {
                return std::pair<std::uint16_t, std::uint16_t>(
                    ds.a1[l][i], ds.case_kind == CaseKind::Diploid ? ds.a2[l][i] : ds.a1[l][i]);
            };
            row_const_[i] = row_constant_log(index, comp, bt, ds.case_kind, cell);
        }
        scores_.resize(static_cast<std::size_t>(ds.n) * K_);
        scratch_.resize(K_);
    }

    // pi and the flat alpha block fully describe the moving parameters.
    struct State {
        std::vector<double> pi;
        std::vector<double> alpha;  // [width][K], cell (off+state)*K + k
    };

    State state_from_hard_assignment(const std::vector<int>& z) const {
        Responsibilities resp{ds_.n, K_, std::vector<double>(static_cast<std::size_t>(ds_.n) * K_, 0.0)};
        for (int i = 0; i < ds_.n; ++i) resp.at(i, z[i]) = 1.0;
        return m_step_flat(resp.tau);
    }

    // One E-step: fills tau (row-major n x K) and returns the full
    // log-likelihood of the current state. Throws AllComponentsZero.
    double e_step_flat(const State& st, std::vector<double>& tau) {
        const int n = ds_.n, K = K_;
        for (int k = 0; k < K; ++k) log_pi_[k] = std::log(st.pi[k]);
        for (std::size_t c = 0; c < st.alpha.size(); ++c) log_alpha_[c] = std::log(st.alpha[c]);

        double* sc = scores_.data();
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < K; ++k) sc[static_cast<std::size_t>(i) * K + k] = log_pi_[k];
        for (std::size_t si = 0; si < index_.S.size(); ++si) {
            const int l = index_.S[si];
            const std::uint16_t* ca = ds_.a1[l].data();
            const double* block = log_alpha_.data() + static_cast<std::size_t>(offsets_[si]) * K;
            for (int i = 0; i < n; ++i) {
                const double* v = block + static_cast<std::size_t>(ca[i]) * K;
                double* row = sc + static_cast<std::size_t>(i) * K;
                for (int k = 0; k < K; ++k) row[k] += v[k];
            }
            if (ds_.case_kind == CaseKind::Diploid) {
                const std::uint16_t* cb = ds_.a2[l].data();
                for (int i = 0; i < n; ++i) {
                    const double* v = block + static_cast<std::size_t>(cb[i]) * K;
                    double* row = sc + static_cast<std::size_t>(i) * K;
                    for (int k = 0; k < K; ++k) row[k] += v[k];
                }
            }
        }

        tau.resize(static_cast<std::size_t>(n) * K);
        double ll = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* row = sc + static_cast<std::size_t>(i) * K;
            std::copy(row, row + K, scratch_.begin());
            const double lse = sorted_logsumexp(scratch_.data(), K);
            if (lse == kNegInf)
                throw AllComponentsZero("observation " + std::to_string(i + 1) +
                                        " has zero density under every component");
            double* trow = tau.data() + static_cast<std::size_t>(i) * K;
            for (int k = 0; k < K; ++k) trow[k] = std::exp(row[k] - lse);
            ll += lse + row_const_[i];
        }
        return ll;
    }

    State m_step_flat(const std::vector<double>& tau) const {
        const int n = ds_.n, K = K_;
        std::vector<double> colsum(K, 0.0);
        for (int i = 0; i < n; ++i) {
            const double* trow = tau.data() + static_cast<std::size_t>(i) * K;
            for (int k = 0; k < K; ++k) colsum[k] += trow[k];
        }
        for (int k = 0; k < K; ++k)
            if (colsum[k] < 1e-10)
                throw EmptyCluster("component " + std::to_string(k + 1) + " has responsibility mass " +
                                   std::to_string(colsum[k]));
        State st;
        st.pi.resize(K);
        for (int k = 0; k < K; ++k) st.pi[k] = colsum[k] / n;
        renormalize(st.pi);

        std::fill(acc_.begin(), acc_.end(), 0.0);
        for (std::size_t si = 0; si < index_.S.size(); ++si) {
            const int l = index_.S[si];
            double* block = acc_.data() + static_cast<std::size_t>(offsets_[si]) * K;
            const std::uint16_t* ca = ds_.a1[l].data();
            for (int i = 0; i < n; ++i) {
                const double* trow = tau.data() + static_cast<std::size_t>(i) * K;
                double* v = block + static_cast<std::size_t>(ca[i]) * K;
                for (int k = 0; k < K; ++k) v[k] += trow[k];
            }
            if (ds_.case_kind == CaseKind::Diploid) {
                const std::uint16_t* cb = ds_.a2[l].data();
                for (int i = 0; i < n; ++i) {
                    const double* trow = tau.data() + static_cast<std::size_t>(i) * K;
                    double* v = block + static_cast<std::size_t>(cb[i]) * K;
                    for (int k = 0; k < K; ++k) v[k] += trow[k];
                }
            }
        }
        st.alpha.assign(acc_.size(), 0.0);
        for (std::size_t si = 0; si < index_.S.size(); ++si) {
            const int l = index_.S[si];
            const int A = ds_.states_per_variable[l];
            for (int k = 0; k < K; ++k) {
                // row total equals colsum (x2 for diploid) up to rounding;
                // dividing by it renormalizes in one pass
                double sum = 0.0;
                for (int j = 0; j < A; ++j) sum += acc_[(static_cast<std::size_t>(offsets_[si]) + j) * K + k];
                for (int j = 0; j < A; ++j) {
                    double& cell = st.alpha[(static_cast<std::size_t>(offsets_[si]) + j) * K + k];
                    cell = sum > 0.0 ? acc_[(static_cast<std::size_t>(offsets_[si]) + j) * K + k] / sum : 0.0;
                }
            }
        }
        return st;
    }

    MixtureParams to_params(const State& st) const {
        MixtureParams p;
        p.pi = st.pi;
        p.alpha.assign(K_, std::vector<std::vector<double>>(index_.S.size()));
        for (std::size_t si = 0; si < index_.S.size(); ++si) {
            const int A = ds_.states_per_variable[index_.S[si]];
            for (int k = 0; k < K_; ++k) {
                p.alpha[k][si].resize(A);
                for (int j = 0; j < A; ++j)
                    p.alpha[k][si][j] = st.alpha[(static_cast<std::size_t>(offsets_[si]) + j) * K_ + k];
            }
        }
        p.beta = beta_;
        return p;
    }

    const Dataset& dataset() const { return ds_; }

private:
    const Dataset& ds_;
    ModelIndex index_;
    int K_;
    int width_ = 0;
    std::vector<int> offsets_;
    std::vector<double> log_pi_, log_alpha_;
    mutable std::vector<double> acc_;
    std::vector<std::vector<double>> beta_;
    std::vector<double> row_const_;
    std::vector<double> scores_;
    std::vector<double> scratch_;
};

// One EM chain: params after the last M-step plus the responsibilities
// and log-likelihood of those params.
struct EmChain {
    EmEngine::State state;
    std::vector<double> tau;
    double ll = 0.0;
    std::vector<double> trace;
    bool converged = false;
    bool failed = false;
    std::string failure;
    int restart_id = 0;
};

inline void advance_chain(EmEngine& engine, EmChain& chain, int iteration_cap, double rel_tol) {
    if (chain.converged || chain.failed) return;
    try {
        while (static_cast<int>(chain.trace.size()) - 1 < iteration_cap) {
            EmEngine::State next = engine.m_step_flat(chain.tau);
            const double ll_next = engine.e_step_flat(next, chain.tau);
            chain.state = std::move(next);
            chain.trace.push_back(ll_next);
            const double denom = std::max(std::abs(chain.ll), 1e-300);
            const bool done = std::abs(ll_next - chain.ll) / denom < rel_tol;
            chain.ll = ll_next;
            if (done) {
                chain.converged = true;
                break;
            }
        }
    } catch (const NumericalError& e) {
        chain.failed = true;
        chain.failure = e.what();
    }
}

} // namespace detail

// Maximum-likelihood fit of one model by EM with a small-EM restart
// strategy: n_restarts random hard-assignment initializations each run
// for short_run_iterations, then the best chain is continued to
// convergence. Deterministic for a fixed rng_seed.
inline FittedModel fit(const Dataset& ds, const ModelIndex& index, const EmConfig& config = {}) {
    config.validate();
    if (index.K > ds.n)
        throw InvalidModel("K = " + std::to_string(index.K) + " exceeds the number of individuals " +
                           std::to_string(ds.n));
    for (int v : index.S)
        if (v < 0 || v >= ds.L) throw InvalidModel("clustering variable outside dataset");
    if (index.K == 1 && !index.S.empty()) throw InvalidModel("K = 1 requires S empty");
    if (index.K >= 2 && index.S.empty()) throw InvalidModel("K >= 2 requires a non-empty S");

    FittedModel fm;
    fm.index = index;
    fm.n = ds.n;
    fm.case_kind = ds.case_kind;
    fm.states_per_variable = ds.states_per_variable;
    fm.dimension = dimension(index, ds.states_per_variable);

    detail::EmEngine engine(ds, index);

    if (index.K == 1) {
        // No latent structure: the MLE is the empirical frequency table.
        detail::EmEngine::State st;
        st.pi = {1.0};
        std::vector<double> tau;
        const double ll = engine.e_step_flat(st, tau);
        fm.params = engine.to_params(st);
        fm.contrast = -ll / ds.n;
        fm.loglik_trace = {ll};
        fm.n_restarts_used = 1;
        fm.converged = true;
        fm.rho_slack = 0.0;
        return fm;
    }

    const int short_cap = std::min(config.short_run_iterations, config.max_iterations);
    std::vector<detail::EmChain> chains;
    std::string first_failure;
    for (int r = 0; r < config.n_restarts; ++r) {
        detail::EmChain chain;
        chain.restart_id = r;
        try {
            Rng rng = make_rng(derive_seed(config.rng_seed, index.hash(), static_cast<std::uint64_t>(r)));
            std::vector<int> z(ds.n);
            for (int i = 0; i < ds.n; ++i) z[i] = next_below(rng, index.K);
            chain.state = engine.state_from_hard_assignment(z);
            chain.ll = engine.e_step_flat(chain.state, chain.tau);
            chain.trace.push_back(chain.ll);
        } catch (const NumericalError& e) {
            if (first_failure.empty()) first_failure = e.what();
            continue;
        }
        detail::advance_chain(engine, chain, short_cap, config.relative_tolerance);
        if (chain.failed) {
            if (first_failure.empty()) first_failure = chain.failure;
            continue;
        }
        chains.push_back(std::move(chain));
    }
    if (chains.empty())
        throw AllComponentsZero("every EM restart failed; first failure: " + first_failure);

    std::sort(chains.begin(), chains.end(), [](const detail::EmChain& a, const detail::EmChain& b) {
        if (a.ll != b.ll) return a.ll > b.ll;
        return a.restart_id < b.restart_id;
    });
    fm.n_restarts_used = static_cast<int>(chains.size());
    fm.rho_slack = chains.size() >= 2 ? (chains[0].ll - chains[1].ll) / ds.n
                                      : std::numeric_limits<double>::infinity();

    for (auto& chain : chains) {
        detail::advance_chain(engine, chain, config.max_iterations, config.relative_tolerance);
        if (chain.failed) {
            if (first_failure.empty()) first_failure = chain.failure;
            continue;
        }
        fm.params = engine.to_params(chain.state);
        fm.contrast = -chain.ll / ds.n;
        fm.loglik_trace = std::move(chain.trace);
        fm.converged = chain.converged;
        return fm;
    }
    throw EmptyCluster("every EM restart died during continuation; first failure: " + first_failure);
}

} // namespace mixsel
