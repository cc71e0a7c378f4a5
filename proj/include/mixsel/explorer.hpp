#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "em.hpp"
#include "errors.hpp"
#include "parallel.hpp"

namespace mixsel {

// Uniform lambda grid; the default endpoints 1/2 .. ln(n) bracket the
// AIC (lambda = 1) and BIC (lambda = ln(n)/2) multipliers.
struct GridSpec {
    double lo = 0.5;
    double hi = 0.0;  // <= 0 means "resolve to ln n"
    int count = 50;

    std::vector<double> resolve(long long n) const {
        const double top = hi > 0.0 ? hi : std::log(static_cast<double>(n));
        if (count < 2) throw InputError("lambda grid needs at least 2 points");
        if (!(top > lo)) throw InputError("lambda grid upper endpoint must exceed the lower one");
        std::vector<double> grid(count);
        const double step = (top - lo) / (count - 1);
        for (int i = 0; i < count; ++i) grid[i] = lo + step * i;
        grid.back() = top;
        return grid;
    }
};

struct ExplorerConfig {
    int K_max = 5;
    GridSpec grid;
    bool enable_forward = true;
    EmConfig em;
    bool cache_fits = true;
    long long exhaustive_budget = 10000;
    int threads = 1;

    void validate() const {
        if (K_max < 1) throw InputError("K_max must be >= 1");
        if (grid.count < 2) throw InputError("lambda grid needs at least 2 points");
        em.validate();
    }
};

// Fitted models keyed by (K, S); first writer wins, which is harmless
// because the fit seed depends only on (seed policy, K, S).
class ModelPool {
public:
    bool contains(const ModelIndex& index) const { return entries_.count(index) > 0; }

    const FittedModel& get(const ModelIndex& index) const {
        auto it = entries_.find(index);
        if (it == entries_.end()) throw EmptyPool("model " + index.to_label() + " not in pool");
        return it->second;
    }

    void insert(FittedModel fm, std::string provenance) {
        auto key = fm.index;
        auto [it, inserted] = entries_.emplace(std::move(key), std::move(fm));
        if (inserted) provenance_.emplace(it->first, std::move(provenance));
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    const std::map<ModelIndex, FittedModel>& entries() const { return entries_; }
    const std::map<ModelIndex, std::string>& provenance() const { return provenance_; }

    std::vector<FittedModel> as_vector() const {
        std::vector<FittedModel> out;
        out.reserve(entries_.size());
        for (const auto& [index, fm] : entries_) out.push_back(fm);
        return out;
    }

private:
    std::map<ModelIndex, FittedModel> entries_;
    std::map<ModelIndex, std::string> provenance_;
};

namespace detail {

// A fit that failed is kept as a +inf-contrast marker so the pool
// records the attempt; selection never picks it.
inline FittedModel failed_fit_marker(const Dataset& ds, const ModelIndex& index) {
    FittedModel fm;
    fm.index = index;
    fm.n = ds.n;
    fm.case_kind = ds.case_kind;
    fm.states_per_variable = ds.states_per_variable;
    fm.dimension = dimension(index, ds.states_per_variable);
    fm.contrast = std::numeric_limits<double>::infinity();
    fm.converged = false;
    return fm;
}

inline const FittedModel& fit_cached(const Dataset& ds, const ModelIndex& index, const ExplorerConfig& config,
                                     ModelPool& pool, const std::string& provenance) {
    if (config.cache_fits && pool.contains(index)) return pool.get(index);
    try {
        pool.insert(fit(ds, index, config.em), provenance);
    } catch (const NumericalError& e) {
        pool.insert(failed_fit_marker(ds, index), provenance + " [failed: " + e.what() + "]");
    }
    return pool.get(index);
}

// Fits any candidates missing from the pool, in parallel, then merges
// in candidate order (deterministic content regardless of schedule).
inline void fit_batch(const Dataset& ds, const std::vector<ModelIndex>& candidates,
                      const ExplorerConfig& config, ModelPool& pool, const std::string& provenance) {
    std::vector<const ModelIndex*> todo;
    for (const auto& index : candidates)
        if (!config.cache_fits || !pool.contains(index)) todo.push_back(&index);
    if (todo.empty()) return;
    std::vector<FittedModel> results(todo.size());
    std::vector<std::string> notes(todo.size());
    parallel_for(todo.size(), config.threads, [&](std::size_t i) {
        try {
            results[i] = fit(ds, *todo[i], config.em);
            notes[i] = provenance;
        } catch (const NumericalError& e) {
            results[i] = failed_fit_marker(ds, *todo[i]);
            notes[i] = provenance + " [failed: " + e.what() + "]";
        }
    });
    for (std::size_t i = 0; i < todo.size(); ++i) pool.insert(std::move(results[i]), std::move(notes[i]));
}

} // namespace detail

// Greedy stepwise exploration of S for one cluster count: the backward
// phase walks from the full variable set down to singletons, moving to
// the best single removal under the given penalized criterion; the
// optional forward phase grows from the best singleton. Every fitted
// model along the way lands in the pool.
inline std::vector<ModelIndex> explore_k(const Dataset& ds, int K, const Penalty& penalty,
                                         const ExplorerConfig& config, ModelPool& pool) {
    config.validate();
    std::vector<ModelIndex> visited;
    auto visit = [&](const ModelIndex& index, const std::string& note) -> const FittedModel& {
        const FittedModel& fm = detail::fit_cached(ds, index, config, pool, note);
        visited.push_back(index);
        return fm;
    };

    if (K == 1) {
        visit(ModelIndex{1, {}}, "explorer K=1");
        return visited;
    }

    const std::string tag = "explorer K=" + std::to_string(K) + " pen=" + penalty.name();

    auto best_of = [&](const std::vector<ModelIndex>& candidates) -> const ModelIndex* {
        detail::fit_batch(ds, candidates, config, pool, tag);
        const ModelIndex* best = nullptr;
        double best_crit = std::numeric_limits<double>::infinity();
        const FittedModel* best_fm = nullptr;
        for (const auto& index : candidates) {
            visited.push_back(index);
            const FittedModel& fm = pool.get(index);
            const double c = criterion(fm, penalty);
            if (!best || selection_precedes(fm, c, *best_fm, best_crit)) {
                best = &index;
                best_fm = &fm;
                best_crit = c;
            }
        }
        if (best && best_crit == std::numeric_limits<double>::infinity()) return nullptr;
        return best;
    };

    // backward phase
    std::vector<int> all(ds.L);
    for (int l = 0; l < ds.L; ++l) all[l] = l;
    ModelIndex current{K, all};
    visit(current, tag + " backward start");
    while (current.S.size() > 1) {
        std::vector<ModelIndex> removals;
        removals.reserve(current.S.size());
        for (int drop : current.S) {
            std::vector<int> s;
            s.reserve(current.S.size() - 1);
            for (int v : current.S)
                if (v != drop) s.push_back(v);
            removals.push_back(ModelIndex{K, std::move(s)});
        }
        const ModelIndex* best = best_of(removals);
        if (!best) break;
        current = *best;
    }

    if (config.enable_forward) {
        std::vector<ModelIndex> singletons;
        singletons.reserve(ds.L);
        for (int l = 0; l < ds.L; ++l) singletons.push_back(ModelIndex{K, {l}});
        const ModelIndex* seed = best_of(singletons);
        if (seed) {
            ModelIndex grown = *seed;
            while (static_cast<int>(grown.S.size()) < ds.L) {
                std::vector<ModelIndex> additions;
                for (int l = 0; l < ds.L; ++l) {
                    if (grown.contains(l)) continue;
                    std::vector<int> s = grown.S;
                    s.insert(std::lower_bound(s.begin(), s.end(), l), l);
                    additions.push_back(ModelIndex{K, std::move(s)});
                }
                const ModelIndex* best = best_of(additions);
                if (!best) break;
                grown = *best;
            }
        }
    }

    std::set<ModelIndex> unique(visited.begin(), visited.end());
    return std::vector<ModelIndex>(unique.begin(), unique.end());
}

inline std::vector<FittedModel> explore_k(const Dataset& ds, int K, const Penalty& penalty,
                                          const ExplorerConfig& config) {
    ModelPool pool;
    std::vector<FittedModel> out;
    for (const auto& index : explore_k(ds, K, penalty, config, pool)) out.push_back(pool.get(index));
    return out;
}

// Union of explorer runs over K in 1..K_max and every lambda of the
// grid; the shared cache fits each (K, S) once.
inline ModelPool build_pool(const Dataset& ds, const ExplorerConfig& config) {
    config.validate();
    ModelPool pool;
    const auto grid = config.grid.resolve(ds.n);
    explore_k(ds, 1, Penalty::raw_lambda(grid.front()), config, pool);
    for (int K = 2; K <= config.K_max; ++K)
        for (double lambda : grid) explore_k(ds, K, Penalty::raw_lambda(lambda), config, pool);
    return pool;
}

inline long long model_collection_size(int K_max, int L) {
    if (L >= 62) throw InputError("variable count too large for exhaustive enumeration");
    return 1 + static_cast<long long>(K_max - 1) * ((1LL << L) - 1);
}

// Fits every model with K <= K_max. The candidate count
// 1 + (K_max - 1)(2^L - 1) must stay within the configured budget.
inline ModelPool exhaustive_pool(const Dataset& ds, int K_max, const ExplorerConfig& config) {
    config.validate();
    const long long total = model_collection_size(K_max, ds.L);
    if (total > config.exhaustive_budget)
        throw BudgetExceeded("exhaustive collection has " + std::to_string(total) +
                             " models, over the budget of " + std::to_string(config.exhaustive_budget));
    std::vector<ModelIndex> all;
    all.reserve(static_cast<std::size_t>(total));
    all.push_back(ModelIndex{1, {}});
    for (int K = 2; K <= K_max; ++K) {
        for (unsigned long long mask = 1; mask < (1ULL << ds.L); ++mask) {
            std::vector<int> s;
            for (int l = 0; l < ds.L; ++l)
                if (mask & (1ULL << l)) s.push_back(l);
            all.push_back(ModelIndex{K, std::move(s)});
        }
    }
    ModelPool pool;
    detail::fit_batch(ds, all, config, pool, "exhaustive");
    return pool;
}

} // namespace mixsel
