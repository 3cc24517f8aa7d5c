#include "tfp/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tfp/bitrows.hpp"
#include "tfp/rng.hpp"

namespace tfp {

namespace {

// States with more open pairs than this are sampled rather than swept.
constexpr long long kMomentSweepLimit = 200000;
// Perturbation rounds chained onto each heuristic restart.
constexpr int kKickRounds = 150;

/** Flat copy of the adjacency rows, so the solvers never touch ProcessState internals. */
struct LocalGraph {
    int n = 0;
    int w = 0;  // 64-bit words per row
    std::vector<std::uint64_t> rows;

    const std::uint64_t* row(int v) const { return rows.data() + static_cast<std::size_t>(v) * w; }
    std::uint64_t* row(int v) { return rows.data() + static_cast<std::size_t>(v) * w; }
    bool edge(int u, int v) const { return (row(u)[v >> 6] >> (v & 63)) & 1ull; }
};

LocalGraph local_graph(const ProcessState& state) {
    LocalGraph g;
    g.n = state.n();
    g.w = state.words();
    g.rows.assign(static_cast<std::size_t>(g.n) * g.w, 0);
    for (int v = 0; v < g.n; ++v) std::copy(state.adj_row(v), state.adj_row(v) + g.w, g.row(v));
    return g;
}

bool mask_test(const std::vector<std::uint64_t>& mask, int v) {
    return (mask[v >> 6] >> (v & 63)) & 1ull;
}
void mask_set(std::vector<std::uint64_t>& mask, int v) { mask[v >> 6] |= 1ull << (v & 63); }
void mask_clear(std::vector<std::uint64_t>& mask, int v) { mask[v >> 6] &= ~(1ull << (v & 63)); }

int mask_popcount(const std::vector<std::uint64_t>& mask) {
    int total = 0;
    for (std::uint64_t word : mask) total += std::popcount(word);
    return total;
}

void check_independent(const LocalGraph& g, const std::vector<int>& set, const char* who) {
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = i + 1; j < set.size(); ++j)
            if (g.edge(set[i], set[j]))
                throw std::logic_error(std::string(who) + ": reported set is not independent");
}

/**
 * Greedy completion: extend `members` (already independent) with vertices of
 * minimum residual degree, ties broken uniformly at random, skipping `banned`
 * vertices.  Operates until no eligible vertex remains.
 */
void greedy_complete(const LocalGraph& g, std::vector<int>& members, Xoshiro256pp& rng,
                     const std::vector<int>& banned = {}) {
    std::vector<std::uint64_t> alive(static_cast<std::size_t>(g.w), ~0ull);
    const int tail = g.n & 63;
    if (tail != 0) alive[g.w - 1] = (1ull << tail) - 1;
    for (int v : banned) mask_clear(alive, v);
    for (int v : members) {
        mask_clear(alive, v);
        for (int k = 0; k < g.w; ++k) alive[k] &= ~g.row(v)[k];
    }
    std::vector<int> deg(g.n, 0);
    for_each_bit(alive.data(), g.w, [&](int v) {
        deg[v] = static_cast<int>(and_popcount(g.row(v), alive.data(), g.w));
    });
    std::vector<int> killed;
    for (;;) {
        int chosen = -1, best = std::numeric_limits<int>::max(), seen = 0;
        for_each_bit(alive.data(), g.w, [&](int v) {
            if (deg[v] < best) {
                best = deg[v];
                chosen = v;
                seen = 1;
            } else if (deg[v] == best && rng.bounded(static_cast<std::uint64_t>(++seen)) == 0) {
                chosen = v;
            }
        });
        if (chosen < 0) break;
        members.push_back(chosen);
        killed.clear();
        killed.push_back(chosen);
        for_each_and_bit(g.row(chosen), alive.data(), g.w, [&](int u) { killed.push_back(u); });
        for (int u : killed) mask_clear(alive, u);
        for (int u : killed)
            for_each_and_bit(g.row(u), alive.data(), g.w, [&](int v) { --deg[v]; });
    }
}

/**
 * (0,1)-insertions and (1,2)-swaps to a local optimum.  A non-member with no
 * member neighbour is inserted; a member with two tight neighbours (vertices
 * whose only member neighbour it is) that are themselves non-adjacent is
 * traded for the pair.  Sweeps repeat until one completes with no change.
 */
void local_search(const LocalGraph& g, std::vector<int>& members) {
    std::vector<std::uint64_t> in_mask(static_cast<std::size_t>(g.w), 0);
    std::vector<int> cnt(g.n, 0);
    for (int v : members) mask_set(in_mask, v);
    for (int v = 0; v < g.n; ++v)
        cnt[v] = static_cast<int>(and_popcount(g.row(v), in_mask.data(), g.w));

    const auto insert_vertex = [&](int v) {
        members.push_back(v);
        mask_set(in_mask, v);
        for_each_bit(g.row(v), g.w, [&](int u) { ++cnt[u]; });
    };
    const auto remove_member = [&](std::size_t idx) {
        const int v = members[idx];
        members[idx] = members.back();
        members.pop_back();
        mask_clear(in_mask, v);
        for_each_bit(g.row(v), g.w, [&](int u) { --cnt[u]; });
    };

    std::vector<int> tight;
    bool changed = true;
    while (changed) {
        changed = false;
        // insertions first: anything with no member neighbour joins
        for (int v = 0; v < g.n; ++v)
            if (cnt[v] == 0 && !mask_test(in_mask, v)) {
                insert_vertex(v);
                changed = true;
            }
        // one swap sweep over the current members
        for (std::size_t i = 0; i < members.size(); ++i) {
            const int v = members[i];
            tight.clear();
            for_each_bit(g.row(v), g.w, [&](int u) {
                if (!mask_test(in_mask, u) && cnt[u] == 1) tight.push_back(u);
            });
            if (tight.size() < 2) continue;
            int first = -1, second = -1;
            for (std::size_t a = 0; a < tight.size() && second < 0; ++a)
                for (std::size_t b = a + 1; b < tight.size() && second < 0; ++b)
                    if (!g.edge(tight[a], tight[b])) {
                        first = tight[a];
                        second = tight[b];
                    }
            if (second < 0) continue;
            remove_member(i);
            insert_vertex(first);
            insert_vertex(second);
            changed = true;
            --i;  // the swap moved a new member into slot i
        }
    }
}

} // namespace

DegreeStats max_degree_stats(const ProcessState& state) {
    DegreeStats stats;
    const int n = state.n();
    std::vector<int> degree(n, 0);
    for (int v = 0; v < n; ++v) {
        degree[v] = state.degree(v);
        stats.max_degree = std::max(stats.max_degree, degree[v]);
    }
    stats.histogram.assign(static_cast<std::size_t>(stats.max_degree) + 1, 0);
    for (int v = 0; v < n; ++v) {
        ++stats.histogram[degree[v]];
        if (degree[v] == stats.max_degree) stats.argmax.push_back(v);
    }
    return stats;
}

namespace {

/**
 * Branch and bound for the maximum independent set on bitset candidate pools:
 * degree-0/1 reductions, connected-component decomposition, include-first
 * branching on a maximum-degree pivot, and a greedy-matching upper bound that
 * prunes the exclude branch.  Exponential in the worst case; the guard on
 * alpha_exact keeps inputs within the advertised envelope.
 */
struct ExactSolver {
    const LocalGraph& g;

    explicit ExactSolver(const LocalGraph& graph) : g(graph) {}

    /** Greedy matching inside `avail`; every matched edge spends one candidate. */
    int matching_bound(std::vector<std::uint64_t> avail) const {
        int matched = 0;
        for (int v = 0; v < g.n; ++v) {
            if (!mask_test(avail, v)) continue;
            int mate = -1;
            for (int k = 0; k < g.w && mate < 0; ++k) {
                const std::uint64_t word = g.row(v)[k] & avail[k];
                if (word != 0) mate = (k << 6) + std::countr_zero(word);
            }
            if (mate >= 0) {
                mask_clear(avail, v);
                mask_clear(avail, mate);
                ++matched;
            }
        }
        return matched;
    }

    /** Mask of the pool component containing `start` (flood fill over pool edges). */
    std::vector<std::uint64_t> component_of(const std::vector<std::uint64_t>& pool,
                                            int start) const {
        std::vector<std::uint64_t> comp(static_cast<std::size_t>(g.w), 0);
        std::vector<int> frontier{start};
        mask_set(comp, start);
        while (!frontier.empty()) {
            const int v = frontier.back();
            frontier.pop_back();
            for (int k = 0; k < g.w; ++k) {
                std::uint64_t fresh = g.row(v)[k] & pool[k] & ~comp[k];
                while (fresh != 0) {
                    const int u = (k << 6) + std::countr_zero(fresh);
                    fresh &= fresh - 1;
                    mask_set(comp, u);
                    frontier.push_back(u);
                }
            }
        }
        return comp;
    }

    /** Exact alpha of `pool`; an optimal set is appended to `out`. */
    int solve(std::vector<std::uint64_t> pool, std::vector<int>& out) {
        int taken = 0;
        for (;;) {
            // reductions: a candidate with residual degree <= 1 is always taken
            int pivot = -1, pivot_deg = -1;
            bool reduced = false;
            for (int v = 0; v < g.n && !reduced; ++v) {
                if (!mask_test(pool, v)) continue;
                const int d = static_cast<int>(and_popcount(g.row(v), pool.data(), g.w));
                if (d <= 1) {
                    mask_clear(pool, v);
                    for (int k = 0; k < g.w; ++k) pool[k] &= ~g.row(v)[k];
                    out.push_back(v);
                    ++taken;
                    reduced = true;
                } else if (d > pivot_deg) {
                    pivot_deg = d;
                    pivot = v;
                }
            }
            if (reduced) continue;
            if (pivot < 0) return taken;  // pool emptied by the reductions

            // split into connected components and conquer them independently
            std::vector<std::uint64_t> comp = component_of(pool, pivot);
            bool whole = true;
            for (int k = 0; k < g.w && whole; ++k) whole = comp[k] == pool[k];
            if (!whole) {
                for (int k = 0; k < g.w; ++k) pool[k] &= ~comp[k];
                return taken + solve(std::move(comp), out) + solve(std::move(pool), out);
            }

            // include the pivot first; the matching bound gates the exclude branch
            std::vector<std::uint64_t> sub = pool;
            mask_clear(sub, pivot);
            for (int k = 0; k < g.w; ++k) sub[k] &= ~g.row(pivot)[k];
            std::vector<int> with_pivot{pivot};
            const int included = 1 + solve(std::move(sub), with_pivot);

            mask_clear(pool, pivot);
            const int excl_bound = mask_popcount(pool) - matching_bound(pool);
            if (excl_bound > included) {
                std::vector<int> without_pivot;
                const int excluded = solve(pool, without_pivot);
                if (excluded > included) {
                    out.insert(out.end(), without_pivot.begin(), without_pivot.end());
                    return taken + excluded;
                }
            }
            out.insert(out.end(), with_pivot.begin(), with_pivot.end());
            return taken + included;
        }
    }
};

} // namespace

int alpha_exact(const ProcessState& state, int guard) {
    if (guard < 1) throw std::invalid_argument("alpha_exact: guard must be positive");
    if (state.n() > guard)
        throw std::length_error("alpha_exact: state exceeds the exact-solver guard of " +
                                std::to_string(guard) + " vertices");
    const LocalGraph g = local_graph(state);
    ExactSolver solver(g);
    std::vector<std::uint64_t> all(static_cast<std::size_t>(g.w), ~0ull);
    const int tail = g.n & 63;
    if (tail != 0) all[g.w - 1] = (1ull << tail) - 1;
    std::vector<int> best_set;
    const int best = solver.solve(std::move(all), best_set);
    if (static_cast<int>(best_set.size()) != best)
        throw std::logic_error("alpha_exact: optimal set does not match the reported size");
    check_independent(g, best_set, "alpha_exact");
    return best;
}

int alpha_heuristic(const ProcessState& state, int budget, std::uint64_t seed) {
    const LocalGraph g = local_graph(state);
    if (budget < 1) budget = 1;
    Xoshiro256pp rng(seed);
    std::vector<int> global;
    std::vector<int> removed;
    std::vector<std::uint64_t> in_mask(static_cast<std::size_t>(g.w), 0);
    for (int restart = 0; restart < budget; ++restart) {
        std::vector<int> current;
        greedy_complete(g, current, rng);
        local_search(g, current);
        int stall = 0;  // kicks since the last strict improvement; widens the escape moves
        for (int kick = 0; kick < kKickRounds; ++kick) {
            std::vector<int> trial = current;
            removed.clear();
            if (rng.bounded(2) == 0) {
                // removal kick: drop a few members, more while stalled
                const int drop = 1 + static_cast<int>(rng.bounded(2 + std::min(stall / 8, 4)));
                for (int r = 0; r < drop && !trial.empty(); ++r) {
                    const std::size_t idx = rng.bounded(trial.size());
                    removed.push_back(trial[idx]);
                    trial[idx] = trial.back();
                    trial.pop_back();
                }
            } else {
                // force-insert kick: push outsiders in, evicting their member neighbours
                std::fill(in_mask.begin(), in_mask.end(), 0);
                for (int v : trial) mask_set(in_mask, v);
                const int inserts = 1 + static_cast<int>(rng.bounded(2));
                for (int rep = 0; rep < inserts; ++rep) {
                    int u = -1;
                    for (int attempt = 0; attempt < 8 && u < 0; ++attempt) {
                        const int cand = static_cast<int>(rng.bounded(g.n));
                        if (!mask_test(in_mask, cand)) u = cand;
                    }
                    if (u < 0) break;
                    for (std::size_t i = 0; i < trial.size();) {
                        if (g.edge(u, trial[i])) {
                            removed.push_back(trial[i]);
                            mask_clear(in_mask, trial[i]);
                            trial[i] = trial.back();
                            trial.pop_back();
                        } else {
                            ++i;
                        }
                    }
                    trial.push_back(u);
                    mask_set(in_mask, u);
                }
            }
            greedy_complete(g, trial, rng, removed);
            local_search(g, trial);
            if (trial.size() > current.size()) {
                current = std::move(trial);
                stall = 0;
            } else {
                if (trial.size() == current.size()) current = std::move(trial);  // drift
                ++stall;
            }
        }
        if (current.size() > global.size()) global = std::move(current);
    }
    check_independent(g, global, "alpha_heuristic");
    return static_cast<int>(global.size());
}

namespace {

std::vector<int> checked_sorted_set(const ProcessState& state, const std::vector<int>& set,
                                    const char* who) {
    std::vector<int> sorted = set;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] < 0 || sorted[i] >= state.n())
            throw std::invalid_argument(std::string(who) + ": vertex out of range");
        if (i > 0 && sorted[i] == sorted[i - 1])
            throw std::invalid_argument(std::string(who) + ": duplicate vertex");
    }
    return sorted;
}

std::vector<std::uint64_t> set_mask(const ProcessState& state, const std::vector<int>& sorted) {
    std::vector<std::uint64_t> mask(static_cast<std::size_t>(state.words()), 0);
    for (int v : sorted) mask_set(mask, v);
    return mask;
}

long long open_inside_sorted(const ProcessState& state, const std::vector<int>& sorted) {
    long long count = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = i + 1; j < sorted.size(); ++j)
            if (state.is_open(sorted[i], sorted[j])) ++count;
    return count;
}

long long open_excluding_masks(const ProcessState& state, const std::vector<int>& sorted,
                               const std::vector<std::vector<std::uint64_t>>& masks) {
    long long count = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = i + 1; j < sorted.size(); ++j) {
            if (!state.is_open(sorted[i], sorted[j])) continue;
            bool excluded = false;
            for (const auto& mask : masks)
                if (mask_test(mask, sorted[i]) && mask_test(mask, sorted[j])) {
                    excluded = true;
                    break;
                }
            if (!excluded) ++count;
        }
    return count;
}

} // namespace

long long open_inside(const ProcessState& state, const std::vector<int>& set) {
    return open_inside_sorted(state, checked_sorted_set(state, set, "open_inside"));
}

long long open_inside_excluding(const ProcessState& state, const std::vector<int>& set,
                                const std::vector<std::vector<int>>& family) {
    const std::vector<int> sorted = checked_sorted_set(state, set, "open_inside_excluding");
    std::vector<std::vector<std::uint64_t>> masks;
    masks.reserve(family.size());
    for (const auto& member : family)
        masks.push_back(set_mask(state, checked_sorted_set(state, member, "open_inside_excluding")));
    return open_excluding_masks(state, sorted, masks);
}

SetProfile set_profile(const ProcessState& state, const Params& p, const std::vector<int>& set,
                       double delta_exp) {
    p.validate();
    if (p.n != state.n())
        throw std::invalid_argument("set_profile: params sized for a different n");
    SetProfile profile;
    profile.s_vertices = checked_sorted_set(state, set, "set_profile");
    profile.s = static_cast<int>(profile.s_vertices.size());
    profile.delta_exp = delta_exp;
    profile.threshold = std::pow(static_cast<double>(state.n()), delta_exp);

    const std::vector<std::uint64_t> mask = set_mask(state, profile.s_vertices);
    std::vector<std::pair<long long, int>> hits;  // (-count, vertex) for the descending sort
    for (int v = 0; v < state.n(); ++v) {
        const long long count = and_popcount(state.adj_row(v), mask.data(), state.words());
        if (static_cast<double>(count) >= profile.threshold) hits.emplace_back(-count, v);
    }
    std::sort(hits.begin(), hits.end());
    std::vector<std::vector<std::uint64_t>> neighbourhood_masks;
    neighbourhood_masks.reserve(hits.size());
    for (const auto& [neg, v] : hits) {
        profile.j_vertices.push_back(v);
        profile.a.push_back(-neg);
        std::vector<std::uint64_t> inter(mask);
        for (int k = 0; k < state.words(); ++k) inter[k] &= state.adj_row(v)[k];
        neighbourhood_masks.push_back(std::move(inter));
    }
    profile.o_s = open_inside_sorted(state, profile.s_vertices);
    profile.o_n = open_excluding_masks(state, profile.s_vertices, neighbourhood_masks);

    const double t = time_map(p, state.m());
    const double decay = std::exp(-4.0 * t * t);
    const double pairs = 0.5 * profile.s * (profile.s - 1.0);
    const double m = static_cast<double>(state.m());
    const double nn = static_cast<double>(state.n()) * static_cast<double>(state.n());
    profile.ref_open = (1.0 - p.eps) * pairs * decay;
    profile.ref_open_adjusted = (1.0 - p.eps) * (pairs - 2.0 * m * m / nn) * decay;
    profile.gamma = 10.0 * std::sqrt(p.eps);
    return profile;
}

MomentStats moment_stats(const ProcessState& state, long long sample_size) {
    const long long q = state.q();
    if (q == 0) throw std::domain_error("moment_stats: state has no open edges");

    MomentStats out;
    long long sum_y = 0, sum_x = 0;
    __int128 sum_yy = 0, sum_xy = 0;
    const auto measure = [&](const VertexPair& e) {
        const long long y = state.y_count(e.first, e.second);
        const long long x = state.x_count(e.first, e.second);
        sum_y += y;
        sum_x += x;
        sum_yy += static_cast<__int128>(y) * y;
        sum_xy += static_cast<__int128>(x) * y;
    };

    long long measured = 0;
    if (q <= kMomentSweepLimit || sample_size >= q) {
        for (std::size_t idx = 0; idx < state.open_count(); ++idx) measure(state.open_pair(idx));
        measured = q;
        out.exact = true;
    } else {
        if (sample_size < 1)
            throw std::invalid_argument("moment_stats: sample_size must be positive when sampling");
        // dedicated stream: deterministic in (seed, m), disjoint from the process draws
        SplitMix64 mix(state.seed() ^
                       (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(state.m() + 1)));
        Xoshiro256pp rng(mix.next());
        measured = sample_size;
        if (sample_size <= q / 2) {
            std::unordered_set<long long> seen;
            seen.reserve(static_cast<std::size_t>(sample_size) * 2);
            while (static_cast<long long>(seen.size()) < sample_size) {
                const auto idx = static_cast<long long>(rng.bounded(static_cast<std::uint64_t>(q)));
                if (seen.insert(idx).second) measure(state.open_pair(static_cast<std::size_t>(idx)));
            }
        } else {
            std::vector<std::uint32_t> order(static_cast<std::size_t>(q));
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
            for (long long i = 0; i < sample_size; ++i) {
                const auto j = i + static_cast<long long>(
                                       rng.bounded(static_cast<std::uint64_t>(q - i)));
                std::swap(order[i], order[j]);
                measure(state.open_pair(order[i]));
            }
        }
    }

    const auto k = static_cast<long double>(measured);
    const long double ybar = sum_y / k;
    const long double xbar = sum_x / k;
    out.ybar = static_cast<double>(ybar);
    out.xbar = static_cast<double>(xbar);
    out.var_y = static_cast<double>(static_cast<long double>(sum_yy) / k - ybar * ybar);
    out.cov_xy = static_cast<double>(static_cast<long double>(sum_xy) / k - xbar * ybar);
    out.sample_size = measured;
    out.sum_y = sum_y;
    out.sum_x = sum_x;
    return out;
}

WitnessCertificate ramsey_witness(const WitnessConfig& config) {
    RunConfig rc;
    rc.n = config.n;
    rc.seed = config.seed;
    rc.stop = StopRule::completion();
    rc.instrumentation = config.instrumentation;
    rc.validate();
    ProcessState state(rc);
    run_process(state, rc.stop, std::numeric_limits<long long>::max(), {});

    std::string why;
    if (!verify_maximal_triangle_free(state, &why))
        throw std::logic_error("ramsey_witness: final graph failed verification: " + why);

    WitnessCertificate cert;
    cert.n = config.n;
    cert.seed = config.seed;
    cert.edges = state.history();
    cert.max_degree = max_degree_stats(state).max_degree;
    if (config.n <= config.exact_guard) {
        cert.alpha_kind = "exact";
        cert.alpha_value = alpha_exact(state, config.exact_guard);
        cert.claim = "R(3, " + std::to_string(cert.alpha_value + 1) + ") > " +
                     std::to_string(config.n);
    } else {
        cert.alpha_kind = "heuristic_lower_bound";
        cert.alpha_value = alpha_heuristic(state, config.heuristic_budget, config.seed);
    }
    const double log_n = std::log(static_cast<double>(config.n));
    const double degree_scale = std::sqrt(config.n * log_n);
    cert.alpha_over_sqrt_nlogn = cert.alpha_value / degree_scale;
    cert.maxdeg_over_sqrt_nlogn = cert.max_degree / degree_scale;
    cert.edges_over_n32_sqrtlogn =
        static_cast<double>(cert.edges.size()) /
        (std::pow(static_cast<double>(config.n), 1.5) * std::sqrt(log_n));
    return cert;
}

std::string certificate_json(const WitnessCertificate& cert) {
    nlohmann::ordered_json j;
    j["n"] = cert.n;
    j["seed"] = cert.seed;
    j["edges"] = nlohmann::ordered_json::array();
    for (const VertexPair& e : cert.edges) j["edges"].push_back({e.first, e.second});
    j["alpha_kind"] = cert.alpha_kind;
    j["alpha_value"] = cert.alpha_value;
    j["max_degree"] = cert.max_degree;
    j["ratios"]["alpha_over_sqrt_nlogn"] = cert.alpha_over_sqrt_nlogn;
    j["ratios"]["maxdeg_over_sqrt_nlogn"] = cert.maxdeg_over_sqrt_nlogn;
    j["ratios"]["edges_over_n32_sqrtlogn"] = cert.edges_over_n32_sqrtlogn;
    if (!cert.claim.empty()) j["claim"] = cert.claim;
    return j.dump(2) + "\n";
}

} // namespace tfp
