#include "tfp/ygraph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace tfp {

namespace {

/** Oriented vertex: the Y-graph id plus which endpoint wears L (0: min, 1: max). */
using OrientedId = std::pair<int, int>;

int left_of(const VertexPair& e, int bit) { return bit == 0 ? e.first : e.second; }
int right_of(const VertexPair& e, int bit) { return bit == 0 ? e.second : e.first; }

void validate_walk(const WalkSpec& walk) {
    for (char c : walk.sigma)
        if (c != 'L' && c != 'R')
            throw std::invalid_argument("walk type must use only the symbols L and R");
}

OrientedId orient(const YGraph& yg, const OrientedEdge& e) {
    if (e.left == e.right) throw std::invalid_argument("oriented edge needs distinct endpoints");
    const int id = yg.require_id(e.left, e.right);
    return {id, e.left < e.right ? 0 : 1};
}

/**
 * One oriented step of type `symbol` from every state in `cur`, multiplicities
 * carried along.  The moving foot wears `symbol`; the pivot is the other
 * endpoint and keeps its label in the new edge.
 */
std::map<OrientedId, double> advance(const YGraph& yg, const std::map<OrientedId, double>& cur,
                                     char symbol) {
    std::map<OrientedId, double> next;
    for (const auto& [state, count] : cur) {
        const auto& [id, bit] = state;
        const VertexPair& pair = yg.pair_of(id);
        const int pivot = symbol == 'L' ? right_of(pair, bit) : left_of(pair, bit);
        for (const YAdjacency& adj : yg.neighbours(id)) {
            if (adj.pivot != pivot) continue;
            const VertexPair& to = yg.pair_of(adj.to);
            // the pivot keeps its label; the fresh endpoint wears `symbol`
            const bool pivot_is_min = to.first == adj.pivot;
            int to_bit;
            if (symbol == 'L')
                to_bit = pivot_is_min ? 1 : 0;  // pivot wears R
            else
                to_bit = pivot_is_min ? 0 : 1;  // pivot wears L
            next[{adj.to, to_bit}] += count;
        }
    }
    return next;
}

std::map<OrientedId, double> walk_front(const YGraph& yg, const OrientedEdge& e,
                                        const WalkSpec& walk) {
    validate_walk(walk);
    std::map<OrientedId, double> cur{{orient(yg, e), 1.0}};
    for (char symbol : walk.sigma) cur = advance(yg, cur, symbol);
    return cur;
}

}  // namespace

YGraph::YGraph(const ProcessState& state) : n_(state.n()) {
    pairs_ = state.open_pairs();
    std::sort(pairs_.begin(), pairs_.end());
    index_.reserve(pairs_.size() * 2);
    for (std::size_t i = 0; i < pairs_.size(); ++i)
        index_.emplace(pair_key(pairs_[i]), static_cast<int>(i));

    adj_.resize(pairs_.size());
    const BitRows& adjacency = state.adjacency();
    long long directed = 0;
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        const auto& [u, v] = pairs_[i];
        // pivot u: open edges {u, w} whose far endpoint w is an edge-neighbour of v
        for_each_bit(adjacency.row(v), adjacency.words(), [&](int w) {
            if (w == u) return;
            const int to = id_of(u, w);
            if (to >= 0) adj_[i].push_back({to, u});
        });
        // pivot v: open edges {v, w} whose far endpoint w is an edge-neighbour of u
        for_each_bit(adjacency.row(u), adjacency.words(), [&](int w) {
            if (w == v) return;
            const int to = id_of(v, w);
            if (to >= 0) adj_[i].push_back({to, v});
        });
        directed += static_cast<long long>(adj_[i].size());
    }
    edge_count_ = directed / 2;
}

int YGraph::id_of(int u, int v) const {
    if (u == v) return -1;
    const auto it = index_.find(pair_key(ordered_pair(u, v)));
    return it == index_.end() ? -1 : it->second;
}

int YGraph::require_id(int u, int v) const {
    const int id = id_of(u, v);
    if (id < 0) throw std::invalid_argument("pair is not an open edge of the state");
    return id;
}

double YGraph::y_bar() const {
    if (pairs_.empty()) return 0.0;
    return 2.0 * static_cast<double>(edge_count_) / static_cast<double>(pairs_.size());
}

bool ygraph_symmetric(const YGraph& yg) {
    for (int i = 0; i < yg.vertex_count(); ++i) {
        std::vector<int> seen;
        for (const YAdjacency& adj : yg.neighbours(i)) {
            seen.push_back(adj.to);
            if (adj.to == i) return false;
            bool mirrored = false;
            for (const YAdjacency& back : yg.neighbours(adj.to))
                if (back.to == i && back.pivot == adj.pivot) {
                    mirrored = true;
                    break;
                }
            if (!mirrored) return false;
        }
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) return false;
    }
    return true;
}

bool ygraph_triangle_free(const YGraph& yg) {
    std::vector<char> flag(yg.vertex_count(), 0);
    for (int i = 0; i < yg.vertex_count(); ++i) {
        for (const YAdjacency& adj : yg.neighbours(i)) flag[adj.to] = 1;
        for (const YAdjacency& adj : yg.neighbours(i)) {
            if (adj.to < i) continue;
            for (const YAdjacency& second : yg.neighbours(adj.to))
                if (second.to != i && flag[second.to]) {
                    for (const YAdjacency& a : yg.neighbours(i)) flag[a.to] = 0;
                    return false;
                }
        }
        for (const YAdjacency& adj : yg.neighbours(i)) flag[adj.to] = 0;
    }
    return true;
}

WalkSpec WalkSpec::parse(const std::string& text) {
    WalkSpec walk{text};
    validate_walk(walk);
    return walk;
}

int WalkSpec::foot_changes() const {
    int changes = 0;
    for (std::size_t i = 1; i < sigma.size(); ++i)
        if (sigma[i] != sigma[i - 1]) ++changes;
    return changes;
}

bool WalkSpec::is_k_short(int k) const {
    if (foot_changes() > k) return false;
    std::size_t run = 0;
    char prev = '\0';
    for (char c : sigma) {
        run = c == prev ? run + 1 : 1;
        prev = c;
        if (run > static_cast<std::size_t>(k)) return false;
    }
    return true;
}

double u_walks(const YGraph& yg, const OrientedEdge& e, const WalkSpec& walk) {
    double total = 0.0;
    for (const auto& [state, count] : walk_front(yg, e, walk)) total += count;
    return total;
}

double v_average(const YGraph& yg, const OrientedEdge& e, const WalkSpec& walk) {
    double total = 0.0;
    double weighted = 0.0;
    for (const auto& [state, count] : walk_front(yg, e, walk)) {
        total += count;
        weighted += count * static_cast<double>(yg.y_degree(state.first));
    }
    if (total <= 0.0) throw std::domain_error("no walks of the requested type from this edge");
    return weighted / total;
}

std::pair<double, double> v_k(const YGraph& yg, const VertexPair& e, int k) {
    if (k < 0) throw std::invalid_argument("walk length must be non-negative");
    const int id0 = yg.require_id(e.first, e.second);
    std::map<int, double> cur{{id0, 1.0}};
    for (int step = 0; step < k; ++step) {
        std::map<int, double> next;
        for (const auto& [id, count] : cur)
            for (const YAdjacency& adj : yg.neighbours(id)) next[adj.to] += count;
        cur = std::move(next);
    }
    double total = 0.0;
    double weighted = 0.0;
    for (const auto& [id, count] : cur) {
        total += count;
        weighted += count * static_cast<double>(yg.y_degree(id));
    }
    if (total <= 0.0) throw std::domain_error("no walks of the requested length from this edge");
    return {total, weighted / total};
}

MixingReport mixing_stats(const YGraph& yg, const ProcessState& state, const OrientedEdge& e,
                          int k) {
    if (k < 0) throw std::invalid_argument("mixing parameter must be non-negative");
    yg.require_id(e.left, e.right);  // also validates distinctness via id_of

    MixingReport report;
    report.k = k;
    report.v_k = v_average(yg, e, WalkSpec{std::string(static_cast<std::size_t>(k), 'L')});
    report.v_k1 = v_average(yg, e, WalkSpec{std::string(static_cast<std::size_t>(k) + 1, 'L')});

    // plain average of Y over the open edges at the planted right foot
    const int u = e.right;
    double sum = 0.0;
    long long count = 0;
    for (int w = 0; w < state.n(); ++w) {
        if (w == u || !state.is_open(u, w)) continue;
        sum += static_cast<double>(yg.y_degree(yg.require_id(u, w)));
        ++count;
    }
    report.q_u_mean = sum / static_cast<double>(count);  // count >= 1: e itself is open
    report.y_bar = yg.y_bar();
    report.gap_step = std::abs(report.v_k - report.v_k1);
    report.gap_local = std::abs(report.v_k - report.q_u_mean);
    report.gap_global = std::abs(report.v_k - report.y_bar);
    return report;
}

}  // namespace tfp
