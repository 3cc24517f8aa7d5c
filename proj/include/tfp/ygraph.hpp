#ifndef TFP_YGRAPH_HPP
#define TFP_YGRAPH_HPP

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tfp/process.hpp"

namespace tfp {

/** An open edge together with an orientation: `left` wears the L label. */
struct OrientedEdge {
    int left = 0;
    int right = 0;
};

/** One Y-adjacency e -> f: the target vertex id and the shared (pivot) vertex. */
struct YAdjacency {
    int to = 0;
    int pivot = 0;
};

/**
 * The Y-graph of a frozen process state: one vertex per open pair (sorted
 * lexicographically), and an edge between every pair of Y-neighbours.  Each
 * adjacency records the pivot vertex, so L/R orientations can be derived per
 * query instead of being stored.  Immutable after construction; concurrent
 * read queries are safe.
 */
class YGraph {
public:
    explicit YGraph(const ProcessState& state);

    int n() const { return n_; }
    int vertex_count() const { return static_cast<int>(pairs_.size()); }
    const VertexPair& pair_of(int id) const { return pairs_[id]; }

    /** Vertex id of the open pair {u, v}, or -1 when {u, v} is not a vertex. */
    int id_of(int u, int v) const;
    /** Like id_of, but throws std::invalid_argument for a non-open pair. */
    int require_id(int u, int v) const;

    const std::vector<YAdjacency>& neighbours(int id) const { return adj_[id]; }
    long long y_degree(int id) const { return static_cast<long long>(adj_[id].size()); }
    long long edge_count() const { return edge_count_; }  // unordered Y-graph edges

    /** Average Y-value over all open edges (0 when there are none). */
    double y_bar() const;

private:
    int n_ = 0;
    std::vector<VertexPair> pairs_;
    std::vector<std::vector<YAdjacency>> adj_;
    std::unordered_map<std::uint64_t, int> index_;
    long long edge_count_ = 0;
};

inline YGraph build_ygraph(const ProcessState& state) { return YGraph(state); }

/** Every adjacency is mirrored with the same pivot and free of duplicates. */
bool ygraph_symmetric(const YGraph& yg);

/** No three open edges are mutual Y-neighbours. */
bool ygraph_triangle_free(const YGraph& yg);

/** A finite walk type over the alphabet {L, R}. */
struct WalkSpec {
    std::string sigma;  // characters 'L' and 'R' only

    /** Validates the alphabet; the empty string is the empty type. */
    static WalkSpec parse(const std::string& text);

    std::size_t length() const { return sigma.size(); }
    /** Number of positions i with sigma_i != sigma_{i+1}. */
    int foot_changes() const;
    /** Every run of equal symbols is <= k and there are <= k foot changes. */
    bool is_k_short(int k) const;
};

/**
 * Number of sigma-walks starting from the oriented edge e.  Counts are kept
 * as doubles (exact below 2^53) because long walks multiply quickly.
 */
double u_walks(const YGraph& yg, const OrientedEdge& e, const WalkSpec& walk);

/**
 * Average Y-value over the endpoints of all sigma-walks from e, counted with
 * multiplicity.  Throws std::domain_error when there are no such walks; zero
 * is a legal average, so it is never used as a sentinel.
 */
double v_average(const YGraph& yg, const OrientedEdge& e, const WalkSpec& walk);

/**
 * Unoriented k-step walk count and walk-averaged Y-value from the open pair
 * e.  k = 0 gives (1, Y_e).  Throws std::domain_error when no walk exists.
 */
std::pair<double, double> v_k(const YGraph& yg, const VertexPair& e, int k);

/**
 * Mixing diagnostics for the oriented edge e: k steps with the left foot,
 * the planted right foot staying at u = e.right.
 */
struct MixingReport {
    int k = 0;
    double v_k = 0.0;        // V over L^k walks
    double v_k1 = 0.0;       // V over L^{k+1} walks
    double q_u_mean = 0.0;   // plain average of Y over open edges at u
    double y_bar = 0.0;      // average of Y over all open edges
    double gap_step = 0.0;   // |v_k - v_k1|
    double gap_local = 0.0;  // |v_k - q_u_mean|
    double gap_global = 0.0; // |v_k - y_bar|
};

/**
 * Compare the L^k and L^{k+1} walk averages from e with the open-
 * neighbourhood average at the planted foot and with the global average.
 * Throws std::invalid_argument when e is not open, and std::domain_error
 * when a required walk count is zero (an edge isolated in the Y-graph).
 */
MixingReport mixing_stats(const YGraph& yg, const ProcessState& state, const OrientedEdge& e,
                          int k);

}  // namespace tfp

#endif
