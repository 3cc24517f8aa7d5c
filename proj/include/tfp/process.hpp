#ifndef TFP_PROCESS_HPP
#define TFP_PROCESS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tfp/bitrows.hpp"
#include "tfp/rng.hpp"

namespace tfp {

using VertexPair = std::pair<int, int>;

inline VertexPair ordered_pair(int a, int b) { return a < b ? VertexPair{a, b} : VertexPair{b, a}; }
inline std::uint64_t pair_key(int u, int v) {  // callers pass u < v
    return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
}
inline std::uint64_t pair_key(const VertexPair& e) { return pair_key(e.first, e.second); }

/** Thrown by step() once no open edge remains. */
struct ProcessComplete : std::runtime_error {
    ProcessComplete() : std::runtime_error("process complete: no open edge remains") {}
};

enum class Instrumentation { light, full };

/** When to stop advancing a run. */
struct StopRule {
    enum class Kind { completion, steps, time } kind = Kind::completion;
    long long m_max = 0;  // Kind::steps
    double t_max = 0.0;   // Kind::time

    static StopRule completion() { return {}; }
    static StopRule steps(long long m_max) { return {Kind::steps, m_max, 0.0}; }
    static StopRule time(double t_max) { return {Kind::time, 0, t_max}; }
};

struct RunConfig {
    int n = 0;
    std::uint64_t seed = 0;
    StopRule stop;
    Instrumentation instrumentation = Instrumentation::light;
    long long record_every = 1024;

    void validate() const;  // throws std::invalid_argument
};

/** Result of one step: the chosen edge and every pair it closed. */
struct StepOutcome {
    VertexPair chosen{};
    std::vector<VertexPair> closed;  // removal order: around u ascending, then around v ascending
    long long y_of_chosen = 0;       // == closed.size()
    bool has_delta_ybb = false;      // full instrumentation only
    long long delta_ybb = 0;
};

/** Brute-force statistics recomputed from adjacency alone (test oracle). */
struct OracleBundle {
    long long q = 0;
    BitRows openness;
    std::vector<std::pair<VertexPair, long long>> y_values;  // per open pair, lexicographic
    long long ybb = 0;             // sum of Y over open pairs
    long long xbb = 0;             // sum of labelled X over open pairs
    long long open_triangles = 0;  // unlabelled
    long long ygraph_edges = 0;    // counted via pivot vertices, independent of y_values
};

/**
 * Incremental state of the triangle-free process: adjacency and openness bit
 * rows, the open-pair list driving uniform selection, and (in full mode) all
 * per-pair Y counters plus their sum.  One execution context at a time.
 */
class ProcessState {
public:
    explicit ProcessState(const RunConfig& config);

    /** Rebuild a state from an explicit edge list (analysis input; PRNG is unused). */
    static ProcessState from_edges(int n, const std::vector<VertexPair>& edges,
                                   Instrumentation instr = Instrumentation::light);

    int n() const { return n_; }
    long long m() const { return m_; }
    long long q() const { return q_; }
    bool complete() const { return q_ == 0; }
    std::uint64_t seed() const { return seed_; }
    Instrumentation instrumentation() const { return instr_; }

    bool is_edge(int u, int v) const { return adj_.test(u, v); }
    bool is_open(int u, int v) const { return u != v && open_.test(u, v); }

    /** Advance by one uniformly chosen open edge.  Throws ProcessComplete at q=0. */
    StepOutcome step();

    /** Add a specific open pair (replay path; the PRNG is not consulted). */
    StepOutcome apply_edge(int u, int v);

    // On-demand statistics, valid in both instrumentation modes.
    long long y_count(int u, int v) const;  // defined for any pair of distinct vertices
    long long x_count(int u, int v) const;  // labelled count; requires {u,v} open
    std::pair<long long, long long> x_count_split(int u, int v) const;  // (X^L, X^R)
    long long z_count(int u, int v) const;
    int degree(int v) const { return static_cast<int>(adj_.popcount_row(v)); }
    int open_degree(int v) const { return static_cast<int>(open_.popcount_row(v)); }

    // Full-instrumentation accessors.
    long long ybb() const;                  // sum of Y over open pairs
    long long y_counter(int u, int v) const;
    /** Test fixture hook: corrupt one maintained counter (and the sum) by delta. */
    void debug_adjust_y_counter(int u, int v, long long delta);

    const std::vector<VertexPair>& history() const { return history_; }
    std::vector<VertexPair> open_pairs() const;          // canonical storage order
    VertexPair open_pair(std::size_t idx) const;         // open_list[idx]
    std::size_t open_count() const { return open_list_.size(); }

    // Row access for read-only analysis.
    int words() const { return adj_.words(); }
    const std::uint64_t* adj_row(int v) const { return adj_.row(v); }
    const std::uint64_t* open_row(int v) const { return open_.row(v); }
    const BitRows& adjacency() const { return adj_; }
    const BitRows& openness() const { return open_; }

    /** Brute-force recomputation of every maintained quantity, from adjacency alone. */
    OracleBundle recompute_oracle() const;
    /** Compare maintained state against an oracle bundle; false + reason on mismatch. */
    bool matches_oracle(const OracleBundle& oracle, std::string* why = nullptr) const;

    // Snapshot / export (formats documented in the README).
    std::string snapshot_line() const;
    static ProcessState restore(const std::string& snapshot_line, Instrumentation instr);
    void export_graph(std::ostream& os) const;
    static std::pair<int, std::vector<VertexPair>> parse_graph_export(std::istream& is);

private:
    ProcessState(int n, std::uint64_t seed, Instrumentation instr);

    StepOutcome apply_at(std::size_t idx);
    void remove_open_pair(int u, int v);  // u < v
    std::size_t tri_index(int u, int v) const {
        return static_cast<std::size_t>(u) * (2ull * n_ - u - 1) / 2 + (v - u - 1);
    }

    int n_ = 0;
    int words_ = 0;
    long long m_ = 0;
    long long q_ = 0;
    std::uint64_t seed_ = 0;
    Instrumentation instr_ = Instrumentation::light;
    BitRows adj_, open_;
    std::vector<std::uint32_t> open_list_;  // packed (u<<16)|v, u < v
    std::vector<std::uint32_t> open_pos_;   // tri_index -> position in open_list_
    std::vector<VertexPair> history_;
    Xoshiro256pp rng_;
    std::unordered_map<std::uint64_t, long long> y_counters_;  // full mode; missing key = 0
    long long ybb_ = 0;

    // per-step scratch (kept to avoid reallocation)
    std::vector<std::uint32_t> closed_buf_;
    std::vector<int> common_buf_;
    std::vector<std::uint64_t> removed_keys_;
};

/**
 * Drive a state until the stop rule (or completion).  on_sample fires after
 * every record_every-th step and once more at the end when the final step
 * count was not already sampled; the bool argument marks the final call.
 */
long long run_process(ProcessState& state, const StopRule& stop, long long record_every,
                      const std::function<void(const ProcessState&, bool)>& on_sample = {});

/** Independent final-graph check: triangle-free and every non-edge has a common neighbour. */
bool verify_maximal_triangle_free(const ProcessState& state, std::string* why = nullptr);

} // namespace tfp

#endif
