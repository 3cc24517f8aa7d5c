#ifndef TFP_ANALYSIS_HPP
#define TFP_ANALYSIS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tfp/process.hpp"
#include "tfp/trajectory.hpp"

namespace tfp {

/** Degree census of a frozen state, exact from the adjacency rows. */
struct DegreeStats {
    int max_degree = 0;
    std::vector<int> argmax;           // every vertex of maximum degree, ascending
    std::vector<long long> histogram;  // histogram[d] = #vertices of degree d; sums to n
};

DegreeStats max_degree_stats(const ProcessState& state);

/**
 * Exact maximum independent set size by branch and bound: degree-0/1
 * reductions, a greedy-matching upper bound, and max-degree pivoting, seeded
 * with a greedy solution.  The set realizing the optimum is re-verified
 * against the adjacency before the size is returned.  Guarded: states larger
 * than `guard` vertices (default 400) throw std::length_error.
 */
int alpha_exact(const ProcessState& state, int guard = 400);

/**
 * Verified independent-set lower bound: randomized minimum-degree greedy
 * completion, (0,1)-insertion and (1,2)-swap local search, and a handful of
 * perturbation rounds per restart, best over `budget` restarts (values below
 * one are treated as one).  Deterministic in (state, budget, seed), and
 * monotone in budget for a fixed seed.  Never exceeds alpha_exact.
 */
int alpha_heuristic(const ProcessState& state, int budget, std::uint64_t seed = 0);

/**
 * Openness profile of a vertex set S.  J holds the vertices (from all of
 * [n]) with at least n^delta neighbours inside S, sorted by count descending;
 * `a` carries those counts aligned with J.  o_n excludes open pairs covered
 * by any neighbourhood N(v_j) with v_j in J.  The two reference values are
 * the comparison quantities (1-eps)*C(s,2)*e^{-4t^2} and
 * (1-eps)*(C(s,2) - 2m^2/n^2)*e^{-4t^2} at the state's current step; gamma
 * is the reporting constant 10*sqrt(eps).  None of the reported constants
 * feed back into the computed counts.
 */
struct SetProfile {
    std::vector<int> s_vertices;  // the queried set, sorted ascending
    int s = 0;                    // |S|
    double delta_exp = 0.0;       // exponent used for the J threshold
    double threshold = 0.0;       // n^delta_exp
    std::vector<int> j_vertices;  // J, sorted by count descending (vertex id breaks ties)
    std::vector<long long> a;     // a_j = |N(v_j) ∩ S|, descending, aligned with j_vertices
    long long o_s = 0;            // open pairs inside S
    long long o_n = 0;            // o_s minus pairs inside any N(v_j) ∩ S, v_j in J
    double ref_open = 0.0;
    double ref_open_adjusted = 0.0;
    double gamma = 0.0;
};

SetProfile set_profile(const ProcessState& state, const Params& p, const std::vector<int>& set,
                       double delta_exp = 0.1);

/** Open pairs with both endpoints in `set`.  Throws std::invalid_argument on bad vertices. */
long long open_inside(const ProcessState& state, const std::vector<int>& set);

/**
 * Open pairs inside `set` that are not inside any member of `family` (the
 * exclusion rule behind SetProfile::o_n, with an explicit family).  The
 * family {set} therefore excludes everything.
 */
long long open_inside_excluding(const ProcessState& state, const std::vector<int>& set,
                                const std::vector<std::vector<int>>& family);

/**
 * Population moments of (Y_e, X_e) over the open edges of a frozen state.
 * When q <= 200000, or sample_size >= q, every open pair is swept and the
 * integer sums are exact; otherwise `sample_size` distinct open pairs are
 * drawn uniformly without replacement from a dedicated generator seeded by
 * (state seed, m), leaving the process stream untouched.  Variance and
 * covariance divide by the number of measured pairs (population convention).
 */
struct MomentStats {
    double ybar = 0.0;
    double xbar = 0.0;
    double var_y = 0.0;   // E[Y^2] - ybar^2
    double cov_xy = 0.0;  // E[XY] - xbar*ybar
    long long sample_size = 0;  // open pairs actually measured
    bool exact = false;         // true when every open pair was swept
    long long sum_y = 0;        // exact integer sums over the measured pairs
    long long sum_x = 0;
};

MomentStats moment_stats(const ProcessState& state, long long sample_size);

/** How to generate and certify one maximal triangle-free graph. */
struct WitnessConfig {
    int n = 0;
    std::uint64_t seed = 0;
    int exact_guard = 400;    // exact solver allowed up to this many vertices
    int heuristic_budget = 32;
    Instrumentation instrumentation = Instrumentation::light;
};

/**
 * A lower-bound certificate: the final graph of one completed run, re-verified
 * maximal triangle-free, with its independence number (exact when n is within
 * the guard, otherwise a labelled heuristic lower bound).  Only exact
 * certificates carry the Ramsey claim string.
 */
struct WitnessCertificate {
    int n = 0;
    std::uint64_t seed = 0;
    std::vector<VertexPair> edges;  // insertion order
    std::string alpha_kind;         // "exact" or "heuristic_lower_bound"
    int alpha_value = 0;
    int max_degree = 0;
    double alpha_over_sqrt_nlogn = 0.0;
    double maxdeg_over_sqrt_nlogn = 0.0;
    double edges_over_n32_sqrtlogn = 0.0;
    std::string claim;  // "R(3, alpha_value+1) > n" when exact; empty otherwise
};

WitnessCertificate ramsey_witness(const WitnessConfig& config);

/** Serialize a certificate to JSON (schema documented in the README). */
std::string certificate_json(const WitnessCertificate& cert);

} // namespace tfp

#endif
