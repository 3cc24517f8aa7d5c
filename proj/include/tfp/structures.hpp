#ifndef TFP_STRUCTURES_HPP
#define TFP_STRUCTURES_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tfp/trajectory.hpp"

namespace tfp {

class ProcessState;

using IndexPair = std::pair<int, int>;  // vertex-index pair, stored as (lo, hi)

/**
 * A labelled graph structure: named vertices plus two disjoint sets of
 * unordered vertex pairs, the edges E and the open edges O.
 */
struct GraphStructure {
    std::vector<std::string> names;  // vertex labels; index is the vertex id
    std::set<IndexPair> edges;       // E(F)
    std::set<IndexPair> opens;       // O(F)

    int v() const { return static_cast<int>(names.size()); }
    int e() const { return static_cast<int>(edges.size()); }
    int o() const { return static_cast<int>(opens.size()); }
    bool has_edge(int a, int b) const;
    bool has_open(int a, int b) const;
    bool has_pair(int a, int b) const;  // in E or O
};

/** Every triangle over E union O must contain at least two open edges. */
bool is_permissible(const GraphStructure& f);

/**
 * A structure together with an anchor vertex set.  Construction applies the
 * hat restriction: pairs with both endpoints in the anchor are deleted, so
 * the anchor is always independent afterwards.
 */
class AnchoredPair {
public:
    AnchoredPair(GraphStructure f, std::set<int> anchor);

    const GraphStructure& structure() const { return f_; }
    const std::set<int>& anchor() const { return anchor_; }
    int v_a() const { return f_.v() - static_cast<int>(anchor_.size()); }
    int e() const { return f_.e(); }
    int o() const { return f_.o(); }
    bool in_anchor(int vertex) const { return anchor_.count(vertex) > 0; }

    /** The text-format rendering, also the label-preserving identity key. */
    std::string canonical_text() const;

private:
    GraphStructure f_;
    std::set<int> anchor_;
};

/**
 * Parse the structure text format: the four declarations
 *   v: <names>   A: <names>   E: <a-b list>   O: <a-b list>
 * in this order, separated by newlines or semicolons; '#' starts a comment.
 * Throws std::invalid_argument with line/column on malformed input and when
 * the same pair appears in both E and O.
 */
AnchoredPair parse_structure(const std::string& text);

/**
 * Exact squared-time value rho = t^2 / log n as a rational, with zero and
 * infinity sentinels; realized as t = sqrt(rho * log n).  Total order
 * zero < finite < infinite with exact comparisons.
 */
class RhoTime {
public:
    static RhoTime zero();
    static RhoTime infinite();
    static RhoTime finite(long long num, long long den);  // requires num, den > 0
    /** The structure rule: zero iff e >= 2*v_a; infinite iff o = 0 (and e < 2*v_a). */
    static RhoTime of(int v_a, int e, int o);

    bool is_zero() const { return kind_ == Kind::zero; }
    bool is_finite() const { return kind_ == Kind::finite; }
    bool is_infinite() const { return kind_ == Kind::infinite; }
    long long num() const { return num_; }
    long long den() const { return den_; }
    double value() const;                  // rho as a real; +inf for the sentinel
    double realize(const Params& p) const; // t = sqrt(rho * log n); +inf if infinite

    bool operator==(const RhoTime& other) const;
    bool operator<(const RhoTime& other) const;
    bool operator<=(const RhoTime& other) const { return *this < other || *this == other; }
    bool operator>(const RhoTime& other) const { return other < *this; }
    bool operator>=(const RhoTime& other) const { return other <= *this; }

    std::string str() const;  // "0", "p/q", or "inf"

private:
    enum class Kind { zero, finite, infinite };
    Kind kind_ = Kind::zero;
    long long num_ = 0;
    long long den_ = 1;
};

/** rho of the pair itself: (2 v_A - e) / (8 o) with the sentinel rules. */
RhoTime rho_star(const AnchoredPair& pair);
/** Realization sqrt(rho * log n); 0 for zero, +inf for infinite. */
double t_star_struct(const AnchoredPair& pair, int n);

struct TrackingTime {
    RhoTime rho;   // exact minimum over proper super-structures of A (uncapped)
    double t = 0;  // realized time, capped at the process horizon t*
};
/**
 * min over A < H <= F of the structure time of (F[H], A), capped at t*;
 * equals t* when A = V(F).
 */
TrackingTime tracking_time(const AnchoredPair& pair, const Params& p);

struct BuildingSequenceResult {
    std::vector<std::set<int>> chain;  // H_0 c ... c H_l = V(F), vertex-id sets
    std::vector<RhoTime> rhos;         // exact times rho_1 < ... < rho_l
    std::vector<double> times;         // realizations, capped at t*
};
/**
 * The unique building sequence of the pair: H_0 is the union of all zero-time
 * sub-structures minimizing the idealized count at t = 1/2 (compared
 * asymptotically in n: lexicographic on 2 v_A - e ascending, then o
 * descending), and each H_{j+1} is the union of all super-structures of H_j
 * minimizing the exact relative structure time.
 */
BuildingSequenceResult building_sequence(const AnchoredPair& pair, const Params& p);

/**
 * Balancedness: either every proper super-structure of A has structure time
 * at least the pair's own and the tracking time is positive, or the integer
 * excess e - 2 v_A is maximized by the full structure and the tracking time
 * is zero.  Exact rational/integer comparisons throughout.
 */
bool is_balanced(const AnchoredPair& pair);

/**
 * The member H_j of the building sequence whose time interval contains t,
 * i.e. the minimal H with t < (tracking time of (F, H)).  Requires 0 < t < t*.
 */
std::set<int> minimal_tracking_substructure(const AnchoredPair& pair, const Params& p, double t);

/** Idealized rooted count: (e^{-4t^2})^o (2t/sqrt n)^e n^{v_A} at step m. */
double tilde_n(const AnchoredPair& pair, const Params& p, long long m);
/** Natural log of tilde_n; -inf when the value is zero (t = 0 with e > 0). */
double log_tilde_n(const AnchoredPair& pair, const Params& p, long long m);

struct StructureWeights {
    double delta = 0;          // (C^3 v_A^2 + 2e + o)^C
    double delta_minus_v = 0;  // (delta_base - C)^C, or 0 when v_A = 0
    double gamma = 0;          // delta - e - 2
    double c = 2;              // max(2, max_H 2 o(H) / (2 v_A(H) - e(H)))
    long long c_num = 2;       // the same maximum as an exact reduced rational
    long long c_den = 1;
};
/** All structure weights; throws std::domain_error when the tracking time is 0. */
StructureWeights weights(const AnchoredPair& pair, const Params& p);

/** The delta weight alone (defined for every pair, tracking time included 0). */
double delta_weight(const AnchoredPair& pair, const Params& p);
double delta_minus_v_weight(const AnchoredPair& pair, const Params& p);
/** Split weight over an intermediate vertex set H: delta(F,H) + delta(F[H],A). */
double delta_split(const AnchoredPair& pair, const std::set<int>& h, const Params& p);

/** Structure envelope e^{c t^2} n^{-1/4} (log n)^{gamma}; throws when c is undefined. */
double g_fa(const AnchoredPair& pair, const Params& p, double t);
double log_g_fa(const AnchoredPair& pair, const Params& p, double t);
/** Coarse envelope e^{C(o+1)(t^2+1)} n^{-1/4} (log n)^{delta - sqrt(delta)}. */
double f_fa(const AnchoredPair& pair, const Params& p, double t);
double log_f_fa(const AnchoredPair& pair, const Params& p, double t);
/**
 * Natural log of the structure Line of Death at step m:
 * max(-o (t^2 - t_A^2) + delta loglog n, delta_minus_v loglog n).
 */
double death_line_log(const AnchoredPair& pair, const Params& p, long long m);

enum class DerivedFamily { open, plus, minus, star };

struct DerivedMember {
    AnchoredPair pair;
    std::string marker;   // derivation tag, e.g. "open:a-b" or "minus(c):+w-b"
    char minus_case = 0;  // 'a'..'f' for minus/star members, 0 otherwise
};
/**
 * The derived families: open (one edge made open, the vulnerable edge),
 * plus (endpoints of one edge absorbed into the anchor), minus (the
 * destruction cases (a)-(f)), and star (minus members with strictly fewer
 * free vertices).
 */
std::vector<DerivedMember> derived_families(const AnchoredPair& pair, DerivedFamily which);

/** Injective map on the anchor: structure vertex id -> graph vertex. */
using AnchorMap = std::map<int, int>;

/**
 * Faithfulness of phi at the current state: the structure plus the state's
 * edges between image pairs of the anchor must be permissible.
 */
bool is_faithful(const AnchoredPair& pair, const AnchorMap& phi, const ProcessState& state);

/**
 * Exact rooted embedding count: injective extensions of phi sending
 * structure edges to graph edges and open edges to open pairs.
 */
long long count_embeddings(const AnchoredPair& pair, const AnchorMap& phi,
                           const ProcessState& state);

struct TrackingReport {
    long long sampled = 0;     // anchor maps drawn
    long long faithful = 0;    // of which faithful
    long long violations = 0;  // faithful maps with |ratio - 1| > envelope
    double tilde = 0;          // idealized rooted count at the state's step
    double envelope_g = 0;     // g_{F,A}(t); +inf when undefined at this pair
    bool envelope_vacuous = false;  // envelope exceeds 1 (or is undefined)
    double mean_ratio = 0;     // mean of count/tilde over faithful maps
    double min_ratio = 0;
    double max_ratio = 0;
};
/**
 * Sample random injective anchor maps and compare rooted counts against the
 * idealized value and envelope; purely informational at finite n.
 */
TrackingReport tracking_report(const AnchoredPair& pair, const Params& p,
                               const ProcessState& state, long long samples,
                               std::uint64_t seed);

}  // namespace tfp

#endif  // TFP_STRUCTURES_HPP
