#include "tfp/structures.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tfp/process.hpp"
#include "tfp/rng.hpp"

namespace tfp {

namespace {

IndexPair sorted_pair(int a, int b) { return a < b ? IndexPair{a, b} : IndexPair{b, a}; }

constexpr int kMaxFreeVertices = 16;  // subset-enumeration guard
constexpr int kMaxMaskVertices = 64;  // bitmask width for sub-structure scans

void enumeration_guard(const AnchoredPair& pair) {
    if (pair.structure().v() > kMaxMaskVertices || pair.v_a() > kMaxFreeVertices) {
        throw std::length_error("structure too large for sub-structure enumeration (limit " +
                                std::to_string(kMaxFreeVertices) + " non-anchor vertices)");
    }
}

/** Pair and anchor masks for fast induced-substructure counting. */
struct MaskView {
    std::uint64_t full = 0;
    std::uint64_t anchor = 0;
    std::vector<std::uint64_t> edge_bits;
    std::vector<std::uint64_t> open_bits;

    explicit MaskView(const AnchoredPair& pair) {
        const GraphStructure& f = pair.structure();
        for (int i = 0; i < f.v(); ++i) full |= 1ull << i;
        for (int a : pair.anchor()) anchor |= 1ull << a;
        for (const auto& [a, b] : f.edges) edge_bits.push_back((1ull << a) | (1ull << b));
        for (const auto& [a, b] : f.opens) open_bits.push_back((1ull << a) | (1ull << b));
    }

    // counts of F[h] hat-restricted at b (pairs inside b removed)
    int e_in(std::uint64_t h, std::uint64_t b) const { return count(edge_bits, h, b); }
    int o_in(std::uint64_t h, std::uint64_t b) const { return count(open_bits, h, b); }

    static int count(const std::vector<std::uint64_t>& bits, std::uint64_t h, std::uint64_t b) {
        int c = 0;
        for (std::uint64_t m : bits)
            if ((m & h) == m && (m & b) != m) ++c;
        return c;
    }
};

RhoTime rho_of(const MaskView& mv, std::uint64_t h, std::uint64_t b) {
    const int v_b = std::popcount(h) - std::popcount(b);
    return RhoTime::of(v_b, mv.e_in(h, b), mv.o_in(h, b));
}

std::set<int> mask_to_set(std::uint64_t mask) {
    std::set<int> out;
    for (int i = 0; mask; ++i, mask >>= 1)
        if (mask & 1) out.insert(i);
    return out;
}

/** Visit anchor|S for every nonempty subset S of the free vertices. */
template <typename Fn>
void for_each_superset(std::uint64_t anchor, std::uint64_t full, Fn&& fn) {
    const std::uint64_t free_mask = full & ~anchor;
    // iterate sub-masks of free_mask, skipping the empty one
    std::uint64_t s = free_mask;
    while (s) {
        fn(anchor | s);
        s = (s - 1) & free_mask;
    }
}

double log_log_n(const Params& p) { return std::log(p.log_n()); }

/** delta base: C^3 v_A^2 + 2e + o. */
double delta_base(const AnchoredPair& pair, const Params& p) {
    const double c3 = p.big_c * p.big_c * p.big_c;
    return c3 * pair.v_a() * pair.v_a() + 2.0 * pair.e() + pair.o();
}

GraphStructure induced_structure(const GraphStructure& f, const std::set<int>& keep) {
    std::vector<int> order(keep.begin(), keep.end());
    std::vector<int> remap(f.v(), -1);
    GraphStructure out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        remap[order[i]] = static_cast<int>(i);
        out.names.push_back(f.names[order[i]]);
    }
    for (const auto& [a, b] : f.edges)
        if (remap[a] >= 0 && remap[b] >= 0) out.edges.insert(sorted_pair(remap[a], remap[b]));
    for (const auto& [a, b] : f.opens)
        if (remap[a] >= 0 && remap[b] >= 0) out.opens.insert(sorted_pair(remap[a], remap[b]));
    return out;
}

std::string fresh_name(const GraphStructure& f) {
    auto taken = [&](const std::string& s) {
        return std::find(f.names.begin(), f.names.end(), s) != f.names.end();
    };
    if (!taken("w")) return "w";
    for (int i = 1;; ++i) {
        std::string cand = "w" + std::to_string(i);
        if (!taken(cand)) return cand;
    }
}

void validate_anchor_map(const AnchoredPair& pair, const AnchorMap& phi, int n) {
    if (phi.size() != pair.anchor().size())
        throw std::invalid_argument("anchor map must cover the anchor exactly");
    std::set<int> images;
    for (const auto& [vertex, image] : phi) {
        if (!pair.in_anchor(vertex))
            throw std::invalid_argument("anchor map key is not an anchor vertex");
        if (image < 0 || image >= n) throw std::invalid_argument("anchor map image out of range");
        if (!images.insert(image).second)
            throw std::invalid_argument("anchor map must be injective");
    }
}

}  // namespace

bool GraphStructure::has_edge(int a, int b) const { return edges.count(sorted_pair(a, b)) > 0; }
bool GraphStructure::has_open(int a, int b) const { return opens.count(sorted_pair(a, b)) > 0; }
bool GraphStructure::has_pair(int a, int b) const { return has_edge(a, b) || has_open(a, b); }

bool is_permissible(const GraphStructure& f) {
    const int v = f.v();
    for (int a = 0; a < v; ++a)
        for (int b = a + 1; b < v; ++b) {
            if (!f.has_pair(a, b)) continue;
            for (int c = b + 1; c < v; ++c) {
                if (!f.has_pair(a, c) || !f.has_pair(b, c)) continue;
                const int open_count = (f.has_open(a, b) ? 1 : 0) + (f.has_open(a, c) ? 1 : 0) +
                                       (f.has_open(b, c) ? 1 : 0);
                if (open_count < 2) return false;
            }
        }
    return true;
}

AnchoredPair::AnchoredPair(GraphStructure f, std::set<int> anchor) {
    const int v = f.v();
    for (int a : anchor)
        if (a < 0 || a >= v) throw std::invalid_argument("anchor vertex out of range");
    auto normalize = [&](const std::set<IndexPair>& in, const char* what) {
        std::set<IndexPair> out;
        for (const auto& [a, b] : in) {
            if (a < 0 || a >= v || b < 0 || b >= v)
                throw std::invalid_argument(std::string(what) + " endpoint out of range");
            if (a == b) throw std::invalid_argument(std::string(what) + " is a self-loop");
            out.insert(sorted_pair(a, b));
        }
        return out;
    };
    f.edges = normalize(f.edges, "edge");
    f.opens = normalize(f.opens, "open edge");
    for (const auto& pr : f.edges)
        if (f.opens.count(pr))
            throw std::invalid_argument("pair " + f.names[pr.first] + "-" + f.names[pr.second] +
                                        " appears in both E and O");
    // hat restriction: delete pairs lying inside the anchor
    auto inside = [&](const IndexPair& pr) {
        return anchor.count(pr.first) > 0 && anchor.count(pr.second) > 0;
    };
    std::erase_if(f.edges, inside);
    std::erase_if(f.opens, inside);
    f_ = std::move(f);
    anchor_ = std::move(anchor);
}

std::string AnchoredPair::canonical_text() const {
    std::ostringstream out;
    out << "v:";
    for (const auto& name : f_.names) out << ' ' << name;
    out << "\nA:";
    for (int a : anchor_) out << ' ' << f_.names[a];
    out << "\nE:";
    for (const auto& [a, b] : f_.edges) out << ' ' << f_.names[a] << '-' << f_.names[b];
    out << "\nO:";
    for (const auto& [a, b] : f_.opens) out << ' ' << f_.names[a] << '-' << f_.names[b];
    out << '\n';
    return out.str();
}

namespace {

struct Declaration {
    std::string head;
    std::string payload;
    int line;
    int column;  // 1-based column of the payload start
};

[[noreturn]] void parse_fail(int line, int column, const std::string& msg) {
    throw std::invalid_argument("structure parse error at line " + std::to_string(line) +
                                ", column " + std::to_string(column) + ": " + msg);
}

}  // namespace

AnchoredPair parse_structure(const std::string& text) {
    // split into declarations: newline- or semicolon-separated "head: payload"
    std::vector<Declaration> decls;
    int line_no = 0;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::size_t seg_start = 0;
        while (seg_start <= line.size()) {
            std::size_t seg_end = line.find(';', seg_start);
            if (seg_end == std::string::npos) seg_end = line.size();
            std::string seg = line.substr(seg_start, seg_end - seg_start);
            if (seg.find_first_not_of(" \t") != std::string::npos) {
                auto colon = seg.find(':');
                if (colon == std::string::npos)
                    parse_fail(line_no, static_cast<int>(seg_start) + 1,
                               "expected 'head: ...' declaration");
                std::string head = seg.substr(0, colon);
                head.erase(std::remove_if(head.begin(), head.end(),
                                          [](char c) { return c == ' ' || c == '\t'; }),
                           head.end());
                decls.push_back({head, seg.substr(colon + 1), line_no,
                                 static_cast<int>(seg_start + colon + 2)});
            }
            seg_start = seg_end + 1;
        }
    }
    static const char* kOrder[4] = {"v", "A", "E", "O"};
    if (decls.size() != 4) {
        const int at = decls.empty() ? 1 : decls.back().line;
        parse_fail(at, 1, "expected exactly the four declarations v:, A:, E:, O: (found " +
                              std::to_string(decls.size()) + ")");
    }
    for (int i = 0; i < 4; ++i)
        if (decls[i].head != kOrder[i])
            parse_fail(decls[i].line, 1, std::string("expected '") + kOrder[i] + ":' here, found '" +
                                             decls[i].head + ":'");

    auto tokens_of = [](const Declaration& d) {
        std::vector<std::pair<std::string, int>> out;  // token, 1-based column
        std::size_t i = 0;
        while (i < d.payload.size()) {
            if (d.payload[i] == ' ' || d.payload[i] == '\t') {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < d.payload.size() && d.payload[j] != ' ' && d.payload[j] != '\t') ++j;
            out.push_back({d.payload.substr(i, j - i), d.column + static_cast<int>(i)});
            i = j;
        }
        return out;
    };
    auto check_name = [&](const std::string& name, int line_at, int col) {
        for (char c : name)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
                parse_fail(line_at, col, "invalid character in name '" + name + "'");
    };

    GraphStructure f;
    std::map<std::string, int> id_of;
    for (const auto& [tok, col] : tokens_of(decls[0])) {
        check_name(tok, decls[0].line, col);
        if (id_of.count(tok)) parse_fail(decls[0].line, col, "duplicate vertex '" + tok + "'");
        id_of[tok] = f.v();
        f.names.push_back(tok);
    }
    std::set<int> anchor;
    for (const auto& [tok, col] : tokens_of(decls[1])) {
        auto it = id_of.find(tok);
        if (it == id_of.end())
            parse_fail(decls[1].line, col, "anchor vertex '" + tok + "' is not declared");
        anchor.insert(it->second);
    }
    auto parse_pairs = [&](const Declaration& d) {
        std::set<IndexPair> out;
        for (const auto& [tok, col] : tokens_of(d)) {
            auto dash = tok.find('-');
            if (dash == std::string::npos || tok.find('-', dash + 1) != std::string::npos)
                parse_fail(d.line, col, "expected a pair 'x-y', found '" + tok + "'");
            const std::string lhs = tok.substr(0, dash), rhs = tok.substr(dash + 1);
            auto li = id_of.find(lhs), ri = id_of.find(rhs);
            if (li == id_of.end())
                parse_fail(d.line, col, "vertex '" + lhs + "' is not declared");
            if (ri == id_of.end())
                parse_fail(d.line, col, "vertex '" + rhs + "' is not declared");
            if (li->second == ri->second) parse_fail(d.line, col, "self-loop '" + tok + "'");
            out.insert(sorted_pair(li->second, ri->second));
        }
        return out;
    };
    f.edges = parse_pairs(decls[2]);
    f.opens = parse_pairs(decls[3]);
    for (const auto& pr : f.edges)
        if (f.opens.count(pr))
            parse_fail(decls[3].line, decls[3].column, "pair " + f.names[pr.first] + "-" +
                                                           f.names[pr.second] +
                                                           " appears in both E and O");
    return AnchoredPair(std::move(f), std::move(anchor));
}

RhoTime RhoTime::zero() { return RhoTime{}; }

RhoTime RhoTime::infinite() {
    RhoTime r;
    r.kind_ = Kind::infinite;
    return r;
}

RhoTime RhoTime::finite(long long num, long long den) {
    if (num <= 0 || den <= 0) throw std::invalid_argument("finite rho must be positive");
    const long long g = std::gcd(num, den);
    RhoTime r;
    r.kind_ = Kind::finite;
    r.num_ = num / g;
    r.den_ = den / g;
    return r;
}

RhoTime RhoTime::of(int v_a, int e, int o) {
    const long long num = 2ll * v_a - e;
    if (num <= 0) return zero();
    if (o == 0) return infinite();
    return finite(num, 8ll * o);
}

double RhoTime::value() const {
    switch (kind_) {
        case Kind::zero: return 0.0;
        case Kind::finite: return static_cast<double>(num_) / static_cast<double>(den_);
        default: return std::numeric_limits<double>::infinity();
    }
}

double RhoTime::realize(const Params& p) const {
    if (kind_ == Kind::infinite) return std::numeric_limits<double>::infinity();
    return std::sqrt(value() * p.log_n());
}

bool RhoTime::operator==(const RhoTime& other) const {
    if (kind_ != other.kind_) return false;
    if (kind_ != Kind::finite) return true;
    return num_ == other.num_ && den_ == other.den_;
}

bool RhoTime::operator<(const RhoTime& other) const {
    auto rank = [](Kind k) { return k == Kind::zero ? 0 : k == Kind::finite ? 1 : 2; };
    if (rank(kind_) != rank(other.kind_)) return rank(kind_) < rank(other.kind_);
    if (kind_ != Kind::finite) return false;
    return static_cast<__int128>(num_) * other.den_ < static_cast<__int128>(other.num_) * den_;
}

std::string RhoTime::str() const {
    if (is_zero()) return "0";
    if (is_infinite()) return "inf";
    return std::to_string(num_) + "/" + std::to_string(den_);
}

RhoTime rho_star(const AnchoredPair& pair) {
    return RhoTime::of(pair.v_a(), pair.e(), pair.o());
}

double t_star_struct(const AnchoredPair& pair, int n) {
    const RhoTime rho = rho_star(pair);
    if (rho.is_infinite()) return std::numeric_limits<double>::infinity();
    return std::sqrt(rho.value() * std::log(static_cast<double>(n)));
}

TrackingTime tracking_time(const AnchoredPair& pair, const Params& p) {
    enumeration_guard(pair);
    const double horizon = t_star(p);
    if (pair.v_a() == 0) return {RhoTime::infinite(), horizon};
    const MaskView mv(pair);
    RhoTime best = RhoTime::infinite();
    for_each_superset(mv.anchor, mv.full, [&](std::uint64_t h) {
        const RhoTime rho = rho_of(mv, h, mv.anchor);
        if (rho < best) best = rho;
    });
    return {best, std::min(best.realize(p), horizon)};
}

BuildingSequenceResult building_sequence(const AnchoredPair& pair, const Params& p) {
    enumeration_guard(pair);
    const MaskView mv(pair);

    // H_0: among zero-time sub-structures, minimize the idealized count at
    // t = 1/2, i.e. lexicographically (2 v_A - e ascending, o descending);
    // the optimum is the union of all optimizers.
    std::pair<long long, long long> best_key{0, 0};  // the anchor itself: (0, -0)
    std::uint64_t h0 = mv.anchor;
    auto key_of = [&](std::uint64_t h) -> std::pair<long long, long long> {
        const long long v_a = std::popcount(h) - std::popcount(mv.anchor);
        const long long e = mv.e_in(h, mv.anchor);
        return {2 * v_a - e, -static_cast<long long>(mv.o_in(h, mv.anchor))};
    };
    for_each_superset(mv.anchor, mv.full, [&](std::uint64_t h) {
        if (!rho_of(mv, h, mv.anchor).is_zero()) return;
        const auto key = key_of(h);
        if (key < best_key) {
            best_key = key;
            h0 = h;
        } else if (key == best_key) {
            h0 |= h;
        }
    });
    if (h0 != mv.anchor && (!rho_of(mv, h0, mv.anchor).is_zero() || key_of(h0) != best_key))
        throw std::logic_error("building sequence: union of initial optimizers is not optimal");

    BuildingSequenceResult out;
    out.chain.push_back(mask_to_set(h0));
    std::uint64_t cur = h0;
    RhoTime prev = RhoTime::zero();
    while (cur != mv.full) {
        RhoTime best = RhoTime::infinite();
        std::uint64_t next = 0;
        bool found = false;
        for_each_superset(cur, mv.full, [&](std::uint64_t h) {
            const RhoTime rho = rho_of(mv, h, cur);
            if (!found || rho < best) {
                best = rho;
                next = h;
                found = true;
            } else if (rho == best) {
                next |= h;
            }
        });
        if (!found || !(rho_of(mv, next, cur) == best))
            throw std::logic_error("building sequence: union of optimizers is not optimal");
        if (!(prev < best))
            throw std::logic_error("building sequence: times are not strictly increasing");
        out.chain.push_back(mask_to_set(next));
        out.rhos.push_back(best);
        out.times.push_back(std::min(best.realize(p), t_star(p)));
        cur = next;
        prev = best;
    }
    return out;
}

bool is_balanced(const AnchoredPair& pair) {
    enumeration_guard(pair);
    const MaskView mv(pair);
    const RhoTime rho_f = rho_star(pair);
    bool tracking_zero = false;
    bool all_at_least_f = true;
    // integer excess e - 2 v_A, maximized by the full structure for case (b)
    const long long excess_f = pair.e() - 2ll * pair.v_a();
    bool excess_ok = 0 <= excess_f;  // the H = A term
    for_each_superset(mv.anchor, mv.full, [&](std::uint64_t h) {
        const RhoTime rho = rho_of(mv, h, mv.anchor);
        if (rho.is_zero()) tracking_zero = true;
        if (rho < rho_f) all_at_least_f = false;
        const long long excess =
            mv.e_in(h, mv.anchor) - 2ll * (std::popcount(h) - std::popcount(mv.anchor));
        if (excess > excess_f) excess_ok = false;
    });
    if (!tracking_zero) return all_at_least_f;
    return excess_ok;
}

std::set<int> minimal_tracking_substructure(const AnchoredPair& pair, const Params& p, double t) {
    if (!(t > 0.0) || !(t < t_star(p)))
        throw std::invalid_argument("minimal_tracking_substructure requires 0 < t < t*");
    const BuildingSequenceResult bs = building_sequence(pair, p);
    std::size_t j = 0;
    for (std::size_t i = 0; i < bs.rhos.size(); ++i)
        if (bs.rhos[i].realize(p) <= t) j = i + 1;
    return bs.chain[j];
}

double log_tilde_n(const AnchoredPair& pair, const Params& p, long long m) {
    const double t = time_map(p, m);
    const double ln_n = p.log_n();
    double out = -4.0 * t * t * pair.o() + pair.v_a() * ln_n;
    if (pair.e() > 0) {
        if (t <= 0.0) return -std::numeric_limits<double>::infinity();
        out += pair.e() * (std::log(2.0 * t) - 0.5 * ln_n);
    }
    return out;
}

double tilde_n(const AnchoredPair& pair, const Params& p, long long m) {
    return std::exp(log_tilde_n(pair, p, m));
}

double delta_weight(const AnchoredPair& pair, const Params& p) {
    return std::pow(delta_base(pair, p), p.big_c);
}

double delta_minus_v_weight(const AnchoredPair& pair, const Params& p) {
    if (pair.v_a() == 0) return 0.0;
    return std::pow(delta_base(pair, p) - p.big_c, p.big_c);
}

double delta_split(const AnchoredPair& pair, const std::set<int>& h, const Params& p) {
    for (int a : pair.anchor())
        if (!h.count(a)) throw std::invalid_argument("split set must contain the anchor");
    for (int x : h)
        if (x < 0 || x >= pair.structure().v())
            throw std::invalid_argument("split set vertex out of range");
    const AnchoredPair outer(pair.structure(), h);
    // remap the anchor into the induced sub-structure's vertex ids
    std::vector<int> order(h.begin(), h.end());
    std::set<int> inner_anchor;
    for (std::size_t i = 0; i < order.size(); ++i)
        if (pair.in_anchor(order[i])) inner_anchor.insert(static_cast<int>(i));
    const AnchoredPair inner(induced_structure(pair.structure(), h), inner_anchor);
    return delta_weight(outer, p) + delta_weight(inner, p);
}

StructureWeights weights(const AnchoredPair& pair, const Params& p) {
    enumeration_guard(pair);
    StructureWeights w;
    const double base = delta_base(pair, p);
    w.delta = std::pow(base, p.big_c);
    w.delta_minus_v = delta_minus_v_weight(pair, p);
    w.gamma = w.delta - pair.e() - 2.0;
    // c = max over proper super-structures of 2 o(H) / (2 v_A(H) - e(H)), floored at 2
    long long num = 2, den = 1;
    const MaskView mv(pair);
    for_each_superset(mv.anchor, mv.full, [&](std::uint64_t h) {
        const long long d = 2ll * (std::popcount(h) - std::popcount(mv.anchor)) - mv.e_in(h, mv.anchor);
        if (d <= 0)
            throw std::domain_error("c weight undefined: the pair's tracking time is zero");
        const long long n2 = 2ll * mv.o_in(h, mv.anchor);
        if (static_cast<__int128>(n2) * den > static_cast<__int128>(num) * d) {
            num = n2;
            den = d;
        }
    });
    const long long g = std::gcd(num, den);
    w.c_num = num / g;
    w.c_den = den / g;
    w.c = static_cast<double>(w.c_num) / static_cast<double>(w.c_den);
    return w;
}

double log_g_fa(const AnchoredPair& pair, const Params& p, double t) {
    const StructureWeights w = weights(pair, p);
    return w.c * t * t - 0.25 * p.log_n() + w.gamma * log_log_n(p);
}

double g_fa(const AnchoredPair& pair, const Params& p, double t) {
    return std::exp(log_g_fa(pair, p, t));
}

double log_f_fa(const AnchoredPair& pair, const Params& p, double t) {
    const double delta = delta_weight(pair, p);
    return p.big_c * (pair.o() + 1) * (t * t + 1.0) - 0.25 * p.log_n() +
           (delta - std::sqrt(delta)) * log_log_n(p);
}

double f_fa(const AnchoredPair& pair, const Params& p, double t) {
    return std::exp(log_f_fa(pair, p, t));
}

double death_line_log(const AnchoredPair& pair, const Params& p, long long m) {
    const double t = time_map(p, m);
    const double t_a = tracking_time(pair, p).t;
    const double lll = log_log_n(p);
    const double alive = -pair.o() * (t * t - t_a * t_a) + delta_weight(pair, p) * lll;
    const double fallback = delta_minus_v_weight(pair, p) * lll;
    return std::max(alive, fallback);
}

std::vector<DerivedMember> derived_families(const AnchoredPair& pair, DerivedFamily which) {
    const GraphStructure& f = pair.structure();
    const std::set<int>& anchor = pair.anchor();
    auto pair_name = [&](const IndexPair& pr) {
        return f.names[pr.first] + "-" + f.names[pr.second];
    };
    std::vector<DerivedMember> out;
    std::set<std::string> seen;
    auto push = [&](AnchoredPair derived, std::string marker, char minus_case) {
        if (!seen.insert(derived.canonical_text()).second) return;
        out.push_back({std::move(derived), std::move(marker), minus_case});
    };

    if (which == DerivedFamily::open) {
        for (const auto& edge : f.edges) {
            GraphStructure g = f;
            g.edges.erase(edge);
            g.opens.insert(edge);
            push(AnchoredPair(std::move(g), anchor), "open:" + pair_name(edge), 0);
        }
        return out;
    }
    if (which == DerivedFamily::plus) {
        for (const auto& edge : f.edges) {
            std::set<int> grown = anchor;
            grown.insert(edge.first);
            grown.insert(edge.second);
            push(AnchoredPair(f, std::move(grown)), "plus:" + pair_name(edge), 0);
        }
        return out;
    }

    // the destruction family, cases (a)-(f)
    std::vector<int> free_vertices;
    for (int i = 0; i < f.v(); ++i)
        if (!anchor.count(i)) free_vertices.push_back(i);

    // (a) add an edge from the anchor to a free vertex with an open anchor neighbour
    for (int v : free_vertices) {
        bool has_open_anchor_neighbour = false;
        for (int a : anchor)
            if (f.has_open(a, v)) has_open_anchor_neighbour = true;
        if (!has_open_anchor_neighbour) continue;
        for (int a : anchor) {
            if (f.has_pair(a, v)) continue;
            GraphStructure g = f;
            g.edges.insert(sorted_pair(a, v));
            push(AnchoredPair(std::move(g), anchor),
                 "minus(a):+" + f.names[a] + "-" + f.names[v], 'a');
        }
    }
    // (b) absorb one free vertex into the anchor
    for (int v : free_vertices) {
        std::set<int> grown = anchor;
        grown.insert(v);
        push(AnchoredPair(f, std::move(grown)), "minus(b):A+" + f.names[v], 'b');
    }
    // (c) new anchored vertex joined by an edge to a free vertex
    for (int u : free_vertices) {
        GraphStructure g = f;
        const int w = g.v();
        g.names.push_back(fresh_name(f));
        g.edges.insert(sorted_pair(w, u));
        std::set<int> grown = anchor;
        grown.insert(w);
        push(AnchoredPair(std::move(g), std::move(grown)),
             "minus(c):+" + f.names[u] + "-new", 'c');
    }
    // (d) absorb two free vertices
    for (std::size_t i = 0; i < free_vertices.size(); ++i)
        for (std::size_t j = i + 1; j < free_vertices.size(); ++j) {
            std::set<int> grown = anchor;
            grown.insert(free_vertices[i]);
            grown.insert(free_vertices[j]);
            push(AnchoredPair(f, std::move(grown)),
                 "minus(d):A+" + f.names[free_vertices[i]] + "+" + f.names[free_vertices[j]], 'd');
        }
    // (e) absorb one free vertex plus a new isolated anchored vertex
    for (int u : free_vertices) {
        GraphStructure g = f;
        const int w = g.v();
        g.names.push_back(fresh_name(f));
        std::set<int> grown = anchor;
        grown.insert(u);
        grown.insert(w);
        push(AnchoredPair(std::move(g), std::move(grown)), "minus(e):A+" + f.names[u] + "+new",
             'e');
    }
    // (f) absorb one free vertex plus a new anchored vertex joined to another free vertex
    for (int u : free_vertices)
        for (int x : free_vertices) {
            if (x == u) continue;
            GraphStructure g = f;
            const int w = g.v();
            g.names.push_back(fresh_name(f));
            g.edges.insert(sorted_pair(w, x));
            std::set<int> grown = anchor;
            grown.insert(u);
            grown.insert(w);
            push(AnchoredPair(std::move(g), std::move(grown)),
                 "minus(f):A+" + f.names[u] + "+new-" + f.names[x], 'f');
        }

    if (which == DerivedFamily::star) {
        std::vector<DerivedMember> filtered;
        for (auto& member : out)
            if (member.pair.v_a() < pair.v_a()) filtered.push_back(std::move(member));
        return filtered;
    }
    return out;
}

bool is_faithful(const AnchoredPair& pair, const AnchorMap& phi, const ProcessState& state) {
    validate_anchor_map(pair, phi, state.n());
    GraphStructure g = pair.structure();
    for (auto it = phi.begin(); it != phi.end(); ++it)
        for (auto jt = std::next(it); jt != phi.end(); ++jt)
            if (state.is_edge(it->second, jt->second))
                g.edges.insert(sorted_pair(it->first, jt->first));
    return is_permissible(g);
}

long long count_embeddings(const AnchoredPair& pair, const AnchorMap& phi,
                           const ProcessState& state) {
    enumeration_guard(pair);
    validate_anchor_map(pair, phi, state.n());
    const GraphStructure& f = pair.structure();
    const int v = f.v();
    const int n = state.n();

    // per-vertex structure neighbourhoods: (other endpoint, true for edge)
    std::vector<std::vector<std::pair<int, bool>>> adj(v);
    for (const auto& [a, b] : f.edges) {
        adj[a].push_back({b, true});
        adj[b].push_back({a, true});
    }
    for (const auto& [a, b] : f.opens) {
        adj[a].push_back({b, false});
        adj[b].push_back({a, false});
    }

    std::vector<int> image(v, -1);
    std::vector<char> used(n, 0);
    for (const auto& [vertex, img] : phi) {
        image[vertex] = img;
        used[img] = 1;
    }
    // most-constrained-first ordering of the free vertices
    std::vector<int> order;
    std::vector<char> placed(v, 0);
    for (int a : pair.anchor()) placed[a] = 1;
    for (int step = 0; step < pair.v_a(); ++step) {
        int best = -1, best_links = -1;
        for (int x = 0; x < v; ++x) {
            if (placed[x]) continue;
            int links = 0;
            for (const auto& [y, is_edge] : adj[x]) links += placed[y];
            if (links > best_links) {
                best_links = links;
                best = x;
            }
        }
        placed[best] = 1;
        order.push_back(best);
    }

    long long count = 0;
    auto recurse = [&](auto&& self, std::size_t depth) -> void {
        if (depth == order.size()) {
            ++count;
            return;
        }
        const int x = order[depth];
        for (int w = 0; w < n; ++w) {
            if (used[w]) continue;
            bool ok = true;
            for (const auto& [y, is_edge] : adj[x]) {
                if (image[y] < 0) continue;
                if (is_edge ? !state.is_edge(w, image[y]) : !state.is_open(w, image[y])) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            image[x] = w;
            used[w] = 1;
            self(self, depth + 1);
            image[x] = -1;
            used[w] = 0;
        }
    };
    recurse(recurse, 0);
    return count;
}

TrackingReport tracking_report(const AnchoredPair& pair, const Params& p,
                               const ProcessState& state, long long samples,
                               std::uint64_t seed) {
    if (p.n != state.n())
        throw std::invalid_argument("params n must match the state vertex count");
    if (samples < 0) throw std::invalid_argument("sample count must be nonnegative");
    TrackingReport report;
    report.tilde = tilde_n(pair, p, state.m());
    try {
        const double t = time_map(p, state.m());
        report.envelope_g = g_fa(pair, p, t);
    } catch (const std::domain_error&) {
        report.envelope_g = std::numeric_limits<double>::infinity();
    }
    report.envelope_vacuous = !(report.envelope_g <= 1.0);

    Xoshiro256pp rng(seed);
    const int n = state.n();
    std::vector<int> anchor_ids(pair.anchor().begin(), pair.anchor().end());
    if (static_cast<int>(anchor_ids.size()) > n)
        throw std::invalid_argument("anchor larger than the host graph");
    double sum = 0;
    for (long long i = 0; i < samples; ++i) {
        // draw |A| distinct vertices by rejection
        AnchorMap phi;
        std::set<int> drawn;
        for (int a : anchor_ids) {
            int w;
            do {
                w = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(n)));
            } while (drawn.count(w));
            drawn.insert(w);
            phi[a] = w;
        }
        ++report.sampled;
        if (!is_faithful(pair, phi, state)) continue;
        ++report.faithful;
        if (report.tilde <= 0.0) continue;
        const double ratio = static_cast<double>(count_embeddings(pair, phi, state)) / report.tilde;
        if (report.faithful == 1 || ratio < report.min_ratio) report.min_ratio = ratio;
        if (report.faithful == 1 || ratio > report.max_ratio) report.max_ratio = ratio;
        sum += ratio;
        if (std::abs(ratio - 1.0) > report.envelope_g) ++report.violations;
    }
    if (report.faithful > 0) report.mean_ratio = sum / static_cast<double>(report.faithful);
    return report;
}

}  // namespace tfp
