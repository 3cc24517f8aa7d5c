#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tfp/process.hpp"
#include "tfp/rng.hpp"
#include "tfp/structures.hpp"

using namespace tfp;

namespace {

Params params(int n, double eps = 0.1, double big_c = 20.0) {
    Params p;
    p.n = n;
    p.eps = eps;
    p.big_c = big_c;
    p.validate();
    return p;
}

const char* kOpenEdge = "v: a b; A: a; E:; O: a-b";
const char* kAnchoredEdge = "v: a b; A: a; E: a-b; O:";
const char* kWStructure = "v: a b c x; A: a b c; E: a-x; O: b-x c-x";

/** Induced sub-pair on the vertex set h, anchored at the (remapped) set b. */
AnchoredPair sub_pair(const AnchoredPair& pair, const std::set<int>& h, const std::set<int>& b) {
    const GraphStructure& f = pair.structure();
    std::vector<int> order(h.begin(), h.end());
    std::vector<int> remap(f.v(), -1);
    GraphStructure out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        remap[order[i]] = static_cast<int>(i);
        out.names.push_back(f.names[order[i]]);
    }
    for (const auto& [x, y] : f.edges)
        if (remap[x] >= 0 && remap[y] >= 0) out.edges.insert({std::min(remap[x], remap[y]),
                                                              std::max(remap[x], remap[y])});
    for (const auto& [x, y] : f.opens)
        if (remap[x] >= 0 && remap[y] >= 0) out.opens.insert({std::min(remap[x], remap[y]),
                                                              std::max(remap[x], remap[y])});
    std::set<int> anchor;
    for (int x : b) anchor.insert(remap[x]);
    return AnchoredPair(std::move(out), std::move(anchor));
}

/** All vertex sets h with base <= h <= [0, v). */
std::vector<std::set<int>> supersets_of(const std::set<int>& base, int v, bool proper_only) {
    std::vector<int> free_v;
    for (int i = 0; i < v; ++i)
        if (!base.count(i)) free_v.push_back(i);
    std::vector<std::set<int>> out;
    const int k = static_cast<int>(free_v.size());
    for (int mask = 0; mask < (1 << k); ++mask) {
        if (proper_only && mask == 0) continue;
        std::set<int> h = base;
        for (int i = 0; i < k; ++i)
            if (mask & (1 << i)) h.insert(free_v[i]);
        out.push_back(std::move(h));
    }
    return out;
}

/** Independent level-wise reconstruction of the building sequence. */
std::pair<std::vector<std::set<int>>, std::vector<RhoTime>> ref_building_chain(
    const AnchoredPair& pair) {
    const int v = pair.structure().v();
    std::set<int> all;
    for (int i = 0; i < v; ++i) all.insert(i);

    // H_0: zero-time candidates, minimal (2 v_A - e, -o), union of optimizers
    std::pair<long long, long long> best{0, 0};
    std::set<int> h0 = pair.anchor();
    for (const auto& h : supersets_of(pair.anchor(), v, true)) {
        const AnchoredPair sub = sub_pair(pair, h, pair.anchor());
        if (!rho_star(sub).is_zero()) continue;
        const std::pair<long long, long long> key{2ll * sub.v_a() - sub.e(), -(long long)sub.o()};
        if (key < best) {
            best = key;
            h0 = h;
        } else if (key == best) {
            h0.insert(h.begin(), h.end());
        }
    }
    std::vector<std::set<int>> chain{h0};
    std::vector<RhoTime> rhos;
    std::set<int> cur = h0;
    while (cur != all) {
        bool have = false;
        RhoTime best_rho = RhoTime::infinite();
        std::set<int> next;
        for (const auto& h : supersets_of(cur, v, true)) {
            const RhoTime rho = rho_star(sub_pair(pair, h, cur));
            if (!have || rho < best_rho) {
                best_rho = rho;
                next = h;
                have = true;
            } else if (rho == best_rho) {
                next.insert(h.begin(), h.end());
            }
        }
        chain.push_back(next);
        rhos.push_back(best_rho);
        cur = next;
    }
    return {chain, rhos};
}

/** Unpruned reference embedding counter: assign free vertices in id order. */
long long ref_count_embeddings(const AnchoredPair& pair, const AnchorMap& phi,
                               const ProcessState& st) {
    const GraphStructure& f = pair.structure();
    std::vector<int> free_v;
    for (int i = 0; i < f.v(); ++i)
        if (!pair.in_anchor(i)) free_v.push_back(i);
    std::vector<int> img(f.v(), -1);
    std::vector<char> used(st.n(), 0);
    for (const auto& [k, w] : phi) {
        img[k] = w;
        used[w] = 1;
    }
    long long total = 0;
    auto rec = [&](auto&& self, std::size_t i) -> void {
        if (i == free_v.size()) {
            for (const auto& [a, b] : f.edges)
                if (!st.is_edge(img[a], img[b])) return;
            for (const auto& [a, b] : f.opens)
                if (!st.is_open(img[a], img[b])) return;
            ++total;
            return;
        }
        for (int w = 0; w < st.n(); ++w) {
            if (used[w]) continue;
            used[w] = 1;
            img[free_v[i]] = w;
            self(self, i + 1);
            used[w] = 0;
            img[free_v[i]] = -1;
        }
    };
    rec(rec, 0);
    return total;
}

GraphStructure random_structure(Xoshiro256pp& rng, int v) {
    GraphStructure f;
    for (int i = 0; i < v; ++i) f.names.push_back("x" + std::to_string(i));
    for (int a = 0; a < v; ++a)
        for (int b = a + 1; b < v; ++b) {
            const double r = rng.uniform01();
            if (r < 0.25)
                f.edges.insert({a, b});
            else if (r < 0.55)
                f.opens.insert({a, b});
        }
    return f;
}

}  // namespace

TEST_CASE("structure text format") {
    const AnchoredPair open_edge = parse_structure(kOpenEdge);
    CHECK(open_edge.v_a() == 1);
    CHECK(open_edge.e() == 0);
    CHECK(open_edge.o() == 1);
    CHECK(open_edge.anchor() == std::set<int>{0});

    // the hat restriction deletes pairs lying inside the anchor
    const AnchoredPair hatted = parse_structure("v: a b c; A: a b c; E: a-b; O: b-c");
    CHECK(hatted.e() == 0);
    CHECK(hatted.o() == 0);
    CHECK(hatted.v_a() == 0);

    // a pair in both E and O is rejected
    CHECK_THROWS_AS(parse_structure("v: a b; A: a; E: a-b; O: a-b"), std::invalid_argument);

    // parse errors carry line/column positions
    try {
        parse_structure("v: a b\nA: a\nE: a+b\nO:");
        FAIL("expected a parse error");
    } catch (const std::invalid_argument& err) {
        CHECK(std::string(err.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_structure("v: a b; A: q; E:; O:"), std::invalid_argument);
    CHECK_THROWS_AS(parse_structure("v: a b; A: a; E:"), std::invalid_argument);
    CHECK_THROWS_AS(parse_structure("v: a a; A:; E:; O:"), std::invalid_argument);
    CHECK_THROWS_AS(parse_structure("v: a b; A: a; E: a-a; O:"), std::invalid_argument);

    // canonical echo round-trips
    const std::string canon = open_edge.canonical_text();
    CHECK(canon == "v: a b\nA: a\nE:\nO: a-b\n");
    CHECK(parse_structure(canon).canonical_text() == canon);
    const AnchoredPair w = parse_structure(kWStructure);
    CHECK(parse_structure(w.canonical_text()).canonical_text() == w.canonical_text());

    // comments are stripped
    const AnchoredPair commented = parse_structure("# header\nv: a b # names\nA: a\nE:\nO: a-b");
    CHECK(commented.canonical_text() == canon);
}

TEST_CASE("permissibility") {
    GraphStructure closed_triangle;
    closed_triangle.names = {"a", "b", "c"};
    closed_triangle.edges = {{0, 1}, {0, 2}, {1, 2}};
    CHECK_FALSE(is_permissible(closed_triangle));

    GraphStructure mostly_open = closed_triangle;
    mostly_open.edges = {{0, 1}};
    mostly_open.opens = {{0, 2}, {1, 2}};
    CHECK(is_permissible(mostly_open));

    GraphStructure two_edges = closed_triangle;
    two_edges.edges = {{0, 1}, {0, 2}};
    two_edges.opens = {{1, 2}};
    CHECK_FALSE(is_permissible(two_edges));

    GraphStructure triangle_free;
    triangle_free.names = {"a", "b", "c", "d"};
    triangle_free.edges = {{0, 1}, {2, 3}};
    triangle_free.opens = {{0, 2}};
    CHECK(is_permissible(triangle_free));
}

TEST_CASE("faithfulness") {
    // host graph: single edge 0-1 on six vertices
    const ProcessState st = ProcessState::from_edges(6, {{0, 1}}, Instrumentation::light);

    // two open edges meeting at x: adding an anchor edge leaves it permissible
    const AnchoredPair cherry = parse_structure("v: a b x; A: a b; E:; O: a-x b-x");
    CHECK(is_faithful(cherry, {{0, 0}, {1, 1}}, st));  // images adjacent
    CHECK(is_faithful(cherry, {{0, 2}, {1, 3}}, st));  // images non-adjacent

    // with one side already an edge, the anchor edge makes a bad triangle
    const AnchoredPair edged = parse_structure("v: a b x; A: a b; E: a-x; O: b-x");
    CHECK_FALSE(is_faithful(edged, {{0, 0}, {1, 1}}, st));
    CHECK(is_faithful(edged, {{0, 2}, {1, 3}}, st));  // no host edge added

    CHECK_THROWS_AS(is_faithful(cherry, {{0, 0}, {1, 0}}, st), std::invalid_argument);
    CHECK_THROWS_AS(is_faithful(cherry, {{0, 0}}, st), std::invalid_argument);
    CHECK_THROWS_AS(is_faithful(cherry, {{0, 0}, {2, 1}}, st), std::invalid_argument);
}

TEST_CASE("idealized structure counts") {
    const Params p = params(1024);
    const long long m = 3000;
    const double t = time_map(p, m);
    const double sqrt_n = std::sqrt(1024.0);

    const AnchoredPair edge = parse_structure(kAnchoredEdge);
    CHECK(tilde_n(edge, p, m) == doctest::Approx(2.0 * t * sqrt_n).epsilon(1e-12));

    const AnchoredPair open_edge = parse_structure(kOpenEdge);
    CHECK(tilde_n(open_edge, p, m) ==
          doctest::Approx(std::exp(-4.0 * t * t) * 1024.0).epsilon(1e-12));

    // at t = 0 an edge-bearing structure has no copies, an open structure does
    CHECK(tilde_n(edge, p, 0) == 0.0);
    CHECK(tilde_n(open_edge, p, 0) == doctest::Approx(1024.0));

    // chain rule over every intermediate vertex set of a random structure
    Xoshiro256pp rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        GraphStructure f = random_structure(rng, 5);
        const AnchoredPair pair(f, {0});
        const double whole = log_tilde_n(pair, p, m);
        for (const auto& h : supersets_of({0}, 5, false)) {
            const double inner = log_tilde_n(sub_pair(pair, h, {0}), p, m);
            const double outer = log_tilde_n(AnchoredPair(f, h), p, m);
            CHECK(inner + outer == doctest::Approx(whole).epsilon(1e-9));
        }
    }

    // submodularity on vertex subsets
    for (int trial = 0; trial < 40; ++trial) {
        GraphStructure f = random_structure(rng, 6);
        const AnchoredPair pair(f, {0});
        const auto all = supersets_of({0}, 6, false);
        const auto& h1 = all[rng.bounded(all.size())];
        const auto& h2 = all[rng.bounded(all.size())];
        std::set<int> uni = h1, inter;
        uni.insert(h2.begin(), h2.end());
        std::set_intersection(h1.begin(), h1.end(), h2.begin(), h2.end(),
                              std::inserter(inter, inter.begin()));
        const double lhs = log_tilde_n(sub_pair(pair, uni, {0}), p, m) +
                           log_tilde_n(sub_pair(pair, inter, {0}), p, m);
        const double rhs = log_tilde_n(sub_pair(pair, h1, {0}), p, m) +
                           log_tilde_n(sub_pair(pair, h2, {0}), p, m);
        CHECK(lhs <= rhs + 1e-9);
    }
}

TEST_CASE("structure times") {
    const AnchoredPair open_edge = parse_structure(kOpenEdge);
    const RhoTime rho_open = rho_star(open_edge);
    CHECK(rho_open.is_finite());
    CHECK(rho_open.num() == 1);
    CHECK(rho_open.den() == 4);
    CHECK(t_star_struct(open_edge, 1024) ==
          doctest::Approx(0.5 * std::sqrt(std::log(1024.0))).epsilon(1e-12));

    const AnchoredPair w = parse_structure(kWStructure);
    CHECK(rho_star(w).num() == 1);
    CHECK(rho_star(w).den() == 16);

    const AnchoredPair edge = parse_structure(kAnchoredEdge);
    CHECK(rho_star(edge).is_infinite());
    CHECK(std::isinf(t_star_struct(edge, 1024)));

    // exact ordering
    CHECK(RhoTime::zero() < RhoTime::finite(1, 100));
    CHECK(RhoTime::finite(1, 4) < RhoTime::finite(3, 8));
    CHECK(RhoTime::finite(3, 8) < RhoTime::infinite());
    CHECK(RhoTime::finite(2, 8) == RhoTime::finite(1, 4));
    CHECK(RhoTime::finite(1, 4).str() == "1/4");

    const Params p = params(1024);
    // A = F: tracking time is the horizon
    const AnchoredPair whole = parse_structure("v: a b; A: a b; E:; O:");
    const TrackingTime tt = tracking_time(whole, p);
    CHECK(tt.rho.is_infinite());
    CHECK(tt.t == doctest::Approx(t_star(p)));

    // W: the only proper super-structure is W itself
    const TrackingTime tw = tracking_time(w, p);
    CHECK(tw.rho == RhoTime::finite(1, 16));
    CHECK(tw.t == doctest::Approx(std::min(std::sqrt(p.log_n()) / 4.0, t_star(p))));

    // a sub-structure with e >= 2 v_A forces tracking time zero
    const AnchoredPair crowded = parse_structure("v: a b x; A: a b; E: a-x b-x; O:");
    const TrackingTime tz = tracking_time(crowded, p);
    CHECK(tz.rho.is_zero());
    CHECK(tz.t == 0.0);
}

TEST_CASE("structure weights") {
    const Params p = params(1024);

    const AnchoredPair w = parse_structure(kWStructure);
    const StructureWeights ww = weights(w, p);
    CHECK(ww.c_num == 4);
    CHECK(ww.c_den == 1);
    // consistency: e^{c t^2} = n^{1/4} at the tracking time t = sqrt(log n)/4
    const double t_w = tracking_time(w, p).rho.realize(p);
    CHECK(ww.c * t_w * t_w == doctest::Approx(0.25 * p.log_n()).epsilon(1e-12));

    const AnchoredPair open_edge = parse_structure(kOpenEdge);
    CHECK(weights(open_edge, p).c == doctest::Approx(2.0));  // floored at 2

    // numeric delta family at small C
    const Params tiny = params(1024, 0.1, 2.0);
    const StructureWeights wo = weights(open_edge, tiny);
    CHECK(wo.delta == doctest::Approx(81.0));          // (8 + 1)^2
    CHECK(wo.delta_minus_v == doctest::Approx(49.0));  // (9 - 2)^2
    CHECK(wo.gamma == doctest::Approx(79.0));
    CHECK(delta_weight(open_edge, tiny) == doctest::Approx(81.0));

    // envelopes against the closed formulas
    const double t = 0.3;
    CHECK(log_g_fa(open_edge, tiny, t) ==
          doctest::Approx(2.0 * t * t - 0.25 * tiny.log_n() + 79.0 * std::log(tiny.log_n())));
    CHECK(g_fa(open_edge, tiny, t) == doctest::Approx(std::exp(log_g_fa(open_edge, tiny, t))));
    CHECK(log_f_fa(open_edge, tiny, t) ==
          doctest::Approx(2.0 * 2.0 * (t * t + 1.0) - 0.25 * tiny.log_n() +
                          (81.0 - 9.0) * std::log(tiny.log_n())));

    // death line: max of the live and fallback terms, in natural log
    const long long m = static_cast<long long>(0.3 * tiny.n32());
    const double tm = time_map(tiny, m);
    const double t_a = tracking_time(open_edge, tiny).t;
    const double lll = std::log(tiny.log_n());
    const double live = -1.0 * (tm * tm - t_a * t_a) + 81.0 * lll;
    CHECK(death_line_log(open_edge, tiny, m) == doctest::Approx(std::max(live, 49.0 * lll)));

    // weights and g are undefined at tracking time zero
    const AnchoredPair crowded = parse_structure("v: a b x; A: a b; E: a-x b-x; O:");
    CHECK_THROWS_AS(weights(crowded, p), std::domain_error);
    CHECK_THROWS_AS(g_fa(crowded, p, 0.3), std::domain_error);

    // delta split over an intermediate set
    const AnchoredPair pair = parse_structure("v: a b c; A: a; E: a-b; O: b-c");
    const std::set<int> mid{0, 1};
    const double split = delta_split(pair, mid, tiny);
    const AnchoredPair outer(pair.structure(), mid);
    CHECK(split == doctest::Approx(delta_weight(outer, tiny) +
                                   delta_weight(sub_pair(pair, mid, {0}), tiny)));

    // the enumeration guard rejects oversized structures
    GraphStructure big;
    for (int i = 0; i < 18; ++i) big.names.push_back("v" + std::to_string(i));
    CHECK_THROWS_AS(weights(AnchoredPair(big, {0}), p), std::length_error);
}

TEST_CASE("building sequences") {
    const Params p = params(1024);

    // the worked example: E = {ab}, O = {bc}, anchored at a
    const AnchoredPair pair = parse_structure("v: a b c; A: a; E: a-b; O: b-c");
    const BuildingSequenceResult bs = building_sequence(pair, p);
    REQUIRE(bs.chain.size() == 2);
    CHECK(bs.chain[0] == std::set<int>{0});
    CHECK(bs.chain[1] == std::set<int>{0, 1, 2});
    REQUIRE(bs.rhos.size() == 1);
    CHECK(bs.rhos[0] == RhoTime::finite(3, 8));

    // A = V(F): the chain collapses
    const AnchoredPair whole = parse_structure("v: a b; A: a b; E:; O:");
    const BuildingSequenceResult trivial = building_sequence(whole, p);
    CHECK(trivial.chain.size() == 1);
    CHECK(trivial.rhos.empty());

    // random structures: match the independent reconstruction, strictly
    // increasing times, consecutive pairs balanced, late tilde bound
    Xoshiro256pp rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const int v = 3 + static_cast<int>(rng.bounded(4));
        GraphStructure f = random_structure(rng, v);
        std::set<int> anchor{0};
        if (rng.uniform01() < 0.4 && v > 2) anchor.insert(1);
        const AnchoredPair candidate(f, anchor);

        const BuildingSequenceResult got = building_sequence(candidate, p);
        const auto [ref_chain, ref_rhos] = ref_building_chain(candidate);
        REQUIRE(got.chain.size() == ref_chain.size());
        for (std::size_t i = 0; i < ref_chain.size(); ++i) CHECK(got.chain[i] == ref_chain[i]);
        REQUIRE(got.rhos.size() == ref_rhos.size());
        for (std::size_t i = 0; i < ref_rhos.size(); ++i) CHECK(got.rhos[i] == ref_rhos[i]);

        for (std::size_t i = 1; i < got.rhos.size(); ++i) CHECK(got.rhos[i - 1] < got.rhos[i]);

        // Lemma-style balance of the consecutive pairs
        CHECK(is_balanced(sub_pair(candidate, got.chain[0], anchor)));
        for (std::size_t i = 1; i < got.chain.size(); ++i)
            CHECK(is_balanced(sub_pair(candidate, got.chain[i], got.chain[i - 1])));

        // for t at/above the last time, relative tildes are tamed
        if (!got.rhos.empty() && got.rhos.back().is_finite()) {
            const double t_ell = got.rhos.back().realize(p);
            for (double t : {t_ell, 1.1 * t_ell}) {
                const long long m = static_cast<long long>(std::ceil(t * p.n32()));
                const double tt = time_map(p, m);
                for (const auto& h : supersets_of(anchor, v, false)) {
                    const AnchoredPair rel(candidate.structure(), h);
                    CHECK(log_tilde_n(rel, p, m) <= rel.e() * std::log(2.0 * tt) + 1e-9);
                }
            }
        }
    }
}

TEST_CASE("balancedness") {
    // a single proper super-structure: always balanced
    CHECK(is_balanced(parse_structure(kOpenEdge)));
    CHECK(is_balanced(parse_structure(kAnchoredEdge)));
    CHECK(is_balanced(parse_structure("v: a b x; A: a b; E: a-x b-x; O:")));

    // all-edge path anchored at one end: balanced via all-infinite times
    CHECK(is_balanced(parse_structure("v: a b c; A: a; E: a-b b-c; O:")));

    // every sub-structure of the open cherry ties at rho 1/4: balanced
    const AnchoredPair cherry = parse_structure("v: a b c; A: a; E:; O: a-b a-c");
    CHECK(rho_star(cherry) == RhoTime::finite(1, 4));
    CHECK(is_balanced(cherry));

    // unbalanced: the open edge a-b alone has rho 1/4, cheaper than the
    // full structure's 3/8, and no sub-structure forces time zero
    const AnchoredPair mixed = parse_structure("v: a b c; A: a; E: b-c; O: a-b");
    CHECK(rho_star(mixed) == RhoTime::finite(3, 8));
    CHECK_FALSE(is_balanced(mixed));
}

TEST_CASE("minimal tracking sub-structure") {
    const Params p = params(1024);
    // two-level star: x joins at rho 1/20, then y at rho 1/16, and both
    // realized times sit inside the horizon (sqrt(1/16) < 1/(2 sqrt 2) - eps)
    const AnchoredPair star = parse_structure(
        "v: a b c d e x y; A: a b c d e; E:; O: a-x b-x c-x d-x e-x a-y b-y c-y x-y");
    const BuildingSequenceResult bs = building_sequence(star, p);
    REQUIRE(bs.chain.size() == 3);
    CHECK(bs.chain[1] == std::set<int>{0, 1, 2, 3, 4, 5});
    CHECK(bs.rhos[0] == RhoTime::finite(1, 20));
    CHECK(bs.rhos[1] == RhoTime::finite(1, 16));
    const double t1 = bs.rhos[0].realize(p);
    const double t2 = bs.rhos[1].realize(p);
    REQUIRE(t2 < t_star(p));

    CHECK(minimal_tracking_substructure(star, p, 0.5 * t1) == bs.chain[0]);
    CHECK(minimal_tracking_substructure(star, p, t1) == bs.chain[1]);
    CHECK(minimal_tracking_substructure(star, p, 0.5 * (t1 + t2)) == bs.chain[1]);
    CHECK(minimal_tracking_substructure(star, p, 0.5 * (t2 + t_star(p))) == bs.chain[2]);

    // consistency with the tracking-time characterization
    for (double t : {0.5 * t1, 0.5 * (t1 + t2), 0.5 * (t2 + t_star(p))}) {
        const std::set<int> h = minimal_tracking_substructure(star, p, t);
        CHECK(t < tracking_time(AnchoredPair(star.structure(), h), p).t);
        for (std::size_t i = 0; i < bs.chain.size(); ++i) {
            if (bs.chain[i] == h) break;
            CHECK(t >= tracking_time(AnchoredPair(star.structure(), bs.chain[i]), p).t);
        }
    }

    CHECK_THROWS_AS(minimal_tracking_substructure(star, p, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(minimal_tracking_substructure(star, p, t_star(p)), std::invalid_argument);
}

TEST_CASE("derived families") {
    // a permissible triangle: one edge, two opens, anchored at one vertex
    const AnchoredPair tri = parse_structure("v: a b c; A: a; E: b-c; O: a-b a-c");

    const auto opened = derived_families(tri, DerivedFamily::open);
    REQUIRE(opened.size() == 1);  // |F-degree| = e(F)
    CHECK(opened[0].pair.e() == 0);
    CHECK(opened[0].pair.o() == 3);
    CHECK(opened[0].marker == "open:b-c");

    const AnchoredPair no_edges = parse_structure(kOpenEdge);
    CHECK(derived_families(no_edges, DerivedFamily::open).empty());

    const auto plus = derived_families(tri, DerivedFamily::plus);
    REQUIRE(plus.size() == 1);
    CHECK(plus[0].pair.anchor().size() == 3);  // both endpoints absorbed
    CHECK(plus[0].pair.v_a() == 0);
    CHECK(plus[0].pair.e() == 0);  // the absorbed edge is deleted by the hat

    const auto minus = derived_families(tri, DerivedFamily::minus);
    CHECK(!minus.empty());
    const auto star = derived_families(tri, DerivedFamily::star);
    CHECK(!star.empty());
    CHECK(star.size() <= minus.size());

    std::set<std::string> minus_keys, star_keys;
    for (const auto& member : minus) minus_keys.insert(member.pair.canonical_text());
    for (const auto& member : star) star_keys.insert(member.pair.canonical_text());
    for (const auto& member : plus) {
        CHECK(minus_keys.count(member.pair.canonical_text()) == 1);
        CHECK(star_keys.count(member.pair.canonical_text()) == 1);
    }

    // per-case bookkeeping across random structures
    Xoshiro256pp rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        GraphStructure f = random_structure(rng, 4 + static_cast<int>(rng.bounded(2)));
        const AnchoredPair pair(f, {0, 1});
        for (const auto& member : derived_families(pair, DerivedFamily::minus)) {
            const int dv = member.pair.v_a() - pair.v_a();
            const int de = member.pair.e() - pair.e();
            const int dd = member.pair.o() - pair.o();
            CHECK(member.pair.v_a() <= pair.v_a());
            CHECK(member.pair.o() <= pair.o());
            CHECK(member.pair.e() <= pair.e() + 1);
            switch (member.minus_case) {
                case 'a': CHECK(dv == 0); CHECK(de == 1); CHECK(dd == 0); break;
                case 'b': CHECK(dv == -1); CHECK(de <= 0); CHECK(dd <= 0); break;
                case 'c': CHECK(dv == 0); CHECK(de == 1); CHECK(dd == 0); break;
                case 'd': CHECK(dv == -2); CHECK(de <= 0); CHECK(dd <= 0); break;
                case 'e': CHECK(dv == -1); CHECK(de <= 0); CHECK(dd <= 0); break;
                case 'f': CHECK(dv == -1); CHECK(de <= 1); CHECK(dd <= 0); break;
                default: FAIL("unknown minus case");
            }
        }
        for (const auto& member : derived_families(pair, DerivedFamily::star))
            CHECK(member.pair.v_a() < pair.v_a());
        // the subset relations hold with markers attached
        std::set<std::string> mk;
        for (const auto& member : derived_families(pair, DerivedFamily::minus))
            mk.insert(member.pair.canonical_text());
        for (const auto& member : derived_families(pair, DerivedFamily::plus))
            CHECK(mk.count(member.pair.canonical_text()) == 1);
    }
}

TEST_CASE("embedding counts") {
    // a little host graph: a 5-cycle
    const ProcessState c5 =
        ProcessState::from_edges(8, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}}, Instrumentation::light);

    const AnchoredPair edge = parse_structure(kAnchoredEdge);
    for (int v = 0; v < 8; ++v)
        CHECK(count_embeddings(edge, {{0, v}}, c5) == c5.degree(v));

    const AnchoredPair open_edge = parse_structure(kOpenEdge);
    for (int v = 0; v < 8; ++v)
        CHECK(count_embeddings(open_edge, {{0, v}}, c5) == c5.open_degree(v));

    // empty graph: anything with an edge has no copies
    const ProcessState empty = ProcessState::from_edges(6, {}, Instrumentation::light);
    CHECK(count_embeddings(edge, {{0, 2}}, empty) == 0);

    // A = F: exactly the unique trivial embedding
    const AnchoredPair whole = parse_structure("v: a b; A: a b; E:; O:");
    CHECK(count_embeddings(whole, {{0, 0}, {1, 5}}, empty) == 1);

    // random structures against the unpruned reference counter
    Xoshiro256pp rng(5150);
    RunConfig cfg;
    cfg.n = 10;
    cfg.seed = 17;
    ProcessState host(cfg);
    for (int step = 0; step < 6; ++step) host.step();
    for (int trial = 0; trial < 25; ++trial) {
        GraphStructure f = random_structure(rng, 4);
        const AnchoredPair pair(f, {0});
        const AnchorMap phi{{0, static_cast<int>(rng.bounded(10))}};
        CHECK(count_embeddings(pair, phi, host) == ref_count_embeddings(pair, phi, host));
    }

    // permutation invariance: relabelling free vertices preserves the count
    for (int trial = 0; trial < 15; ++trial) {
        GraphStructure f = random_structure(rng, 5);
        const AnchoredPair pair(f, {0});
        // rotate the free vertices 1..4 -> 2..4,1
        std::vector<int> perm{0, 2, 3, 4, 1};
        GraphStructure g;
        g.names = f.names;
        for (const auto& [a, b] : f.edges)
            g.edges.insert({std::min(perm[a], perm[b]), std::max(perm[a], perm[b])});
        for (const auto& [a, b] : f.opens)
            g.opens.insert({std::min(perm[a], perm[b]), std::max(perm[a], perm[b])});
        const AnchoredPair rotated(g, {0});
        const AnchorMap phi{{0, 3}};
        CHECK(count_embeddings(pair, phi, host) == count_embeddings(rotated, phi, host));
    }
}

TEST_CASE("tracking reports") {
    const Params p = params(8);
    // A = F: the trivial embedding matches the idealized count exactly
    const AnchoredPair whole = parse_structure("v: a; A: a; E:; O:");
    const ProcessState empty = ProcessState::from_edges(8, {}, Instrumentation::light);
    const TrackingReport trivially = tracking_report(whole, p, empty, 40, 1);
    CHECK(trivially.sampled == 40);
    CHECK(trivially.faithful == 40);
    CHECK(trivially.tilde == doctest::Approx(1.0));
    CHECK(trivially.mean_ratio == doctest::Approx(1.0));
    CHECK(trivially.violations == 0);

    // anchored edge on a 2-regular host: every ratio is degree / (2 t sqrt n)
    const ProcessState cycle = ProcessState::from_edges(
        8, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {0, 7}},
        Instrumentation::light);
    const AnchoredPair edge = parse_structure(kAnchoredEdge);
    const TrackingReport ratios = tracking_report(edge, p, cycle, 60, 9);
    const double t = time_map(p, cycle.m());
    const double expected = 2.0 / (2.0 * t * std::sqrt(8.0));
    CHECK(ratios.faithful == ratios.sampled);
    CHECK(ratios.mean_ratio == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ratios.min_ratio == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ratios.max_ratio == doctest::Approx(expected).epsilon(1e-12));
    // at this n and default C the envelope is enormous: flagged, no violations
    CHECK(ratios.envelope_vacuous);
    CHECK(ratios.violations == 0);

    CHECK_THROWS_AS(tracking_report(edge, params(16), cycle, 5, 1), std::invalid_argument);
}
