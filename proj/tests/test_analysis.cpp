#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "tfp/analysis.hpp"
#include "tfp/process.hpp"
#include "tfp/trajectory.hpp"

using namespace tfp;

namespace {

ProcessState evolved(int n, std::uint64_t seed, long long steps,
                     Instrumentation instr = Instrumentation::light) {
    RunConfig cfg;
    cfg.n = n;
    cfg.seed = seed;
    cfg.instrumentation = instr;
    ProcessState state(cfg);
    for (long long i = 0; i < steps && !state.complete(); ++i) state.step();
    return state;
}

/** Exhaustive maximum independent set on bitmask adjacency (n <= 20). */
int ref_alpha_pool(const std::vector<std::uint32_t>& nbr, std::uint32_t pool) {
    if (pool == 0) return 0;
    const int v = std::countr_zero(pool);
    const std::uint32_t rest = pool & (pool - 1);
    const int without = ref_alpha_pool(nbr, rest);
    const int with = 1 + ref_alpha_pool(nbr, rest & ~nbr[v]);
    return std::max(without, with);
}

int ref_alpha(const ProcessState& st) {
    REQUIRE(st.n() <= 20);
    std::vector<std::uint32_t> nbr(st.n(), 0);
    for (int u = 0; u < st.n(); ++u)
        for (int v = 0; v < st.n(); ++v)
            if (u != v && st.is_edge(u, v)) nbr[u] |= 1u << v;
    return ref_alpha_pool(nbr, (1u << st.n()) - 1);
}

ProcessState c5() {
    return ProcessState::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}});
}

ProcessState k23() {
    return ProcessState::from_edges(5, {{0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}});
}

ProcessState petersen() {
    std::vector<VertexPair> edges;
    for (int i = 0; i < 5; ++i) {
        edges.push_back(ordered_pair(i, (i + 1) % 5));      // outer cycle
        edges.push_back(ordered_pair(i, i + 5));            // spokes
        edges.push_back(ordered_pair(5 + i, 5 + (i + 2) % 5));  // inner pentagram
    }
    return ProcessState::from_edges(10, edges);
}

ProcessState star(int n) {
    std::vector<VertexPair> edges;
    for (int v = 1; v < n; ++v) edges.push_back({0, v});
    return ProcessState::from_edges(n, edges);
}

} // namespace

TEST_CASE("degree census") {
    // empty graph: everything ties at zero
    const ProcessState empty = ProcessState::from_edges(7, {});
    const DegreeStats none = max_degree_stats(empty);
    CHECK(none.max_degree == 0);
    CHECK(none.argmax == std::vector<int>{0, 1, 2, 3, 4, 5, 6});
    CHECK(none.histogram == std::vector<long long>{7});

    // a star: one hub of degree three, three leaves of degree one
    const DegreeStats hub = max_degree_stats(star(4));
    CHECK(hub.max_degree == 3);
    CHECK(hub.argmax == std::vector<int>{0});
    CHECK(hub.histogram == std::vector<long long>{0, 3, 0, 1});

    // evolved states: the census is a faithful partition of the vertex set
    for (std::uint64_t seed : {1, 2, 3}) {
        const ProcessState state = evolved(48, seed, 1 << 20);  // run to completion
        REQUIRE(state.complete());
        const DegreeStats stats = max_degree_stats(state);
        long long total = 0, weighted = 0;
        for (std::size_t d = 0; d < stats.histogram.size(); ++d) {
            total += stats.histogram[d];
            weighted += static_cast<long long>(d) * stats.histogram[d];
        }
        CHECK(total == state.n());
        CHECK(weighted == 2 * state.m());
        REQUIRE(!stats.argmax.empty());
        CHECK(static_cast<long long>(stats.argmax.size()) == stats.histogram.back());
        for (int v : stats.argmax) CHECK(state.degree(v) == stats.max_degree);
        for (int v = 0; v < state.n(); ++v) CHECK(state.degree(v) <= stats.max_degree);
    }
}

TEST_CASE("exact independence number") {
    CHECK(alpha_exact(c5()) == 2);
    CHECK(alpha_exact(k23()) == 3);
    CHECK(alpha_exact(petersen()) == 4);
    CHECK(alpha_exact(star(5)) == 4);
    CHECK(alpha_exact(ProcessState::from_edges(4, {{0, 1}, {1, 2}, {2, 3}})) == 2);  // path
    const ProcessState c7 = ProcessState::from_edges(
        7, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {0, 6}});
    CHECK(alpha_exact(c7) == 3);

    // the empty graph keeps everything
    CHECK(alpha_exact(ProcessState::from_edges(6, {})) == 6);

    // the size guard refuses oversized inputs but can be raised explicitly
    const ProcessState wide = ProcessState::from_edges(401, {});
    CHECK_THROWS_AS(alpha_exact(wide), std::length_error);
    CHECK(alpha_exact(wide, 500) == 401);

    // cross-check against exhaustive enumeration on evolved states
    for (int n : {10, 14, 17}) {
        for (std::uint64_t seed = 1; seed <= 8; ++seed) {
            const ProcessState part = evolved(n, seed, n / 2);
            CHECK(alpha_exact(part) == ref_alpha(part));
            const ProcessState full = evolved(n, seed, 1 << 20);
            REQUIRE(full.complete());
            CHECK(alpha_exact(full) == ref_alpha(full));
        }
    }
}

TEST_CASE("heuristic independence number") {
    // exhaustively small: one restart suffices on the pentagon
    for (std::uint64_t seed : {0, 1, 7, 42}) CHECK(alpha_heuristic(c5(), 1, seed) == 2);
    CHECK(alpha_heuristic(ProcessState::from_edges(9, {}), 1) == 9);
    CHECK(alpha_heuristic(k23(), 2) == 3);
    CHECK(alpha_heuristic(petersen(), 8) == 4);

    // never above the exact optimum, deterministic, and monotone in budget
    for (int n : {40, 60}) {
        for (std::uint64_t seed = 1; seed <= 6; ++seed) {
            const ProcessState state = evolved(n, seed, 1 << 20);
            REQUIRE(state.complete());
            const int exact = alpha_exact(state);
            const int one = alpha_heuristic(state, 1, seed);
            const int four = alpha_heuristic(state, 4, seed);
            const int sixteen = alpha_heuristic(state, 16, seed);
            CHECK(one >= 1);
            CHECK(one <= four);
            CHECK(four <= sixteen);
            CHECK(sixteen <= exact);
            CHECK(alpha_heuristic(state, 4, seed) == four);
        }
    }

    // a larger sparse state stays within the exact bound too
    const ProcessState big = evolved(120, 9, 1 << 20);
    REQUIRE(big.complete());
    CHECK(alpha_heuristic(big, 8, 3) <= alpha_exact(big));
}

TEST_CASE("openness profiles") {
    Params p;
    p.n = 9;
    const ProcessState empty = ProcessState::from_edges(9, {});
    const std::vector<int> first_six{0, 1, 2, 3, 4, 5};

    // empty graph: every pair inside S is open and nobody reaches the threshold
    const SetProfile blank = set_profile(empty, p, first_six);
    CHECK(blank.s == 6);
    CHECK(blank.o_s == 15);
    CHECK(blank.o_n == 15);
    CHECK(blank.j_vertices.empty());
    CHECK(blank.a.empty());
    CHECK(blank.threshold == doctest::Approx(std::pow(9.0, 0.1)));
    CHECK(blank.gamma == doctest::Approx(10.0 * std::sqrt(0.1)));
    CHECK(blank.ref_open == doctest::Approx(0.9 * 15.0));           // t = 0
    CHECK(blank.ref_open_adjusted == doctest::Approx(0.9 * 15.0));  // m = 0

    // the neighbourhood of a star's hub: every pair is closed by the hub
    Params p4;
    p4.n = 4;
    const ProcessState hub = star(4);
    const SetProfile leaves = set_profile(hub, p4, {1, 2, 3});
    CHECK(leaves.o_s == 0);
    CHECK(leaves.o_n == 0);
    CHECK(leaves.j_vertices == std::vector<int>{0});
    CHECK(leaves.a == std::vector<long long>{3});

    // delta_exp 0 lowers the threshold to one neighbour
    const SetProfile low = set_profile(hub, p4, {1, 2}, 0.0);
    CHECK(low.threshold == doctest::Approx(1.0));
    CHECK(low.j_vertices == std::vector<int>{0});
    CHECK(low.a == std::vector<long long>{2});

    // profile internals recomputed from scratch on an evolved state
    Params p64;
    p64.n = 64;
    const ProcessState state = evolved(64, 5, 120);
    std::vector<int> sample;
    for (int v = 0; v < 20; ++v) sample.push_back(v * 3);  // spread across [0, 60]
    const SetProfile prof = set_profile(state, p64, sample);
    CHECK(prof.s == 20);
    CHECK(prof.o_n <= prof.o_s);
    CHECK(prof.o_s <= 190);  // C(20, 2)
    const auto count_in_sample = [&](int v) {
        long long c = 0;
        for (int u : sample)
            if (u != v && state.is_edge(u, v)) ++c;
        return c;
    };
    REQUIRE(prof.j_vertices.size() == prof.a.size());
    for (std::size_t j = 0; j < prof.j_vertices.size(); ++j) {
        CHECK(prof.a[j] == count_in_sample(prof.j_vertices[j]));
        CHECK(static_cast<double>(prof.a[j]) >= prof.threshold);
        if (j > 0) CHECK(prof.a[j - 1] >= prof.a[j]);
    }
    // membership is complete: every qualifying vertex appears in J
    long long qualifying = 0;
    for (int v = 0; v < 64; ++v)
        if (static_cast<double>(count_in_sample(v)) >= prof.threshold) ++qualifying;
    CHECK(qualifying == static_cast<long long>(prof.j_vertices.size()));
    // o_s and o_n recomputed directly from adjacency and the J neighbourhoods
    long long o_s = 0, o_n = 0;
    for (std::size_t i = 0; i < sample.size(); ++i)
        for (std::size_t j = i + 1; j < sample.size(); ++j) {
            if (!state.is_open(sample[i], sample[j])) continue;
            ++o_s;
            bool excluded = false;
            for (int vj : prof.j_vertices)
                if (state.is_edge(vj, sample[i]) && state.is_edge(vj, sample[j])) excluded = true;
            if (!excluded) ++o_n;
        }
    CHECK(prof.o_s == o_s);
    CHECK(prof.o_n == o_n);

    // the explicit-family helper: nothing excluded, everything excluded, one pair
    CHECK(open_inside(state, sample) == o_s);
    CHECK(open_inside_excluding(state, sample, {}) == o_s);
    CHECK(open_inside_excluding(state, sample, {sample}) == 0);
    for (std::size_t i = 0; i < sample.size() && o_s > 0; ++i)
        for (std::size_t j = i + 1; j < sample.size(); ++j)
            if (state.is_open(sample[i], sample[j])) {
                const std::vector<int> pair{sample[i], sample[j]};
                CHECK(open_inside_excluding(state, sample, {pair}) == o_s - 1);
                i = sample.size();  // one probe is enough
                break;
            }

    // malformed queries are rejected
    CHECK_THROWS_AS(set_profile(state, p64, {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(set_profile(state, p64, {-1}), std::invalid_argument);
    CHECK_THROWS_AS(set_profile(state, p64, {64}), std::invalid_argument);
    CHECK_THROWS_AS(open_inside(state, {0, 0}), std::invalid_argument);
    Params mismatched;
    mismatched.n = 65;
    CHECK_THROWS_AS(set_profile(state, mismatched, sample), std::invalid_argument);
}

TEST_CASE("profile reference values") {
    Params p;
    p.n = 256;
    const ProcessState state = evolved(256, 3, 900);
    const std::vector<int> set{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    const SetProfile prof = set_profile(state, p, set);
    const double t = static_cast<double>(state.m()) / std::pow(256.0, 1.5);
    const double decay = std::exp(-4.0 * t * t);
    const double pairs = 66.0;  // C(12, 2)
    const double m = static_cast<double>(state.m());
    CHECK(prof.ref_open == doctest::Approx(0.9 * pairs * decay).epsilon(1e-12));
    CHECK(prof.ref_open_adjusted ==
          doctest::Approx(0.9 * (pairs - 2.0 * m * m / (256.0 * 256.0)) * decay).epsilon(1e-12));
    CHECK(prof.gamma == doctest::Approx(10.0 * std::sqrt(0.1)).epsilon(1e-15));
}

TEST_CASE("moment statistics over open edges") {
    // empty graph: a uniform field with Y = 0 and X = 2(n-2) everywhere
    const ProcessState empty = ProcessState::from_edges(10, {});
    const MomentStats uniform = moment_stats(empty, 0);
    REQUIRE(uniform.exact);
    CHECK(uniform.sample_size == 45);
    CHECK(uniform.ybar == 0.0);
    CHECK(uniform.xbar == 16.0);
    CHECK(uniform.var_y == 0.0);
    CHECK(uniform.cov_xy == 0.0);
    CHECK(uniform.sum_y == 0);
    CHECK(uniform.sum_x == 45 * 16);

    // two disjoint edges on four vertices: all four open pairs see Y = 2, X = 0
    const ProcessState pair_field = ProcessState::from_edges(4, {{0, 1}, {2, 3}});
    const MomentStats constant = moment_stats(pair_field, 0);
    REQUIRE(constant.exact);
    CHECK(constant.sample_size == 4);
    CHECK(constant.ybar == 2.0);
    CHECK(constant.var_y == 0.0);
    CHECK(constant.xbar == 0.0);
    CHECK(constant.cov_xy == 0.0);

    // sweep sums match the maintained aggregates recomputed from scratch
    for (int n : {24, 40}) {
        for (std::uint64_t seed : {2, 3, 4}) {
            for (long long steps : {n / 2, 2 * n}) {
                const ProcessState state = evolved(n, seed, steps);
                if (state.q() == 0) continue;
                const OracleBundle oracle = state.recompute_oracle();
                const MomentStats ms = moment_stats(state, 0);
                REQUIRE(ms.exact);
                CHECK(ms.sample_size == state.q());
                CHECK(ms.sum_y == oracle.ybb);
                CHECK(ms.sum_x == 6 * oracle.open_triangles);
                CHECK(ms.ybar ==
                      doctest::Approx(static_cast<double>(ms.sum_y) / state.q()).epsilon(1e-12));
                CHECK(ms.var_y >= -1e-9);
            }
        }
    }

    // a completed graph has no open edges to average over
    const ProcessState done = ProcessState::from_edges(2, {{0, 1}});
    REQUIRE(done.q() == 0);
    CHECK_THROWS_AS(moment_stats(done, 100), std::domain_error);
}

TEST_CASE("moment sampling agrees with the sweep") {
    // big enough that the default path samples: q stays near half a million
    const ProcessState state = evolved(1024, 11, 8000);
    REQUIRE(state.q() > 200000);

    // sample_size >= q forces the exact sweep regardless of q
    const MomentStats sweep = moment_stats(state, state.q());
    REQUIRE(sweep.exact);
    CHECK(sweep.sample_size == state.q());

    // exact central moments for the standard-error bands, recomputed directly
    const double q = static_cast<double>(state.q());
    double var_x = 0.0, mu4_y = 0.0, mixed = 0.0;
    for (std::size_t idx = 0; idx < state.open_count(); ++idx) {
        const VertexPair e = state.open_pair(idx);
        const double dy = state.y_count(e.first, e.second) - sweep.ybar;
        const double dx = state.x_count(e.first, e.second) - sweep.xbar;
        var_x += dx * dx;
        mu4_y += dy * dy * dy * dy;
        mixed += dx * dx * dy * dy;
    }
    var_x /= q;
    mu4_y /= q;
    mixed /= q;

    const long long k = 30000;
    const MomentStats sampled = moment_stats(state, k);
    REQUIRE(!sampled.exact);
    CHECK(sampled.sample_size == k);
    const double kk = static_cast<double>(k);
    CHECK(std::abs(sampled.ybar - sweep.ybar) <= 3.0 * std::sqrt(sweep.var_y / kk));
    CHECK(std::abs(sampled.xbar - sweep.xbar) <= 3.0 * std::sqrt(var_x / kk));
    const double se_var = std::sqrt(std::max(0.0, mu4_y - sweep.var_y * sweep.var_y) / kk);
    CHECK(std::abs(sampled.var_y - sweep.var_y) <= 3.0 * se_var);
    const double se_cov = std::sqrt(std::max(0.0, mixed - sweep.cov_xy * sweep.cov_xy) / kk);
    CHECK(std::abs(sampled.cov_xy - sweep.cov_xy) <= 3.0 * se_cov);

    // sampling is deterministic in (state seed, m)
    const MomentStats again = moment_stats(state, k);
    CHECK(again.ybar == sampled.ybar);
    CHECK(again.var_y == sampled.var_y);
    CHECK(again.sum_y == sampled.sum_y);

    // the dense branch draws nearly everything without replacement
    const MomentStats dense = moment_stats(state, state.q() - 1);
    REQUIRE(!dense.exact);
    CHECK(dense.sample_size == state.q() - 1);
    CHECK(std::abs(dense.ybar - sweep.ybar) <= 0.01);

    // sampling needs a positive budget
    CHECK_THROWS_AS(moment_stats(state, 0), std::invalid_argument);
    CHECK_THROWS_AS(moment_stats(state, -4), std::invalid_argument);
}

TEST_CASE("witness certificates") {
    // all three maximal triangle-free graphs on five vertices, by edge count
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        WitnessConfig cfg;
        cfg.n = 5;
        cfg.seed = seed;
        const WitnessCertificate cert = ramsey_witness(cfg);
        REQUIRE(cert.alpha_kind == "exact");
        const std::size_t edges = cert.edges.size();
        REQUIRE((edges == 4 || edges == 5 || edges == 6));
        const int expected = edges == 4 ? 4 : edges == 5 ? 2 : 3;
        CHECK(cert.alpha_value == expected);
        CHECK(cert.claim == "R(3, " + std::to_string(expected + 1) + ") > 5");

        // the certificate is independently reproducible from its edge list
        const ProcessState rebuilt = ProcessState::from_edges(5, cert.edges);
        CHECK(verify_maximal_triangle_free(rebuilt));
        CHECK(alpha_exact(rebuilt) == cert.alpha_value);
        CHECK(max_degree_stats(rebuilt).max_degree == cert.max_degree);

        const double scale = std::sqrt(5.0 * std::log(5.0));
        CHECK(cert.alpha_over_sqrt_nlogn == doctest::Approx(expected / scale).epsilon(1e-15));
        CHECK(cert.maxdeg_over_sqrt_nlogn ==
              doctest::Approx(cert.max_degree / scale).epsilon(1e-15));
        CHECK(cert.edges_over_n32_sqrtlogn ==
              doctest::Approx(edges / (std::pow(5.0, 1.5) * std::sqrt(std::log(5.0))))
                  .epsilon(1e-15));
    }

    // over the guard the label switches and the Ramsey claim disappears
    WitnessConfig shallow;
    shallow.n = 30;
    shallow.seed = 7;
    shallow.exact_guard = 10;
    const WitnessCertificate lower = ramsey_witness(shallow);
    CHECK(lower.alpha_kind == "heuristic_lower_bound");
    CHECK(lower.claim.empty());
    const ProcessState rebuilt = ProcessState::from_edges(30, lower.edges);
    CHECK(lower.alpha_value >= 1);
    CHECK(lower.alpha_value <= alpha_exact(rebuilt));

    // certificates follow the replayed run exactly
    WitnessConfig cfg;
    cfg.n = 12;
    cfg.seed = 3;
    const WitnessCertificate cert = ramsey_witness(cfg);
    const ProcessState replay = evolved(12, 3, 1 << 20);
    REQUIRE(replay.complete());
    CHECK(cert.edges == replay.history());

    // JSON round trip: fields, ratio block, claim only when exact
    const std::string text = certificate_json(cert);
    CHECK(certificate_json(cert) == text);  // serialization is stable
    const nlohmann::json parsed = nlohmann::json::parse(text);
    CHECK(parsed.at("n").get<int>() == 12);
    CHECK(parsed.at("seed").get<std::uint64_t>() == 3);
    CHECK(parsed.at("edges").size() == cert.edges.size());
    CHECK(parsed.at("alpha_kind").get<std::string>() == "exact");
    CHECK(parsed.at("alpha_value").get<int>() == cert.alpha_value);
    CHECK(parsed.at("max_degree").get<int>() == cert.max_degree);
    CHECK(parsed.at("ratios").at("alpha_over_sqrt_nlogn").get<double>() ==
          doctest::Approx(cert.alpha_over_sqrt_nlogn));
    CHECK(parsed.contains("claim"));
    const nlohmann::json heur = nlohmann::json::parse(certificate_json(lower));
    CHECK(!heur.contains("claim"));
    CHECK(heur.at("alpha_kind").get<std::string>() == "heuristic_lower_bound");
}
