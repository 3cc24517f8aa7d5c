#include "tfp/process.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace tfp {

namespace {

constexpr std::uint32_t kNoPos = 0xFFFFFFFFu;
constexpr int kMaxN = 32768;  // packed pair + triangular index ceiling

std::uint32_t pack(int u, int v) {  // u < v
    return (static_cast<std::uint32_t>(u) << 16) | static_cast<std::uint32_t>(v);
}
std::uint32_t pack_sorted(int a, int b) { return a < b ? pack(a, b) : pack(b, a); }
int pack_u(std::uint32_t p) { return static_cast<int>(p >> 16); }
int pack_v(std::uint32_t p) { return static_cast<int>(p & 0xFFFFu); }
std::uint64_t key_sorted(int a, int b) {
    return a < b ? pair_key(a, b) : pair_key(b, a);
}

} // namespace

void RunConfig::validate() const {
    if (n < 2) throw std::invalid_argument("RunConfig: n must be at least 2");
    if (n > kMaxN) throw std::invalid_argument("RunConfig: n exceeds the supported maximum of 32768");
    if (record_every < 1) throw std::invalid_argument("RunConfig: record_every must be at least 1");
    if (stop.kind == StopRule::Kind::steps && stop.m_max < 0)
        throw std::invalid_argument("RunConfig: steps stop rule needs m_max >= 0");
    if (stop.kind == StopRule::Kind::time && !(stop.t_max >= 0.0))
        throw std::invalid_argument("RunConfig: time stop rule needs t_max >= 0");
}

ProcessState::ProcessState(int n, std::uint64_t seed, Instrumentation instr)
    : n_(n), words_((n + 63) / 64), seed_(seed), instr_(instr),
      adj_(n, n), open_(n, n), rng_(seed) {
    // every off-diagonal pair starts open
    for (int r = 0; r < n_; ++r) {
        std::uint64_t* row = open_.row(r);
        for (int i = 0; i < words_; ++i) row[i] = ~std::uint64_t{0};
        const int tail = n_ & 63;
        if (tail) row[words_ - 1] &= (std::uint64_t{1} << tail) - 1;
        open_.clear(r, r);
    }
    const std::size_t total = static_cast<std::size_t>(n_) * (n_ - 1) / 2;
    open_list_.reserve(total);
    open_pos_.assign(total, kNoPos);
    for (int u = 0; u < n_; ++u)
        for (int v = u + 1; v < n_; ++v) {
            open_pos_[tri_index(u, v)] = static_cast<std::uint32_t>(open_list_.size());
            open_list_.push_back(pack(u, v));
        }
    q_ = static_cast<long long>(open_list_.size());
}

ProcessState::ProcessState(const RunConfig& config)
    : ProcessState((config.validate(), config.n), config.seed, config.instrumentation) {}

ProcessState ProcessState::from_edges(int n, const std::vector<VertexPair>& edges,
                                      Instrumentation instr) {
    if (n < 2 || n > kMaxN) throw std::invalid_argument("from_edges: n out of range");
    ProcessState st(n, 0, instr);
    for (const auto& [u, v] : edges) st.apply_edge(u, v);
    return st;
}

void ProcessState::remove_open_pair(int u, int v) {
    open_.clear(u, v);
    open_.clear(v, u);
    const std::size_t tri = tri_index(u, v);
    const std::uint32_t pos = open_pos_[tri];
    const std::uint32_t last = open_list_.back();
    open_list_[pos] = last;
    open_pos_[tri_index(pack_u(last), pack_v(last))] = pos;
    open_list_.pop_back();
    open_pos_[tri] = kNoPos;
}

StepOutcome ProcessState::step() {
    if (q_ == 0) throw ProcessComplete{};
    return apply_at(static_cast<std::size_t>(rng_.bounded(static_cast<std::uint64_t>(q_))));
}

StepOutcome ProcessState::apply_edge(int u, int v) {
    if (u == v || u < 0 || v < 0 || u >= n_ || v >= n_)
        throw std::invalid_argument("apply_edge: invalid vertex pair");
    auto [a, b] = ordered_pair(u, v);
    if (!open_.test(a, b)) throw std::invalid_argument("apply_edge: pair is not open");
    return apply_at(open_pos_[tri_index(a, b)]);
}

StepOutcome ProcessState::apply_at(std::size_t idx) {
    const std::uint32_t pe = open_list_[idx];
    const int u = pack_u(pe), v = pack_v(pe);
    StepOutcome out;
    out.chosen = {u, v};

    // Pairs closed by {u,v}, from the pre-step rows: around u ascending, then around v.
    closed_buf_.clear();
    for_each_and_bit(open_.row(u), adj_.row(v), words_,
                     [&](int w) { closed_buf_.push_back(pack_sorted(u, w)); });
    for_each_and_bit(open_.row(v), adj_.row(u), words_,
                     [&](int w) { closed_buf_.push_back(pack_sorted(v, w)); });

    long long sum_y = 0;
    if (instr_ == Instrumentation::full) {
        // X-common vertices of the chosen edge (both sides open pre-step).
        common_buf_.clear();
        for_each_and_bit(open_.row(u), open_.row(v), words_,
                         [&](int w) { common_buf_.push_back(w); });

        removed_keys_.clear();
        removed_keys_.push_back(pair_key(u, v));
        for (std::uint32_t p : closed_buf_) removed_keys_.push_back(pair_key(pack_u(p), pack_v(p)));
        auto removed = [&](std::uint64_t k) {
            return std::find(removed_keys_.begin(), removed_keys_.end(), k) != removed_keys_.end();
        };
        auto dec_survivor = [&](std::uint64_t k) {
            if (removed(k)) return;
            auto it = y_counters_.find(k);
            if (it == y_counters_.end() || it->second == 0)
                throw std::logic_error("y counter underflow (maintenance bug)");
            --it->second;
        };
        // Every removed pair takes its Y-adjacencies with it: decrement the survivors.
        for (std::uint64_t k : removed_keys_) {
            const int a = static_cast<int>(k >> 32), b = static_cast<int>(k & 0xFFFFFFFFu);
            if (k != pair_key(u, v)) {
                auto it = y_counters_.find(k);
                sum_y += (it == y_counters_.end()) ? 0 : it->second;
            }
            for_each_and_bit(open_.row(a), adj_.row(b), words_,
                             [&](int w) { dec_survivor(key_sorted(a, w)); });
            for_each_and_bit(open_.row(b), adj_.row(a), words_,
                             [&](int w) { dec_survivor(key_sorted(b, w)); });
        }
    }

    // Mutate: add the edge, drop it and everything it closed from openness.
    remove_open_pair(u, v);
    adj_.set(u, v);
    adj_.set(v, u);
    for (std::uint32_t p : closed_buf_) remove_open_pair(pack_u(p), pack_v(p));
    q_ = static_cast<long long>(open_list_.size());
    ++m_;
    history_.push_back({u, v});

    if (instr_ == Instrumentation::full) {
        for (std::uint64_t k : removed_keys_) y_counters_.erase(k);
        // The new edge makes each X-common pair of pairs Y-adjacent.
        for (int w : common_buf_) {
            ++y_counters_[key_sorted(u, w)];
            ++y_counters_[key_sorted(v, w)];
        }
        const long long x_e = 2 * static_cast<long long>(common_buf_.size());
        out.delta_ybb = x_e - 2 * sum_y;
        out.has_delta_ybb = true;
        ybb_ += out.delta_ybb;
    }

    out.closed.reserve(closed_buf_.size());
    for (std::uint32_t p : closed_buf_) out.closed.push_back({pack_u(p), pack_v(p)});
    out.y_of_chosen = static_cast<long long>(out.closed.size());
    return out;
}

long long ProcessState::y_count(int u, int v) const {
    if (u == v || u < 0 || v < 0 || u >= n_ || v >= n_)
        throw std::invalid_argument("y_count: invalid vertex pair");
    return and_popcount(open_.row(u), adj_.row(v), words_) +
           and_popcount(open_.row(v), adj_.row(u), words_);
}

long long ProcessState::x_count(int u, int v) const {
    if (!is_open(u, v)) throw std::invalid_argument("x_count: pair is not open");
    return 2 * and_popcount(open_.row(u), open_.row(v), words_);
}

std::pair<long long, long long> ProcessState::x_count_split(int u, int v) const {
    const long long half = x_count(u, v) / 2;
    return {half, half};  // one labelled neighbour per side of each open triangle
}

long long ProcessState::z_count(int u, int v) const {
    if (u == v || u < 0 || v < 0 || u >= n_ || v >= n_)
        throw std::invalid_argument("z_count: invalid vertex pair");
    return and_popcount(adj_.row(u), adj_.row(v), words_);
}

long long ProcessState::ybb() const {
    if (instr_ != Instrumentation::full)
        throw std::logic_error("ybb requires full instrumentation");
    return ybb_;
}

long long ProcessState::y_counter(int u, int v) const {
    if (instr_ != Instrumentation::full)
        throw std::logic_error("y_counter requires full instrumentation");
    auto it = y_counters_.find(key_sorted(u, v));
    return it == y_counters_.end() ? 0 : it->second;
}

void ProcessState::debug_adjust_y_counter(int u, int v, long long delta) {
    if (instr_ != Instrumentation::full)
        throw std::logic_error("y_counter requires full instrumentation");
    y_counters_[key_sorted(u, v)] += delta;
    ybb_ += delta;
}

std::vector<VertexPair> ProcessState::open_pairs() const {
    std::vector<VertexPair> out;
    out.reserve(open_list_.size());
    for (std::uint32_t p : open_list_) out.push_back({pack_u(p), pack_v(p)});
    return out;
}

VertexPair ProcessState::open_pair(std::size_t idx) const {
    const std::uint32_t p = open_list_.at(idx);
    return {pack_u(p), pack_v(p)};
}

OracleBundle ProcessState::recompute_oracle() const {
    OracleBundle ob;
    ob.openness = BitRows(n_, n_);
    for (int u = 0; u < n_; ++u)
        for (int v = u + 1; v < n_; ++v) {
            if (adj_.test(u, v)) continue;
            if (and_popcount(adj_.row(u), adj_.row(v), words_) != 0) continue;
            ob.openness.set(u, v);
            ob.openness.set(v, u);
            ++ob.q;
        }
    for (int u = 0; u < n_; ++u)
        for (int v = u + 1; v < n_; ++v) {
            if (!ob.openness.test(u, v)) continue;
            const long long y = and_popcount(ob.openness.row(u), adj_.row(v), words_) +
                                and_popcount(ob.openness.row(v), adj_.row(u), words_);
            ob.y_values.push_back({{u, v}, y});
            ob.ybb += y;
            ob.xbb += 2 * and_popcount(ob.openness.row(u), ob.openness.row(v), words_);
            for_each_and_bit(ob.openness.row(u), ob.openness.row(v), words_, [&](int w) {
                if (w > v) ++ob.open_triangles;
            });
        }
    // Y-graph edges via their pivot vertex: open pairs {w,a},{w,b} with {a,b} an edge.
    for (int w = 0; w < n_; ++w)
        for_each_bit(ob.openness.row(w), words_, [&](int a) {
            for_each_and_bit(ob.openness.row(w), adj_.row(a), words_, [&](int b) {
                if (b > a) ++ob.ygraph_edges;
            });
        });
    return ob;
}

bool ProcessState::matches_oracle(const OracleBundle& oracle, std::string* why) const {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (q_ != oracle.q) return fail("q mismatch: maintained " + std::to_string(q_) +
                                    " vs oracle " + std::to_string(oracle.q));
    if (!(open_ == oracle.openness)) return fail("openness matrix mismatch");
    if (instr_ == Instrumentation::full) {
        if (ybb_ != oracle.ybb)
            return fail("ybb mismatch: maintained " + std::to_string(ybb_) +
                        " vs oracle " + std::to_string(oracle.ybb));
        long long stored_sum = 0;
        for (const auto& [k, val] : y_counters_) stored_sum += val;
        if (stored_sum != oracle.ybb) return fail("y counter sum differs from oracle ybb");
        for (const auto& [e, y] : oracle.y_values) {
            auto it = y_counters_.find(pair_key(e));
            const long long have = it == y_counters_.end() ? 0 : it->second;
            if (have != y)
                return fail("y counter mismatch at pair {" + std::to_string(e.first) + "," +
                            std::to_string(e.second) + "}: maintained " + std::to_string(have) +
                            " vs oracle " + std::to_string(y));
        }
    }
    return true;
}

std::string ProcessState::snapshot_line() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["n"] = n_;
    j["seed"] = seed_;
    j["m"] = m_;
    auto edges = nlohmann::json::array();
    for (const auto& [u, v] : history_) edges.push_back({u, v});
    j["edges"] = std::move(edges);
    return j.dump();
}

ProcessState ProcessState::restore(const std::string& snapshot_line, Instrumentation instr) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(snapshot_line);
    } catch (const nlohmann::json::exception& ex) {
        throw std::runtime_error(std::string("snapshot parse error: ") + ex.what());
    }
    if (!j.is_object() || !j.contains("format_version") || !j["format_version"].is_number_integer())
        throw std::runtime_error("snapshot missing integer format_version");
    if (j["format_version"].get<int>() != 1)
        throw std::runtime_error("unsupported snapshot format_version");
    for (const char* field : {"n", "seed", "m", "edges"})
        if (!j.contains(field)) throw std::runtime_error(std::string("snapshot missing field ") + field);

    RunConfig cfg;
    cfg.n = j["n"].get<int>();
    cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.instrumentation = instr;
    ProcessState st(cfg);
    const auto& edges = j["edges"];
    const auto m = j["m"].get<long long>();
    if (!edges.is_array() || static_cast<long long>(edges.size()) != m)
        throw std::runtime_error("snapshot edge list length differs from m");
    // Replay through the PRNG so the resumed stream continues the original run.
    for (long long i = 0; i < m; ++i) {
        const StepOutcome out = st.step();
        const VertexPair want = ordered_pair(edges[i][0].get<int>(), edges[i][1].get<int>());
        if (out.chosen != want)
            throw std::runtime_error("snapshot replay diverged at step " + std::to_string(i + 1) +
                                     ": snapshot edge does not match the seeded stream");
    }
    return st;
}

void ProcessState::export_graph(std::ostream& os) const {
    os << n_ << ' ' << m_ << '\n';
    for (const auto& [u, v] : history_) os << u << ' ' << v << '\n';
}

std::pair<int, std::vector<VertexPair>> ProcessState::parse_graph_export(std::istream& is) {
    int n = 0;
    long long m = 0;
    if (!(is >> n >> m)) throw std::runtime_error("graph export: bad header line");
    if (n < 2 || m < 0) throw std::runtime_error("graph export: invalid header values");
    std::vector<VertexPair> edges;
    edges.reserve(static_cast<std::size_t>(m));
    for (long long i = 0; i < m; ++i) {
        int u = 0, v = 0;
        if (!(is >> u >> v)) throw std::runtime_error("graph export: truncated edge list");
        if (u < 0 || v < 0 || u >= n || v >= n || u == v)
            throw std::runtime_error("graph export: invalid edge at line " + std::to_string(i + 2));
        edges.push_back({u, v});
    }
    return {n, std::move(edges)};
}

long long run_process(ProcessState& state, const StopRule& stop, long long record_every,
                      const std::function<void(const ProcessState&, bool)>& on_sample) {
    if (record_every < 1) throw std::invalid_argument("run_process: record_every must be at least 1");
    long long limit = std::numeric_limits<long long>::max();
    if (stop.kind == StopRule::Kind::steps) limit = stop.m_max;
    if (stop.kind == StopRule::Kind::time) {
        const double n32 = std::pow(static_cast<double>(state.n()), 1.5);
        limit = static_cast<long long>(std::ceil(stop.t_max * n32));
    }
    long long taken = 0;
    long long last_sampled = -1;
    while (state.m() < limit && !state.complete()) {
        state.step();
        ++taken;
        if (state.m() % record_every == 0) {
            if (on_sample) on_sample(state, false);
            last_sampled = state.m();
        }
    }
    if (on_sample && state.m() != last_sampled) on_sample(state, true);
    return taken;
}

bool verify_maximal_triangle_free(const ProcessState& state, std::string* why) {
    const int n = state.n();
    const int words = state.words();
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    for (const auto& [u, v] : state.history())
        if (and_popcount(state.adj_row(u), state.adj_row(v), words) != 0)
            return fail("edge {" + std::to_string(u) + "," + std::to_string(v) + "} lies in a triangle");
    for (int u = 0; u < n; ++u) {
        const std::uint64_t* au = state.adj_row(u);
        for (int v = u + 1; v < n; ++v) {
            if (state.is_edge(u, v)) continue;
            const std::uint64_t* av = state.adj_row(v);
            bool closed = false;
            for (int i = 0; i < words && !closed; ++i) closed = (au[i] & av[i]) != 0;
            if (!closed)
                return fail("non-edge {" + std::to_string(u) + "," + std::to_string(v) +
                            "} has no common neighbour");
        }
    }
    return true;
}

} // namespace tfp
