#include "tfp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include <json.hpp>

#include "tfp/rng.hpp"
#include "tfp/structures.hpp"
#include "tfp/ygraph.hpp"

namespace tfp {

namespace {

// ---- text formatting -------------------------------------------------------

/** Canonical real format: nine significant digits, shortest form. */
std::string fmt_real(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

long long field_ll(const std::string& s) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed integer field '" + s + "'");
    }
}

std::uint64_t field_u64(const std::string& s) {
    try {
        std::size_t used = 0;
        if (!s.empty() && s[0] == '-') throw std::invalid_argument("");
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed unsigned field '" + s + "'");
    }
}

double field_real(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed real field '" + s + "'");
    }
}

// ---- file helpers ----------------------------------------------------------

void ensure_parent_dir(const std::string& path) {
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_text_file(const std::string& path, const std::string& text) {
    ensure_parent_dir(path);
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
    file << text;
    file.flush();
    if (!file) throw std::runtime_error("write to '" + path + "' failed");
}

/** "runs/a.csv" + ".summary.json" -> "runs/a.summary.json". */
std::string derived_path(const std::string& base, const std::string& suffix) {
    std::filesystem::path p(base);
    p.replace_extension();
    return p.string() + suffix;
}

std::string instrumentation_name(Instrumentation instr) {
    return instr == Instrumentation::full ? "full" : "light";
}

nlohmann::ordered_json stop_json(const StopRule& stop) {
    nlohmann::ordered_json j;
    switch (stop.kind) {
        case StopRule::Kind::completion: j["kind"] = "completion"; break;
        case StopRule::Kind::steps:
            j["kind"] = "steps";
            j["m_max"] = stop.m_max;
            break;
        case StopRule::Kind::time:
            j["kind"] = "time";
            j["t_max"] = stop.t_max;
            break;
    }
    return j;
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream os;
    os << file.rdbuf();
    if (file.bad()) throw std::runtime_error("read from '" + path + "' failed");
    return os.str();
}

// ---- CSV schema ------------------------------------------------------------

std::string csv_header() {
    return "run_id,m,t,q,q_tilde,q_star,ybar,y_tilde,ybar_star,xbar,x_tilde,xbar_star,"
           "lambda,mu,lyapunov,max_deg,var_y,cov_xy,sample_size";
}

std::string csv_line(const CsvRow& row) {
    const RunRecord& r = row.rec;
    std::string out;
    out.reserve(256);
    out += std::to_string(row.run_id);
    out += ',';
    out += std::to_string(r.m);
    out += ',';
    out += fmt_real(r.t);
    out += ',';
    out += std::to_string(r.q);
    for (double x : {r.q_tilde, r.q_star, r.ybar, r.y_tilde, r.ybar_star, r.xbar, r.x_tilde,
                     r.xbar_star, r.lambda, r.mu, r.lyapunov}) {
        out += ',';
        out += fmt_real(x);
    }
    out += ',';
    out += std::to_string(r.max_deg);
    out += ',';
    out += fmt_real(r.var_y);
    out += ',';
    out += fmt_real(r.cov_xy);
    out += ',';
    out += std::to_string(r.sample_size);
    return out;
}

CsvRow parse_csv_line(const std::string& line) {
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != 19)
        throw std::invalid_argument("expected 19 CSV fields, found " + std::to_string(f.size()));
    CsvRow row;
    RunRecord& r = row.rec;
    row.run_id = field_u64(f[0]);
    r.m = field_ll(f[1]);
    r.t = field_real(f[2]);
    r.q = field_ll(f[3]);
    r.q_tilde = field_real(f[4]);
    r.q_star = field_real(f[5]);
    r.ybar = field_real(f[6]);
    r.y_tilde = field_real(f[7]);
    r.ybar_star = field_real(f[8]);
    r.xbar = field_real(f[9]);
    r.x_tilde = field_real(f[10]);
    r.xbar_star = field_real(f[11]);
    r.lambda = field_real(f[12]);
    r.mu = field_real(f[13]);
    r.lyapunov = field_real(f[14]);
    r.max_deg = static_cast<int>(field_ll(f[15]));
    r.var_y = field_real(f[16]);
    r.cov_xy = field_real(f[17]);
    r.sample_size = field_ll(f[18]);
    return row;
}

std::vector<CsvRow> read_csv(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(file, line)) throw std::runtime_error("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != csv_header())
        throw std::runtime_error("'" + path + "' does not carry the expected CSV header");
    std::vector<CsvRow> rows;
    while (std::getline(file, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(parse_csv_line(line));
    }
    return rows;
}

void write_csv(const std::string& path, const std::vector<CsvRow>& rows) {
    ensure_parent_dir(path);
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
    file << csv_header() << '\n';
    for (const CsvRow& row : rows) file << csv_line(row) << '\n';
    file.flush();
    if (!file) throw std::runtime_error("write to '" + path + "' failed");
}

// ---- simulate --------------------------------------------------------------

CsvRow measure_row(const Params& p, std::uint64_t run_id, const ProcessState& state,
                   long long moment_sample) {
    const long long q = state.q();
    double ybar = 0, xbar = 0, var_y = 0, cov_xy = 0;
    long long sample_size = 0;
    if (q > 0) {
        const MomentStats ms = moment_stats(state, moment_sample);
        ybar = ms.ybar;
        xbar = ms.xbar;
        var_y = ms.var_y;
        cov_xy = ms.cov_xy;
        sample_size = ms.sample_size;
    }
    const DegreeStats ds = max_degree_stats(state);
    CsvRow row;
    row.run_id = run_id;
    row.rec = make_record(p, state.m(), q, ybar, xbar, var_y, cov_xy, ds.max_degree, sample_size);
    return row;
}

SimulateResult run_simulation(const SimulateOptions& opts) {
    const auto clock_start = std::chrono::steady_clock::now();
    const bool resumed = !opts.resume_line.empty();

    ProcessState state = [&] {
        if (resumed) return ProcessState::restore(opts.resume_line, opts.instrumentation);
        RunConfig rc;
        rc.n = opts.n;
        rc.seed = opts.seed;
        rc.stop = opts.stop;
        rc.instrumentation = opts.instrumentation;
        rc.record_every = opts.record_every;
        rc.validate();
        return ProcessState(rc);
    }();
    if (resumed && opts.n != 0 && opts.n != state.n())
        throw std::invalid_argument("requested n=" + std::to_string(opts.n) +
                                    " disagrees with the snapshot's n=" +
                                    std::to_string(state.n()));

    Params p;
    p.n = state.n();
    p.eps = opts.eps;
    p.big_c = opts.big_c;
    p.omega = opts.omega;
    p.validate();

    SimulateResult result;
    result.n = state.n();
    result.seed = state.seed();
    result.start_m = state.m();

    run_process(state, opts.stop, opts.record_every, [&](const ProcessState& st, bool) {
        // A zero-step resume would otherwise re-emit the snapshot's own row.
        if (resumed && st.m() == result.start_m) return;
        result.rows.push_back(measure_row(p, result.seed, st, opts.moment_sample));
    });

    result.final_m = state.m();
    result.final_q = state.q();
    result.final_t = time_map(p, state.m());
    result.complete = state.complete();
    result.final_edge_ratio =
        static_cast<double>(state.m()) / (p.n32() * std::sqrt(p.log_n()));
    result.snapshot = state.snapshot_line();
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return result;
}

std::string summary_json(const SimulateOptions& opts, const SimulateResult& result) {
    Params p;
    p.n = result.n;
    p.eps = opts.eps;
    p.big_c = opts.big_c;
    p.omega = opts.omega;

    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["n"] = result.n;
    j["seed"] = result.seed;
    j["eps"] = opts.eps;
    j["big_c"] = opts.big_c;
    j["omega"] = p.omega_value();
    j["k_short"] = p.k_short_value();
    j["instrumentation"] = instrumentation_name(opts.instrumentation);
    j["record_every"] = opts.record_every;
    j["moment_sample"] = opts.moment_sample;
    j["stop"] = stop_json(opts.stop);
    j["resumed"] = !opts.resume_line.empty();
    j["start_m"] = result.start_m;
    j["rows"] = result.rows.size();
    nlohmann::ordered_json fin;
    fin["m"] = result.final_m;
    fin["t"] = result.final_t;
    fin["q"] = result.final_q;
    fin["complete"] = result.complete;
    fin["edge_ratio"] = result.final_edge_ratio;
    j["final"] = fin;
    j["seconds"] = result.seconds;
    return j.dump(2) + "\n";
}

int simulate_cmd(const SimulateOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        if (opts.out_csv.empty()) throw std::invalid_argument("an output CSV path is required");
        const SimulateResult result = run_simulation(opts);
        const std::string snap_path =
            opts.out_snapshot.empty() ? derived_path(opts.out_csv, ".snapshot") : opts.out_snapshot;
        const std::string summary_path =
            opts.out_summary.empty() ? derived_path(opts.out_csv, ".summary.json")
                                     : opts.out_summary;
        write_csv(opts.out_csv, result.rows);
        write_text_file(snap_path, result.snapshot + "\n");
        write_text_file(summary_path, summary_json(opts, result));
        out << "simulate: n=" << result.n << " seed=" << result.seed << " m=" << result.final_m
            << " t=" << fmt_real(result.final_t) << " q=" << result.final_q
            << (result.complete ? " (complete)" : "") << " rows=" << result.rows.size()
            << " edge_ratio=" << fmt_real(result.final_edge_ratio) << " ["
            << fmt_real(result.seconds) << "s]\n";
        out << "  csv:      " << opts.out_csv << "\n";
        out << "  snapshot: " << snap_path << "\n";
        out << "  summary:  " << summary_path << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "simulate: error: " << e.what() << "\n";
        return 1;
    }
}

// ---- ensemble --------------------------------------------------------------

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

namespace {

constexpr const char* kAggregateMetrics[] = {"q",      "q_star", "ybar",     "ybar_star",
                                             "xbar",   "xbar_star", "lambda", "mu",
                                             "lyapunov", "max_deg", "var_y",  "cov_xy"};

AggregateStat AggregateRow::* const kAggregateFields[] = {
    &AggregateRow::q,      &AggregateRow::q_star,    &AggregateRow::ybar,
    &AggregateRow::ybar_star, &AggregateRow::xbar,   &AggregateRow::xbar_star,
    &AggregateRow::lambda, &AggregateRow::mu,        &AggregateRow::lyapunov,
    &AggregateRow::max_deg, &AggregateRow::var_y,    &AggregateRow::cov_xy};

}  // namespace

std::vector<AggregateRow> aggregate_runs(const std::vector<std::vector<CsvRow>>& runs) {
    std::vector<AggregateRow> out;
    if (runs.empty()) return out;

    std::map<long long, std::vector<const RunRecord*>> by_m;
    for (const auto& run : runs)
        for (const CsvRow& row : run) by_m[row.rec.m].push_back(&row.rec);

    for (const auto& [m, recs] : by_m) {
        if (recs.size() != runs.size()) continue;  // keep only m sampled by every run
        AggregateRow row;
        row.m = m;
        row.t = recs.front()->t;  // t is a function of m alone for a fixed n
        row.runs = static_cast<int>(recs.size());
        const auto stat = [&recs](auto member) {
            std::vector<double> values;
            values.reserve(recs.size());
            for (const RunRecord* rec : recs) values.push_back(static_cast<double>(rec->*member));
            AggregateStat s;
            s.p25 = quantile(values, 0.25);
            s.p50 = quantile(values, 0.50);
            s.p75 = quantile(std::move(values), 0.75);
            return s;
        };
        row.q = stat(&RunRecord::q);
        row.q_star = stat(&RunRecord::q_star);
        row.ybar = stat(&RunRecord::ybar);
        row.ybar_star = stat(&RunRecord::ybar_star);
        row.xbar = stat(&RunRecord::xbar);
        row.xbar_star = stat(&RunRecord::xbar_star);
        row.lambda = stat(&RunRecord::lambda);
        row.mu = stat(&RunRecord::mu);
        row.lyapunov = stat(&RunRecord::lyapunov);
        row.max_deg = stat(&RunRecord::max_deg);
        row.var_y = stat(&RunRecord::var_y);
        row.cov_xy = stat(&RunRecord::cov_xy);
        out.push_back(row);
    }
    return out;
}

std::string aggregate_header() {
    std::string out = "m,t,runs";
    for (const char* name : kAggregateMetrics)
        for (const char* q : {"p25", "p50", "p75"}) {
            out += ',';
            out += name;
            out += '_';
            out += q;
        }
    return out;
}

std::string aggregate_line(const AggregateRow& row) {
    std::string out;
    out.reserve(512);
    out += std::to_string(row.m);
    out += ',';
    out += fmt_real(row.t);
    out += ',';
    out += std::to_string(row.runs);
    for (auto member : kAggregateFields) {
        const AggregateStat& s = row.*member;
        for (double x : {s.p25, s.p50, s.p75}) {
            out += ',';
            out += fmt_real(x);
        }
    }
    return out;
}

int ensemble_cmd(const EnsembleOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        if (opts.runs < 1) throw std::invalid_argument("runs must be >= 1");
        if (opts.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
        if (opts.out_prefix.empty()) throw std::invalid_argument("an output prefix is required");
        if (!opts.base.resume_line.empty())
            throw std::invalid_argument("ensemble does not support resuming from a snapshot");

        const auto clock_start = std::chrono::steady_clock::now();

        struct Slot {
            bool ok = false;
            std::string error;
            SimulateResult result;
            std::string csv_path;
        };
        std::vector<Slot> slots(static_cast<std::size_t>(opts.runs));
        std::atomic<int> next{0};

        // Each worker owns its states outright, so runs never share anything.
        const int workers = std::min(opts.jobs, opts.runs);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    const int i = next.fetch_add(1);
                    if (i >= opts.runs) return;
                    Slot& slot = slots[static_cast<std::size_t>(i)];
                    try {
                        SimulateOptions run_opts = opts.base;
                        run_opts.seed = opts.base.seed + static_cast<std::uint64_t>(i);
                        SimulateResult r = run_simulation(run_opts);
                        slot.csv_path =
                            opts.out_prefix + "_" + std::to_string(run_opts.seed) + ".csv";
                        write_csv(slot.csv_path, r.rows);
                        r.rows.clear();  // the aggregate below re-reads from disk
                        slot.result = std::move(r);
                        slot.ok = true;
                    } catch (const std::exception& e) {
                        slot.error = e.what();
                    }
                }
            });
        for (std::thread& th : pool) th.join();

        int failed = 0;
        for (int i = 0; i < opts.runs; ++i)
            if (!slots[static_cast<std::size_t>(i)].ok) {
                ++failed;
                err << "ensemble: run with seed "
                    << opts.base.seed + static_cast<std::uint64_t>(i)
                    << " failed: " << slots[static_cast<std::size_t>(i)].error << "\n";
            }
        if (failed > 0) {
            err << "ensemble: aborted, " << failed << " of " << opts.runs
                << " runs failed; no aggregate written\n";
            return 1;
        }

        // The aggregate is computed from the per-run files themselves, so it is
        // a pure function of their contents (independent of jobs/scheduling).
        std::vector<std::vector<CsvRow>> runs;
        runs.reserve(slots.size());
        for (const Slot& slot : slots) runs.push_back(read_csv(slot.csv_path));
        const std::vector<AggregateRow> agg = aggregate_runs(runs);

        const std::string agg_path = opts.out_prefix + "_aggregate.csv";
        {
            ensure_parent_dir(agg_path);
            std::ofstream file(agg_path, std::ios::binary);
            if (!file) throw std::runtime_error("cannot open '" + agg_path + "' for writing");
            file << aggregate_header() << '\n';
            for (const AggregateRow& row : agg) file << aggregate_line(row) << '\n';
            file.flush();
            if (!file) throw std::runtime_error("write to '" + agg_path + "' failed");
        }

        std::vector<double> final_ratios;
        final_ratios.reserve(slots.size());
        for (const Slot& slot : slots) final_ratios.push_back(slot.result.final_edge_ratio);

        nlohmann::ordered_json j;
        j["format_version"] = 1;
        j["n"] = slots.front().result.n;
        j["first_seed"] = opts.base.seed;
        j["runs"] = opts.runs;
        j["jobs"] = opts.jobs;
        j["eps"] = opts.base.eps;
        j["big_c"] = opts.base.big_c;
        {
            Params p;
            p.n = slots.front().result.n;
            p.eps = opts.base.eps;
            p.big_c = opts.base.big_c;
            p.omega = opts.base.omega;
            j["omega"] = p.omega_value();
        }
        j["instrumentation"] = instrumentation_name(opts.base.instrumentation);
        j["record_every"] = opts.base.record_every;
        j["moment_sample"] = opts.base.moment_sample;
        j["stop"] = stop_json(opts.base.stop);
        nlohmann::ordered_json per_run = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const SimulateResult& r = slots[i].result;
            nlohmann::ordered_json one;
            one["seed"] = r.seed;
            one["csv"] = slots[i].csv_path;
            one["m"] = r.final_m;
            one["t"] = r.final_t;
            one["q"] = r.final_q;
            one["complete"] = r.complete;
            one["edge_ratio"] = r.final_edge_ratio;
            if (!runs[i].empty()) one["final_max_deg"] = runs[i].back().rec.max_deg;
            one["seconds"] = r.seconds;
            per_run.push_back(one);
        }
        j["per_run"] = per_run;
        j["aggregate_rows"] = agg.size();
        j["aggregate_csv"] = agg_path;
        j["median_final_edge_ratio"] = quantile(final_ratios, 0.5);
        j["seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start)
                .count();
        const std::string summary_path = opts.out_prefix + "_summary.json";
        write_text_file(summary_path, j.dump(2) + "\n");

        out << "ensemble: " << opts.runs << " runs (seeds " << opts.base.seed << ".."
            << opts.base.seed + static_cast<std::uint64_t>(opts.runs - 1) << ") on "
            << workers << " jobs, " << agg.size() << " aggregate rows ["
            << fmt_real(j["seconds"].get<double>()) << "s]\n";
        out << "  aggregate: " << agg_path << "\n";
        out << "  summary:   " << summary_path << "\n";
        out << "  median final edge ratio: " << fmt_real(quantile(final_ratios, 0.5)) << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "ensemble: error: " << e.what() << "\n";
        return 1;
    }
}

// ---- structure -------------------------------------------------------------

namespace {

/** The canonical text with newlines folded, for single-line reports. */
std::string one_line_text(const AnchoredPair& pair) {
    std::string text = pair.canonical_text();
    while (!text.empty() && text.back() == '\n') text.pop_back();
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == '\n') {
            out += "; ";
        } else {
            out += c;
        }
    }
    return out;
}

std::string vertex_set_names(const GraphStructure& f, const std::set<int>& ids) {
    std::string out = "{";
    bool first = true;
    for (int id : ids) {
        if (!first) out += ", ";
        out += f.names[static_cast<std::size_t>(id)];
        first = false;
    }
    out += "}";
    return out;
}

nlohmann::ordered_json rho_json(const RhoTime& rho) {
    nlohmann::ordered_json j;
    j["text"] = rho.str();
    if (rho.is_finite()) {
        j["num"] = rho.num();
        j["den"] = rho.den();
    }
    j["value"] = rho.is_infinite() ? nlohmann::ordered_json() : nlohmann::ordered_json(rho.value());
    return j;
}

nlohmann::ordered_json names_json(const GraphStructure& f, const std::set<int>& ids) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (int id : ids) arr.push_back(f.names[static_cast<std::size_t>(id)]);
    return arr;
}

}  // namespace

int structure_cmd(const StructureOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        Params p = opts.params;
        p.validate();
        const AnchoredPair pair = parse_structure(opts.text);
        const GraphStructure& f = pair.structure();

        const bool permissible = is_permissible(f);
        const RhoTime rho = rho_star(pair);
        const TrackingTime tracking = tracking_time(pair, p);
        const BuildingSequenceResult chain = building_sequence(pair, p);
        const bool balanced = is_balanced(pair);
        const double horizon = t_star(p);

        bool have_weights = false;
        StructureWeights w;
        std::string weights_note;
        try {
            w = weights(pair, p);
            have_weights = true;
        } catch (const std::exception& e) {
            weights_note = e.what();
        }

        const double t_eval = opts.at_t >= 0 ? opts.at_t : 0.5 * horizon;
        const long long m_eval = std::llround(t_eval * p.n32());
        const double log_count = log_tilde_n(pair, p, m_eval);
        const double log_death = death_line_log(pair, p, m_eval);

        out << "structure: " << one_line_text(pair) << "\n";
        out << "  vertices " << f.v() << " (anchor " << f.v() - pair.v_a() << ", free v_A = "
            << pair.v_a() << "), edges e = " << pair.e() << ", open o = " << pair.o() << "\n";
        out << "  permissible: " << (permissible ? "yes" : "no") << "\n";
        out << "  rho* = " << rho.str();
        if (rho.is_finite()) out << " = " << fmt_real(rho.value());
        out << "  (t = " << fmt_real(t_star_struct(pair, p.n)) << ")\n";
        out << "  tracking time: rho = " << tracking.rho.str() << ", t = " << fmt_real(tracking.t)
            << "  (horizon t* = " << fmt_real(horizon) << ")\n";
        out << "  balanced: " << (balanced ? "yes" : "no") << "\n";

        out << "  building sequence: ell = " << chain.chain.size() - 1 << "\n";
        for (std::size_t i = 0; i < chain.chain.size(); ++i) {
            out << "    H_" << i << " = " << vertex_set_names(f, chain.chain[i]);
            if (i > 0)
                out << "  (rho = " << chain.rhos[i - 1].str()
                    << ", t = " << fmt_real(chain.times[i - 1]) << ")";
            out << "\n";
        }

        if (have_weights) {
            out << "  weights: delta = " << fmt_real(w.delta)
                << ", delta_minus_v = " << fmt_real(w.delta_minus_v)
                << ", gamma = " << fmt_real(w.gamma) << ", c = " << w.c_num << "/" << w.c_den
                << " = " << fmt_real(w.c) << "\n";
        } else {
            out << "  weights: undefined (" << weights_note << ")\n";
        }

        out << "  at t = " << fmt_real(t_eval) << " (m = " << m_eval << "):\n";
        out << "    log ~N_A = " << fmt_real(log_count) << "\n";
        if (have_weights) {
            out << "    log g = " << fmt_real(log_g_fa(pair, p, t_eval))
                << ", log f = " << fmt_real(log_f_fa(pair, p, t_eval)) << "\n";
        }
        out << "    log death line = " << fmt_real(log_death) << "\n";

        std::vector<std::pair<std::string, DerivedFamily>> wanted;
        if (opts.families == "open" || opts.families == "all")
            wanted.emplace_back("open", DerivedFamily::open);
        if (opts.families == "plus" || opts.families == "all")
            wanted.emplace_back("plus", DerivedFamily::plus);
        if (opts.families == "minus" || opts.families == "all")
            wanted.emplace_back("minus", DerivedFamily::minus);
        if (opts.families == "star" || opts.families == "all")
            wanted.emplace_back("star", DerivedFamily::star);
        if (!opts.families.empty() && wanted.empty())
            throw std::invalid_argument("unknown family '" + opts.families +
                                        "' (expected open, plus, minus, star or all)");

        nlohmann::ordered_json jfam = nlohmann::ordered_json::array();
        for (const auto& [label, which] : wanted) {
            const std::vector<DerivedMember> members = derived_families(pair, which);
            out << "  family " << label << ": " << members.size() << " member"
                << (members.size() == 1 ? "" : "s") << "\n";
            for (const DerivedMember& member : members) {
                out << "    ";
                if (member.minus_case != 0) out << "(" << member.minus_case << ") ";
                out << member.marker << "  ->  " << one_line_text(member.pair)
                    << "  [rho* = " << rho_star(member.pair).str() << "]\n";
                nlohmann::ordered_json jm;
                jm["family"] = label;
                if (member.minus_case != 0) jm["case"] = std::string(1, member.minus_case);
                jm["marker"] = member.marker;
                jm["structure"] = member.pair.canonical_text();
                jm["v_a"] = member.pair.v_a();
                jm["e"] = member.pair.e();
                jm["o"] = member.pair.o();
                jm["rho_star"] = rho_json(rho_star(member.pair));
                jfam.push_back(jm);
            }
        }

        if (!opts.out_json.empty()) {
            std::set<int> all_ids;
            for (int i = 0; i < f.v(); ++i) all_ids.insert(i);
            nlohmann::ordered_json j;
            j["structure"] = pair.canonical_text();
            j["vertices"] = names_json(f, all_ids);
            j["anchor"] = names_json(f, pair.anchor());
            j["v_a"] = pair.v_a();
            j["e"] = pair.e();
            j["o"] = pair.o();
            j["permissible"] = permissible;
            j["n"] = p.n;
            j["eps"] = p.eps;
            j["big_c"] = p.big_c;
            j["rho_star"] = rho_json(rho);
            j["t_star_structure"] = t_star_struct(pair, p.n);
            nlohmann::ordered_json jtrack;
            jtrack["rho"] = rho_json(tracking.rho);
            jtrack["t"] = tracking.t;
            j["tracking"] = jtrack;
            j["horizon_t_star"] = horizon;
            j["balanced"] = balanced;
            nlohmann::ordered_json jseq = nlohmann::ordered_json::array();
            for (std::size_t i = 0; i < chain.chain.size(); ++i) {
                nlohmann::ordered_json lvl;
                lvl["level"] = i;
                lvl["vertices"] = names_json(f, chain.chain[i]);
                if (i > 0) {
                    lvl["rho"] = rho_json(chain.rhos[i - 1]);
                    lvl["t"] = chain.times[i - 1];
                }
                jseq.push_back(lvl);
            }
            j["building_sequence"] = jseq;
            if (have_weights) {
                nlohmann::ordered_json jw;
                jw["delta"] = w.delta;
                jw["delta_minus_v"] = w.delta_minus_v;
                jw["gamma"] = w.gamma;
                jw["c"] = w.c;
                jw["c_num"] = w.c_num;
                jw["c_den"] = w.c_den;
                j["weights"] = jw;
            } else {
                j["weights"] = nullptr;
                j["weights_note"] = weights_note;
            }
            nlohmann::ordered_json jat;
            jat["t"] = t_eval;
            jat["m"] = m_eval;
            jat["log_tilde_n"] = log_count;
            if (have_weights) {
                jat["log_g"] = log_g_fa(pair, p, t_eval);
                jat["log_f"] = log_f_fa(pair, p, t_eval);
            }
            jat["log_death_line"] = log_death;
            j["at"] = jat;
            if (!wanted.empty()) j["families"] = jfam;
            write_text_file(opts.out_json, j.dump(2) + "\n");
            out << "  json: " << opts.out_json << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        err << "structure: error: " << e.what() << "\n";
        return 1;
    }
}

// ---- ygraph ----------------------------------------------------------------

int ygraph_cmd(const YgraphOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        RunConfig rc;
        rc.n = opts.n;
        rc.seed = opts.seed;
        rc.stop = opts.stop;
        rc.instrumentation = opts.instrumentation;
        rc.validate();
        ProcessState state(rc);
        run_process(state, opts.stop, std::numeric_limits<long long>::max() / 2, {});

        Params p;
        p.n = state.n();
        const YGraph yg(state);
        const bool symmetric = ygraph_symmetric(yg);
        const bool triangle_free = ygraph_triangle_free(yg);

        out << "ygraph: n=" << state.n() << " seed=" << state.seed() << " m=" << state.m()
            << " t=" << fmt_real(time_map(p, state.m())) << "\n";
        out << "  open pairs (vertices): " << yg.vertex_count()
            << ", edges: " << yg.edge_count() << ", mean Y = " << fmt_real(yg.y_bar()) << "\n";
        out << "  symmetric: " << (symmetric ? "yes" : "NO")
            << ", triangle-free: " << (triangle_free ? "yes" : "NO") << "\n";
        if (state.instrumentation() == Instrumentation::full)
            out << "  sum of Y over open pairs: " << state.ybb() << " (= 2 x "
                << yg.edge_count() << " edges: "
                << (state.ybb() == 2 * yg.edge_count() ? "yes" : "NO") << ")\n";

        nlohmann::ordered_json j;
        j["n"] = state.n();
        j["seed"] = state.seed();
        j["m"] = state.m();
        j["t"] = time_map(p, state.m());
        j["vertices"] = yg.vertex_count();
        j["edges"] = yg.edge_count();
        j["y_bar"] = yg.y_bar();
        j["symmetric"] = symmetric;
        j["triangle_free"] = triangle_free;

        if (opts.edge_u >= 0 || opts.edge_v >= 0) {
            const int u = opts.edge_u, v = opts.edge_v;
            const int id = yg.require_id(u, v);
            const OrientedEdge oriented{u, v};  // the left foot walks, v stays planted
            out << "  focus pair {" << u << ", " << v << "}: Y = " << yg.y_degree(id) << "\n";
            nlohmann::ordered_json jf;
            jf["u"] = u;
            jf["v"] = v;
            jf["y"] = yg.y_degree(id);
            try {
                const MixingReport mix = mixing_stats(yg, state, oriented, opts.k);
                out << "    mixing (k = " << mix.k << "): V_k = " << fmt_real(mix.v_k)
                    << ", V_{k+1} = " << fmt_real(mix.v_k1)
                    << ", local mean = " << fmt_real(mix.q_u_mean)
                    << ", global mean = " << fmt_real(mix.y_bar) << "\n";
                out << "    gaps: step = " << fmt_real(mix.gap_step)
                    << ", local = " << fmt_real(mix.gap_local)
                    << ", global = " << fmt_real(mix.gap_global) << "\n";
                nlohmann::ordered_json jm;
                jm["k"] = mix.k;
                jm["v_k"] = mix.v_k;
                jm["v_k1"] = mix.v_k1;
                jm["q_u_mean"] = mix.q_u_mean;
                jm["y_bar"] = mix.y_bar;
                jm["gap_step"] = mix.gap_step;
                jm["gap_local"] = mix.gap_local;
                jm["gap_global"] = mix.gap_global;
                jf["mixing"] = jm;
            } catch (const std::domain_error& e) {
                out << "    mixing (k = " << opts.k << "): undefined (" << e.what() << ")\n";
                jf["mixing"] = nullptr;
            }
            if (!opts.sigma.empty()) {
                const WalkSpec walk = WalkSpec::parse(opts.sigma);
                const double u_count = u_walks(yg, oriented, walk);
                out << "    sigma = " << opts.sigma << ": U = " << fmt_real(u_count);
                nlohmann::ordered_json jw;
                jw["sigma"] = opts.sigma;
                jw["u"] = u_count;
                try {
                    const double v_avg = v_average(yg, oriented, walk);
                    out << ", V = " << fmt_real(v_avg) << "\n";
                    jw["v"] = v_avg;
                } catch (const std::domain_error&) {
                    out << ", V undefined (no walks)\n";
                    jw["v"] = nullptr;
                }
                jf["walk"] = jw;
            }
            j["focus"] = jf;
        }

        if (!opts.out_json.empty()) {
            write_text_file(opts.out_json, j.dump(2) + "\n");
            out << "  json: " << opts.out_json << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        err << "ygraph: error: " << e.what() << "\n";
        return 1;
    }
}

// ---- witness ---------------------------------------------------------------

int witness_cmd(const WitnessOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        const WitnessCertificate cert = ramsey_witness(opts.config);
        out << "witness: n=" << cert.n << " seed=" << cert.seed
            << " edges=" << cert.edges.size() << "\n";
        out << "  independence number (" << cert.alpha_kind << "): " << cert.alpha_value
            << ", max degree: " << cert.max_degree << "\n";
        out << "  alpha / sqrt(n ln n)   = " << fmt_real(cert.alpha_over_sqrt_nlogn) << "\n";
        out << "  maxdeg / sqrt(n ln n)  = " << fmt_real(cert.maxdeg_over_sqrt_nlogn) << "\n";
        out << "  edges / n^1.5 sqrt(ln) = " << fmt_real(cert.edges_over_n32_sqrtlogn) << "\n";
        if (!cert.claim.empty()) out << "  claim: " << cert.claim << "\n";

        const std::string json = certificate_json(cert);
        if (!opts.out_json.empty()) {
            write_text_file(opts.out_json, json);
            out << "  certificate: " << opts.out_json << "\n";
        } else {
            out << json;
        }

        std::string graph_path = opts.out_graph;
        if (graph_path.empty() && !opts.out_json.empty())
            graph_path = derived_path(opts.out_json, ".graph.txt");
        if (!graph_path.empty()) {
            const ProcessState rebuilt = ProcessState::from_edges(cert.n, cert.edges);
            std::ostringstream os;
            rebuilt.export_graph(os);
            write_text_file(graph_path, os.str());
            out << "  graph: " << graph_path << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        err << "witness: error: " << e.what() << "\n";
        return 1;
    }
}

// ---- verify ----------------------------------------------------------------

namespace {

RunConfig verify_config(int n, std::uint64_t seed) {
    RunConfig rc;
    rc.n = n;
    rc.seed = seed;
    rc.instrumentation = Instrumentation::full;
    return rc;
}

/** Induced sub-pair of `pair` on the vertex set h, re-anchored at b. */
AnchoredPair induced_pair(const AnchoredPair& pair, const std::set<int>& h,
                          const std::set<int>& b) {
    const GraphStructure& f = pair.structure();
    std::vector<int> remap(static_cast<std::size_t>(f.v()), -1);
    GraphStructure sub;
    int next_id = 0;
    for (int v : h) {
        remap[static_cast<std::size_t>(v)] = next_id++;
        sub.names.push_back(f.names[static_cast<std::size_t>(v)]);
    }
    const auto add_pairs = [&](const std::set<IndexPair>& src, std::set<IndexPair>& dst) {
        for (const auto& [a, c] : src) {
            const int x = remap[static_cast<std::size_t>(a)];
            const int y = remap[static_cast<std::size_t>(c)];
            if (x >= 0 && y >= 0) dst.insert({std::min(x, y), std::max(x, y)});
        }
    };
    add_pairs(f.edges, sub.edges);
    add_pairs(f.opens, sub.opens);
    std::set<int> anchor;
    for (int v : b) anchor.insert(remap[static_cast<std::size_t>(v)]);
    return AnchoredPair(std::move(sub), std::move(anchor));
}

/** All vertex sets h with base <= h <= {0, ..., v-1}. */
std::vector<std::set<int>> supersets_within(const std::set<int>& base, int v, bool proper_only) {
    std::vector<int> free_ids;
    for (int i = 0; i < v; ++i)
        if (!base.count(i)) free_ids.push_back(i);
    std::vector<std::set<int>> out;
    const int k = static_cast<int>(free_ids.size());
    for (int mask = 0; mask < (1 << k); ++mask) {
        if (proper_only && mask == 0) continue;
        std::set<int> h = base;
        for (int i = 0; i < k; ++i)
            if (mask & (1 << i)) h.insert(free_ids[i]);
        out.push_back(std::move(h));
    }
    return out;
}

/** Level-wise reconstruction of the building sequence, straight from the rules. */
std::pair<std::vector<std::set<int>>, std::vector<RhoTime>> reference_building_chain(
    const AnchoredPair& pair) {
    const int v = pair.structure().v();
    std::set<int> all;
    for (int i = 0; i < v; ++i) all.insert(i);

    // Level zero: among zero-time candidates, minimize (2 v_A - e, -o) and
    // take the union of all optimizers; the anchor itself scores (0, 0).
    std::pair<long long, long long> best{0, 0};
    std::set<int> h0 = pair.anchor();
    for (const std::set<int>& h : supersets_within(pair.anchor(), v, true)) {
        const AnchoredPair sub = induced_pair(pair, h, pair.anchor());
        if (!rho_star(sub).is_zero()) continue;
        const std::pair<long long, long long> key{2ll * sub.v_a() - sub.e(),
                                                  -static_cast<long long>(sub.o())};
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
        std::set<int> merged;
        for (const std::set<int>& h : supersets_within(cur, v, true)) {
            const RhoTime rho = rho_star(induced_pair(pair, h, cur));
            if (!have || rho < best_rho) {
                best_rho = rho;
                merged = h;
                have = true;
            } else if (rho == best_rho) {
                merged.insert(h.begin(), h.end());
            }
        }
        chain.push_back(merged);
        rhos.push_back(best_rho);
        cur = merged;
    }
    return {chain, rhos};
}

GraphStructure random_verify_structure(Xoshiro256pp& rng, int v) {
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

std::string pair_text(const VertexPair& e) {
    return "{" + std::to_string(e.first) + ", " + std::to_string(e.second) + "}";
}

}  // namespace

int verify_cmd(const VerifyOptions& opts, std::ostream& out, std::ostream& err) {
    int failures = 0;
    const auto run_check = [&](const std::string& name, auto&& body) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = body(detail);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        char timing[32];
        std::snprintf(timing, sizeof timing, "%.0f ms", ms);
        if (ok) {
            out << "[PASS] " << name << " (" << timing << ")\n";
        } else {
            ++failures;
            out << "[FAIL] " << name << " (" << timing << "): " << detail << "\n";
        }
    };

    // 1. Incremental state vs. brute-force oracle, every step of every run.
    run_check("oracle equivalence (openness, Q, Y counters, Y-graph edges)", [&](std::string& detail) {
        const std::vector<int> sizes = opts.quick ? std::vector<int>{12, 20, 30}
                                                  : std::vector<int>{20, 40, 60};
        bool injected = false;
        for (int n : sizes)
            for (std::uint64_t seed : {opts.seed, opts.seed + 1}) {
                ProcessState st(verify_config(n, seed));
                while (!st.complete()) {
                    st.step();
                    if (opts.inject_y_fault && !injected && st.m() == n / 2 && st.q() > 0) {
                        const VertexPair target = st.open_pair(0);
                        st.debug_adjust_y_counter(target.first, target.second, 1);
                        injected = true;
                    }
                    std::string why;
                    if (!st.matches_oracle(st.recompute_oracle(), &why)) {
                        detail = "n=" + std::to_string(n) + " seed=" + std::to_string(seed) +
                                 " m=" + std::to_string(st.m()) + ": " + why;
                        return false;
                    }
                }
            }
        return true;
    });

    // 2. The one-step laws, recomputed from an independent pre-step copy.
    run_check("per-step identities (dQ = -(Y+1), dYY = X - 2 sum Y)", [&](std::string& detail) {
        const std::vector<int> sizes = opts.quick ? std::vector<int>{16} : std::vector<int>{24, 40};
        for (int n : sizes)
            for (std::uint64_t seed : {opts.seed, opts.seed + 1}) {
                ProcessState st(verify_config(n, seed));
                while (!st.complete()) {
                    const ProcessState before = st;
                    const StepOutcome outcome = st.step();
                    const auto [u, v] = outcome.chosen;
                    const std::string where = "n=" + std::to_string(n) +
                                              " seed=" + std::to_string(seed) +
                                              " m=" + std::to_string(st.m());
                    if (st.q() - before.q() != -(outcome.y_of_chosen + 1)) {
                        detail = "dQ identity violated at " + where;
                        return false;
                    }
                    if (static_cast<long long>(outcome.closed.size()) != before.y_count(u, v)) {
                        detail = "closure count differs from the pre-step Y at " + where;
                        return false;
                    }
                    long long closed_y = 0;
                    for (const VertexPair& e : outcome.closed)
                        closed_y += before.y_count(e.first, e.second);
                    if (st.ybb() - before.ybb() != before.x_count(u, v) - 2 * closed_y) {
                        detail = "dYY identity violated at " + where + " (chosen " +
                                 pair_text(outcome.chosen) + ")";
                        return false;
                    }
                }
            }
        return true;
    });

    // 3. Y-graph structure at sampled states along full runs.
    run_check("ygraph invariants (symmetry, triangle-free, YY = 2E, X vs triangles)",
              [&](std::string& detail) {
                  const std::vector<int> sizes =
                      opts.quick ? std::vector<int>{12, 24} : std::vector<int>{40, 100, 200};
                  for (int n : sizes)
                      for (std::uint64_t seed : {opts.seed, opts.seed + 1}) {
                          ProcessState st(verify_config(n, seed));
                          const long long every =
                              std::max<long long>(1, std::llround(0.06 * n * std::sqrt(n)));
                          bool ok = true;
                          run_process(st, StopRule::completion(), every,
                                      [&](const ProcessState& s, bool) {
                                          if (!ok || s.q() == 0) return;
                                          const YGraph yg(s);
                                          const OracleBundle oracle = s.recompute_oracle();
                                          const std::string where =
                                              "n=" + std::to_string(n) +
                                              " seed=" + std::to_string(seed) +
                                              " m=" + std::to_string(s.m());
                                          if (!ygraph_symmetric(yg)) {
                                              detail = "asymmetric Y-graph at " + where;
                                              ok = false;
                                          } else if (!ygraph_triangle_free(yg)) {
                                              detail = "Y-graph triangle at " + where;
                                              ok = false;
                                          } else if (s.ybb() != 2 * yg.edge_count()) {
                                              detail = "YY != 2E at " + where;
                                              ok = false;
                                          } else if (oracle.ygraph_edges != yg.edge_count()) {
                                              detail = "oracle edge count differs at " + where;
                                              ok = false;
                                          } else if (oracle.xbb != 6 * oracle.open_triangles) {
                                              detail = "sum X != 6 x open triangles at " + where;
                                              ok = false;
                                          }
                                      });
                          if (!ok) return false;
                      }
                  return true;
              });

    // 4. Building sequences against the level-wise reconstruction.
    run_check("building sequences match the level-wise reconstruction", [&](std::string& detail) {
        Params p;
        p.n = 1024;
        Xoshiro256pp rng(opts.seed * 0x9E3779B97F4A7C15ull + 17);
        const int trials = opts.quick ? 20 : 60;
        for (int trial = 0; trial < trials; ++trial) {
            const int v = 3 + static_cast<int>(rng.bounded(4));
            GraphStructure f = random_verify_structure(rng, v);
            std::set<int> anchor{0};
            if (v > 2 && rng.uniform01() < 0.4) anchor.insert(1);
            const AnchoredPair candidate(std::move(f), std::move(anchor));

            const BuildingSequenceResult got = building_sequence(candidate, p);
            const auto [ref_chain, ref_rhos] = reference_building_chain(candidate);
            const std::string where =
                "trial " + std::to_string(trial) + " (" + one_line_text(candidate) + ")";
            if (got.chain != ref_chain) {
                detail = "chain mismatch on " + where;
                return false;
            }
            if (got.rhos.size() != ref_rhos.size() ||
                !std::equal(got.rhos.begin(), got.rhos.end(), ref_rhos.begin())) {
                detail = "rho mismatch on " + where;
                return false;
            }
            for (std::size_t i = 1; i < got.rhos.size(); ++i)
                if (!(got.rhos[i - 1] < got.rhos[i])) {
                    detail = "times not strictly increasing on " + where;
                    return false;
                }
        }
        return true;
    });

    if (failures == 0) {
        out << "verify: all checks passed\n";
        return 0;
    }
    err << "verify: " << failures << " check" << (failures == 1 ? "" : "s") << " failed\n";
    return 1;
}

}  // namespace tfp
