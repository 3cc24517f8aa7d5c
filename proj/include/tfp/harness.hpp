#ifndef TFP_HARNESS_HPP
#define TFP_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tfp/analysis.hpp"
#include "tfp/process.hpp"
#include "tfp/trajectory.hpp"

namespace tfp {

/** Read an entire file into a string; throws std::runtime_error if unreadable. */
std::string read_text_file(const std::string& path);

// ---------------------------------------------------------------------------
// CSV schema, version 1.  One row per sampled step; the column order is fixed
// and real-valued fields are emitted with nine significant digits, so a row is
// a canonical text form: parse_csv_line(csv_line(r)) reproduces r exactly and
// csv_line(parse_csv_line(s)) == s for any emitted line s.
// ---------------------------------------------------------------------------

struct CsvRow {
    std::uint64_t run_id = 0;  // the seed of the run that produced the row
    RunRecord rec;
};

/** The fixed header line, without a trailing newline. */
std::string csv_header();

/** One data line for `row`, without a trailing newline. */
std::string csv_line(const CsvRow& row);

/** Parse one data line; throws std::invalid_argument on malformed input. */
CsvRow parse_csv_line(const std::string& line);

/** Read a whole CSV file (header checked); throws std::runtime_error on I/O. */
std::vector<CsvRow> read_csv(const std::string& path);

/** Write header + rows to `path`; throws std::runtime_error on I/O failure. */
void write_csv(const std::string& path, const std::vector<CsvRow>& rows);

// ---------------------------------------------------------------------------
// simulate: one run, sampled every record_every steps and once at the end.
// ---------------------------------------------------------------------------

struct SimulateOptions {
    int n = 0;                    // ignored (checked for agreement) when resuming
    std::uint64_t seed = 0;       // likewise
    double eps = 0.1;
    double big_c = 20.0;
    int omega = 0;                // 0 = derived default
    long long record_every = 1024;
    Instrumentation instrumentation = Instrumentation::light;
    StopRule stop;                // run to completion by default
    long long moment_sample = 20000;  // sample size for Y/X moment estimates
    std::string resume_line;      // non-empty: snapshot line to continue from

    // File outputs, used by simulate_cmd; run_simulation itself does no I/O.
    std::string out_csv;
    std::string out_snapshot;  // empty = derive from out_csv
    std::string out_summary;   // empty = derive from out_csv
};

struct SimulateResult {
    std::vector<CsvRow> rows;
    int n = 0;
    std::uint64_t seed = 0;
    long long start_m = 0;  // 0 for a fresh run, the snapshot's m when resumed
    long long final_m = 0;
    long long final_q = 0;
    double final_t = 0;
    bool complete = false;
    double final_edge_ratio = 0;  // m / (n^{3/2} sqrt(ln n))
    double seconds = 0;
    std::string snapshot;  // snapshot line of the final state
};

/** Run one simulation; pure apart from wall-clock timing. */
SimulateResult run_simulation(const SimulateOptions& opts);

/** Measure one state into a CSV row (moments, degree census, trajectory refs). */
CsvRow measure_row(const Params& p, std::uint64_t run_id, const ProcessState& state,
                   long long moment_sample);

/** JSON summary of a finished run; records eps, big_c and omega. */
std::string summary_json(const SimulateOptions& opts, const SimulateResult& result);

// ---------------------------------------------------------------------------
// ensemble: seeds seed .. seed+runs-1 in a worker pool, one state per worker,
// plus a cross-run aggregate.  The aggregate is a pure function of the per-run
// CSV files, so it cannot depend on scheduling or the number of jobs.
// ---------------------------------------------------------------------------

struct EnsembleOptions {
    SimulateOptions base;    // base.seed is the first seed
    int runs = 1;
    int jobs = 1;
    std::string out_prefix;  // <prefix>_<seed>.csv, <prefix>_aggregate.csv, ...
};

struct AggregateStat {
    double p25 = 0, p50 = 0, p75 = 0;
};

struct AggregateRow {
    long long m = 0;
    double t = 0;
    int runs = 0;
    AggregateStat q, q_star, ybar, ybar_star, xbar, xbar_star;
    AggregateStat lambda, mu, lyapunov, max_deg, var_y, cov_xy;
};

/**
 * Cross-run quantiles at every m sampled by all runs (rows aligned by m).
 * Quantiles interpolate linearly between order statistics.
 */
std::vector<AggregateRow> aggregate_runs(const std::vector<std::vector<CsvRow>>& runs);

std::string aggregate_header();
std::string aggregate_line(const AggregateRow& row);

/** Linear-interpolation quantile of `values` (copied and sorted); 0 <= p <= 1. */
double quantile(std::vector<double> values, double p);

// ---------------------------------------------------------------------------
// structure: report the calculus for one anchored structure.
// ---------------------------------------------------------------------------

struct StructureOptions {
    std::string text;      // structure description (already loaded from file/flag)
    Params params;         // n, eps, big_c
    double at_t = -1;      // evaluation time for envelopes; < 0 = half of t*
    std::string families;  // "", "open", "plus", "minus", "star" or "all"
    std::string out_json;  // optional machine-readable report path
};

// ---------------------------------------------------------------------------
// ygraph: evolve a state and report its Y-graph.
// ---------------------------------------------------------------------------

struct YgraphOptions {
    int n = 0;
    std::uint64_t seed = 0;
    StopRule stop;
    Instrumentation instrumentation = Instrumentation::light;
    int edge_u = -1, edge_v = -1;  // optional focus pair (must be open)
    int k = 2;                     // walk length for mixing diagnostics
    std::string sigma;             // optional explicit walk type, e.g. "LRL"
    std::string out_json;
};

// ---------------------------------------------------------------------------
// witness: run to completion and emit an independence-number certificate.
// ---------------------------------------------------------------------------

struct WitnessOptions {
    WitnessConfig config;
    std::string out_json;   // certificate path; empty = stdout only
    std::string out_graph;  // graph export path; empty = derived when out_json set
};

// ---------------------------------------------------------------------------
// verify: batch self-checks (oracle equivalence, step identities, Y-graph
// invariants, building-sequence reconstruction) with per-check timing.
// ---------------------------------------------------------------------------

struct VerifyOptions {
    bool quick = false;          // restrict everything to n <= 30
    bool inject_y_fault = false; // test fixture: corrupt one Y counter mid-run
    std::uint64_t seed = 1;      // base seed for the randomized checks
};

// ---------------------------------------------------------------------------
// Command entry points: parse-free cores for each CLI subcommand.  They write
// any requested files, print a human report to `out`, report problems on
// `err`, and return a process exit code (0 = success).
// ---------------------------------------------------------------------------

int simulate_cmd(const SimulateOptions& opts, std::ostream& out, std::ostream& err);
int ensemble_cmd(const EnsembleOptions& opts, std::ostream& out, std::ostream& err);
int structure_cmd(const StructureOptions& opts, std::ostream& out, std::ostream& err);
int ygraph_cmd(const YgraphOptions& opts, std::ostream& out, std::ostream& err);
int witness_cmd(const WitnessOptions& opts, std::ostream& out, std::ostream& err);
int verify_cmd(const VerifyOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace tfp

#endif
