#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tfp/harness.hpp"

namespace {

/** Shared --until-m / --until-t handling; both unset means run to completion. */
struct StopFlags {
    long long until_m = -1;
    double until_t = -1;

    void attach(CLI::App* cmd) {
        CLI::Option* om = cmd->add_option("--until-m", until_m, "stop once m steps were taken");
        CLI::Option* ot = cmd->add_option(
            "--until-t", until_t, "stop at the first step with rescaled time t >= this value");
        om->excludes(ot);
    }

    tfp::StopRule rule() const {
        if (until_m >= 0) return tfp::StopRule::steps(until_m);
        if (until_t >= 0) return tfp::StopRule::time(until_t);
        return tfp::StopRule::completion();
    }
};

tfp::Instrumentation parse_instrumentation(const std::string& text) {
    return text == "full" ? tfp::Instrumentation::full : tfp::Instrumentation::light;
}

CLI::Option* add_instrumentation(CLI::App* cmd, std::string& target) {
    return cmd->add_option("--instrumentation", target, "counter maintenance: light or full")
        ->check(CLI::IsMember({"light", "full"}))
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"triangle-free random graph process laboratory"};
    app.require_subcommand(1);
    int exit_code = 0;

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "run one process trajectory and record it");
    tfp::SimulateOptions sim_opts;
    std::string sim_instr = "light";
    std::string sim_resume;
    StopFlags sim_stop;
    CLI::Option* sim_n = sim->add_option("--n", sim_opts.n, "number of vertices");
    sim->add_option("--seed", sim_opts.seed, "PRNG seed (also the run id)")
        ->capture_default_str();
    sim->add_option("--eps", sim_opts.eps, "trajectory epsilon")->capture_default_str();
    sim->add_option("--big-c", sim_opts.big_c, "weight constant C")->capture_default_str();
    sim->add_option("--omega", sim_opts.omega, "slow-growth scale (0 = derived default)");
    sim->add_option("--record-every", sim_opts.record_every, "sample every this many steps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_instrumentation(sim, sim_instr);
    sim->add_option("--moment-sample", sim_opts.moment_sample,
                    "open pairs sampled per row for Y/X moments")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim_stop.attach(sim);
    sim->add_option("--out", sim_opts.out_csv, "output CSV path")->required();
    sim->add_option("--snapshot-out", sim_opts.out_snapshot,
                    "snapshot path (default: CSV path with .snapshot)");
    sim->add_option("--summary-out", sim_opts.out_summary,
                    "summary path (default: CSV path with .summary.json)");
    CLI::Option* sim_res =
        sim->add_option("--resume", sim_resume, "snapshot file to continue from");
    sim_res->excludes(sim_n);
    sim->callback([&] {
        if (sim_resume.empty() && sim_opts.n == 0)
            throw CLI::ValidationError("simulate", "either --n or --resume is required");
        sim_opts.instrumentation = parse_instrumentation(sim_instr);
        sim_opts.stop = sim_stop.rule();
        if (!sim_resume.empty()) {
            try {
                sim_opts.resume_line = tfp::read_text_file(sim_resume);
            } catch (const std::exception& e) {
                std::cerr << "simulate: error: " << e.what() << "\n";
                exit_code = 1;
                return;
            }
        }
        exit_code = tfp::simulate_cmd(sim_opts, std::cout, std::cerr);
    });

    // ---- ensemble ----
    auto* ens = app.add_subcommand("ensemble", "run many seeds in parallel and aggregate");
    tfp::EnsembleOptions ens_opts;
    std::string ens_instr = "light";
    StopFlags ens_stop;
    ens->add_option("--n", ens_opts.base.n, "number of vertices")->required();
    ens->add_option("--seed", ens_opts.base.seed, "first seed; runs use seed..seed+runs-1")
        ->capture_default_str();
    ens->add_option("--runs", ens_opts.runs, "number of runs")
        ->required()
        ->check(CLI::PositiveNumber);
    ens->add_option("--jobs", ens_opts.jobs, "parallel workers")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ens->add_option("--eps", ens_opts.base.eps, "trajectory epsilon")->capture_default_str();
    ens->add_option("--big-c", ens_opts.base.big_c, "weight constant C")->capture_default_str();
    ens->add_option("--omega", ens_opts.base.omega, "slow-growth scale (0 = derived default)");
    ens->add_option("--record-every", ens_opts.base.record_every,
                    "sample every this many steps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_instrumentation(ens, ens_instr);
    ens->add_option("--moment-sample", ens_opts.base.moment_sample,
                    "open pairs sampled per row for Y/X moments")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ens_stop.attach(ens);
    ens->add_option("--out", ens_opts.out_prefix,
                    "output prefix: <prefix>_<seed>.csv, <prefix>_aggregate.csv, "
                    "<prefix>_summary.json")
        ->required();
    ens->callback([&] {
        ens_opts.base.instrumentation = parse_instrumentation(ens_instr);
        ens_opts.base.stop = ens_stop.rule();
        exit_code = tfp::ensemble_cmd(ens_opts, std::cout, std::cerr);
    });

    // ---- structure ----
    auto* str = app.add_subcommand("structure", "analyze one anchored structure");
    tfp::StructureOptions str_opts;
    std::string str_file;
    std::string str_text;
    str_opts.params.n = 0;
    CLI::Option* str_file_opt =
        str->add_option("--file", str_file, "file holding the structure text");
    CLI::Option* str_text_opt = str->add_option("--text", str_text, "structure text inline");
    str_file_opt->excludes(str_text_opt);
    str->add_option("--n", str_opts.params.n, "number of vertices for realized times")
        ->required();
    str->add_option("--eps", str_opts.params.eps, "trajectory epsilon")->capture_default_str();
    str->add_option("--big-c", str_opts.params.big_c, "weight constant C")
        ->capture_default_str();
    str->add_option("--t", str_opts.at_t,
                    "evaluation time for envelopes (default: half the horizon)");
    str->add_option("--families", str_opts.families,
                    "derived family to list: open, plus, minus, star or all")
        ->check(CLI::IsMember({"open", "plus", "minus", "star", "all"}));
    str->add_option("--json", str_opts.out_json, "write a JSON report here");
    str->callback([&] {
        if (str_file.empty() == str_text.empty())
            throw CLI::ValidationError("structure", "exactly one of --file or --text is required");
        if (!str_file.empty()) {
            try {
                str_opts.text = tfp::read_text_file(str_file);
            } catch (const std::exception& e) {
                std::cerr << "structure: error: " << e.what() << "\n";
                exit_code = 1;
                return;
            }
        } else {
            str_opts.text = str_text;
        }
        exit_code = tfp::structure_cmd(str_opts, std::cout, std::cerr);
    });

    // ---- ygraph ----
    auto* ygr = app.add_subcommand("ygraph", "evolve a state and report its Y-graph");
    tfp::YgraphOptions ygr_opts;
    std::string ygr_instr = "light";
    std::vector<int> ygr_edge;
    StopFlags ygr_stop;
    ygr->add_option("--n", ygr_opts.n, "number of vertices")->required();
    ygr->add_option("--seed", ygr_opts.seed, "PRNG seed")->capture_default_str();
    add_instrumentation(ygr, ygr_instr);
    ygr_stop.attach(ygr);
    ygr->add_option("--edge", ygr_edge, "focus open pair U V (V is the planted foot)")
        ->expected(2);
    ygr->add_option("--k", ygr_opts.k, "walk length for mixing diagnostics")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ygr->add_option("--sigma", ygr_opts.sigma, "explicit walk type over {L, R}, e.g. LRL");
    ygr->add_option("--json", ygr_opts.out_json, "write a JSON report here");
    ygr->callback([&] {
        ygr_opts.instrumentation = parse_instrumentation(ygr_instr);
        ygr_opts.stop = ygr_stop.rule();
        if (!ygr_edge.empty()) {
            ygr_opts.edge_u = ygr_edge[0];
            ygr_opts.edge_v = ygr_edge[1];
        }
        exit_code = tfp::ygraph_cmd(ygr_opts, std::cout, std::cerr);
    });

    // ---- witness ----
    auto* wit = app.add_subcommand("witness", "emit an independence-number certificate");
    tfp::WitnessOptions wit_opts;
    wit->add_option("--n", wit_opts.config.n, "number of vertices")->required();
    wit->add_option("--seed", wit_opts.config.seed, "PRNG seed")->capture_default_str();
    wit->add_option("--exact-guard", wit_opts.config.exact_guard,
                    "largest n the exact solver is attempted on")
        ->capture_default_str();
    wit->add_option("--budget", wit_opts.config.heuristic_budget,
                    "restart budget of the heuristic solver")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    wit->add_option("--out", wit_opts.out_json, "certificate JSON path");
    wit->add_option("--graph-out", wit_opts.out_graph,
                    "graph export path (default: certificate path with .graph.txt)");
    wit->callback([&] { exit_code = tfp::witness_cmd(wit_opts, std::cout, std::cerr); });

    // ---- verify ----
    auto* ver = app.add_subcommand("verify", "run the oracle and identity self-checks");
    tfp::VerifyOptions ver_opts;
    ver->add_flag("--quick", ver_opts.quick, "restrict every check to n <= 30");
    ver->add_option("--seed", ver_opts.seed, "base seed for the randomized checks")
        ->capture_default_str();
    ver->add_flag("--inject-y-fault", ver_opts.inject_y_fault,
                  "corrupt one Y counter mid-run (self-test of the checker)")
        ->group("");
    ver->callback([&] { exit_code = tfp::verify_cmd(ver_opts, std::cout, std::cerr); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    return exit_code;
}
