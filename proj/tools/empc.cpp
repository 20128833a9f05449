/*
 Copyright 2026 The empc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
// Command-line front end: synth, verify, simulate, montecarlo.

#include "empc/config.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace empc;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kFailure = 1, kValidation = 2, kSynthesis = 3, kInfeasible = 4 };

struct Infeasible : Error {
    using Error::Error;
};

fs::path output_dir(const StudyConfig& c, const std::string& out_flag) {
    if (!out_flag.empty()) return out_flag;
    const char* root = std::getenv("EMPC_OUT_DIR");
    fs::path base = root && *root ? fs::path(root) : fs::path(".");
    return base / c.output.directory;
}

fs::path certificate_path(const StudyConfig& c, const fs::path& dir) {
    return dir / (c.output.study + "_certificate.json");
}

std::string hash_comment(const std::string& hash) { return "config_hash=" + hash; }

void print_report(const VerificationReport& r) {
    std::printf("  grid points                 %d\n", r.grid_points);
    std::printf("  worst V_s decrease margin   %.6e\n", r.worst_vs_decrease_margin);
    std::printf("  worst V_f decrease margin   %.6e\n", r.worst_vf_margin);
    std::printf("  worst admissibility margin  %.6e\n", r.worst_admissibility_margin);
    std::printf("  invariance violations       %d\n", r.invariance_violations);
    std::printf("  passed                      %s\n", r.passed ? "true" : "false");
}

Certificate synthesize_certificate(const StudyConfig& c) {
    const SynthesisResult res =
        synthesize(build_model(c), build_cost(c), build_equilibrium(c), build_synthesis_options(c));
    return Certificate{c, config_hash(c), res.ingredients, res.report, res.delta};
}

// Reuses a certificate on disk when its config hash matches, otherwise
// synthesizes a fresh one and stores it next to the outputs.
Certificate obtain_certificate(const StudyConfig& c, const fs::path& dir) {
    const fs::path path = certificate_path(c, dir);
    const std::string hash = config_hash(c);
    if (fs::exists(path)) {
        try {
            Certificate cert = load_certificate(path);
            if (cert.config_hash == hash && cert.report.passed) return cert;
        } catch (const Error& e) {
            std::cerr << "warning: ignoring " << path << ": " << e.what() << '\n';
        }
    }
    Certificate cert = synthesize_certificate(c);
    if (!cert.report.passed) throw SynthesisError("verify_terminal_conditions", "terminal conditions not verified");
    save_certificate(cert, path);
    std::cerr << "synthesized certificate " << path.string() << '\n';
    return cert;
}

int cmd_synth(const std::string& config_path, const std::string& out) {
    const StudyConfig c = load_config(config_path);
    const fs::path dir = output_dir(c, out);
    const Certificate cert = synthesize_certificate(c);
    const fs::path path = certificate_path(c, dir);
    save_certificate(cert, path);
    const auto& t = cert.ingredients;
    std::printf("certificate %s\n", path.string().c_str());
    std::printf("  config hash %s\n", cert.config_hash.c_str());
    std::printf("  tau %.6g  mu %.6g  delta %.6g%s\n", t.tau, t.mu, cert.delta.delta,
                cert.delta.heuristic ? " (sampled constants)" : "");
    std::cout << "  P =\n" << t.P << "\n  p = " << t.p.transpose() << '\n';
    print_report(cert.report);
    return cert.report.passed ? kOk : kSynthesis;
}

int cmd_verify(const std::string& cert_path, int grid) {
    const Certificate cert = load_certificate(cert_path);
    if (config_hash(cert.config) != cert.config_hash) {
        std::cerr << "warning: certificate config hash does not match its embedded config\n";
    }
    const std::string problems = check_ingredient_invariants(cert.ingredients);
    if (!problems.empty()) std::cerr << "warning: " << problems << '\n';
    if (grid < 100) {
        std::cerr << "warning: grid density " << grid << " gives low confidence in the result\n";
    }
    const VerificationReport r = verify_terminal_conditions(build_model(cert.config), build_cost(cert.config),
                                                    cert.ingredients, grid, cert.config.synthesis.seed);
    std::printf("verify %s\n", cert_path.c_str());
    print_report(r);
    return r.passed ? kOk : kSynthesis;
}

Trajectory disturbances(const StudyConfig& c, const PlantModel& model, std::optional<double> amplitude, int steps) {
    if (!amplitude) return Trajectory(static_cast<std::size_t>(steps), model.zero_disturbance());
    if (*amplitude < 0.0) throw InputError("--amplitude must be >= 0");
    return uniform_disturbance(model.disturbance_box().scaled(*amplitude))(c.simulation.seed, 0, steps);
}

int cmd_simulate(const std::string& config_path, const std::string& out, bool nominal,
                 std::optional<double> amplitude, std::optional<int> horizon) {
    const StudyConfig loaded = load_config(config_path);
    const fs::path dir = output_dir(loaded, out);
    // Command-line overrides only touch the simulation section, so the
    // certificate is keyed on the config as written.
    const Certificate cert = obtain_certificate(loaded, dir);
    StudyConfig c = loaded;
    if (horizon) {
        if (*horizon < 1) throw InputError("--horizon must be >= 1");
        c.simulation.steps = *horizon;
    }
    if (!nominal && !amplitude) amplitude = c.simulation.amplitude;
    const OcpProblem problem = build_problem(c, cert.ingredients);
    const Trajectory w = disturbances(c, problem.model, nominal ? std::nullopt : amplitude, c.simulation.steps);
    ClosedLoopTrace trace;
    try {
        trace = run_closed_loop(problem, initial_state(c), w);
    } catch (const InputError& e) {
        throw Infeasible(e.what());
    }
    const fs::path path = dir / (c.output.study + "_0.csv");
    export_csv(trace, path, hash_comment(config_hash(c)));
    std::printf("trace %s\n", path.string().c_str());
    if (trace.steps() > 0) {
        std::printf("J_%d = %.10f (economic), %.10f (stage cost)\n", trace.steps(),
                    performance(trace, trace.steps()), performance(trace, trace.steps(), CostMeasure::Stage));
    }
    if (!trace.feasible) {
        std::fprintf(stderr, "closed loop stopped early at step %d: infeasible OCP\n", trace.steps());
        return kInfeasible;
    }
    return kOk;
}

int cmd_montecarlo(const std::string& config_path, const std::string& out, std::optional<int> runs,
                   std::optional<int> horizon, std::optional<std::uint64_t> seed, std::optional<double> amplitude,
                   int jobs) {
    const StudyConfig loaded = load_config(config_path);
    StudyConfig c = loaded;
    if (runs) c.simulation.n_runs = *runs;
    if (horizon) c.simulation.steps = *horizon;
    if (seed) c.simulation.seed = *seed;
    if (amplitude) c.simulation.amplitude = *amplitude;
    if (c.simulation.n_runs < 1) throw InputError("--runs must be >= 1");
    if (c.simulation.steps < 1) throw InputError("--horizon must be >= 1");
    if (c.simulation.amplitude < 0.0) throw InputError("--amplitude must be >= 0");
    if (jobs < 1) throw InputError("--jobs must be >= 1");

    const fs::path dir = output_dir(loaded, out);
    const Certificate cert = obtain_certificate(loaded, dir);
    const OcpProblem problem = build_problem(c, cert.ingredients);
    const MonteCarloSummary summary =
        monte_carlo(problem, initial_state(c), c.simulation.steps, c.simulation.n_runs, c.simulation.seed,
                    uniform_disturbance(problem.model.disturbance_box().scaled(c.simulation.amplitude)), jobs);

    const std::string comment = hash_comment(config_hash(c));
    for (int r = 0; r < summary.n_runs; ++r) {
        export_csv(summary.traces[static_cast<std::size_t>(r)], dir / (c.output.study + "_" + std::to_string(r) + ".csv"),
                   comment);
    }
    const fs::path path = dir / (c.output.study + "_summary.csv");
    export_csv(summary, path, comment);
    std::printf("summary %s\n", path.string().c_str());
    std::printf("runs %d  T %d  seed %llu  amplitude %g\n", summary.n_runs, summary.horizon,
                static_cast<unsigned long long>(summary.seed), c.simulation.amplitude);
    std::printf("mean J_T %.10f  std %.3e  min %.10f  max %.10f\n", summary.mean, summary.stddev, summary.min,
                summary.max);
    std::printf("infeasible runs %d\n", summary.infeasible_count);
    return summary.infeasible_count == 0 ? kOk : kInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Economic MPC with robust terminal ingredients"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::string certificate;
    int grid = 10000;
    bool nominal = false;
    std::optional<double> amplitude;
    std::optional<int> runs;
    std::optional<int> horizon;
    std::optional<std::uint64_t> seed;
    int jobs = 1;

    auto* synth = app.add_subcommand("synth", "synthesize and verify terminal ingredients");
    synth->add_option("--config", config, "study config (JSON)")->required();
    synth->add_option("--out", out, "output directory");

    auto* verify = app.add_subcommand("verify", "re-run the terminal-condition check on a certificate");
    verify->add_option("certificate", certificate, "certificate JSON")->required();
    verify->add_option("--grid", grid, "number of sample points")->check(CLI::PositiveNumber);

    auto* simulate = app.add_subcommand("simulate", "run one closed loop and write its trace");
    simulate->add_option("--config", config, "study config (JSON)")->required();
    simulate->add_option("--out", out, "output directory");
    auto* nominal_flag = simulate->add_flag("--nominal", nominal, "zero disturbance");
    simulate->add_option("--amplitude", amplitude, "scale of the disturbance box")->excludes(nominal_flag);
    simulate->add_option("--horizon", horizon, "closed-loop length T");

    auto* mc = app.add_subcommand("montecarlo", "run a seeded Monte Carlo study");
    mc->add_option("--config", config, "study config (JSON)")->required();
    mc->add_option("--out", out, "output directory");
    mc->add_option("--runs", runs, "number of disturbance realizations");
    mc->add_option("--horizon", horizon, "closed-loop length T");
    mc->add_option("--seed", seed, "base seed");
    mc->add_option("--amplitude", amplitude, "scale of the disturbance box");
    mc->add_option("--jobs", jobs, "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*synth) return cmd_synth(config, out);
        if (*verify) return cmd_verify(certificate, grid);
        if (*simulate) return cmd_simulate(config, out, nominal, amplitude, horizon);
        if (*mc) return cmd_montecarlo(config, out, runs, horizon, seed, amplitude, jobs);
    } catch (const Infeasible& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const SynthesisError& e) {
        std::cerr << "synthesis failed in " << e.stage() << ": " << e.what() << '\n';
        return kSynthesis;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kSynthesis;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
