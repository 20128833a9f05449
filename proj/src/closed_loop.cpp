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
#include "empc/closed_loop.hpp"

#include "empc/sampling.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

namespace empc {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string describe(const Vector& v) {
    std::string s = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
    return s + ")";
}

std::ofstream open_for_writing(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

ClosedLoopTrace run_closed_loop(const OcpProblem& problem, const Vector& x0, std::span<const Vector> w_seq) {
    problem.validate();
    const PlantModel& model = problem.model;
    ClosedLoopTrace trace;
    trace.sample_time = model.sample_time();
    trace.states.push_back(x0);

    double econ_sum = 0.0;
    double stage_sum = 0.0;
    OcpSolution previous;
    bool have_previous = false;
    for (std::size_t k = 0; k < w_seq.size(); ++k) {
        const Vector& x = trace.states.back();
        ControlAction action = control_law(problem, x, have_previous ? &previous : nullptr);
        if (action.solution.status == SolveStatus::Infeasible) {
            if (k == 0) throw InputError("initial state " + describe(x0) + " is infeasible for the OCP");
            trace.feasible = false;
            break;
        }
        const Vector& u = action.u;
        const double l = problem.cost(x, u);
        const double le = problem.cost.economic(x, u);
        econ_sum += le;
        stage_sum += l;

        trace.inputs.push_back(u);
        trace.disturbances.push_back(w_seq[k]);
        trace.stage_costs.push_back(l);
        trace.economic_costs.push_back(le);
        trace.running_average.push_back(econ_sum / static_cast<double>(k + 1));
        trace.running_average_stage.push_back(stage_sum / static_cast<double>(k + 1));
        trace.statuses.push_back(action.solution.status);
        trace.values.push_back(action.solution.value);
        trace.terminal_slacks.push_back(action.solution.terminal_slack);

        Vector next = step(model, x, u, w_seq[k]);
        if (!model.state_box().contains(next, 1e-6)) {
            if (trace.state_box_violations++ == 0) {
                std::clog << "warning: closed-loop state " << describe(next) << " left the state box at step "
                          << k + 1 << '\n';
            }
        }
        trace.states.push_back(std::move(next));
        previous = std::move(action.solution);
        have_previous = true;
    }
    return trace;
}

double performance(const ClosedLoopTrace& trace, int horizon, CostMeasure measure) {
    if (horizon < 1 || horizon > trace.steps()) {
        throw InputError("performance: T = " + std::to_string(horizon) + " outside [1, " +
                         std::to_string(trace.steps()) + "]");
    }
    const auto& avg = measure == CostMeasure::Economic ? trace.running_average : trace.running_average_stage;
    return avg[static_cast<std::size_t>(horizon - 1)];
}

DisturbanceLaw uniform_disturbance(Box box) {
    return [box = std::move(box)](std::uint64_t seed, int run, int steps) {
        RandomStream rng(seed, static_cast<std::uint64_t>(run));
        Trajectory out;
        out.reserve(static_cast<std::size_t>(steps));
        for (int k = 0; k < steps; ++k) out.push_back(rng.uniform_in(box));
        return out;
    };
}

MonteCarloSummary monte_carlo(const OcpProblem& problem, const Vector& x0, int horizon, int n_runs,
                              std::uint64_t seed, const DisturbanceLaw& law, int jobs) {
    if (n_runs < 1) throw InputError("monte_carlo: n_runs must be >= 1");
    if (horizon < 1) throw InputError("monte_carlo: T must be >= 1");
    MonteCarloSummary summary;
    summary.n_runs = n_runs;
    summary.seed = seed;
    summary.horizon = horizon;
    summary.traces.resize(static_cast<std::size_t>(n_runs));
    summary.final_performance.assign(static_cast<std::size_t>(n_runs), 0.0);
    summary.feasible.assign(static_cast<std::size_t>(n_runs), false);

    const auto run_one = [&](int r) {
        const auto rs = static_cast<std::size_t>(r);
        const Trajectory w = law(seed, r, horizon);
        try {
            ClosedLoopTrace trace = run_closed_loop(problem, x0, w);
            summary.feasible[rs] = trace.feasible;
            summary.final_performance[rs] =
                trace.steps() > 0 ? trace.running_average.back() : std::numeric_limits<double>::quiet_NaN();
            summary.traces[rs] = std::move(trace);
        } catch (const InputError&) {
            summary.feasible[rs] = false;
            summary.final_performance[rs] = std::numeric_limits<double>::quiet_NaN();
        }
    };

    jobs = std::max(1, std::min(jobs, n_runs));
    if (jobs == 1) {
        for (int r = 0; r < n_runs; ++r) run_one(r);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> workers;
        for (int j = 0; j < jobs; ++j) {
            workers.emplace_back([&] {
                for (int r = next++; r < n_runs; r = next++) run_one(r);
            });
        }
        for (auto& t : workers) t.join();
    }

    // Aggregate in run order so the result is independent of scheduling.
    double sum = 0.0;
    int count = 0;
    summary.min = std::numeric_limits<double>::infinity();
    summary.max = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < n_runs; ++r) {
        const auto rs = static_cast<std::size_t>(r);
        if (!summary.feasible[rs]) ++summary.infeasible_count;
        const double j = summary.final_performance[rs];
        if (std::isnan(j)) continue;
        sum += j;
        ++count;
        summary.min = std::min(summary.min, j);
        summary.max = std::max(summary.max, j);
    }
    summary.mean = count ? sum / count : std::numeric_limits<double>::quiet_NaN();
    double ss = 0.0;
    for (const double j : summary.final_performance) {
        if (!std::isnan(j)) ss += (j - summary.mean) * (j - summary.mean);
    }
    summary.stddev = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
    return summary;
}

void export_csv(const ClosedLoopTrace& trace, const std::filesystem::path& path, const std::string& comment) {
    std::ofstream out = open_for_writing(path);
    if (!comment.empty()) out << "# " << comment << '\n';
    const Eigen::Index n = trace.states.empty() ? 0 : trace.states.front().size();
    const Eigen::Index m = trace.inputs.empty() ? 0 : trace.inputs.front().size();
    const Eigen::Index q = trace.disturbances.empty() ? 0 : trace.disturbances.front().size();
    out << "k,t";
    for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i + 1;
    for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i + 1;
    for (Eigen::Index i = 0; i < q; ++i) out << ",w" << i + 1;
    out << ",stage_cost,econ_cost,J_t,V0,status\n";

    const int steps = trace.steps();
    for (std::size_t k = 0; k < trace.states.size(); ++k) {
        const bool applied = static_cast<int>(k) < steps;
        out << k << ',' << format_double(static_cast<double>(k) * trace.sample_time);
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(trace.states[k][i]);
        for (Eigen::Index i = 0; i < m; ++i) out << ',' << (applied ? format_double(trace.inputs[k][i]) : "");
        for (Eigen::Index i = 0; i < q; ++i) out << ',' << (applied ? format_double(trace.disturbances[k][i]) : "");
        out << ',' << (applied ? format_double(trace.stage_costs[k]) : "");
        out << ',' << (applied ? format_double(trace.economic_costs[k]) : "");
        out << ',' << (k >= 1 ? format_double(trace.running_average[k - 1]) : "");
        out << ',' << (applied ? format_double(trace.values[k]) : "");
        out << ',' << (applied ? std::string(to_string(trace.statuses[k])) : "") << '\n';
    }
    finish(out, path);
}

void export_csv(const MonteCarloSummary& summary, const std::filesystem::path& path, const std::string& comment) {
    std::ofstream out = open_for_writing(path);
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "run,seed,J_T,feasible\n";
    for (int r = 0; r < summary.n_runs; ++r) {
        const auto rs = static_cast<std::size_t>(r);
        out << r << ',' << summary.seed << ',' << format_double(summary.final_performance[rs]) << ','
            << (summary.feasible[rs] ? 1 : 0) << '\n';
    }
    finish(out, path);
}

}  // namespace empc
