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
#ifndef EMPC_CLOSED_LOOP_HPP
#define EMPC_CLOSED_LOOP_HPP

#include "empc/ocp.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace empc {

/// Record of x+ = f(x, kappa(x), w). Index k runs over applied steps.
struct ClosedLoopTrace {
    double sample_time = 0.0;
    Trajectory states;        ///< x(0..T)
    Trajectory inputs;        ///< u(0..T-1)
    Trajectory disturbances;  ///< w(0..T-1)
    std::vector<double> stage_costs;     ///< l(x(k), u(k))
    std::vector<double> economic_costs;  ///< l_e(x(k), u(k))
    std::vector<double> running_average;        ///< J_t over l_e, t = 1..T
    std::vector<double> running_average_stage;  ///< same over l
    std::vector<SolveStatus> statuses;
    std::vector<double> values;  ///< V0(x(k))
    std::vector<double> terminal_slacks;
    bool feasible = true;         ///< false when the run stopped on an infeasible solve
    int state_box_violations = 0;

    int steps() const { return static_cast<int>(inputs.size()); }
};

enum class CostMeasure { Economic, Stage };

/// Applies control_law with candidate warm starts for each w in w_seq.
/// Stops early (feasible = false) on an infeasible solve; throws
/// InputError when x0 itself is infeasible.
ClosedLoopTrace run_closed_loop(const OcpProblem& problem, const Vector& x0, std::span<const Vector> w_seq);

/// Running average J_T of the chosen cost; 1 <= T <= trace.steps().
double performance(const ClosedLoopTrace& trace, int horizon, CostMeasure measure = CostMeasure::Economic);

/// Produces the disturbance sequence of run `run` from its own substream.
using DisturbanceLaw = std::function<Trajectory(std::uint64_t seed, int run, int steps)>;

/// i.i.d. uniform samples on the box.
DisturbanceLaw uniform_disturbance(Box box);

struct MonteCarloSummary {
    int n_runs = 0;
    std::uint64_t seed = 0;
    int horizon = 0;  ///< T
    std::vector<double> final_performance;  ///< J_T per run (economic)
    std::vector<bool> feasible;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double stddev = 0.0;  ///< sample standard deviation over runs
    int infeasible_count = 0;
    std::vector<ClosedLoopTrace> traces;
};

/// Runs n_runs closed loops of length T. Run r draws its disturbances from
/// substream (seed, r), so results do not depend on `jobs`.
MonteCarloSummary monte_carlo(const OcpProblem& problem, const Vector& x0, int horizon, int n_runs,
                              std::uint64_t seed, const DisturbanceLaw& law, int jobs = 1);

/// Trace columns: k, t, x1..xn, u1..um, w1..wq, stage_cost, econ_cost, J_t,
/// V0, status; 17 significant digits. `comment` (if any) is written first
/// as a '#' line.
void export_csv(const ClosedLoopTrace& trace, const std::filesystem::path& path, const std::string& comment = {});

/// Summary columns: run, seed, J_T, feasible.
void export_csv(const MonteCarloSummary& summary, const std::filesystem::path& path,
                const std::string& comment = {});

}  // namespace empc

#endif  // EMPC_CLOSED_LOOP_HPP
