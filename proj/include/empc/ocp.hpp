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
#ifndef EMPC_OCP_HPP
#define EMPC_OCP_HPP

#include "empc/dynamics.hpp"
#include "empc/stage_cost.hpp"
#include "empc/terminal.hpp"

#include <optional>
#include <string_view>

namespace empc {

struct SolverSettings {
    double kkt_tol = 1e-6;
    double constraint_tol = 1e-8;
    int max_iterations = 500;     ///< per augmented-Lagrangian round
    int outer_rounds = 8;
    double initial_penalty = 10.0;
    int memory = 10;              ///< L-BFGS pairs
};

/// Finite-horizon economic MPC problem
///   min_u  sum_k l(x(k), u(k)) + V_f(x(N))  s.t.  u(k) in U,  V_s(x(N)) <= tau.
struct OcpProblem {
    PlantModel model;
    StageCost cost;
    TerminalIngredients terminal;
    int horizon = 16;
    SolverSettings settings;

    /// Throws InputError when dimensions, horizon or tolerances are invalid.
    void validate() const;
};

enum class SolveStatus { Optimal, MaxIter, Infeasible };

std::string_view to_string(SolveStatus status);

struct OcpSolution {
    Trajectory u_seq;
    Trajectory x_pred;  ///< nominal prediction, length N + 1
    double value = 0.0;
    double kkt_residual = 0.0;
    double terminal_slack = 0.0;  ///< tau - V_s(x_pred[N])
    SolveStatus status = SolveStatus::Infeasible;
    int iterations = 0;
};

/// V(x, u) from one nominal rollout.
double total_cost(const OcpProblem& problem, const Vector& x, std::span<const Vector> u_seq);

/// Gradient of V with respect to the stacked inputs (u(0); ...; u(N-1)),
/// computed by an adjoint sweep through the exact RK4 sensitivities.
Vector cost_gradient(const OcpProblem& problem, const Vector& x, std::span<const Vector> u_seq);

/**
 * Single-shooting solve from a warm start (u = u_s when absent).
 *
 * The input box is enforced by projection, the terminal constraint by an
 * augmented Lagrangian around a projected L-BFGS inner solver. When the warm
 * start is feasible, the returned value never exceeds its cost by more
 * than 1e-8.
 */
OcpSolution solve(const OcpProblem& problem, const Vector& x, const std::optional<Trajectory>& warm_start = {});

struct ShiftedCandidate {
    Trajectory u_seq;
    double clip_distance = 0.0;  ///< |kappa_f(x(N)) - clipped value|
};

/// (u0(1), ..., u0(N-1), kappa_f(x(N))), clipped to the input box.
ShiftedCandidate candidate_shift(const OcpProblem& problem, const OcpSolution& previous);

struct ControlAction {
    Vector u;
    OcpSolution solution;
};

/// kappa(x) = u0(0; x), warm-started from the shifted previous solution.
ControlAction control_law(const OcpProblem& problem, const Vector& x, const OcpSolution* previous = nullptr);

}  // namespace empc

#endif  // EMPC_OCP_HPP
