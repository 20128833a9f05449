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
#ifndef EMPC_TERMINAL_HPP
#define EMPC_TERMINAL_HPP

#include "empc/dynamics.hpp"
#include "empc/stage_cost.hpp"
#include "empc/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace empc {

/// Which Lyapunov equation defines the quadratic part P of V_e.
enum class TerminalCostForm {
    /// A_K P A_K' - P + Q/2 = 0. Reproduces the published CSTR matrices.
    TransposedHalf,
    /// A_K' P A_K - P + Q = 0.
    Standard,
};

enum class TauMode { Cover, Fit };

/**
 * Terminal ingredients in the coordinates of the model. All quadratic forms
 * act on the deviation d = x - x_s:
 *
 *   V_s(x) = d' Pt d,   X_f = {x in X : V_s(x) <= tau},
 *   V_e(x) = d' P d + p' d,   V_f = mu V_s + V_e,   kappa_f(x) = u_s + K d.
 */
struct TerminalIngredients {
    Vector x_s;
    Vector u_s;
    Matrix K;
    Matrix A;  ///< discrete linearization at (x_s, u_s)
    Matrix B;
    Matrix Q_tilde;
    Matrix P_tilde;
    double tau = 0.0;
    Matrix Q;
    Vector q;
    Matrix P;
    Vector p;
    double mu = 0.0;
    TerminalCostForm form = TerminalCostForm::TransposedHalf;

    Matrix closed_loop_matrix() const { return A + B * K; }
    double vs(const Vector& x) const;
    double ve(const Vector& x) const;
    double vf(const Vector& x) const;
    Vector vs_gradient(const Vector& x) const;
    Vector vf_gradient(const Vector& x) const;
    Vector terminal_law(const Vector& x) const;
    bool in_terminal_set(const Vector& x, const Box& state_box, double tol = 0.0) const;
};

/// Outcome of the sampled terminal-condition check. passed holds iff every
/// margin is >= 0 and no invariance violation was seen.
struct VerificationReport {
    int grid_points = 0;
    double c2 = 0.0;                           ///< fitted decrease rate of V_s
    double worst_vs_decrease_margin = 0.0;     ///< min V_s(x) - V_s(x+) - (c2/2)|d|^2
    double worst_vf_margin = 0.0;              ///< min V_f(x) - l(x,k_f) + l_s - V_f(x+)
    double worst_admissibility_margin = 0.0;   ///< min of input-box distance and -g
    int invariance_violations = 0;
    bool passed = false;
};

/// Sampled linear surrogate for the robustness margin. The value is a
/// heuristic estimate, not a proof.
struct DeltaEstimate {
    double L_f = 0.0;
    double L_s = 0.0;
    double c2 = 0.0;
    double lambda_max = 0.0;
    double tau = 0.0;
    double delta = 0.0;  ///< +inf when the disturbance set is {0}
    int samples = 0;
    bool heuristic = true;
};

/// delta = min{(tau/2)/(L_s L_f), (c2/2)(tau/2)/(lambda_max L_s L_f)}, +inf when
/// L_s L_f == 0 and 0 when c2 <= 0.
double delta_from_constants(double tau, double L_f, double L_s, double c2, double lambda_max);

Matrix build_vs(const Matrix& a_k, const Matrix& q_tilde);

/// Deterministic Halton sample of X_f = {x in box : (x-x_s)' Pt (x-x_s) <= tau},
/// by rejection from the bounding box of the ellipsoid clipped to the state box.
std::vector<Vector> sample_terminal_set(const Matrix& p_tilde, double tau, const Vector& x_s,
                                        const Box& state_box, int count, std::uint64_t seed);

/// Half-space c'd <= rhs in deviation coordinates.
struct HalfSpace {
    Vector normal;
    double rhs = 0.0;
    std::string origin;
};

/// Constraints that X_f must respect: input box through K, the linearized
/// soft constraint and the state box.
std::vector<HalfSpace> terminal_constraints(const PlantModel& model, const StageCost& cost,
                                            const Equilibrium& eq, const Matrix& k);

/// Largest admissible level: cover mode uses the maximum of V_s over the
/// vertices of the state box and checks admissibility on `density` samples;
/// fit mode inscribes the ellipsoid in the half-spaces of
/// terminal_constraints.
double choose_tau(const Matrix& p_tilde, const PlantModel& model, const StageCost& cost, const Equilibrium& eq,
                  const Matrix& k, TauMode mode, int density = 2000, std::uint64_t seed = 1);

/// q = grad lbar(0) with lbar(d) = l(x_s + d, u_s + K d) - l(x_s, u_s).
Vector reduced_cost_gradient(const StageCost& cost, const Equilibrium& eq, const Matrix& k);

/// Hessian of lbar at deviation d, by central differences of its gradient.
Matrix reduced_cost_hessian(const StageCost& cost, const Equilibrium& eq, const Matrix& k, const Vector& d);

/**
 * Symmetric Q with x'(Q - hess lbar(x))x >= 0 on sampled terminal-set points:
 * mean sampled Hessian plus the largest eigenvalue of the deviations and a
 * 1e-8 margin. A constant Hessian is returned unchanged.
 */
Matrix hessian_bound_Q(const StageCost& cost, const Equilibrium& eq, const Matrix& k,
                       const std::vector<Vector>& samples);

struct TerminalCostTerms {
    Matrix P;
    Vector p;
};

/// P from the selected Lyapunov form, p from (I - A_K') p = q.
TerminalCostTerms build_ve(const Matrix& a_k, const Matrix& q_hessian, const Vector& q,
                           TerminalCostForm form = TerminalCostForm::TransposedHalf);

VerificationReport verify_terminal_conditions(const PlantModel& model, const StageCost& cost,
                                      const TerminalIngredients& ingredients, int density, std::uint64_t seed = 1);

/// Smallest mu from the schedule whose verification passes.
double select_mu(const TerminalIngredients& ingredients, const PlantModel& model, const StageCost& cost,
                 const std::vector<double>& schedule, int density, std::uint64_t seed = 1);

DeltaEstimate estimate_delta(const PlantModel& model, const TerminalIngredients& ingredients, int horizon,
                             int samples, std::uint64_t seed = 1);

struct SynthesisOptions {
    std::optional<Matrix> K;  ///< when empty, solve_dlqr(A, B, lqr_Q, lqr_R)
    Matrix lqr_Q;
    Matrix lqr_R;
    std::optional<Matrix> Q_tilde;  ///< identity when empty
    TauMode tau_mode = TauMode::Cover;
    std::vector<double> mu_schedule{0.0, 0.1, 1.0, 10.0, 100.0, 1000.0};
    int grid_density = 10000;
    int hessian_samples = 1000;
    int delta_samples = 1000;
    int horizon = 16;
    std::uint64_t seed = 1;
    TerminalCostForm form = TerminalCostForm::TransposedHalf;
};

struct SynthesisResult {
    TerminalIngredients ingredients;
    VerificationReport report;
    DeltaEstimate delta;
};

/// build_vs -> choose_tau -> hessian_bound_Q -> build_ve -> select_mu ->
/// verify_terminal_conditions -> estimate_delta. Throws SynthesisError naming the
/// failing stage.
SynthesisResult synthesize(const PlantModel& model, const StageCost& cost, const Equilibrium& eq,
                           const SynthesisOptions& options);

/// Checks the structural invariants (PD, Schur, Lyapunov residuals, p).
/// Returns an empty string when they hold, otherwise a description.
std::string check_ingredient_invariants(const TerminalIngredients& ingredients);

}  // namespace empc

#endif  // EMPC_TERMINAL_HPP
