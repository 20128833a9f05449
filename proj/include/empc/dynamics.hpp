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
#ifndef EMPC_DYNAMICS_HPP
#define EMPC_DYNAMICS_HPP

#include "empc/expression.hpp"
#include "empc/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace empc {

/// Axis-aligned box {v : lower <= v <= upper}. Bounds may be infinite.
struct Box {
    Vector lower;
    Vector upper;

    Box() = default;
    Box(Vector lo, Vector hi);

    int dim() const { return static_cast<int>(lower.size()); }
    bool is_bounded() const;
    bool contains(const Vector& v, double tol = 0.0) const;
    Vector clamp(const Vector& v) const;
    /// Signed distance to the boundary, positive inside (min over faces).
    double interior_margin(const Vector& v) const;
    /// All 2^dim corners; requires a bounded box.
    std::vector<Vector> vertices() const;
    /// Box scaled about the origin: {factor * v : v in box}.
    Box scaled(double factor) const;
};

/**
 * Continuous-time controlled vector field with a disturbance channel,
 * sampled with a zero-order hold on u and w.
 *
 * The discrete map x+ = f(x, u, w) is classical RK4 over `sample_time` split
 * into `substeps` equal intervals. Instances are immutable once built.
 */
class PlantModel {
public:
    using Rhs = std::function<Vector(const Vector& x, const Vector& u, const Vector& w)>;
    /// Writes d rhs / dx into jx (n x n) and d rhs / du into ju (n x m).
    using RhsJacobian =
        std::function<void(const Vector& x, const Vector& u, const Vector& w, Matrix& jx, Matrix& ju)>;

    PlantModel(std::string name, Rhs rhs, Box state_box, Box input_box, Box disturbance_box, double sample_time,
               int substeps = 4, RhsJacobian jacobian = nullptr);

    const std::string& name() const { return name_; }
    int state_dim() const { return state_box_.dim(); }
    int input_dim() const { return input_box_.dim(); }
    int disturbance_dim() const { return disturbance_box_.dim(); }
    const Box& state_box() const { return state_box_; }
    const Box& input_box() const { return input_box_; }
    const Box& disturbance_box() const { return disturbance_box_; }
    double sample_time() const { return sample_time_; }
    int substeps() const { return substeps_; }
    bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }

    Vector rhs(const Vector& x, const Vector& u, const Vector& w) const { return rhs_(x, u, w); }

    /// Continuous-time Jacobians, analytic when registered, otherwise central
    /// differences with step 1e-6 (1 + |coordinate|).
    void rhs_jacobian(const Vector& x, const Vector& u, const Vector& w, Matrix& jx, Matrix& ju) const;

    Vector zero_disturbance() const { return Vector::Zero(disturbance_dim()); }

    /// Copy of this model with a different disturbance set.
    PlantModel with_disturbance_box(Box box) const;
    PlantModel with_substeps(int substeps) const;
    PlantModel with_sample_time(double sample_time) const;

private:
    std::string name_;
    Rhs rhs_;
    RhsJacobian jacobian_;
    Box state_box_;
    Box input_box_;
    Box disturbance_box_;
    double sample_time_;
    int substeps_;
};

/// Steady-state pair of the discrete map.
struct Equilibrium {
    Vector x_s;
    Vector u_s;
    double residual_tol = 1e-9;
};

/// |f(x_s, u_s, 0) - x_s|_inf.
double equilibrium_residual(const PlantModel& model, const Equilibrium& eq);

/// Throws InputError when the equilibrium residual exceeds its tolerance.
void check_equilibrium(const PlantModel& model, const Equilibrium& eq);

Vector step(const PlantModel& model, const Vector& x, const Vector& u, const Vector& w);

/// One discrete step together with the exact derivatives of the RK4 map.
struct StepSensitivity {
    Vector next;
    Matrix dx;  ///< d x+ / d x  (n x n)
    Matrix du;  ///< d x+ / d u  (n x m)
};

StepSensitivity step_with_sensitivity(const PlantModel& model, const Vector& x, const Vector& u, const Vector& w);

/// Rollout of length u_seq.size(); result[0] = x0. Errors name the failing k.
Trajectory simulate_open_loop(const PlantModel& model, const Vector& x0, std::span<const Vector> u_seq,
                              std::span<const Vector> w_seq);

/// Nominal rollout (w = 0).
Trajectory simulate_open_loop(const PlantModel& model, const Vector& x0, std::span<const Vector> u_seq);

struct LinearPair {
    Matrix A;
    Matrix B;
};

/// Continuous-time Jacobians of rhs at (x, u, 0).
LinearPair linearize(const PlantModel& model, const Vector& x, const Vector& u);

/// Exact zero-order-hold discretization via the augmented matrix exponential.
LinearPair discretize(const Matrix& a_c, const Matrix& b_c, double dt);

/// Matrix exponential by scaling and squaring with a Taylor series
/// truncated at relative term size 1e-14.
Matrix expm(const Matrix& m);

/// Isothermal CSTR (A -> B) in deviation coordinates about c_A = c_B = 0.5,
/// q_f = 4: x = (c_A - 0.5, c_B - 0.5), u = q_f - 4, w = inlet A disturbance.
PlantModel make_cstr_model(double sample_time = 0.25, int substeps = 4);

/// Equilibrium of the CSTR preset (the origin).
Equilibrium cstr_equilibrium();

/// Model built from rhs expressions over x1.., u1.., w1..; the Jacobian is
/// obtained by symbolic differentiation.
PlantModel make_expression_model(std::string name, const std::vector<std::string>& rhs, Box state_box,
                                 Box input_box, Box disturbance_box, double sample_time, int substeps);

/// Preset registry. Throws InputError for unknown names.
PlantModel preset_model(std::string_view name);
std::optional<Equilibrium> preset_equilibrium(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace empc

#endif  // EMPC_DYNAMICS_HPP
