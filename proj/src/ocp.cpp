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
#include "empc/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

namespace empc {

namespace {

constexpr double kKinkTol = 1e-9;

Vector flatten(std::span<const Vector> seq, int m) {
    Vector z(static_cast<Eigen::Index>(seq.size()) * m);
    for (std::size_t k = 0; k < seq.size(); ++k) {
        if (seq[k].size() != m) throw InputError("input sequence entry " + std::to_string(k) + " has wrong dimension");
        z.segment(static_cast<Eigen::Index>(k) * m, m) = seq[k];
    }
    return z;
}

Trajectory unflatten(const Vector& z, int horizon, int m) {
    Trajectory out(static_cast<std::size_t>(horizon));
    for (int k = 0; k < horizon; ++k) out[static_cast<std::size_t>(k)] = z.segment(k * m, m);
    return out;
}

struct Evaluation {
    double value = 0.0;
    double terminal = 0.0;  ///< V_s(x(N)) - tau
    Trajectory states;
};

Evaluation evaluate(const OcpProblem& p, const Vector& x, const Vector& z) {
    const int m = p.model.input_dim();
    const Vector w0 = p.model.zero_disturbance();
    Evaluation e;
    e.states.reserve(static_cast<std::size_t>(p.horizon) + 1);
    e.states.push_back(x);
    for (int k = 0; k < p.horizon; ++k) {
        const Vector u = z.segment(k * m, m);
        e.value += p.cost(e.states.back(), u);
        e.states.push_back(step(p.model, e.states.back(), u, w0));
    }
    e.value += p.terminal.vf(e.states.back());
    e.terminal = p.terminal.vs(e.states.back()) - p.terminal.tau;
    return e;
}

struct Gradients {
    Vector value;       ///< d V / d z
    Vector constraint;  ///< d V_s(x(N)) / d z
    std::vector<int> kinks;
    std::vector<Matrix> dx;
    std::vector<Matrix> du;
    Trajectory states;
};

Gradients gradients(const OcpProblem& p, const Vector& x, const Vector& z) {
    const int n = p.model.state_dim();
    const int m = p.model.input_dim();
    const int horizon = p.horizon;
    const Vector w0 = p.model.zero_disturbance();

    Gradients g;
    g.states.reserve(static_cast<std::size_t>(horizon) + 1);
    g.states.push_back(x);
    for (int k = 0; k < horizon; ++k) {
        StepSensitivity s = step_with_sensitivity(p.model, g.states.back(), z.segment(k * m, m), w0);
        g.states.push_back(std::move(s.next));
        g.dx.push_back(std::move(s.dx));
        g.du.push_back(std::move(s.du));
    }

    g.value.resize(horizon * m);
    g.constraint.resize(horizon * m);
    Vector lam = p.terminal.vf_gradient(g.states.back());
    Vector nu = p.terminal.vs_gradient(g.states.back());
    Vector gx(n);
    Vector gu(m);
    for (int k = horizon - 1; k >= 0; --k) {
        const auto ks = static_cast<std::size_t>(k);
        const Vector u = z.segment(k * m, m);
        p.cost.gradient(g.states[ks], u, gx, gu);
        if (p.cost.has_constraint() && std::abs(p.cost.constraint(g.states[ks], u)) <= kKinkTol) g.kinks.push_back(k);
        g.value.segment(k * m, m) = gu + g.du[ks].transpose() * lam;
        g.constraint.segment(k * m, m) = g.du[ks].transpose() * nu;
        lam = gx + g.dx[ks].transpose() * lam;
        nu = g.dx[ks].transpose() * nu;
    }
    return g;
}

/// Gradient direction contributed by lambda * grad g at a single stage.
Vector penalty_direction(const OcpProblem& p, const Gradients& g, const Vector& z, int stage) {
    const int m = p.model.input_dim();
    Vector out = Vector::Zero(z.size());
    Vector cx;
    Vector cu;
    p.cost.constraint_gradient(g.states[static_cast<std::size_t>(stage)], z.segment(stage * m, m), cx, cu);
    out.segment(stage * m, m) = p.cost.penalty_weight() * cu;
    Vector lam = p.cost.penalty_weight() * cx;
    for (int k = stage - 1; k >= 0; --k) {
        const auto ks = static_cast<std::size_t>(k);
        out.segment(k * m, m) = g.du[ks].transpose() * lam;
        lam = g.dx[ks].transpose() * lam;
    }
    return out;
}

Vector project(const Vector& z, const Vector& lo, const Vector& hi) { return z.cwiseMax(lo).cwiseMin(hi); }

double projected_gradient_norm(const Vector& z, const Vector& grad, const Vector& lo, const Vector& hi) {
    if (z.size() == 0) return 0.0;
    return (z - project(z - grad, lo, hi)).lpNorm<Eigen::Infinity>();
}

/// Stationarity residual; at penalty kinks the best subgradient is selected
/// by coordinate search over the interval weights.
double kkt_residual(const OcpProblem& p, const Vector& x, const Vector& z, double multiplier, const Vector& lo,
                    const Vector& hi) {
    const Gradients g = gradients(p, x, z);
    const Vector base = g.value + multiplier * g.constraint;
    if (g.kinks.empty()) return projected_gradient_norm(z, base, lo, hi);

    const int m = p.model.input_dim();
    std::vector<Vector> dirs;
    std::vector<double> weight;
    for (const int k : g.kinks) {
        dirs.push_back(penalty_direction(p, g, z, k));
        const double gk = p.cost.constraint(g.states[static_cast<std::size_t>(k)], z.segment(k * m, m));
        weight.push_back(gk > 0.0 ? 1.0 : 0.0);
    }
    const auto residual = [&](const std::vector<double>& theta) {
        Vector grad = base;
        for (std::size_t j = 0; j < dirs.size(); ++j) grad += (theta[j] - weight[j]) * dirs[j];
        return projected_gradient_norm(z, grad, lo, hi);
    };
    std::vector<double> theta = weight;
    double best = residual(theta);
    for (int sweep = 0; sweep < 3; ++sweep) {
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double keep = theta[j];
            double arg = keep;
            for (int s = 0; s <= 20; ++s) {
                theta[j] = s / 20.0;
                const double r = residual(theta);
                if (r < best) {
                    best = r;
                    arg = theta[j];
                }
            }
            theta[j] = arg;
        }
    }
    return best;
}

struct InnerResult {
    Vector z;
    int iterations = 0;
    bool converged = false;
};

using Objective = std::function<double(const Vector& z, Vector* grad)>;

/// Projected L-BFGS with an epsilon-active set (Bertsekas-style two-metric
/// projection): quasi-Newton steps on free variables, gradient steps on
/// the active ones, Armijo search along the projection arc.
InnerResult projected_lbfgs(const Objective& fg, const Vector& lo, const Vector& hi, Vector z, double tol,
                            int max_iterations, int memory) {
    const Eigen::Index dim = z.size();
    z = project(z, lo, hi);
    Vector g;
    double f = fg(z, &g);
    std::deque<Vector> s_hist;
    std::deque<Vector> y_hist;

    InnerResult out;
    for (int it = 0; it < max_iterations; ++it) {
        out.iterations = it;
        const double pgn = projected_gradient_norm(z, g, lo, hi);
        if (pgn <= tol) {
            out.z = z;
            out.converged = true;
            return out;
        }
        const double eps = std::min(1e-3, pgn);
        Vector mask = Vector::Ones(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            if ((z[i] <= lo[i] + eps && g[i] > 0.0) || (z[i] >= hi[i] - eps && g[i] < 0.0)) mask[i] = 0.0;
        }

        const auto direction = [&]() {
            Vector q = mask.cwiseProduct(g);
            const std::size_t k = s_hist.size();
            std::vector<double> alpha(k, 0.0);
            std::vector<double> rho(k, 0.0);
            for (std::size_t i = k; i-- > 0;) {
                const double sy = mask.cwiseProduct(s_hist[i]).dot(y_hist[i]);
                if (sy <= 1e-16) continue;
                rho[i] = 1.0 / sy;
                alpha[i] = rho[i] * mask.cwiseProduct(s_hist[i]).dot(q);
                q -= alpha[i] * mask.cwiseProduct(y_hist[i]);
            }
            double gamma = 1.0;
            if (k > 0) {
                const double sy = mask.cwiseProduct(s_hist.back()).dot(y_hist.back());
                const double yy = mask.cwiseProduct(y_hist.back()).squaredNorm();
                if (sy > 0.0 && yy > 0.0) gamma = sy / yy;
            }
            Vector r = gamma * q;
            for (std::size_t i = 0; i < k; ++i) {
                if (rho[i] == 0.0) continue;
                const double beta = rho[i] * mask.cwiseProduct(y_hist[i]).dot(r);
                r += (alpha[i] - beta) * mask.cwiseProduct(s_hist[i]);
            }
            Vector d = -mask.cwiseProduct(r);
            for (Eigen::Index i = 0; i < dim; ++i) {
                if (mask[i] == 0.0) d[i] = -g[i];
            }
            return d;
        };

        Vector d = direction();
        if (mask.cwiseProduct(g).dot(d) >= 0.0) {
            s_hist.clear();
            y_hist.clear();
            d = -g;
        }

        bool accepted = false;
        Vector z_new;
        Vector g_new;
        double f_new = 0.0;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            double step_len = 1.0;
            for (int ls = 0; ls < 60; ++ls) {
                z_new = project(z + step_len * d, lo, hi);
                const Vector delta = z_new - z;
                if (delta.lpNorm<Eigen::Infinity>() == 0.0) break;
                f_new = fg(z_new, nullptr);
                if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(delta)) {
                    accepted = true;
                    break;
                }
                step_len *= 0.5;
            }
            if (!accepted) {
                if (s_hist.empty()) break;
                s_hist.clear();
                y_hist.clear();
                d = -g;
            }
        }
        if (!accepted) {
            out.z = z;
            out.converged = false;
            return out;
        }
        f_new = fg(z_new, &g_new);
        const Vector s = z_new - z;
        const Vector yv = g_new - g;
        if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            if (static_cast<int>(s_hist.size()) > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
            }
        }
        z = std::move(z_new);
        g = std::move(g_new);
        f = f_new;
    }
    out.z = z;
    out.iterations = max_iterations;
    out.converged = projected_gradient_norm(z, g, lo, hi) <= tol;
    return out;
}

}  // namespace

std::string_view to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal:
            return "optimal";
        case SolveStatus::MaxIter:
            return "max_iter";
        case SolveStatus::Infeasible:
            return "infeasible";
    }
    return "unknown";
}

void OcpProblem::validate() const {
    if (horizon < 1) throw InputError("horizon N must be >= 1");
    if (!(settings.kkt_tol > 0.0) || !(settings.constraint_tol > 0.0)) throw InputError("solver tolerances must be positive");
    if (settings.max_iterations < 1 || settings.outer_rounds < 1) throw InputError("solver iteration limits must be positive");
    if (!(settings.initial_penalty > 0.0)) throw InputError("initial penalty must be positive");
    if (cost.state_dim() != model.state_dim() || cost.input_dim() != model.input_dim()) {
        throw InputError("stage cost dimensions do not match the model");
    }
    const int n = model.state_dim();
    const int m = model.input_dim();
    if (terminal.x_s.size() != n || terminal.u_s.size() != m || terminal.K.rows() != m || terminal.K.cols() != n ||
        terminal.P_tilde.rows() != n || terminal.P.rows() != n || terminal.p.size() != n) {
        throw InputError("terminal ingredients do not match the model dimensions");
    }
}

double total_cost(const OcpProblem& problem, const Vector& x, std::span<const Vector> u_seq) {
    if (static_cast<int>(u_seq.size()) != problem.horizon) throw InputError("input sequence length must equal N");
    return evaluate(problem, x, flatten(u_seq, problem.model.input_dim())).value;
}

Vector cost_gradient(const OcpProblem& problem, const Vector& x, std::span<const Vector> u_seq) {
    if (static_cast<int>(u_seq.size()) != problem.horizon) throw InputError("input sequence length must equal N");
    return gradients(problem, x, flatten(u_seq, problem.model.input_dim())).value;
}

OcpSolution solve(const OcpProblem& problem, const Vector& x, const std::optional<Trajectory>& warm_start) {
    problem.validate();
    const int n = problem.model.state_dim();
    const int m = problem.model.input_dim();
    const int horizon = problem.horizon;
    if (x.size() != n) throw InputError("solve: state has wrong dimension");
    if (!x.allFinite()) throw InputError("solve: state is not finite");
    const SolverSettings& cfg = problem.settings;

    Vector lo(horizon * m);
    Vector hi(horizon * m);
    for (int k = 0; k < horizon; ++k) {
        lo.segment(k * m, m) = problem.model.input_box().lower;
        hi.segment(k * m, m) = problem.model.input_box().upper;
    }

    Vector z0;
    if (warm_start) {
        if (static_cast<int>(warm_start->size()) != horizon) throw InputError("warm start length must equal N");
        z0 = project(flatten(*warm_start, m), lo, hi);
    } else {
        z0 = Vector(horizon * m);
        for (int k = 0; k < horizon; ++k) z0.segment(k * m, m) = problem.terminal.u_s;
    }
    const Evaluation warm_eval = evaluate(problem, x, z0);
    const bool warm_feasible = warm_eval.terminal <= cfg.constraint_tol;

    double y = 0.0;
    double rho = cfg.initial_penalty;
    double previous_violation = std::numeric_limits<double>::infinity();
    Vector z = z0;
    int iterations = 0;
    Evaluation eval = warm_eval;
    for (int round = 0; round < cfg.outer_rounds; ++round) {
        const Objective merit = [&](const Vector& zz, Vector* grad) {
            if (grad) {
                const Gradients gr = gradients(problem, x, zz);
                const double c = problem.terminal.vs(gr.states.back()) - problem.terminal.tau;
                const double mult = std::max(0.0, y + rho * c);
                *grad = gr.value + mult * gr.constraint;
                const Evaluation e = evaluate(problem, x, zz);
                return e.value + (mult * mult - y * y) / (2.0 * rho);
            }
            const Evaluation e = evaluate(problem, x, zz);
            const double mult = std::max(0.0, y + rho * e.terminal);
            return e.value + (mult * mult - y * y) / (2.0 * rho);
        };
        const InnerResult inner = projected_lbfgs(merit, lo, hi, z, cfg.kkt_tol, cfg.max_iterations, cfg.memory);
        z = inner.z;
        iterations += inner.iterations;
        eval = evaluate(problem, x, z);
        if (eval.terminal <= cfg.constraint_tol) {
            y = std::max(0.0, y + rho * eval.terminal);
            break;
        }
        y = std::max(0.0, y + rho * eval.terminal);
        if (eval.terminal > 0.25 * previous_violation) rho *= 10.0;
        previous_violation = eval.terminal;
    }

    const bool feasible = eval.terminal <= cfg.constraint_tol;
    if (warm_feasible && (!feasible || eval.value > warm_eval.value)) {
        z = z0;
        eval = warm_eval;
    }

    OcpSolution sol;
    sol.u_seq = unflatten(z, horizon, m);
    sol.x_pred = eval.states;
    sol.value = eval.value;
    sol.terminal_slack = -eval.terminal;
    sol.iterations = iterations;
    const double multiplier = sol.terminal_slack <= cfg.constraint_tol ? y : 0.0;
    sol.kkt_residual = kkt_residual(problem, x, z, multiplier, lo, hi);
    if (eval.terminal > cfg.constraint_tol) {
        sol.status = SolveStatus::Infeasible;
    } else if (sol.kkt_residual <= cfg.kkt_tol) {
        sol.status = SolveStatus::Optimal;
    } else {
        sol.status = SolveStatus::MaxIter;
    }
    return sol;
}

ShiftedCandidate candidate_shift(const OcpProblem& problem, const OcpSolution& previous) {
    const auto horizon = previous.u_seq.size();
    if (horizon == 0 || previous.x_pred.size() != horizon + 1) throw InputError("candidate_shift: malformed solution");
    ShiftedCandidate out;
    out.u_seq.assign(previous.u_seq.begin() + 1, previous.u_seq.end());
    const Vector tail = problem.terminal.terminal_law(previous.x_pred.back());
    const Vector clipped = problem.model.input_box().clamp(tail);
    out.clip_distance = (tail - clipped).norm();
    out.u_seq.push_back(clipped);
    return out;
}

ControlAction control_law(const OcpProblem& problem, const Vector& x, const OcpSolution* previous) {
    std::optional<Trajectory> warm;
    if (previous && previous->status != SolveStatus::Infeasible) warm = candidate_shift(problem, *previous).u_seq;
    ControlAction out;
    out.solution = solve(problem, x, warm);
    out.u = out.solution.u_seq.front();
    return out;
}

}  // namespace empc
