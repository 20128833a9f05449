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
#include "empc/terminal.hpp"

#include "empc/linalg.hpp"
#include "empc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace empc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Matrix& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); }

Vector input_at(const TerminalIngredients& ing, const Vector& x) { return ing.terminal_law(x); }

}  // namespace

double TerminalIngredients::vs(const Vector& x) const {
    const Vector d = x - x_s;
    return d.dot(P_tilde * d);
}

double TerminalIngredients::ve(const Vector& x) const {
    const Vector d = x - x_s;
    return d.dot(P * d) + p.dot(d);
}

double TerminalIngredients::vf(const Vector& x) const { return mu * vs(x) + ve(x); }

Vector TerminalIngredients::vs_gradient(const Vector& x) const { return 2.0 * (P_tilde * (x - x_s)); }

Vector TerminalIngredients::vf_gradient(const Vector& x) const {
    const Vector d = x - x_s;
    return 2.0 * ((mu * P_tilde + P) * d) + p;
}

Vector TerminalIngredients::terminal_law(const Vector& x) const { return u_s + K * (x - x_s); }

bool TerminalIngredients::in_terminal_set(const Vector& x, const Box& state_box, double tol) const {
    return state_box.contains(x, tol) && vs(x) <= tau + tol;
}

double delta_from_constants(double tau, double L_f, double L_s, double c2, double lambda_max) {
    const double gain = L_s * L_f;
    if (gain == 0.0) return kInf;
    if (!(c2 > 0.0) || !(tau > 0.0)) return 0.0;
    const double first = (tau / 2.0) / gain;
    const double second = (c2 / 2.0) * (tau / 2.0) / (lambda_max * gain);
    return std::min(first, second);
}

Matrix build_vs(const Matrix& a_k, const Matrix& q_tilde) {
    if (!is_positive_definite(symmetrize(q_tilde))) throw InputError("build_vs: Q~ must be positive definite");
    if (!is_schur(a_k)) throw NotSchurAdmissible("not Schur-admissible: A_K is not Schur stable");
    Matrix p = solve_dlyap(a_k, symmetrize(q_tilde));
    if (!is_positive_definite(p)) throw NumericalError("build_vs: Lyapunov solution is not positive definite");
    return p;
}

std::vector<Vector> sample_terminal_set(const Matrix& p_tilde, double tau, const Vector& x_s,
                                        const Box& state_box, int count, std::uint64_t seed) {
    const Eigen::Index n = x_s.size();
    if (n > 16) throw InputError("sample_terminal_set supports at most 16 states");
    const Matrix inv = p_tilde.inverse();
    Vector lo(n);
    Vector hi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double half = std::sqrt(std::max(tau, 0.0) * inv(i, i));
        lo[i] = std::max(x_s[i] - half, state_box.lower[i]);
        hi[i] = std::min(x_s[i] + half, state_box.upper[i]);
    }
    std::vector<Vector> out;
    if (count <= 0) return out;
    out.reserve(static_cast<std::size_t>(count));
    const std::uint64_t max_attempts = 1000ull * static_cast<std::uint64_t>(count) + 1000ull;
    Vector x(n);
    for (std::uint64_t i = 0; i < max_attempts && static_cast<int>(out.size()) < count; ++i) {
        const std::uint64_t index = 1 + seed * 7919ull + i;
        for (Eigen::Index j = 0; j < n; ++j) x[j] = lo[j] + (hi[j] - lo[j]) * halton(index, static_cast<int>(j));
        const Vector d = x - x_s;
        if (d.dot(p_tilde * d) <= tau && state_box.contains(x)) out.push_back(x);
    }
    return out;
}

std::vector<HalfSpace> terminal_constraints(const PlantModel& model, const StageCost& cost,
                                            const Equilibrium& eq, const Matrix& k) {
    const int n = model.state_dim();
    std::vector<HalfSpace> rows;
    const Box& ub = model.input_box();
    for (int i = 0; i < model.input_dim(); ++i) {
        const Vector row = k.row(i).transpose();
        rows.push_back({row, ub.upper[i] - eq.u_s[i], "input " + std::to_string(i + 1) + " upper bound"});
        rows.push_back({-row, eq.u_s[i] - ub.lower[i], "input " + std::to_string(i + 1) + " lower bound"});
    }
    if (cost.has_constraint()) {
        Vector gx;
        Vector gu;
        cost.constraint_gradient(eq.x_s, eq.u_s, gx, gu);
        rows.push_back({gx + k.transpose() * gu, -cost.constraint(eq.x_s, eq.u_s), "soft constraint g"});
    }
    const Box& xb = model.state_box();
    for (int i = 0; i < n; ++i) {
        const Vector e = Vector::Unit(n, i);
        if (std::isfinite(xb.upper[i])) rows.push_back({e, xb.upper[i] - eq.x_s[i], "state " + std::to_string(i + 1) + " upper bound"});
        if (std::isfinite(xb.lower[i])) rows.push_back({-e, eq.x_s[i] - xb.lower[i], "state " + std::to_string(i + 1) + " lower bound"});
    }
    return rows;
}

double choose_tau(const Matrix& p_tilde, const PlantModel& model, const StageCost& cost, const Equilibrium& eq,
                  const Matrix& k, TauMode mode, int density, std::uint64_t seed) {
    if (!is_positive_definite(p_tilde)) throw SynthesisError("choose_tau", "V_s matrix is not positive definite");
    if (mode == TauMode::Cover) {
        const Box& xb = model.state_box();
        if (!xb.is_bounded()) throw SynthesisError("choose_tau", "cover mode needs a bounded state box");
        double tau = 0.0;
        for (const Vector& v : xb.vertices()) {
            const Vector d = v - eq.x_s;
            tau = std::max(tau, d.dot(p_tilde * d));
        }
        if (!(tau > 0.0)) throw SynthesisError("choose_tau", "tau <= 0");
        std::vector<Vector> pts = sample_terminal_set(p_tilde, tau, eq.x_s, xb, density, seed);
        for (const Vector& v : xb.vertices()) pts.push_back(v);
        for (const Vector& x : pts) {
            const Vector u = eq.u_s + k * (x - eq.x_s);
            if (model.input_box().interior_margin(u) < 0.0 || cost.constraint(x, u) > 0.0) {
                throw SynthesisError("choose_tau",
                                     "terminal law is not admissible on the whole state box; use tau mode 'fit'");
            }
        }
        return tau;
    }

    const Matrix inv = p_tilde.inverse();
    double tau = kInf;
    for (const HalfSpace& h : terminal_constraints(model, cost, eq, k)) {
        const double curvature = h.normal.dot(inv * h.normal);
        if (curvature <= 0.0) {
            if (h.rhs < 0.0) throw SynthesisError("choose_tau", "equilibrium violates " + h.origin);
            continue;
        }
        if (!(h.rhs > 0.0)) throw SynthesisError("choose_tau", "tau <= 0: equilibrium lies on " + h.origin);
        tau = std::min(tau, h.rhs * h.rhs / curvature);
    }
    if (!std::isfinite(tau)) throw SynthesisError("choose_tau", "no finite constraint bounds the terminal set");
    return tau;
}

Vector reduced_cost_gradient(const StageCost& cost, const Equilibrium& eq, const Matrix& k) {
    Vector gx;
    Vector gu;
    cost.gradient(eq.x_s, eq.u_s, gx, gu);
    return gx + k.transpose() * gu;
}

Matrix reduced_cost_hessian(const StageCost& cost, const Equilibrium& eq, const Matrix& k, const Vector& d) {
    const Eigen::Index n = d.size();
    const auto grad = [&](const Vector& dev) {
        Vector gx;
        Vector gu;
        cost.gradient(eq.x_s + dev, eq.u_s + k * dev, gx, gu);
        return Vector(gx + k.transpose() * gu);
    };
    Matrix h(n, n);
    Vector dp = d;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double step = 1e-5 * (1.0 + std::abs(d[j]));
        dp[j] = d[j] + step;
        const Vector gp = grad(dp);
        dp[j] = d[j] - step;
        const Vector gm = grad(dp);
        dp[j] = d[j];
        h.col(j) = (gp - gm) / (2.0 * step);
    }
    return symmetrize(h);
}

Matrix hessian_bound_Q(const StageCost& cost, const Equilibrium& eq, const Matrix& k,
                       const std::vector<Vector>& samples) {
    if (samples.empty()) throw SynthesisError("hessian_bound_Q", "no terminal-set samples");
    const Eigen::Index n = eq.x_s.size();
    std::vector<Matrix> hessians;
    hessians.reserve(samples.size());
    Matrix mean = Matrix::Zero(n, n);
    for (const Vector& x : samples) {
        const Vector d = x - eq.x_s;
        const Vector u = eq.u_s + k * d;
        if (cost.constraint(x, u) >= 0.0) {
            throw SynthesisError("hessian_bound_Q", "soft constraint active inside terminal set; shrink tau");
        }
        hessians.push_back(reduced_cost_hessian(cost, eq, k, d));
        mean += hessians.back();
    }
    mean /= static_cast<double>(hessians.size());
    mean = symmetrize(mean);

    double eta = -kInf;
    for (const Matrix& h : hessians) eta = std::max(eta, largest_eigenvalue(h - mean));
    if (eta <= 1e-9 * std::max(1.0, inf_norm(mean))) return mean;
    return mean + (eta + 1e-8) * Matrix::Identity(n, n);
}

TerminalCostTerms build_ve(const Matrix& a_k, const Matrix& q_hessian, const Vector& q, TerminalCostForm form) {
    if (!is_schur(a_k)) throw NotSchurAdmissible("not Schur-admissible: A_K is not Schur stable");
    const Eigen::Index n = a_k.rows();
    TerminalCostTerms out;
    if (form == TerminalCostForm::TransposedHalf) {
        out.P = solve_dlyap(a_k.transpose(), 0.5 * symmetrize(q_hessian));
    } else {
        out.P = solve_dlyap(a_k, symmetrize(q_hessian));
    }
    const Matrix lhs = Matrix::Identity(n, n) - a_k.transpose();
    out.p = lhs.partialPivLu().solve(q);
    if (!out.p.allFinite()) throw NumericalError("build_ve: linear term is not finite");
    return out;
}

namespace {

struct PointEvaluation {
    double vs_drop = 0.0;
    double dist2 = 0.0;
};

}  // namespace

VerificationReport verify_terminal_conditions(const PlantModel& model, const StageCost& cost,
                                      const TerminalIngredients& ingredients, int density, std::uint64_t seed) {
    VerificationReport report;
    const std::vector<Vector> points = sample_terminal_set(ingredients.P_tilde, ingredients.tau, ingredients.x_s,
                                                           model.state_box(), density, seed);
    report.grid_points = static_cast<int>(points.size());
    if (points.empty()) return report;

    const Vector w0 = model.zero_disturbance();
    const double l_s = cost(ingredients.x_s, ingredients.u_s);
    std::vector<PointEvaluation> evals;
    evals.reserve(points.size());
    double c2 = kInf;
    double worst_vf = kInf;
    double worst_adm = kInf;
    for (const Vector& x : points) {
        const Vector u = input_at(ingredients, x);
        const Box& ub = model.input_box();
        worst_adm = std::min(worst_adm, ub.interior_margin(u));
        if (cost.has_constraint()) worst_adm = std::min(worst_adm, -cost.constraint(x, u));

        // An inadmissible terminal input is already reported; step with the
        // clipped input so the remaining clauses stay defined.
        const Vector u_step = ub.clamp(u);
        const Vector next = step(model, x, u_step, w0);

        PointEvaluation e;
        e.vs_drop = ingredients.vs(x) - ingredients.vs(next);
        e.dist2 = (x - ingredients.x_s).squaredNorm();
        if (e.dist2 >= 1e-12) c2 = std::min(c2, e.vs_drop / e.dist2);
        evals.push_back(e);

        if (!ingredients.in_terminal_set(next, model.state_box(), 1e-9 * (1.0 + ingredients.tau))) {
            ++report.invariance_violations;
        }
        worst_vf = std::min(worst_vf, ingredients.vf(x) - cost(x, u_step) + l_s - ingredients.vf(next));
    }
    if (!std::isfinite(c2)) c2 = 0.0;
    report.c2 = c2;
    if (c2 > 0.0) {
        double worst_vs = kInf;
        for (const PointEvaluation& e : evals) worst_vs = std::min(worst_vs, e.vs_drop - 0.5 * c2 * e.dist2);
        report.worst_vs_decrease_margin = worst_vs;
    } else {
        report.worst_vs_decrease_margin = c2;
    }
    report.worst_vf_margin = worst_vf;
    report.worst_admissibility_margin = worst_adm;
    report.passed = report.worst_vs_decrease_margin >= 0.0 && report.worst_vf_margin >= 0.0 &&
                    report.worst_admissibility_margin >= 0.0 && report.invariance_violations == 0;
    return report;
}

double select_mu(const TerminalIngredients& ingredients, const PlantModel& model, const StageCost& cost,
                 const std::vector<double>& schedule, int density, std::uint64_t seed) {
    TerminalIngredients trial = ingredients;
    for (const double mu : schedule) {
        if (!(mu >= 0.0)) throw InputError("mu schedule entries must be nonnegative");
        trial.mu = mu;
        if (verify_terminal_conditions(model, cost, trial, density, seed).passed) return mu;
    }
    throw SynthesisError("select_mu", "mu schedule exhausted; try a smaller tau");
}

DeltaEstimate estimate_delta(const PlantModel& model, const TerminalIngredients& ingredients, int horizon,
                             int samples, std::uint64_t seed) {
    if (horizon < 1) throw InputError("estimate_delta: horizon must be >= 1");
    if (samples < 1) throw InputError("estimate_delta: sample budget must be >= 1");

    DeltaEstimate out;
    out.samples = samples;
    out.tau = ingredients.tau;

    Box xb = model.state_box();
    if (!xb.is_bounded()) {
        const Matrix inv = ingredients.P_tilde.inverse();
        Vector half(xb.dim());
        for (int i = 0; i < xb.dim(); ++i) half[i] = std::sqrt(ingredients.tau * inv(i, i));
        xb = Box(ingredients.x_s - half, ingredients.x_s + half);
    }
    const Box& ub = model.input_box();
    const Box& wb = model.disturbance_box();
    const Vector w0 = model.zero_disturbance();

    const bool trivial_w = (wb.upper - wb.lower).cwiseAbs().maxCoeff() == 0.0 && wb.upper.cwiseAbs().maxCoeff() == 0.0;
    if (!trivial_w && wb.dim() > 0) {
        RandomStream rng(seed, 1);
        int used = 0;
        for (int s = 0; s < samples; ++s) {
            const Vector x = rng.uniform_in(xb);
            const Vector u = rng.uniform_in(ub);
            const Vector w = rng.uniform_in(wb);
            const double wn = w.norm();
            if (wn == 0.0) continue;
            ++used;
            out.L_f = std::max(out.L_f, (step(model, x, u, w) - step(model, x, u, w0)).norm() / wn);
        }
        if (used == 0) throw InputError("estimate_delta: every disturbance sample was zero");
    }

    RandomStream rng(seed, 2);
    const double diameter = (xb.upper - xb.lower).norm();
    std::vector<Vector> u_seq(static_cast<std::size_t>(horizon));
    for (int s = 0; s < samples; ++s) {
        for (auto& u : u_seq) u = rng.uniform_in(ub);
        const Vector x1 = rng.uniform_in(xb);
        Vector dir(x1.size());
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = 2.0 * rng.uniform() - 1.0;
        if (dir.norm() == 0.0) continue;
        const Vector x2 = xb.clamp(x1 + (0.01 * diameter * (0.1 + rng.uniform())) * dir.normalized());
        const double dx = (x1 - x2).norm();
        if (dx == 0.0) continue;
        const Vector e1 = simulate_open_loop(model, x1, u_seq).back();
        const Vector e2 = simulate_open_loop(model, x2, u_seq).back();
        out.L_s = std::max(out.L_s, std::abs(ingredients.vs(e1) - ingredients.vs(e2)) / dx);
    }

    // Fitted decrease rate on the terminal set.
    double c2 = kInf;
    for (const Vector& x : sample_terminal_set(ingredients.P_tilde, ingredients.tau, ingredients.x_s,
                                               model.state_box(), samples, seed)) {
        const double d2 = (x - ingredients.x_s).squaredNorm();
        if (d2 < 1e-12) continue;
        const Vector next = step(model, x, ub.clamp(ingredients.terminal_law(x)), w0);
        c2 = std::min(c2, (ingredients.vs(x) - ingredients.vs(next)) / d2);
    }
    out.c2 = std::isfinite(c2) ? c2 : 0.0;
    out.lambda_max = largest_eigenvalue(ingredients.P_tilde);
    out.delta = delta_from_constants(out.tau, out.L_f, out.L_s, out.c2, out.lambda_max);
    return out;
}

std::string check_ingredient_invariants(const TerminalIngredients& ing) {
    const Matrix a_k = ing.closed_loop_matrix();
    if (!is_positive_definite(ing.P_tilde)) return "P~ is not positive definite";
    if (!is_schur(a_k)) return "A + BK is not Schur stable";
    if (dlyap_residual(a_k, ing.P_tilde, ing.Q_tilde) > 1e-10 * std::max(1.0, inf_norm(ing.Q_tilde))) {
        return "Lyapunov residual of P~ exceeds 1e-10";
    }
    const double p_res = ing.form == TerminalCostForm::TransposedHalf
                             ? dlyap_residual(a_k.transpose(), ing.P, 0.5 * ing.Q)
                             : dlyap_residual(a_k, ing.P, ing.Q);
    if (p_res > 1e-10 * std::max(1.0, inf_norm(ing.Q))) return "Lyapunov residual of P exceeds 1e-10";
    const Eigen::Index n = a_k.rows();
    const double lin_res = ((Matrix::Identity(n, n) - a_k.transpose()) * ing.p - ing.q).cwiseAbs().maxCoeff();
    if (lin_res > 1e-10 * std::max(1.0, ing.q.cwiseAbs().maxCoeff())) return "p does not satisfy p' = q'(I - A_K)^-1";
    return {};
}

SynthesisResult synthesize(const PlantModel& model, const StageCost& cost, const Equilibrium& eq,
                           const SynthesisOptions& options) {
    const auto stage = [](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const SynthesisError&) {
            throw;
        } catch (const Error& e) {
            throw SynthesisError(name, e.what());
        }
    };

    stage("equilibrium", [&] {
        check_equilibrium(model, eq);
        return 0;
    });

    SynthesisResult result;
    TerminalIngredients& ing = result.ingredients;
    ing.x_s = eq.x_s;
    ing.u_s = eq.u_s;
    ing.form = options.form;

    stage("linearize", [&] {
        const LinearPair cont = linearize(model, eq.x_s, eq.u_s);
        const LinearPair disc = discretize(cont.A, cont.B, model.sample_time());
        ing.A = disc.A;
        ing.B = disc.B;
        return 0;
    });

    const int n = model.state_dim();
    const int m = model.input_dim();
    ing.K = stage("gain", [&]() -> Matrix {
        if (options.K) {
            if (options.K->rows() != m || options.K->cols() != n) throw InputError("K must be m x n");
            return *options.K;
        }
        const Matrix q = options.lqr_Q.size() ? options.lqr_Q : Matrix(Matrix::Identity(n, n));
        const Matrix r = options.lqr_R.size() ? options.lqr_R : Matrix(Matrix::Identity(m, m));
        return solve_dlqr(ing.A, ing.B, q, r);
    });

    ing.Q_tilde = options.Q_tilde ? *options.Q_tilde : Matrix(Matrix::Identity(n, n));
    ing.P_tilde = stage("build_vs", [&] { return build_vs(ing.closed_loop_matrix(), ing.Q_tilde); });
    ing.tau = stage("choose_tau", [&] {
        return choose_tau(ing.P_tilde, model, cost, eq, ing.K, options.tau_mode, options.grid_density, options.seed);
    });
    ing.Q = stage("hessian_bound_Q", [&] {
        const auto samples = sample_terminal_set(ing.P_tilde, ing.tau, eq.x_s, model.state_box(),
                                                 options.hessian_samples, options.seed);
        return hessian_bound_Q(cost, eq, ing.K, samples);
    });
    stage("build_ve", [&] {
        ing.q = reduced_cost_gradient(cost, eq, ing.K);
        TerminalCostTerms terms = build_ve(ing.closed_loop_matrix(), ing.Q, ing.q, options.form);
        ing.P = std::move(terms.P);
        ing.p = std::move(terms.p);
        return 0;
    });
    ing.mu = stage("select_mu", [&] {
        return select_mu(ing, model, cost, options.mu_schedule, options.grid_density, options.seed);
    });
    result.report = stage("verify", [&] {
        return verify_terminal_conditions(model, cost, ing, options.grid_density, options.seed);
    });
    result.delta = stage("estimate_delta", [&] {
        return estimate_delta(model, ing, options.horizon, options.delta_samples, options.seed);
    });
    return result;
}

}  // namespace empc
