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
#include "empc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace empc {

namespace {

void require_dim(const Vector& v, int expected, const char* what) {
    if (v.size() != expected) {
        throw InputError(std::string(what) + " has dimension " + std::to_string(v.size()) + ", expected " +
                         std::to_string(expected));
    }
}

void require_finite(const Vector& v, const char* what) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw NumericalError(std::string(what) + ": non-finite value in coordinate " + std::to_string(i),
                                 static_cast<int>(i));
        }
    }
}

void require_input_in_box(const Box& box, const Vector& u) {
    for (int i = 0; i < box.dim(); ++i) {
        const double slack_lo = 1e-9 * (1.0 + std::abs(box.lower[i]));
        const double slack_hi = 1e-9 * (1.0 + std::abs(box.upper[i]));
        if (u[i] < box.lower[i] - slack_lo || u[i] > box.upper[i] + slack_hi) {
            throw InputError("input coordinate " + std::to_string(i) + " = " + std::to_string(u[i]) +
                             " outside the input box");
        }
    }
}

}  // namespace

Box::Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw InputError("box bounds have different dimensions");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i]) {
            throw InputError("box coordinate " + std::to_string(i) + " has lower > upper");
        }
    }
}

bool Box::is_bounded() const { return lower.allFinite() && upper.allFinite(); }

bool Box::contains(const Vector& v, double tol) const {
    for (int i = 0; i < dim(); ++i) {
        if (v[i] < lower[i] - tol || v[i] > upper[i] + tol) return false;
    }
    return true;
}

Vector Box::clamp(const Vector& v) const { return v.cwiseMax(lower).cwiseMin(upper); }

double Box::interior_margin(const Vector& v) const {
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim(); ++i) margin = std::min({margin, v[i] - lower[i], upper[i] - v[i]});
    return margin;
}

std::vector<Vector> Box::vertices() const {
    if (!is_bounded()) throw InputError("vertices of an unbounded box");
    const int n = dim();
    std::vector<Vector> out;
    out.reserve(std::size_t{1} << n);
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = (mask >> i) & 1u ? upper[i] : lower[i];
        out.push_back(std::move(v));
    }
    return out;
}

Box Box::scaled(double factor) const {
    if (!(factor >= 0.0)) throw InputError("box scale factor must be nonnegative");
    // +0.0 turns -0.0 into +0.0 so a zero-width box prints as 0.
    Vector lo = (factor * lower).array() + 0.0;
    Vector hi = (factor * upper).array() + 0.0;
    return Box(std::move(lo), std::move(hi));
}

PlantModel::PlantModel(std::string name, Rhs rhs, Box state_box, Box input_box, Box disturbance_box,
                       double sample_time, int substeps, RhsJacobian jacobian)
    : name_(std::move(name)),
      rhs_(std::move(rhs)),
      jacobian_(std::move(jacobian)),
      state_box_(std::move(state_box)),
      input_box_(std::move(input_box)),
      disturbance_box_(std::move(disturbance_box)),
      sample_time_(sample_time),
      substeps_(substeps) {
    if (!rhs_) throw InputError("model '" + name_ + "' has no right-hand side");
    if (state_dim() < 1) throw InputError("model '" + name_ + "' needs at least one state");
    if (!input_box_.is_bounded()) throw InputError("model '" + name_ + "': input box must be compact");
    if (!disturbance_box_.is_bounded()) throw InputError("model '" + name_ + "': disturbance box must be bounded");
    if (!(sample_time_ > 0.0) || !std::isfinite(sample_time_)) {
        throw InputError("model '" + name_ + "': sample time must be positive");
    }
    if (substeps_ < 1) throw InputError("model '" + name_ + "': substeps must be >= 1");
}

void PlantModel::rhs_jacobian(const Vector& x, const Vector& u, const Vector& w, Matrix& jx, Matrix& ju) const {
    const int n = state_dim();
    const int m = input_dim();
    jx.resize(n, n);
    ju.resize(n, m);
    if (jacobian_) {
        jacobian_(x, u, w, jx, ju);
        return;
    }
    Vector xp = x;
    for (int j = 0; j < n; ++j) {
        const double h = 1e-6 * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + h;
        const Vector fp = rhs_(xp, u, w);
        xp[j] = x[j] - h;
        const Vector fm = rhs_(xp, u, w);
        xp[j] = x[j];
        jx.col(j) = (fp - fm) / (2.0 * h);
    }
    Vector up = u;
    for (int j = 0; j < m; ++j) {
        const double h = 1e-6 * (1.0 + std::abs(u[j]));
        up[j] = u[j] + h;
        const Vector fp = rhs_(x, up, w);
        up[j] = u[j] - h;
        const Vector fm = rhs_(x, up, w);
        up[j] = u[j];
        ju.col(j) = (fp - fm) / (2.0 * h);
    }
}

PlantModel PlantModel::with_disturbance_box(Box box) const {
    PlantModel copy = *this;
    if (box.dim() != disturbance_dim()) throw InputError("disturbance box dimension mismatch");
    copy.disturbance_box_ = std::move(box);
    return copy;
}

PlantModel PlantModel::with_substeps(int substeps) const {
    if (substeps < 1) throw InputError("substeps must be >= 1");
    PlantModel copy = *this;
    copy.substeps_ = substeps;
    return copy;
}

PlantModel PlantModel::with_sample_time(double sample_time) const {
    if (!(sample_time > 0.0) || !std::isfinite(sample_time)) throw InputError("sample time must be positive");
    PlantModel copy = *this;
    copy.sample_time_ = sample_time;
    return copy;
}

double equilibrium_residual(const PlantModel& model, const Equilibrium& eq) {
    return (step(model, eq.x_s, eq.u_s, model.zero_disturbance()) - eq.x_s).lpNorm<Eigen::Infinity>();
}

void check_equilibrium(const PlantModel& model, const Equilibrium& eq) {
    require_dim(eq.x_s, model.state_dim(), "equilibrium state");
    require_dim(eq.u_s, model.input_dim(), "equilibrium input");
    const double r = equilibrium_residual(model, eq);
    if (!(r <= eq.residual_tol)) {
        throw InputError("equilibrium residual " + std::to_string(r) + " exceeds tolerance " +
                         std::to_string(eq.residual_tol));
    }
}

Vector step(const PlantModel& model, const Vector& x, const Vector& u, const Vector& w) {
    require_dim(x, model.state_dim(), "state");
    require_dim(u, model.input_dim(), "input");
    require_dim(w, model.disturbance_dim(), "disturbance");
    require_input_in_box(model.input_box(), u);

    const double h = model.sample_time() / model.substeps();
    Vector y = x;
    for (int s = 0; s < model.substeps(); ++s) {
        const Vector k1 = model.rhs(y, u, w);
        const Vector k2 = model.rhs(y + 0.5 * h * k1, u, w);
        const Vector k3 = model.rhs(y + 0.5 * h * k2, u, w);
        const Vector k4 = model.rhs(y + h * k3, u, w);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    require_finite(y, "step");
    return y;
}

StepSensitivity step_with_sensitivity(const PlantModel& model, const Vector& x, const Vector& u,
                                      const Vector& w) {
    require_dim(x, model.state_dim(), "state");
    require_dim(u, model.input_dim(), "input");
    require_dim(w, model.disturbance_dim(), "disturbance");
    require_input_in_box(model.input_box(), u);

    const int n = model.state_dim();
    const int m = model.input_dim();
    const double h = model.sample_time() / model.substeps();

    Vector y = x;
    Matrix sx = Matrix::Identity(n, n);
    Matrix su = Matrix::Zero(n, m);
    Matrix jx;
    Matrix ju;

    // Differentiates one RK4 stage evaluated at y + c * k_prev.
    struct Stage {
        Vector k;
        Matrix dkx;
        Matrix dku;
    };
    const auto stage = [&](const Vector& ys, const Matrix& sxs, const Matrix& sus) {
        model.rhs_jacobian(ys, u, w, jx, ju);
        return Stage{model.rhs(ys, u, w), jx * sxs, jx * sus + ju};
    };

    for (int s = 0; s < model.substeps(); ++s) {
        const Stage s1 = stage(y, sx, su);
        const Stage s2 = stage(y + 0.5 * h * s1.k, sx + 0.5 * h * s1.dkx, su + 0.5 * h * s1.dku);
        const Stage s3 = stage(y + 0.5 * h * s2.k, sx + 0.5 * h * s2.dkx, su + 0.5 * h * s2.dku);
        const Stage s4 = stage(y + h * s3.k, sx + h * s3.dkx, su + h * s3.dku);
        y += (h / 6.0) * (s1.k + 2.0 * s2.k + 2.0 * s3.k + s4.k);
        sx += (h / 6.0) * (s1.dkx + 2.0 * s2.dkx + 2.0 * s3.dkx + s4.dkx);
        su += (h / 6.0) * (s1.dku + 2.0 * s2.dku + 2.0 * s3.dku + s4.dku);
    }
    require_finite(y, "step");
    return {std::move(y), std::move(sx), std::move(su)};
}

Trajectory simulate_open_loop(const PlantModel& model, const Vector& x0, std::span<const Vector> u_seq,
                              std::span<const Vector> w_seq) {
    if (u_seq.size() != w_seq.size()) {
        throw InputError("input and disturbance sequences differ in length (" + std::to_string(u_seq.size()) +
                         " vs " + std::to_string(w_seq.size()) + ")");
    }
    require_dim(x0, model.state_dim(), "initial state");
    require_finite(x0, "initial state");
    Trajectory out;
    out.reserve(u_seq.size() + 1);
    out.push_back(x0);
    for (std::size_t k = 0; k < u_seq.size(); ++k) {
        try {
            out.push_back(step(model, out.back(), u_seq[k], w_seq[k]));
        } catch (const NumericalError& e) {
            throw NumericalError("rollout step " + std::to_string(k) + ": " + e.what(), e.coordinate());
        } catch (const InputError& e) {
            throw InputError("rollout step " + std::to_string(k) + ": " + e.what());
        }
    }
    return out;
}

Trajectory simulate_open_loop(const PlantModel& model, const Vector& x0, std::span<const Vector> u_seq) {
    const std::vector<Vector> zeros(u_seq.size(), model.zero_disturbance());
    return simulate_open_loop(model, x0, u_seq, zeros);
}

LinearPair linearize(const PlantModel& model, const Vector& x, const Vector& u) {
    require_dim(x, model.state_dim(), "state");
    require_dim(u, model.input_dim(), "input");
    LinearPair out;
    model.rhs_jacobian(x, u, model.zero_disturbance(), out.A, out.B);
    if (!out.A.allFinite() || !out.B.allFinite()) throw NumericalError("linearization produced non-finite entries");
    return out;
}

Matrix expm(const Matrix& m) {
    if (m.rows() != m.cols()) throw InputError("expm of a non-square matrix");
    const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Matrix scaled = m / std::ldexp(1.0, squarings);

    const Eigen::Index n = m.rows();
    Matrix sum = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    for (int k = 1; k < 60; ++k) {
        term = term * scaled / static_cast<double>(k);
        sum += term;
        if (term.cwiseAbs().maxCoeff() <= 1e-14 * sum.cwiseAbs().maxCoeff()) break;
    }
    for (int i = 0; i < squarings; ++i) sum = sum * sum;
    if (!sum.allFinite()) throw NumericalError("matrix exponential overflowed");
    return sum;
}

LinearPair discretize(const Matrix& a_c, const Matrix& b_c, double dt) {
    if (!(dt > 0.0)) throw InputError("discretization step must be positive");
    if (a_c.rows() != a_c.cols() || b_c.rows() != a_c.rows()) throw InputError("discretize: dimension mismatch");
    const Eigen::Index n = a_c.rows();
    const Eigen::Index m = b_c.cols();
    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = a_c * dt;
    aug.topRightCorner(n, m) = b_c * dt;
    const Matrix e = expm(aug);
    return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

PlantModel make_cstr_model(double sample_time, int substeps) {
    auto rhs = [](const Vector& x, const Vector& u, const Vector& w) {
        const double ca = x[0] + 0.5;
        const double cb = x[1] + 0.5;
        const double qf = u[0] + 4.0;
        Vector dx(2);
        dx[0] = qf / 10.0 * (1.0 + w[0] - ca) - 0.4 * ca;
        dx[1] = -qf / 10.0 * cb + 0.4 * ca;
        return dx;
    };
    auto jac = [](const Vector& x, const Vector& u, const Vector& w, Matrix& jx, Matrix& ju) {
        const double ca = x[0] + 0.5;
        const double cb = x[1] + 0.5;
        const double qf = u[0] + 4.0;
        jx << -qf / 10.0 - 0.4, 0.0, 0.4, -qf / 10.0;
        ju << (1.0 + w[0] - ca) / 10.0, -cb / 10.0;
    };
    return PlantModel("cstr", rhs, Box(Vector::Constant(2, -0.5), Vector::Constant(2, 0.5)),
                      Box(Vector::Constant(1, -4.0), Vector::Constant(1, 6.0)),
                      Box(Vector::Constant(1, -0.2), Vector::Constant(1, 0.2)), sample_time, substeps, jac);
}

Equilibrium cstr_equilibrium() { return {Vector::Zero(2), Vector::Zero(1), 1e-9}; }

PlantModel make_expression_model(std::string name, const std::vector<std::string>& rhs, Box state_box,
                                 Box input_box, Box disturbance_box, double sample_time, int substeps) {
    const int n = state_box.dim();
    const int m = input_box.dim();
    const VariableLayout layout{n, m, disturbance_box.dim()};
    if (static_cast<int>(rhs.size()) != n) {
        throw InputError("model '" + name + "': " + std::to_string(rhs.size()) + " rhs expressions for " +
                         std::to_string(n) + " states");
    }
    std::vector<Expression> f;
    for (const auto& text : rhs) f.push_back(Expression::parse(text, layout));

    std::vector<Expression> dfdx(static_cast<std::size_t>(n * n));
    std::vector<Expression> dfdu(static_cast<std::size_t>(n * m));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) dfdx[i * n + j] = f[i].derivative({Variable::Kind::State, j});
        for (int j = 0; j < m; ++j) dfdu[i * m + j] = f[i].derivative({Variable::Kind::Input, j});
    }

    auto eval = [f](const Vector& x, const Vector& u, const Vector& w) {
        Vector out(static_cast<Eigen::Index>(f.size()));
        for (std::size_t i = 0; i < f.size(); ++i) out[static_cast<Eigen::Index>(i)] = f[i].evaluate(x, u, w);
        return out;
    };
    auto jac = [dfdx, dfdu, n, m](const Vector& x, const Vector& u, const Vector& w, Matrix& jx, Matrix& ju) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) jx(i, j) = dfdx[i * n + j].evaluate(x, u, w);
            for (int j = 0; j < m; ++j) ju(i, j) = dfdu[i * m + j].evaluate(x, u, w);
        }
    };
    return PlantModel(std::move(name), eval, std::move(state_box), std::move(input_box), std::move(disturbance_box),
                      sample_time, substeps, jac);
}

PlantModel preset_model(std::string_view name) {
    if (name == "cstr") return make_cstr_model();
    throw InputError("unknown model preset '" + std::string(name) + "'");
}

std::optional<Equilibrium> preset_equilibrium(std::string_view name) {
    if (name == "cstr") return cstr_equilibrium();
    return std::nullopt;
}

std::vector<std::string> preset_names() { return {"cstr"}; }

}  // namespace empc
