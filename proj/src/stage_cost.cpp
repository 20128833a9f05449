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
#include "empc/stage_cost.hpp"

#include "empc/expression.hpp"

#include <cmath>
#include <limits>

namespace empc {

namespace {

StageCost::Term expression_term(const std::string& text, int n, int m) {
    const VariableLayout layout{n, m, 0};
    const Expression e = Expression::parse(text, layout);
    std::vector<Expression> dx;
    std::vector<Expression> du;
    for (int i = 0; i < n; ++i) dx.push_back(e.derivative({Variable::Kind::State, i}));
    for (int i = 0; i < m; ++i) du.push_back(e.derivative({Variable::Kind::Input, i}));
    StageCost::Term t;
    t.text = text;
    t.value = [e](const Vector& x, const Vector& u) { return e.evaluate(x, u, Vector()); };
    t.gradient = [dx, du](const Vector& x, const Vector& u, Vector& gx, Vector& gu) {
        gx.resize(static_cast<Eigen::Index>(dx.size()));
        gu.resize(static_cast<Eigen::Index>(du.size()));
        const Vector w;
        for (std::size_t i = 0; i < dx.size(); ++i) gx[static_cast<Eigen::Index>(i)] = dx[i].evaluate(x, u, w);
        for (std::size_t i = 0; i < du.size(); ++i) gu[static_cast<Eigen::Index>(i)] = du[i].evaluate(x, u, w);
    };
    return t;
}

}  // namespace

StageCost::StageCost(int state_dim, int input_dim, Term economic, std::optional<Term> constraint,
                     double penalty_weight)
    : n_(state_dim),
      m_(input_dim),
      economic_(std::move(economic)),
      constraint_(std::move(constraint)),
      lambda_(penalty_weight),
      u_ref_(Vector::Zero(input_dim)) {
    if (!economic_.value) throw InputError("stage cost needs an economic term");
    if (constraint_ && !constraint_->value) throw InputError("constraint term has no value function");
    if (!(penalty_weight > 0.0)) throw InputError("penalty weight lambda must be positive");
}

StageCost StageCost::from_expressions(int state_dim, int input_dim, const std::string& economic,
                                      const std::optional<std::string>& constraint, double penalty_weight) {
    std::optional<Term> g;
    if (constraint) g = expression_term(*constraint, state_dim, input_dim);
    return StageCost(state_dim, input_dim, expression_term(economic, state_dim, input_dim), std::move(g),
                     penalty_weight);
}

StageCost StageCost::with_regularization(double rho, const Vector& u_ref) const {
    if (!(rho >= 0.0)) throw InputError("regularization weight must be nonnegative");
    if (u_ref.size() != m_) throw InputError("regularization reference has the wrong dimension");
    StageCost copy = *this;
    copy.rho_ = rho;
    copy.u_ref_ = u_ref;
    return copy;
}

double StageCost::economic(const Vector& x, const Vector& u) const { return economic_.value(x, u); }

double StageCost::constraint(const Vector& x, const Vector& u) const {
    if (!constraint_) return -std::numeric_limits<double>::infinity();
    return constraint_->value(x, u);
}

double StageCost::operator()(const Vector& x, const Vector& u) const {
    double l = economic_.value(x, u);
    if (rho_ != 0.0) l += rho_ * (u - u_ref_).squaredNorm();
    if (constraint_) l += lambda_ * std::max(constraint_->value(x, u), 0.0);
    return l;
}

void StageCost::term_gradient(const Term& t, const Vector& x, const Vector& u, Vector& gx, Vector& gu) {
    if (t.gradient) {
        t.gradient(x, u, gx, gu);
        return;
    }
    gx.resize(x.size());
    gu.resize(u.size());
    Vector xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * (1.0 + std::abs(x[i]));
        xp[i] = x[i] + h;
        const double fp = t.value(xp, u);
        xp[i] = x[i] - h;
        const double fm = t.value(xp, u);
        xp[i] = x[i];
        gx[i] = (fp - fm) / (2.0 * h);
    }
    Vector up = u;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double h = 1e-6 * (1.0 + std::abs(u[i]));
        up[i] = u[i] + h;
        const double fp = t.value(x, up);
        up[i] = u[i] - h;
        const double fm = t.value(x, up);
        up[i] = u[i];
        gu[i] = (fp - fm) / (2.0 * h);
    }
}

void StageCost::gradient(const Vector& x, const Vector& u, Vector& gx, Vector& gu, double kink_weight) const {
    term_gradient(economic_, x, u, gx, gu);
    if (rho_ != 0.0) gu += 2.0 * rho_ * (u - u_ref_);
    if (constraint_) {
        const double g = constraint_->value(x, u);
        const double weight = g > 0.0 ? 1.0 : (g == 0.0 ? kink_weight : 0.0);
        if (weight != 0.0) {
            Vector cx;
            Vector cu;
            term_gradient(*constraint_, x, u, cx, cu);
            gx += lambda_ * weight * cx;
            gu += lambda_ * weight * cu;
        }
    }
}

void StageCost::constraint_gradient(const Vector& x, const Vector& u, Vector& gx, Vector& gu) const {
    if (!constraint_) {
        gx = Vector::Zero(n_);
        gu = Vector::Zero(m_);
        return;
    }
    term_gradient(*constraint_, x, u, gx, gu);
}

}  // namespace empc
