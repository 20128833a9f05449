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
#ifndef EMPC_STAGE_COST_HPP
#define EMPC_STAGE_COST_HPP

#include "empc/types.hpp"

#include <functional>
#include <optional>
#include <string>

namespace empc {

/**
 * Softened economic stage cost
 *
 *     l(x, u) = l_e(x, u) + rho |u - u_ref|^2 + lambda max{g(x, u), 0}.
 *
 * l_e is the economic cost used for performance accounting. The optional
 * quadratic input regularization (rho) turns an economic cost into a
 * dissipative one without changing l_e. g <= 0 describes the desired
 * constraint set; when no g is given the penalty is never active.
 */
class StageCost {
public:
    using Fn = std::function<double(const Vector& x, const Vector& u)>;
    using GradFn = std::function<void(const Vector& x, const Vector& u, Vector& gx, Vector& gu)>;

    struct Term {
        Fn value;
        GradFn gradient;  ///< optional; central differences when empty
        std::string text;  ///< source expression, empty for native functions
    };

    StageCost(int state_dim, int input_dim, Term economic, std::optional<Term> constraint = std::nullopt,
              double penalty_weight = 1e3);

    /// Parses expressions over x1.., u1...
    static StageCost from_expressions(int state_dim, int input_dim, const std::string& economic,
                                      const std::optional<std::string>& constraint, double penalty_weight);

    /// Adds rho |u - u_ref|^2.
    StageCost with_regularization(double rho, const Vector& u_ref) const;

    int state_dim() const { return n_; }
    int input_dim() const { return m_; }
    double penalty_weight() const { return lambda_; }
    double regularization_weight() const { return rho_; }
    const Vector& regularization_reference() const { return u_ref_; }
    bool has_constraint() const { return constraint_.has_value(); }
    const Term& economic_term() const { return economic_; }
    const std::optional<Term>& constraint_term() const { return constraint_; }

    /// Full stage cost l(x, u).
    double operator()(const Vector& x, const Vector& u) const;
    double economic(const Vector& x, const Vector& u) const;
    /// g(x, u); -inf without a constraint.
    double constraint(const Vector& x, const Vector& u) const;

    /// Gradient of l. At g == 0 the penalty contributes kink_weight in
    /// [0, 1] times lambda grad g (a subgradient selection).
    void gradient(const Vector& x, const Vector& u, Vector& gx, Vector& gu, double kink_weight = 0.0) const;
    void constraint_gradient(const Vector& x, const Vector& u, Vector& gx, Vector& gu) const;

private:
    static void term_gradient(const Term& t, const Vector& x, const Vector& u, Vector& gx, Vector& gu);

    int n_;
    int m_;
    Term economic_;
    std::optional<Term> constraint_;
    double lambda_;
    double rho_ = 0.0;
    Vector u_ref_;
};

}  // namespace empc

#endif  // EMPC_STAGE_COST_HPP
