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
#ifndef EMPC_EXPRESSION_HPP
#define EMPC_EXPRESSION_HPP

#include "empc/types.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace empc {

/// Variable reference inside an expression: x1.., u1.., w1.. (1-based in
/// text, 0-based here).
struct Variable {
    enum class Kind { State, Input, Disturbance };
    Kind kind = Kind::State;
    int index = 0;

    friend bool operator==(const Variable&, const Variable&) = default;
};

/// Upper bounds on variable indices accepted by the parser.
struct VariableLayout {
    int states = 0;
    int inputs = 0;
    int disturbances = 0;
};

/**
 * Immutable arithmetic expression over x, u and w.
 *
 * Grammar: numbers, variables x<i>/u<i>/w<i>, binary + - * / ^, unary minus,
 * parentheses and the functions exp, log, sqrt. `^` is right associative and
 * binds tighter than unary minus, so `-x1^2 == -(x1^2)`.
 *
 * Expressions can be differentiated symbolically; the result is again an
 * Expression, so rhs Jacobians and cost gradients built from configuration
 * text are exact.
 */
class Expression {
public:
    struct Node;

    /// Constant zero.
    Expression();

    static Expression parse(std::string_view text, const VariableLayout& layout);
    static Expression constant(double value);
    static Expression variable(Variable v);

    double evaluate(const Vector& x, const Vector& u, const Vector& w) const;

    Expression derivative(Variable v) const;

    /// Canonical fully parenthesized text; parse(to_string()) is equivalent.
    std::string to_string() const;

    bool is_constant() const;

    friend Expression operator+(const Expression& a, const Expression& b);
    friend Expression operator-(const Expression& a, const Expression& b);
    friend Expression operator*(const Expression& a, const Expression& b);
    friend Expression operator/(const Expression& a, const Expression& b);
    friend Expression operator-(const Expression& a);

private:
    explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    std::shared_ptr<const Node> node_;
};

}  // namespace empc

#endif  // EMPC_EXPRESSION_HPP
