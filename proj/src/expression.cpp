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
#include "empc/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace empc {

struct Expression::Node {
    enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Log, Sqrt };

    Op op = Op::Const;
    double value = 0.0;
    Variable var{};
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace {

using Op = Expression::Node::Op;
using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make_const(double v) {
    auto n = std::make_shared<Expression::Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
}

NodePtr make_var(Variable v) {
    auto n = std::make_shared<Expression::Node>();
    n->op = Op::Var;
    n->var = v;
    return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

double eval(const Expression::Node& n, const Vector& x, const Vector& u, const Vector& w);

NodePtr make(Op op, NodePtr a, NodePtr b = nullptr) {
    // Constant folding and the identities needed to keep derivatives small.
    if (a->op == Op::Const && (!b || b->op == Op::Const)) {
        Expression::Node tmp;
        tmp.op = op;
        tmp.lhs = a;
        tmp.rhs = b;
        static const Vector empty;
        return make_const(eval(tmp, empty, empty, empty));
    }
    switch (op) {
        case Op::Add:
            if (is_const(a, 0.0)) return b;
            if (is_const(b, 0.0)) return a;
            break;
        case Op::Sub:
            if (is_const(b, 0.0)) return a;
            if (is_const(a, 0.0)) return make(Op::Neg, b);
            break;
        case Op::Mul:
            if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
            if (is_const(a, 1.0)) return b;
            if (is_const(b, 1.0)) return a;
            break;
        case Op::Div:
            if (is_const(a, 0.0)) return make_const(0.0);
            if (is_const(b, 1.0)) return a;
            break;
        case Op::Pow:
            if (is_const(b, 0.0)) return make_const(1.0);
            if (is_const(b, 1.0)) return a;
            break;
        case Op::Neg:
            if (a->op == Op::Neg) return a->lhs;
            break;
        default:
            break;
    }
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

double eval(const Expression::Node& n, const Vector& x, const Vector& u, const Vector& w) {
    switch (n.op) {
        case Op::Const:
            return n.value;
        case Op::Var:
            switch (n.var.kind) {
                case Variable::Kind::State:
                    return x[n.var.index];
                case Variable::Kind::Input:
                    return u[n.var.index];
                case Variable::Kind::Disturbance:
                    return w[n.var.index];
            }
            return 0.0;
        case Op::Add:
            return eval(*n.lhs, x, u, w) + eval(*n.rhs, x, u, w);
        case Op::Sub:
            return eval(*n.lhs, x, u, w) - eval(*n.rhs, x, u, w);
        case Op::Mul:
            return eval(*n.lhs, x, u, w) * eval(*n.rhs, x, u, w);
        case Op::Div:
            return eval(*n.lhs, x, u, w) / eval(*n.rhs, x, u, w);
        case Op::Pow: {
            const double base = eval(*n.lhs, x, u, w);
            if (n.rhs->op == Op::Const && n.rhs->value == 2.0) return base * base;
            return std::pow(base, eval(*n.rhs, x, u, w));
        }
        case Op::Neg:
            return -eval(*n.lhs, x, u, w);
        case Op::Exp:
            return std::exp(eval(*n.lhs, x, u, w));
        case Op::Log:
            return std::log(eval(*n.lhs, x, u, w));
        case Op::Sqrt:
            return std::sqrt(eval(*n.lhs, x, u, w));
    }
    return 0.0;
}

NodePtr differentiate(const NodePtr& n, Variable v) {
    const auto d = [&](const NodePtr& c) { return differentiate(c, v); };
    switch (n->op) {
        case Op::Const:
            return make_const(0.0);
        case Op::Var:
            return make_const(n->var == v ? 1.0 : 0.0);
        case Op::Add:
            return make(Op::Add, d(n->lhs), d(n->rhs));
        case Op::Sub:
            return make(Op::Sub, d(n->lhs), d(n->rhs));
        case Op::Mul:
            return make(Op::Add, make(Op::Mul, d(n->lhs), n->rhs), make(Op::Mul, n->lhs, d(n->rhs)));
        case Op::Div:
            // (a'b - ab') / b^2
            return make(Op::Div,
                        make(Op::Sub, make(Op::Mul, d(n->lhs), n->rhs), make(Op::Mul, n->lhs, d(n->rhs))),
                        make(Op::Pow, n->rhs, make_const(2.0)));
        case Op::Pow: {
            if (n->rhs->op == Op::Const) {
                const double c = n->rhs->value;
                return make(Op::Mul, make(Op::Mul, make_const(c), make(Op::Pow, n->lhs, make_const(c - 1.0))),
                            d(n->lhs));
            }
            // a^b (b' log a + b a'/a)
            return make(Op::Mul, n,
                        make(Op::Add, make(Op::Mul, d(n->rhs), make(Op::Log, n->lhs)),
                             make(Op::Div, make(Op::Mul, n->rhs, d(n->lhs)), n->lhs)));
        }
        case Op::Neg:
            return make(Op::Neg, d(n->lhs));
        case Op::Exp:
            return make(Op::Mul, n, d(n->lhs));
        case Op::Log:
            return make(Op::Div, d(n->lhs), n->lhs);
        case Op::Sqrt:
            return make(Op::Div, d(n->lhs), make(Op::Mul, make_const(2.0), n));
    }
    return make_const(0.0);
}

void print(const Expression::Node& n, std::ostringstream& os) {
    const auto binary = [&](const char* sym) {
        os << '(';
        print(*n.lhs, os);
        os << ' ' << sym << ' ';
        print(*n.rhs, os);
        os << ')';
    };
    const auto call = [&](const char* name) {
        os << name << '(';
        print(*n.lhs, os);
        os << ')';
    };
    switch (n.op) {
        case Op::Const:
            if (n.value < 0) {
                os << "(-" << -n.value << ')';
            } else {
                os << n.value;
            }
            return;
        case Op::Var: {
            const char prefix = n.var.kind == Variable::Kind::State   ? 'x'
                                : n.var.kind == Variable::Kind::Input ? 'u'
                                                                      : 'w';
            os << prefix << n.var.index + 1;
            return;
        }
        case Op::Add:
            return binary("+");
        case Op::Sub:
            return binary("-");
        case Op::Mul:
            return binary("*");
        case Op::Div:
            return binary("/");
        case Op::Pow:
            return binary("^");
        case Op::Neg:
            os << "(-";
            print(*n.lhs, os);
            os << ')';
            return;
        case Op::Exp:
            return call("exp");
        case Op::Log:
            return call("log");
        case Op::Sqrt:
            return call("sqrt");
    }
}

class Parser {
public:
    Parser(std::string_view text, const VariableLayout& layout) : text_(text), layout_(layout) {}

    NodePtr parse() {
        auto n = expression();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw InputError("expression \"" + std::string(text_) + "\", column " + std::to_string(pos_ + 1) + ": " +
                         msg);
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expression() {
        auto lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = make(Op::Add, lhs, term());
            } else if (accept('-')) {
                lhs = make(Op::Sub, lhs, term());
            } else {
                return lhs;
            }
        }
    }

    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = make(Op::Mul, lhs, unary());
            } else if (accept('/')) {
                lhs = make(Op::Div, lhs, unary());
            } else {
                return lhs;
            }
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Op::Neg, unary());
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        auto base = primary();
        if (accept('^')) return make(Op::Pow, base, unary());
        return base;
    }

    NodePtr primary() {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = expression();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    NodePtr number() {
        const std::string rest(text_.substr(pos_));
        char* end = nullptr;
        const double v = std::strtod(rest.c_str(), &end);
        if (end == rest.c_str()) fail("malformed number");
        pos_ += static_cast<std::size_t>(end - rest.c_str());
        return make_const(v);
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        const std::string name(text_.substr(start, pos_ - start));
        if (name == "exp" || name == "log" || name == "sqrt") {
            if (!accept('(')) fail("expected '(' after " + name);
            auto arg = expression();
            if (!accept(')')) fail("expected ')'");
            const Op op = name == "exp" ? Op::Exp : name == "log" ? Op::Log : Op::Sqrt;
            return make(op, arg);
        }
        if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'u' || name[0] == 'w')) {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i) digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
            if (digits) {
                const int index = std::stoi(name.substr(1)) - 1;
                Variable v;
                int limit = 0;
                switch (name[0]) {
                    case 'x':
                        v.kind = Variable::Kind::State;
                        limit = layout_.states;
                        break;
                    case 'u':
                        v.kind = Variable::Kind::Input;
                        limit = layout_.inputs;
                        break;
                    default:
                        v.kind = Variable::Kind::Disturbance;
                        limit = layout_.disturbances;
                        break;
                }
                if (index < 0 || index >= limit) {
                    pos_ = start;
                    fail("variable '" + name + "' out of range (dimension " + std::to_string(limit) + ")");
                }
                v.index = index;
                return make_var(v);
            }
        }
        pos_ = start;
        fail("unknown identifier '" + name + "'");
    }

    std::string_view text_;
    VariableLayout layout_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression() : node_(make_const(0.0)) {}

Expression Expression::parse(std::string_view text, const VariableLayout& layout) {
    return Expression(Parser(text, layout).parse());
}

Expression Expression::constant(double value) { return Expression(make_const(value)); }

Expression Expression::variable(Variable v) { return Expression(make_var(v)); }

double Expression::evaluate(const Vector& x, const Vector& u, const Vector& w) const {
    return eval(*node_, x, u, w);
}

Expression Expression::derivative(Variable v) const { return Expression(differentiate(node_, v)); }

std::string Expression::to_string() const {
    std::ostringstream os;
    os.precision(17);
    print(*node_, os);
    return os.str();
}

bool Expression::is_constant() const { return node_->op == Op::Const; }

Expression operator+(const Expression& a, const Expression& b) { return Expression(make(Op::Add, a.node_, b.node_)); }
Expression operator-(const Expression& a, const Expression& b) { return Expression(make(Op::Sub, a.node_, b.node_)); }
Expression operator*(const Expression& a, const Expression& b) { return Expression(make(Op::Mul, a.node_, b.node_)); }
Expression operator/(const Expression& a, const Expression& b) { return Expression(make(Op::Div, a.node_, b.node_)); }
Expression operator-(const Expression& a) { return Expression(make(Op::Neg, a.node_)); }

}  // namespace empc
