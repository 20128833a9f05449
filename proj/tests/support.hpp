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
#ifndef EMPC_TESTS_SUPPORT_HPP
#define EMPC_TESTS_SUPPORT_HPP

#include "empc/closed_loop.hpp"
#include "empc/terminal.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace empc::testing {

inline const char* kEconomic = "-2*u1*x2 - 0.5*u1 - 8*x2 - 2";

inline StageCost cstr_economic_cost() { return StageCost::from_expressions(2, 1, kEconomic, std::nullopt, 1e3); }

// 0.1 (q_f - 4)^2 on top of the economic cost.
inline StageCost cstr_dissipative_cost() { return cstr_economic_cost().with_regularization(0.1, Vector::Zero(1)); }

inline Matrix cstr_gain() {
    Matrix k(1, 2);
    k << -0.012, -0.037;
    return k;
}

inline SynthesisOptions cstr_options() {
    SynthesisOptions o;
    o.K = cstr_gain();
    return o;
}

inline SynthesisResult synthesize_cstr(const StageCost& cost) {
    return synthesize(make_cstr_model(), cost, cstr_equilibrium(), cstr_options());
}

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

inline Matrix mat(int rows, int cols, std::initializer_list<double> v) {
    Matrix m(rows, cols);
    auto it = v.begin();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = *it++;
    return m;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

// Oracles. None of these call into the library's solvers.

// P = sum_k (A')^k Q A^k, truncated once the term is negligible.
inline Matrix dlyap_series(const Matrix& a, const Matrix& q) {
    Matrix p = q;
    Matrix term = q;
    for (int k = 0; k < 100000; ++k) {
        term = a.transpose() * term * a;
        p += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18 * std::max(1.0, p.cwiseAbs().maxCoeff())) break;
    }
    return p;
}

// Plain Taylor series, fine for |M| <= 1.
inline Matrix expm_series(const Matrix& m) {
    Matrix out = Matrix::Identity(m.rows(), m.cols());
    Matrix term = out;
    for (int k = 1; k < 60; ++k) {
        term = term * m / static_cast<double>(k);
        out += term;
    }
    return out;
}

// Central differences of a scalar function of a vector.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector a = x, b = x;
        a[i] += h;
        b[i] -= h;
        g[i] = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

inline Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-4) {
    const Eigen::Index n = x.size();
    Matrix hm(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            Vector pp = x, pm = x, mp = x, mm = x;
            pp[i] += h, pp[j] += h;
            pm[i] += h, pm[j] -= h;
            mp[i] -= h, mp[j] += h;
            mm[i] -= h, mm[j] -= h;
            hm(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h);
        }
    }
    return hm;
}

// Golden-section minimizer on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-10) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d, d = c, fd = fc;
            c = b - r * (b - a), fc = f(c);
        } else {
            a = c, c = d, fc = fd;
            d = a + r * (b - a), fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace empc::testing

#endif  // EMPC_TESTS_SUPPORT_HPP
