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
#ifndef EMPC_LINALG_HPP
#define EMPC_LINALG_HPP

#include "empc/types.hpp"

namespace empc {

/// Returns (M + M') / 2.
Matrix symmetrize(const Matrix& m);

/// max |A'PA - P + Q| entrywise.
double dlyap_residual(const Matrix& a, const Matrix& p, const Matrix& q);

/**
 * Solves A'PA - P + Q = 0 for symmetric P.
 *
 * The equation is vectorized with the Kronecker identity and the n^2 x n^2
 * system (I - A'(x)A') vec P = vec Q is solved with partial pivoting, so it
 * is only meant for small n. The returned P is symmetrized and satisfies
 * dlyap_residual <= 1e-10 max(1, |Q|_inf).
 *
 * Throws NotSchurAdmissible when I - A (x) A is numerically singular.
 */
Matrix solve_dlyap(const Matrix& a, const Matrix& q);

/// Schur stability through the Lyapunov characterization: true iff
/// solve_dlyap(A, I) succeeds and yields a positive definite P.
bool is_schur(const Matrix& a);

/// Cholesky test with pivot threshold 1e-12 trace(M) / n.
bool is_positive_definite(const Matrix& m);

/// Largest algebraic eigenvalue of a symmetric matrix by shifted power
/// iteration.
double largest_eigenvalue(const Matrix& m, int max_iterations = 10000, double tol = 1e-14);

/**
 * Discrete LQR gain with the convention u = Kx.
 *
 * Iterates the Riccati map from P = Q until successive iterates differ by
 * at most 1e-12 (relative to max(1, |P|)), then returns
 * K = -(R + B'PB)^{-1} B'PA. Throws NumericalError("not stabilizable
 * within iteration budget") after 1e5 iterations or on divergence.
 */
Matrix solve_dlqr(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r);

}  // namespace empc

#endif  // EMPC_LINALG_HPP
