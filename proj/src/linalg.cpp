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
#include "empc/linalg.hpp"

#include <cmath>

namespace empc {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double dlyap_residual(const Matrix& a, const Matrix& p, const Matrix& q) {
    return (a.transpose() * p * a - p + q).cwiseAbs().maxCoeff();
}

Matrix solve_dlyap(const Matrix& a, const Matrix& q) {
    if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols()) {
        throw InputError("solve_dlyap: dimension mismatch");
    }
    if (!a.allFinite() || !q.allFinite()) throw NumericalError("solve_dlyap: non-finite input");
    const Eigen::Index n = a.rows();
    if (n == 0) return Matrix(0, 0);

    // vec(A' P A) = (A' (x) A') vec(P) for column-major vec.
    const Matrix at = a.transpose();
    Matrix kron(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = at(i, j) * at;
    }
    const Matrix system = Matrix::Identity(n * n, n * n) - kron;
    const Eigen::PartialPivLU<Matrix> lu(system);
    if (!(lu.rcond() > 1e-13)) {
        throw NotSchurAdmissible("not Schur-admissible: I - A (x) A is singular (rcond " + std::to_string(lu.rcond()) +
                                 ")");
    }
    const Vector rhs = Eigen::Map<const Vector>(q.data(), n * n);
    Vector sol = lu.solve(rhs);
    // One step of iterative refinement.
    sol += lu.solve(rhs - system * sol);
    Matrix p = symmetrize(Eigen::Map<const Matrix>(sol.data(), n, n));

    const double tol = 1e-10 * std::max(1.0, q.cwiseAbs().rowwise().sum().maxCoeff());
    const double res = dlyap_residual(a, p, q);
    if (!std::isfinite(res)) throw NumericalError("solve_dlyap: non-finite solution");
    if (res > tol) {
        throw NotSchurAdmissible("not Schur-admissible: Lyapunov residual " + std::to_string(res) +
                                 " exceeds tolerance");
    }
    return p;
}

bool is_positive_definite(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
    const Eigen::Index n = m.rows();
    const double trace = m.trace();
    if (!(trace > 0.0)) return false;
    const double threshold = 1e-12 * trace / static_cast<double>(n);

    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double pivot = m(j, j);
        for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
        if (!(pivot > threshold)) return false;
        l(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return true;
}

bool is_schur(const Matrix& a) {
    if (a.rows() != a.cols()) return false;
    try {
        return is_positive_definite(solve_dlyap(a, Matrix::Identity(a.rows(), a.cols())));
    } catch (const NumericalError&) {
        return false;
    }
}

double largest_eigenvalue(const Matrix& m, int max_iterations, double tol) {
    if (m.rows() != m.cols() || m.rows() == 0) throw InputError("largest_eigenvalue: need a square matrix");
    const Matrix s = symmetrize(m);
    const Eigen::Index n = s.rows();
    // Shift so every eigenvalue is >= 0; the dominant one is then the largest.
    const double shift = s.cwiseAbs().rowwise().sum().maxCoeff();
    if (shift == 0.0) return 0.0;
    const Matrix shifted = s + shift * Matrix::Identity(n, n);

    Vector v = Vector::Ones(n);
    // Break symmetry so the start vector is not orthogonal to the target.
    for (Eigen::Index i = 0; i < n; ++i) v[i] += 0.1 * static_cast<double>(i + 1);
    v.normalize();
    double lambda = v.dot(shifted * v);
    for (int it = 0; it < max_iterations; ++it) {
        Vector w = shifted * v;
        const double norm = w.norm();
        if (norm == 0.0) break;
        w /= norm;
        const double next = w.dot(shifted * w);
        v = std::move(w);
        if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda - shift;
}

Matrix solve_dlqr(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
    const Eigen::Index n = a.rows();
    const Eigen::Index m = b.cols();
    if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != m || r.cols() != m) {
        throw InputError("solve_dlqr: dimension mismatch");
    }
    if (!is_positive_definite(symmetrize(r))) throw InputError("solve_dlqr: R must be positive definite");

    Matrix p = symmetrize(q);
    for (int it = 0; it < 100000; ++it) {
        const Matrix bp = b.transpose() * p;
        const Matrix gain = (r + bp * b).ldlt().solve(bp * a);
        Matrix next = symmetrize(q + a.transpose() * p * a - a.transpose() * p * b * gain);
        if (!next.allFinite()) break;
        const double diff = (next - p).cwiseAbs().maxCoeff();
        p = std::move(next);
        if (diff <= 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff())) {
            const Matrix bpf = b.transpose() * p;
            Matrix k = -(r + bpf * b).ldlt().solve(bpf * a);
            if (!is_schur(a + b * k)) break;
            return k;
        }
    }
    throw NumericalError("not stabilizable within iteration budget");
}

}  // namespace empc
