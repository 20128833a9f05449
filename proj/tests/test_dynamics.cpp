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
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace empc {
namespace {

using testing::mat;
using testing::vec;

TEST(Box, Basics) {
    const Box b(vec({-1, 0}), vec({1, 2}));
    EXPECT_TRUE(b.contains(vec({0, 1})));
    EXPECT_FALSE(b.contains(vec({1.1, 1})));
    EXPECT_TRUE(b.contains(vec({1.1, 1}), 0.2));
    EXPECT_DOUBLE_EQ(b.interior_margin(vec({0.5, 1.5})), 0.5);
    EXPECT_EQ(b.clamp(vec({3, -1})), vec({1, 0}));
    EXPECT_EQ(b.vertices().size(), 4u);
    EXPECT_THROW(Box(vec({1}), vec({0})), InputError);
    const Box z = b.scaled(0.0);
    EXPECT_EQ(z.lower, vec({0, 0}));
    EXPECT_FALSE(std::signbit(z.lower[0]));
}

TEST(Cstr, EquilibriumIsFixedPoint) {
    const PlantModel m = make_cstr_model();
    const Vector next = step(m, vec({0, 0}), vec({0}), vec({0}));
    EXPECT_LE(next.lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_LE(equilibrium_residual(m, cstr_equilibrium()), 1e-12);
}

// Hand differentiation at c_A = c_B = 0.5, q_f = 4.
TEST(Cstr, ContinuousJacobianByHand) {
    const PlantModel m = make_cstr_model();
    Matrix jx(2, 2), ju(2, 1);
    m.rhs_jacobian(vec({0, 0}), vec({0}), vec({0}), jx, ju);
    EXPECT_LE((jx - mat(2, 2, {-0.8, 0, 0.4, -0.4})).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((ju - mat(2, 1, {0.05, -0.05})).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Cstr, AnalyticJacobianMatchesFiniteDifferences) {
    const PlantModel m = make_cstr_model();
    for (const Vector& x : {vec({0.1, -0.3}), vec({-0.45, 0.4})}) {
        const Vector u = vec({2.0}), w = vec({0.1});
        Matrix jx(2, 2), ju(2, 1);
        m.rhs_jacobian(x, u, w, jx, ju);
        for (int i = 0; i < 2; ++i) {
            const auto fi = [&](const Vector& xx) { return m.rhs(xx, u, w)[i]; };
            const auto gi = [&](const Vector& uu) { return m.rhs(x, uu, w)[i]; };
            EXPECT_NEAR((testing::fd_gradient(fi, x) - jx.row(i).transpose()).norm(), 0.0, 1e-8);
            EXPECT_NEAR(testing::fd_gradient(gi, u)[0], ju(i, 0), 1e-8);
        }
    }
}

// exp(A_c dt) in closed form for the lower-triangular A_c, and the ZOH input
// matrix integrated with Simpson's rule.
TEST(Cstr, DiscretizationClosedForm) {
    const double dt = 0.25;
    const LinearPair d = discretize(mat(2, 2, {-0.8, 0, 0.4, -0.4}), mat(2, 1, {0.05, -0.05}), dt);
    const auto expa = [](double s) {
        return mat(2, 2, {std::exp(-0.8 * s), 0, std::exp(-0.4 * s) - std::exp(-0.8 * s), std::exp(-0.4 * s)});
    };
    EXPECT_LE((d.A - expa(dt)).cwiseAbs().maxCoeff(), 1e-14);
    Vector b = Vector::Zero(2);
    const int n = 2000;
    for (int i = 0; i <= n; ++i) {
        const double wgt = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        b += wgt * expa(dt * i / n) * vec({0.05, -0.05});
    }
    b *= dt / n / 3.0;
    EXPECT_LE((d.B.col(0) - b).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(d.A(1, 0), 0.086107, 1e-6);
    EXPECT_NEAR(d.B(0, 0), 0.011329, 1e-6);
}

TEST(Expm, MatchesSeries) {
    Matrix m = mat(3, 3, {0.1, -0.4, 0.2, 0.3, -0.2, 0.05, -0.1, 0.25, 0.3});
    EXPECT_LE((expm(m) - testing::expm_series(m)).cwiseAbs().maxCoeff(), 1e-14);
    // Scaling and squaring against the series on a scaled-down copy.
    const Matrix big = 8.0 * m;
    Matrix ref = testing::expm_series(big / 16.0);
    for (int i = 0; i < 4; ++i) ref = ref * ref;
    EXPECT_LE((expm(big) - ref).cwiseAbs().maxCoeff(), 1e-11 * ref.cwiseAbs().maxCoeff());
}

// Observed order of the RK4 map from errors at h and h/2 against a fine reference.
TEST(Rk4, ObservedOrder) {
    const Vector x = vec({-0.5, -0.5}), u = vec({6.0}), w = vec({0.2});
    const double dt = 2.0;
    const Vector ref = step(make_cstr_model(dt, 1024), x, u, w);
    const double e1 = (step(make_cstr_model(dt, 4), x, u, w) - ref).norm();
    const double e2 = (step(make_cstr_model(dt, 8), x, u, w) - ref).norm();
    const double order = std::log2(e1 / e2);
    EXPECT_GE(order, 3.7) << e1 << " " << e2;
}

TEST(Step, SensitivityMatchesFiniteDifferences) {
    const PlantModel m = make_cstr_model();
    const Vector x = vec({0.2, -0.3}), u = vec({1.0}), w = vec({-0.1});
    const StepSensitivity s = step_with_sensitivity(m, x, u, w);
    EXPECT_LE((s.next - step(m, x, u, w)).norm(), 1e-15);
    for (int i = 0; i < 2; ++i) {
        const auto fx = [&](const Vector& xx) { return step(m, xx, u, w)[i]; };
        const auto fu = [&](const Vector& uu) { return step(m, x, uu, w)[i]; };
        EXPECT_LE((testing::fd_gradient(fx, x) - s.dx.row(i).transpose()).norm(), 1e-8);
        EXPECT_NEAR(testing::fd_gradient(fu, u)[0], s.du(i, 0), 1e-8);
    }
}

TEST(Step, RejectsBadArguments) {
    const PlantModel m = make_cstr_model();
    EXPECT_THROW(step(m, vec({0}), vec({0}), vec({0})), InputError);
    EXPECT_THROW(step(m, vec({0, 0}), vec({6.5}), vec({0})), InputError);
    EXPECT_THROW(step(m, vec({0, 0}), vec({0, 1}), vec({0})), InputError);
    try {
        step(m, vec({0, NAN}), vec({0}), vec({0}));
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.coordinate(), 1);
    }
}

TEST(Step, RolloutNamesFailingStep) {
    const PlantModel m = make_cstr_model();
    const Trajectory u{vec({0}), vec({0}), vec({7})};
    try {
        simulate_open_loop(m, vec({0, 0}), u);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos) << e.what();
    }
    const Trajectory ok(5, vec({0}));
    EXPECT_EQ(simulate_open_loop(m, vec({0, 0}), ok).size(), 6u);
}

TEST(Model, ValidatesConstruction) {
    const auto rhs = [](const Vector& x, const Vector&, const Vector&) { return x; };
    const Box b(vec({-1}), vec({1}));
    const Box unbounded(vec({-INFINITY}), vec({INFINITY}));
    EXPECT_THROW(PlantModel("m", rhs, b, unbounded, b, 0.1), InputError);
    EXPECT_THROW(PlantModel("m", rhs, b, b, b, 0.0), InputError);
    EXPECT_THROW(PlantModel("m", rhs, b, b, b, 0.1, 0), InputError);
}

TEST(Model, ExpressionModelMatchesNative) {
    const PlantModel native = make_cstr_model();
    const PlantModel parsed = make_expression_model(
        "cstr_text",
        {"(u1 + 4)/10*(1 + w1 - (x1 + 0.5)) - 0.4*(x1 + 0.5)", "-(u1 + 4)/10*(x2 + 0.5) + 0.4*(x1 + 0.5)"},
        native.state_box(), native.input_box(), native.disturbance_box(), 0.25, 4);
    EXPECT_TRUE(parsed.has_analytic_jacobian());
    const Vector x = vec({0.3, -0.2}), u = vec({-2.0}), w = vec({0.15});
    EXPECT_LE((step(parsed, x, u, w) - step(native, x, u, w)).norm(), 1e-14);
    const StepSensitivity a = step_with_sensitivity(parsed, x, u, w);
    const StepSensitivity b = step_with_sensitivity(native, x, u, w);
    EXPECT_LE((a.dx - b.dx).norm() + (a.du - b.du).norm(), 1e-13);
}

TEST(Model, Presets) {
    EXPECT_NO_THROW(preset_model("cstr"));
    EXPECT_THROW(preset_model("nope"), InputError);
    EXPECT_TRUE(preset_equilibrium("cstr").has_value());
}

}  // namespace
}  // namespace empc
