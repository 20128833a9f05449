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
#include "empc/ocp.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace empc {
namespace {

using testing::vec;

class CstrOcp : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        econ_ = new TerminalIngredients(testing::synthesize_cstr(testing::cstr_economic_cost()).ingredients);
    }
    static void TearDownTestSuite() { delete econ_; }

    static OcpProblem problem(int horizon = 16) {
        return OcpProblem{make_cstr_model(), testing::cstr_economic_cost(), *econ_, horizon, {}};
    }

    static TerminalIngredients* econ_;
};

TerminalIngredients* CstrOcp::econ_ = nullptr;

TEST_F(CstrOcp, SteadyStateCost) {
    const OcpProblem p = problem();
    const StageCost& cost = p.cost;
    const double l_s = cost(vec({0, 0}), vec({0}));
    // -2 q_f c_B + 0.5 q_f at q_f = 4, c_B = 0.5.
    EXPECT_DOUBLE_EQ(l_s, -2.0 * 4.0 * 0.5 + 0.5 * 4.0);
    const Trajectory u(16, vec({0}));
    EXPECT_NEAR(total_cost(p, vec({0, 0}), u), 16 * -2.0 + p.terminal.vf(vec({0, 0})), 1e-12);
    EXPECT_EQ(p.terminal.vf(vec({0, 0})), 0.0);
}

TEST_F(CstrOcp, WarmStartDominanceAtSteadyState) {
    const OcpProblem p = problem();
    const Trajectory warm(16, vec({0}));
    const OcpSolution s = solve(p, vec({0, 0}), warm);
    EXPECT_LE(s.value, 16 * -2.0 + 1e-8);
    EXPECT_NE(s.status, SolveStatus::Infeasible);
}

TEST_F(CstrOcp, GradientMatchesFiniteDifferences) {
    const OcpProblem p = problem();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> du(-3.5, 5.5), dx(-0.45, 0.45);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector x = vec({dx(rng), dx(rng)});
        Trajectory u;
        for (int k = 0; k < p.horizon; ++k) u.push_back(vec({du(rng)}));
        const Vector g = cost_gradient(p, x, u);
        const auto f = [&](const Vector& flat) {
            Trajectory uu;
            for (Eigen::Index k = 0; k < flat.size(); ++k) uu.push_back(vec({flat[k]}));
            return total_cost(p, x, uu);
        };
        Vector flat(p.horizon);
        for (int k = 0; k < p.horizon; ++k) flat[k] = u[static_cast<std::size_t>(k)][0];
        const Vector fd = testing::fd_gradient(f, flat, 1e-5);
        EXPECT_LE((g - fd).norm(), 1e-4 * std::max(1.0, fd.norm())) << "trial " << trial;
    }
}

// N = 1: minimize l(x, u) + V_f(f(x, u)) over the input interval directly.
TEST_F(CstrOcp, SingleStepMatchesScalarSearch) {
    const OcpProblem p = problem(1);
    for (const Vector& x : {vec({0.1, -0.1}), vec({-0.3, 0.2}), vec({0.4, 0.4})}) {
        const auto f = [&](double u) { return total_cost(p, x, Trajectory{vec({u})}); };
        const double u_star = testing::golden_min(f, -4.0, 6.0);
        const OcpSolution s = solve(p, x);
        ASSERT_EQ(s.status, SolveStatus::Optimal) << x.transpose();
        EXPECT_NEAR(s.value, f(u_star), 1e-7);
        EXPECT_NEAR(s.u_seq[0][0], u_star, 1e-3);
    }
}

TEST_F(CstrOcp, SolutionRespectsConstraints) {
    const OcpProblem p = problem();
    const OcpSolution s = solve(p, vec({-0.5, -0.5}));
    ASSERT_NE(s.status, SolveStatus::Infeasible);
    EXPECT_EQ(s.u_seq.size(), 16u);
    EXPECT_EQ(s.x_pred.size(), 17u);
    for (const Vector& u : s.u_seq) EXPECT_TRUE(p.model.input_box().contains(u));
    EXPECT_GE(s.terminal_slack, -p.settings.constraint_tol);
    EXPECT_NEAR(s.value, total_cost(p, vec({-0.5, -0.5}), s.u_seq), 1e-9);
}

TEST_F(CstrOcp, CandidateShift) {
    const OcpProblem p = problem();
    const OcpSolution s = solve(p, vec({0.2, -0.3}));
    const ShiftedCandidate c = candidate_shift(p, s);
    ASSERT_EQ(c.u_seq.size(), 16u);
    for (int k = 0; k < 15; ++k) EXPECT_EQ(c.u_seq[static_cast<std::size_t>(k)], s.u_seq[static_cast<std::size_t>(k + 1)]);
    const Vector kf = p.terminal.terminal_law(s.x_pred.back());
    EXPECT_EQ(c.u_seq.back(), p.model.input_box().clamp(kf));
    EXPECT_NEAR(c.clip_distance, (kf - c.u_seq.back()).norm(), 1e-15);
}

TEST_F(CstrOcp, WarmStartMonotonicity) {
    const OcpProblem p = problem();
    Vector x = vec({-0.5, -0.5});
    const OcpSolution first = solve(p, x);
    const Vector next = step(p.model, x, first.u_seq[0], vec({0}));
    const ShiftedCandidate c = candidate_shift(p, first);
    const OcpSolution second = solve(p, next, c.u_seq);
    EXPECT_LE(second.value, total_cost(p, next, c.u_seq) + 1e-8);
}

// V0(x+) <= V0(x) - l(x, kappa(x)) + l_s along a nominal run.
TEST_F(CstrOcp, NominalCostDecrease) {
    const OcpProblem p = problem();
    Vector x = vec({-0.5, -0.5});
    OcpSolution prev;
    bool have = false;
    for (int k = 0; k < 20; ++k) {
        const ControlAction a = control_law(p, x, have ? &prev : nullptr);
        if (have) {
            EXPECT_LE(a.solution.value - prev.value + p.cost(prev.x_pred[0], prev.u_seq[0]) + 2.0, 1e-5) << k;
        }
        x = step(p.model, x, a.u, vec({0}));
        prev = a.solution;
        have = true;
    }
}

TEST_F(CstrOcp, UnreachableTerminalSetIsInfeasible) {
    OcpProblem p = problem(1);
    p.terminal.tau = 1e-6;
    const OcpSolution s = solve(p, vec({-0.5, -0.5}));
    EXPECT_EQ(s.status, SolveStatus::Infeasible);
    EXPECT_LT(s.terminal_slack, 0.0);
}

TEST_F(CstrOcp, ValidatesInputs) {
    OcpProblem p = problem();
    p.horizon = 0;
    EXPECT_THROW(p.validate(), InputError);
    const OcpProblem q = problem();
    EXPECT_THROW(solve(q, vec({0})), InputError);
    EXPECT_THROW(solve(q, vec({0, 0}), Trajectory(3, vec({0}))), InputError);
    EXPECT_THROW(total_cost(q, vec({0, 0}), Trajectory(16, vec({9}))), InputError);
}

TEST(SolveStatusText, Names) {
    EXPECT_EQ(to_string(SolveStatus::Optimal), "optimal");
    EXPECT_EQ(to_string(SolveStatus::MaxIter), "max_iter");
    EXPECT_EQ(to_string(SolveStatus::Infeasible), "infeasible");
}

}  // namespace
}  // namespace empc
