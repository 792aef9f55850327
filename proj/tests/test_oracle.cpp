#include <doctest.h>

#include <cmath>

#include "ccmdp/oracle.hpp"
#include "test_util.hpp"

using namespace ccmdp;
using namespace testutil;

namespace {

ConstraintSpec slack_constraint(int dim, double gamma) {
    // g = -1 everywhere: never active
    return ConstraintSpec::linear(Eigen::VectorXd::Zero(dim), 1.0, gamma);
}

} // namespace

TEST_CASE("lambda_linear_oracle plans to the q-iteration optimum") {
    StreamRng rng(227, 0);
    for (int trial = 0; trial < 20; ++trial) {
        TabularMdp mdp = random_mdp(rng, 4, 3, 0.3 + 0.6 * rng.next_uniform());
        Eigen::VectorXd w = random_vector(rng, 12);
        VertexSolution v = lambda_linear_oracle(mdp, w);
        CHECK(v.occ.flow_residual(mdp) < 1e-10);
        double best = qiter_optimal_value(mdp, w);
        CHECK(v.value ==
              doctest::Approx((1.0 - mdp.gamma) * best).epsilon(1e-9));
        // deterministic policies only
        for (int s = 0; s < 4; ++s)
            CHECK(v.policy.probs.row(s).maxCoeff() == 1.0);
    }
}

TEST_CASE("solve_saddle_fw: unconstrained linear objective hits the planning optimum") {
    StreamRng rng(229, 0);
    for (int trial = 0; trial < 5; ++trial) {
        TabularMdp mdp = random_mdp(rng, 3, 2, 0.6);
        Eigen::VectorXd r = random_vector(rng, 6, 0.0, 1.0);
        ObjectiveSpec obj = ObjectiveSpec::linear(r, mdp.gamma);
        OracleSolution sol = solve_saddle_fw(mdp, obj, slack_constraint(6, mdp.gamma), 1e-6);
        CHECK(sol.certified);
        CHECK(sol.mu_star == 0.0);
        double vi = qiter_optimal_value(mdp, r);
        CHECK(sol.F_star == doctest::Approx(vi).epsilon(1e-6));
        CHECK(sol.lambda_star.flow_residual(mdp) < 1e-8);
    }
}

TEST_CASE("solve_saddle_fw: reachable distance target is attained") {
    StreamRng rng(233, 0);
    TabularMdp mdp = random_mdp(rng, 3, 2, 0.7);
    Eigen::VectorXd target = random_lambda(rng, mdp);
    ObjectiveSpec obj = ObjectiveSpec::neg_sq_distance(target, 1.0);
    OracleSolution sol = solve_saddle_fw(mdp, obj, slack_constraint(6, mdp.gamma), 1e-9);
    CHECK(sol.certified);
    CHECK(std::abs(sol.F_star) <= 1e-4);
    CHECK((sol.lambda_star.lambda - target).norm() <= 1e-4);
}

TEST_CASE("solve_saddle_fw agrees with the policy grid on a 2x2 standard CMDP") {
    StreamRng rng(239, 0);
    StandardCmdp inst = random_standard_cmdp(rng, 2, 2, 0.5, 0.25);
    OracleSolution fw = solve_saddle_fw(inst.mdp, inst.obj, inst.con, 1e-7);
    CHECK(fw.certified);
    OracleSolution grid = brute_force_policy_grid(inst.mdp, inst.obj, inst.con, 200);
    CHECK(std::abs(fw.F_star - grid.F_star) <= 2e-3);
    CHECK(grid.F_star <= fw.F_star + fw.duality_gap + 1e-9);
}

TEST_CASE("solve_saddle_fw certifies feasibility and upper-bounds feasible policies") {
    StreamRng rng(241, 0);
    for (int trial = 0; trial < 10; ++trial) {
        StandardCmdp inst = random_standard_cmdp(rng, 3, 2, 0.6, 0.3);
        OracleSolution sol = solve_saddle_fw(inst.mdp, inst.obj, inst.con, 1e-6);
        CHECK(sol.certified);
        CHECK(g_eval_grad(inst.con, sol.lambda_star.lambda).first <= 1e-10);
        CHECK(sol.lambda_star.flow_residual(inst.mdp) < 1e-8);
        for (int probe = 0; probe < 40; ++probe) {
            Eigen::VectorXd lam = random_lambda(rng, inst.mdp);
            if (g_eval_grad(inst.con, lam).first > 0.0) continue;
            CHECK(f_eval_grad(inst.obj, lam).first <=
                  sol.F_star + sol.duality_gap + 1e-9);
        }
    }
}

TEST_CASE("solve_saddle_fw is deterministic") {
    StreamRng rng(251, 0);
    StandardCmdp inst = random_standard_cmdp(rng, 3, 2, 0.7, 0.3);
    OracleSolution a = solve_saddle_fw(inst.mdp, inst.obj, inst.con, 1e-6);
    OracleSolution b = solve_saddle_fw(inst.mdp, inst.obj, inst.con, 1e-6);
    CHECK(a.F_star == b.F_star);
    CHECK(a.mu_star == b.mu_star);
    CHECK((a.lambda_star.lambda - b.lambda_star.lambda).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_saddle_fw rejects infeasible instances") {
    StreamRng rng(257, 0);
    TabularMdp mdp = random_mdp(rng, 2, 2, 0.5);
    // g(lambda) = 2 - <0,lambda> > 0 everywhere
    ConstraintSpec never = ConstraintSpec::linear(Eigen::VectorXd::Zero(4), -2.0, mdp.gamma);
    ObjectiveSpec obj = ObjectiveSpec::linear(random_vector(rng, 4), mdp.gamma);
    CHECK_THROWS_AS(solve_saddle_fw(mdp, obj, never, 1e-6), std::runtime_error);
}

TEST_CASE("brute_force_policy_grid: linear objective picks the argmax vertex") {
    TabularMdp mdp = single_state_mdp(2, 0.5);
    Eigen::VectorXd r(2);
    r << 0.2, 0.9;
    ObjectiveSpec obj = ObjectiveSpec::linear(r, mdp.gamma);
    OracleSolution sol = brute_force_policy_grid(mdp, obj, slack_constraint(2, 0.5), 50);
    CHECK(sol.lambda_star.lambda[1] == doctest::Approx(1.0));
    CHECK(sol.F_star == doctest::Approx(0.9 / 0.5));
}

TEST_CASE("brute_force_policy_grid agrees with the saddle oracle on tiny instances") {
    StreamRng rng(263, 0);
    for (int trial = 0; trial < 20; ++trial) {
        StandardCmdp inst = random_standard_cmdp(rng, 2, 2, 0.5, 0.2);
        OracleSolution fw = solve_saddle_fw(inst.mdp, inst.obj, inst.con, 1e-7);
        OracleSolution grid = brute_force_policy_grid(inst.mdp, inst.obj, inst.con, 120);
        REQUIRE(fw.certified);
        CHECK(std::abs(fw.F_star - grid.F_star) <=
              grid.duality_gap + fw.duality_gap + 2e-3);
    }
}

TEST_CASE("brute_force_policy_grid guards its preconditions") {
    StreamRng rng(269, 0);
    TabularMdp big = random_mdp(rng, 3, 3, 0.5); // 3*(3-1) = 6 > 4
    ObjectiveSpec obj = ObjectiveSpec::linear(random_vector(rng, 9), big.gamma);
    CHECK_THROWS_AS(brute_force_policy_grid(big, obj, slack_constraint(9, 0.5), 10),
                    std::invalid_argument);

    TabularMdp mdp = random_mdp(rng, 2, 2, 0.5);
    ConstraintSpec never = ConstraintSpec::linear(Eigen::VectorXd::Zero(4), -1.0, 0.5);
    ObjectiveSpec obj2 = ObjectiveSpec::linear(random_vector(rng, 4), 0.5);
    CHECK_THROWS_WITH_AS(brute_force_policy_grid(mdp, obj2, never, 10),
                         doctest::Contains("infeasible"), std::runtime_error);
}

TEST_CASE("duality_check: strong duality and multiplier bound on random instances") {
    StreamRng rng(271, 0);
    for (int trial = 0; trial < 10; ++trial) {
        StandardCmdp inst = random_standard_cmdp(rng, 3, 2, 0.6, 0.3);
        OracleSolution sol = solve_saddle_fw(inst.mdp, inst.obj, inst.con, 1e-6);
        REQUIRE(sol.certified);
        DualityReport rep = duality_check(inst.mdp, inst.obj, inst.con, sol, 1e-4);
        CHECK(rep.gap_ok);
        CHECK(rep.bound_ok);
        CHECK(rep.gap <= 1e-4);
    }
}

TEST_CASE("duality_check: inactive constraint gives zero multiplier and zero gap") {
    StreamRng rng(277, 0);
    TabularMdp mdp = random_mdp(rng, 3, 2, 0.6);
    ObjectiveSpec obj = ObjectiveSpec::linear(random_vector(rng, 6, 0.0, 1.0), mdp.gamma);
    ConstraintSpec con = slack_constraint(6, mdp.gamma);
    SlaterWitness w;
    w.theta_tilde = ThetaParams::tabular(3, 2);
    w.xi = 1.0;
    con.slater = w;
    OracleSolution sol = solve_saddle_fw(mdp, obj, con, 1e-8);
    CHECK(sol.mu_star == 0.0);
    DualityReport rep = duality_check(mdp, obj, con, sol, 1e-6);
    CHECK(rep.gap <= 1e-6);
    CHECK(rep.bound_ok);
}

TEST_CASE("sq_ball-constrained linear objective is certified") {
    StreamRng rng(281, 0);
    for (int trial = 0; trial < 5; ++trial) {
        TabularMdp mdp = random_mdp(rng, 3, 2, 0.6);
        ObjectiveSpec obj = ObjectiveSpec::linear(random_vector(rng, 6, 0.0, 1.0), mdp.gamma);
        Policy ref = random_policy(rng, 3, 2);
        Eigen::VectorXd lam0 = occupancy_exact(mdp, ref).lambda;
        ConstraintSpec con = ConstraintSpec::sq_ball(lam0, 0.2);
        SlaterWitness w;
        w.theta_tilde = ThetaParams::direct_from(ref);
        w.xi = 0.04;
        con.slater = w;
        OracleSolution sol = solve_saddle_fw(mdp, obj, con, 1e-6);
        CHECK(sol.certified);
        CHECK(g_eval_grad(con, sol.lambda_star.lambda).first <= 1e-10);
        DualityReport rep = duality_check(mdp, obj, con, sol, 1e-4);
        CHECK(rep.gap_ok);
        CHECK(rep.bound_ok);
    }
}
