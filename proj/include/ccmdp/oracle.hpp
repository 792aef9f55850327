#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ccmdp/grad_engine.hpp"
#include "ccmdp/mdp.hpp"
#include "ccmdp/objectives.hpp"

namespace ccmdp {

struct OracleSolution {
    OccupancyMeasure lambda_star;
    double F_star = 0.0;
    double mu_star = 0.0;
    double duality_gap = 0.0; // certified bound on F_opt - F_star
    int iterations = 0;       // linear-oracle calls spent
    bool certified = false;

    std::string to_json_string() const;
};

// Deterministic vertex of the occupancy polytope maximizing <w, lambda>:
// policy iteration on reward w with lowest-index tie-breaking, then the greedy
// policy's exact occupancy.
struct VertexSolution {
    Policy policy;
    OccupancyMeasure occ;
    double value = 0.0; // <w, occ.lambda>
};
VertexSolution lambda_linear_oracle(const TabularMdp& mdp, const Eigen::VectorXd& w);

// Maximizes a concave quadratic over the polytope by Frank-Wolfe with a
// fully-corrective restricted master over the collected vertices. The iterate
// stays an explicit convex combination of exact vertex occupancies.
struct InnerMaxResult {
    Eigen::VectorXd lambda;
    double value = 0.0;
    double fw_gap = 0.0;
    int oracle_calls = 0;
    std::vector<Eigen::VectorXd> vertices;
    Eigen::VectorXd weights;
};
InnerMaxResult maximize_over_polytope(const TabularMdp& mdp, const LagrangianQuadratic& q,
                                      double tol, int max_oracle_calls,
                                      const InnerMaxResult* warm_start = nullptr);

// Ground truth for  max f(lambda) s.t. g(lambda) <= 0  over the polytope.
// Inner maximizations of L(., mu) run Frank-Wolfe with value-iteration linear
// oracles; mu follows projected subgradient steps on [0, mu_cap] whose step
// halves on each sign change of the violation. Stops once the Frank-Wolfe gap
// plus the complementary-slackness residual is below tol; otherwise the
// returned solution is flagged non-certified.
OracleSolution solve_saddle_fw(const TabularMdp& mdp, const ObjectiveSpec& obj,
                               const ConstraintSpec& con, double tol = 1e-6,
                               int max_iters = 200000);

// Exhaustive search over per-state simplex grids (resolution steps per
// coordinate). Only for n_states * (n_actions - 1) <= 4. duality_gap carries
// the neighbor-cell |delta f| estimate of the grid error. Throws when no grid
// policy is feasible.
OracleSolution brute_force_policy_grid(const TabularMdp& mdp, const ObjectiveSpec& obj,
                                       const ConstraintSpec& con, int resolution);

struct DualityReport {
    double d_mu = 0.0;       // D(mu_star) = max_lambda L(lambda, mu_star)
    double gap = 0.0;        // |F_star - D(mu_star)|
    double mu_bound = 0.0;   // (F_star - f(lambda(theta_tilde))) / xi
    bool gap_ok = false;
    bool bound_ok = false;
};

// Strong-duality check against the stored Slater witness.
DualityReport duality_check(const TabularMdp& mdp, const ObjectiveSpec& obj,
                            const ConstraintSpec& con, const OracleSolution& solution,
                            double gap_tol = 1e-4);

} // namespace ccmdp
