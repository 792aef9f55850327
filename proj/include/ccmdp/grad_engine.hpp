#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "ccmdp/mdp.hpp"
#include "ccmdp/objectives.hpp"
#include "ccmdp/policy_param.hpp"

namespace ccmdp {

enum class GradMode { exact, reinforce, variational };
enum class ConstraintMode { exact, fenchel };

std::string to_string(GradMode mode);
GradMode grad_mode_from_string(const std::string& name);
std::string to_string(ConstraintMode mode);
ConstraintMode constraint_mode_from_string(const std::string& name);

struct GradEstimatorConfig {
    GradMode mode = GradMode::exact;
    int n = 10;             // reinforce: trajectories per estimate
    int K = 25;             // reinforce: rollout horizon
    int inner_iters = 2000; // variational: alternating gradient steps
    double step_x = 0.0;    // variational; <= 0 means auto (0.5 / delta)
    double step_z = 0.0;    // variational; <= 0 means auto from the conjugate curvature
    double z_box = 0.0;     // variational; <= 0 means auto from the grad-L bound
    double delta = 1e-4;    // variational: fixed smoothing of the saddle problem
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json_string() const;
    static GradEstimatorConfig from_json_string(const std::string& text);
};

struct FenchelOpts {
    int z_iters = 5000;
    double z_step = 1.0;
    double z_box = 4.0;
};

// Exact grad_theta V^{pi_theta}(w) for an arbitrary reward w, via exact
// occupancy and Q values. Soft-max kinds use the score-function form, the
// direct kind uses d(s) Q(s,a) / (1-gamma).
Eigen::VectorXd exact_value_gradient(const TabularMdp& mdp, const ThetaParams& theta,
                                     const Policy& policy, const Eigen::VectorXd& w);

// Jacobian of theta -> lambda(theta), one column per parameter. Built by
// differentiating the occupancy flow system with a shared LU factorization.
Eigen::MatrixXd occupancy_jacobian(const TabularMdp& mdp, const ThetaParams& theta);

// grad_theta L(theta, mu) = (1-gamma) grad_theta V^{pi_theta}(z) with the
// pseudo-reward z = grad_lambda L(lambda(theta), mu); no sampling.
Eigen::VectorXd exact_grad(const TabularMdp& mdp, const ThetaParams& theta, double mu,
                           const ObjectiveSpec& obj, const ConstraintSpec& con);

// Score-function estimate from n length-K rollouts; the same batch feeds both
// the empirical occupancy (hence the frozen pseudo-reward) and the score sums.
// Deterministic given (cfg.seed, iteration) and independent of `workers`.
Eigen::VectorXd reinforce_grad(const TabularMdp& mdp, const ThetaParams& theta, double mu,
                               const ObjectiveSpec& obj, const ConstraintSpec& con,
                               const GradEstimatorConfig& cfg, std::uint64_t iteration = 0,
                               int workers = 1);

// Saddle-point evaluation of the gradient: alternating ascent in x and
// descent in z of
//   (1-gamma)[V(z) + delta <grad_theta V(z), x>] - L_*(z, mu) - delta/2 ||x||^2
// with z clamped to a box and a fixed small delta. Returns the final x.
Eigen::VectorXd variational_grad(const TabularMdp& mdp, const ThetaParams& theta, double mu,
                                 const ObjectiveSpec& obj, const ConstraintSpec& con,
                                 const GradEstimatorConfig& cfg);

// Dispatch on cfg.mode.
Eigen::VectorXd lagrangian_grad(const TabularMdp& mdp, const ThetaParams& theta, double mu,
                                const ObjectiveSpec& obj, const ConstraintSpec& con,
                                const GradEstimatorConfig& cfg, std::uint64_t iteration = 0,
                                int workers = 1);

// G(theta) = g(lambda(theta)). Exact mode evaluates g on the exact occupancy;
// fenchel mode maximizes (1-gamma) V^{pi_theta}(z) - g*(z) over z and returns
// the best value found (a lower bound converging to G).
double constraint_value(const TabularMdp& mdp, const ThetaParams& theta,
                        const ConstraintSpec& con, ConstraintMode mode,
                        const FenchelOpts& opts = {});

} // namespace ccmdp
