#pragma once

#include <Eigen/Dense>
#include <string>

#include "ccmdp/mdp.hpp"

namespace ccmdp {

enum class ParamKind { tabular_softmax, linear_softmax, direct };

std::string to_string(ParamKind kind);
ParamKind param_kind_from_string(const std::string& name);

// Policy parameters under one of three parameterizations:
//   tabular_softmax: one logit per (s,a), pi(a|s) proportional to exp(theta_sa)
//   linear_softmax:  logits psi(theta;s,a) = <features_row(s,a), theta>
//   direct:          theta stores the policy table itself, row-major
// Soft-max kinds live in the box [-box_bound, box_bound]^dim; the direct kind
// lives in the product of per-state simplices.
struct ThetaParams {
    ParamKind kind = ParamKind::tabular_softmax;
    Eigen::VectorXd values;
    double box_bound = 50.0;
    Eigen::MatrixXd features; // (S*A) x dim, linear_softmax only

    static ThetaParams tabular(int n_states, int n_actions, double box_bound = 50.0);
    static ThetaParams linear(Eigen::MatrixXd features, double box_bound = 50.0);
    static ThetaParams direct_from(const Policy& policy);

    int dim() const { return static_cast<int>(values.size()); }
    std::string to_json_string() const;
    static ThetaParams from_json_string(const std::string& text);
};

// Bounds on the logit map: ||grad_theta psi|| <= l_psi_1, ||hess|| <= l_psi_2.
// Tabular and linear psi are affine in theta, so l_psi_2 = 0.
struct SmoothnessConstants {
    double l_psi_1 = 0.0;
    double l_psi_2 = 0.0;
};

SmoothnessConstants psi_constants(const ThetaParams& theta);

// pi(a|s) from the parameterization, computed with per-state max subtraction.
Policy build_policy(const ThetaParams& theta, int n_states, int n_actions);

// grad_theta log pi_theta(a|s); soft-max kinds only (the direct kind goes
// through the occupancy-gradient path instead).
Eigen::VectorXd log_policy_gradient(const ThetaParams& theta, int n_states,
                                    int n_actions, int s, int a);

// Same, reusing an already-built policy table.
Eigen::VectorXd log_policy_gradient(const ThetaParams& theta, const Policy& policy,
                                    int n_states, int n_actions, int s, int a);

// Euclidean projection onto the probability simplex (sort-based, stable ties).
Eigen::VectorXd simplex_project(const Eigen::VectorXd& x);

// Projection onto the feasible parameter set: componentwise clamp for soft-max
// kinds, per-state simplex projection for the direct kind.
ThetaParams project_theta(const Eigen::VectorXd& theta_raw, ParamKind kind,
                          double box_bound, int n_states, int n_actions,
                          const Eigen::MatrixXd& features = {});

} // namespace ccmdp
