#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>

#include "ccmdp/mdp.hpp"
#include "ccmdp/policy_param.hpp"

namespace ccmdp {

// Concave objective over the occupancy polytope. Two kinds:
//   linear:          f(lambda) = <r, lambda> / (1 - gamma)
//   neg_sq_distance: f(lambda) = -scale * ||lambda - target||_2^2
// Each kind carries closed-form bounds: |f| <= m_f() on the polytope, sigma()
// is the strong-concavity modulus, l_f1/l_f2 bound the gradient sup-norm and
// its Lipschitz constant (inf-norm over 2-norm, as used by the smoothness
// composition).
struct ObjectiveSpec {
    enum class Kind { linear, neg_sq_distance };

    Kind kind = Kind::linear;
    Eigen::VectorXd r;      // linear
    double gamma = 0.0;     // linear
    Eigen::VectorXd target; // neg_sq_distance
    double scale = 1.0;     // neg_sq_distance

    static ObjectiveSpec linear(Eigen::VectorXd reward, double gamma);
    static ObjectiveSpec neg_sq_distance(Eigen::VectorXd target, double scale = 1.0);

    double m_f() const;
    double sigma() const;
    double l_f1() const;
    double l_f2() const;

    std::string to_json_string() const;
    static ObjectiveSpec from_json_string(const std::string& text);
};

// Convex constraint g(lambda) <= 0. Two kinds:
//   linear:  g(lambda) = <c, lambda> / (1 - gamma) - budget
//   sq_ball: g(lambda) = ||lambda - center||_2^2 - radius^2
// May carry a Slater witness (theta_tilde, xi) asserting g(lambda(theta)) <= -xi.
struct SlaterWitness {
    ThetaParams theta_tilde;
    double xi = 0.0;
};

struct ConstraintSpec {
    enum class Kind { linear, sq_ball };

    Kind kind = Kind::linear;
    Eigen::VectorXd c;      // linear
    double budget = 0.0;    // linear
    double gamma = 0.0;     // linear
    Eigen::VectorXd center; // sq_ball
    double radius = 0.0;    // sq_ball
    std::optional<SlaterWitness> slater;

    static ConstraintSpec linear(Eigen::VectorXd cost, double budget, double gamma);
    static ConstraintSpec sq_ball(Eigen::VectorXd center, double radius);

    double m_g() const;
    double l_g1() const;
    double l_g2() const;

    // Checks g(lambda(theta_tilde)) <= -xi; throws when the stored witness lies.
    void verify_slater(const TabularMdp& mdp) const;

    std::string to_json_string() const;
    static ConstraintSpec from_json_string(const std::string& text);
};

std::pair<double, Eigen::VectorXd> f_eval_grad(const ObjectiveSpec& obj,
                                               const Eigen::VectorXd& lambda);
std::pair<double, Eigen::VectorXd> g_eval_grad(const ConstraintSpec& con,
                                               const Eigen::VectorXd& lambda);

// L(lambda, mu) = f(lambda) - mu g(lambda) and its lambda-gradient; mu >= 0.
std::pair<double, Eigen::VectorXd> lagrangian_eval_grad(const ObjectiveSpec& obj,
                                                        const ConstraintSpec& con,
                                                        const Eigen::VectorXd& lambda,
                                                        double mu);

// Convex conjugate g*(z) = sup_lambda { <z, lambda> - g(lambda) } over the
// ambient space. Returns +infinity where undefined (linear kind away from its
// single support point z = c/(1-gamma)).
double g_conjugate(const ConstraintSpec& con, const Eigen::VectorXd& z);

// Coefficients of L(., mu) as the ambient-space quadratic
// L(lambda, mu) = -quad ||lambda||^2 + <lin, lambda> + constant.
// The concave conjugate L_*(z, mu) = inf_lambda { <z,lambda> - L } follows in
// closed form: -||z - lin||^2 / (4 quad) - constant when quad > 0; for
// quad = 0 it is finite (= -constant) only at z = lin.
struct LagrangianQuadratic {
    double quad = 0.0;
    Eigen::VectorXd lin;
    double constant = 0.0;

    double eval(const Eigen::VectorXd& lambda) const {
        return -quad * lambda.squaredNorm() + lin.dot(lambda) + constant;
    }
    Eigen::VectorXd grad(const Eigen::VectorXd& lambda) const {
        return lin - 2.0 * quad * lambda;
    }
};
LagrangianQuadratic lagrangian_quadratic(const ObjectiveSpec& obj,
                                         const ConstraintSpec& con, double mu);

// Smoothness bounds of the theta-composed objective/constraint/Lagrangian.
struct ComposedSmoothness {
    double l_F = 0.0;
    double l_G = 0.0;
    double l_L = 0.0;
    double M_L = 0.0;
};

// Raw-constant form: soft-max kinds use the logit-map composition bound,
// the direct kind uses the policy-space bound (which ignores psi).
ComposedSmoothness composed_smoothness(double l_f1, double l_f2, double l_g1,
                                       double l_g2, double m_f, double m_g,
                                       ParamKind kind, SmoothnessConstants psi,
                                       double c0, double gamma, int n_actions);

ComposedSmoothness composed_smoothness(const ObjectiveSpec& obj, const ConstraintSpec& con,
                                       ParamKind kind, SmoothnessConstants psi, double c0,
                                       double gamma, int n_actions);

} // namespace ccmdp
