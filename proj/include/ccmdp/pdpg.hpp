#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccmdp/grad_engine.hpp"
#include "ccmdp/mdp.hpp"
#include "ccmdp/objectives.hpp"
#include "ccmdp/policy_param.hpp"

namespace ccmdp {

enum class RateVariant { concave, strongly_concave };

std::string to_string(RateVariant v);
RateVariant rate_variant_from_string(const std::string& name);

struct PdpgConfig {
    int T = 1;
    double eta1 = 0.0;
    double eta2 = 0.0;
    double C0 = 1.0;           // dual cap, U = [0, C0]
    double mu0 = 0.0;
    double delta = 0.0;        // pessimism; 0 for plain PDPG
    GradEstimatorConfig estimator;
    ConstraintMode constraint_mode = ConstraintMode::exact;
    ThetaParams theta0;
    std::uint64_t seed = 0;
    int workers = 1;
    // With the exact estimator, halve eta1 whenever a step fails the ascent
    // check L(theta', mu) >= L(theta, mu); at most 20 halvings per run.
    bool ascent_guard = false;

    void validate() const;
};

struct IterateRecord {
    int t = 0;
    double f = 0.0;         // F(theta_t), exact
    double g = 0.0;         // G(theta_t), exact
    double g_delta = 0.0;   // G(theta_t) + delta
    double mu = 0.0;        // multiplier entering iteration t
    double grad_norm = 0.0; // ||estimated grad_theta L||_2
};

struct IterateLog {
    std::vector<IterateRecord> records;
    ThetaParams theta_final;
    double mean_f = 0.0;        // sum F(theta_t) / T
    double avg_violation = 0.0; // [sum G(theta_t)]_+ / T
    double delta = 0.0;
    // Average of the exact per-iterate occupancies over the last T - T/2
    // iterates; stays inside the polytope and induces the reported policy.
    Eigen::VectorXd lambda_tail_avg;

    void write_csv(const std::string& path) const;
    std::string csv_string() const;
};

// Plain primal-dual loop: projected gradient ascent in theta, projected
// subgradient descent in mu over [0, C0]. Metrics are always evaluated with
// exact occupancies, whatever the gradient estimator. Requires delta == 0.
IterateLog run_pdpg(const TabularMdp& mdp, const ObjectiveSpec& obj,
                    const ConstraintSpec& con, const PdpgConfig& cfg);

// Pessimistic variant on G_delta = G + delta. delta must stay below the
// stored Slater slack; delta == 0 reproduces run_pdpg byte for byte.
IterateLog run_pdpg0(const TabularMdp& mdp, const ObjectiveSpec& obj,
                     const ConstraintSpec& con, const PdpgConfig& cfg);

struct RateConstants {
    double M_F = 0.0;
    double F_tilde = 0.0;
    double xi = 0.0;
    double ell_L = 0.0;
    double sigma = 0.0;
};

struct HyperParams {
    double eta1 = 0.0;
    double eta2 = 0.0;
    double C0 = 0.0;
};

// C0 = 1 + (M_F - F(theta_tilde)) / xi, eta1 = 1 / ell_L, and
// eta2 = T^{-2/3} (concave) or T^{-1/2} (strongly concave).
HyperParams derive_hyperparams(RateVariant variant, const RateConstants& c, double T);

struct DeltaConstants {
    double M_F = 0.0;
    double M_G = 0.0;
    double M_L = 0.0;
    double F_tilde = 0.0;
    double xi = 0.0;
    double ell_L = 0.0;
    double ell_theta = 0.0;  // proxy for the inverse-map Lipschitz constant
    double eps_tilde = 0.0;  // proxy, strongly concave variant only
};

// Solves the pessimism equation RHS(delta) - delta = 0, with delta feeding
// back through C0 = 1 + (M_F - F_tilde)/(xi - delta). Fixed-point iteration
// from 0; throws when the solution fails delta < xi (T too small).
double solve_delta(RateVariant variant, const DeltaConstants& c, double T);

// Default proxies: the inverse-map constant from the direct-parameterization
// bound sqrt(2(1+|A|)) / d0 with d0 = (1-gamma) min_s rho(s), and
// eps_tilde = sigma / (sigma + 2 ell_theta^2 ell_L).
double default_ell_theta_proxy(const TabularMdp& mdp);
double default_eps_tilde_proxy(double sigma, double ell_theta, double ell_L);

struct RunMetrics {
    double avg_gap = 0.0;
    double avg_violation = 0.0;
    double tail_gap = 0.0; // same average over the last T/2 iterates
};

RunMetrics run_metrics(const IterateLog& log, double F_star);

} // namespace ccmdp
