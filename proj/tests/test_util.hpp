#pragma once

// Shared test helpers. Everything here is an independent route to the
// quantities under test: distribution-propagation occupancy series, central
// finite differences, a plain Q-iteration planner. None of it calls into the
// implementation paths it is used to check.

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "ccmdp/mdp.hpp"
#include "ccmdp/objectives.hpp"
#include "ccmdp/policy_param.hpp"
#include "ccmdp/rng.hpp"

namespace testutil {

using namespace ccmdp;

// Truncated-series occupancy: propagate the state distribution k_max steps
// and accumulate (1-gamma) gamma^k P(s_k = s) pi(a|s).
inline Eigen::VectorXd series_occupancy(const TabularMdp& mdp, const Policy& policy,
                                        int k_max = 200) {
    Eigen::VectorXd p = mdp.rho;
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(mdp.n_states * mdp.n_actions);
    Eigen::MatrixXd p_pi = policy_transition(mdp, policy);
    double w = 1.0 - mdp.gamma;
    for (int k = 0; k <= k_max; ++k) {
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                lambda[mdp.sa(s, a)] += w * p[s] * policy.probs(s, a);
        p = p_pi.transpose() * p;
        w *= mdp.gamma;
    }
    return lambda;
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
    Eigen::VectorXd grad(x.size());
    Eigen::VectorXd probe = x;
    for (int i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        double up = f(probe);
        probe[i] = x[i] - h;
        double down = f(probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

inline Eigen::VectorXd random_distribution(StreamRng& rng, int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = 0.05 + rng.next_uniform();
    return v / v.sum();
}

inline TabularMdp random_mdp(StreamRng& rng, int n_states, int n_actions, double gamma) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.rho = random_distribution(rng, n_states);
    mdp.transition.resize(n_states * n_actions, n_states);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            mdp.transition.row(mdp.sa(s, a)) = random_distribution(rng, n_states).transpose();
    mdp.validate();
    return mdp;
}

inline Policy random_policy(StreamRng& rng, int n_states, int n_actions) {
    Policy p;
    p.probs.resize(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        p.probs.row(s) = random_distribution(rng, n_actions).transpose();
    return p;
}

inline Eigen::VectorXd random_vector(StreamRng& rng, int n, double lo = -1.0,
                                     double hi = 1.0) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.next_uniform();
    return v;
}

// A point of the occupancy polytope: the exact occupancy of a random policy.
inline Eigen::VectorXd random_lambda(StreamRng& rng, const TabularMdp& mdp) {
    return occupancy_exact(mdp, random_policy(rng, mdp.n_states, mdp.n_actions)).lambda;
}

// Plain Q-iteration planner, independent of the oracle module's policy
// iteration. Returns the optimal discounted value from rho.
inline double qiter_optimal_value(const TabularMdp& mdp, const Eigen::VectorXd& reward,
                                  int iters = 100000, double tol = 1e-13) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states);
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd q = reward + mdp.gamma * mdp.transition * v;
        Eigen::VectorXd v_next(mdp.n_states);
        for (int s = 0; s < mdp.n_states; ++s) {
            double best = q[mdp.sa(s, 0)];
            for (int a = 1; a < mdp.n_actions; ++a) best = std::max(best, q[mdp.sa(s, a)]);
            v_next[s] = best;
        }
        double diff = (v_next - v).cwiseAbs().maxCoeff();
        v = v_next;
        if (diff < tol) break;
    }
    return mdp.rho.dot(v);
}

// 2-state deterministic chain: s0 -> s1 -> s1 under every action.
inline TabularMdp chain_mdp(double gamma = 0.5) {
    TabularMdp mdp;
    mdp.n_states = 2;
    mdp.n_actions = 2;
    mdp.gamma = gamma;
    mdp.rho = Eigen::Vector2d(1.0, 0.0);
    mdp.transition.resize(4, 2);
    mdp.transition << 0, 1, 0, 1, 0, 1, 0, 1;
    mdp.validate();
    return mdp;
}

inline TabularMdp single_state_mdp(int n_actions, double gamma) {
    TabularMdp mdp;
    mdp.n_states = 1;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.rho = Eigen::VectorXd::Ones(1);
    mdp.transition = Eigen::MatrixXd::Ones(n_actions, 1);
    mdp.validate();
    return mdp;
}

// Random standard CMDP (linear f, linear g) with a uniform-policy Slater
// witness of slack xi.
struct StandardCmdp {
    TabularMdp mdp;
    ObjectiveSpec obj;
    ConstraintSpec con;
};

inline StandardCmdp random_standard_cmdp(StreamRng& rng, int n_states, int n_actions,
                                         double gamma, double xi) {
    StandardCmdp inst;
    inst.mdp = random_mdp(rng, n_states, n_actions, gamma);
    Eigen::VectorXd r = random_vector(rng, n_states * n_actions, 0.0, 1.0);
    Eigen::VectorXd c = random_vector(rng, n_states * n_actions, 0.0, 1.0);
    inst.obj = ObjectiveSpec::linear(r, gamma);
    Policy uniform = Policy::uniform(n_states, n_actions);
    Eigen::VectorXd lam_u = occupancy_exact(inst.mdp, uniform).lambda;
    double budget = c.dot(lam_u) / (1.0 - gamma) + xi;
    inst.con = ConstraintSpec::linear(c, budget, gamma);
    SlaterWitness w;
    w.theta_tilde = ThetaParams::tabular(n_states, n_actions);
    w.xi = xi;
    inst.con.slater = std::move(w);
    return inst;
}

} // namespace testutil
