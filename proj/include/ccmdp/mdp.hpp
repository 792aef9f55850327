#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ccmdp/rng.hpp"

namespace ccmdp {

// Finite MDP with dense transition kernel. transition has one row per
// state-action pair (row index s * n_actions + a) and one column per
// successor state. Immutable after construction; validate() enforces the
// probability-kernel invariants.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    Eigen::MatrixXd transition; // (S*A) x S, rows are P(.|s,a)
    double gamma = 0.0;
    Eigen::VectorXd rho;

    int sa(int s, int a) const { return s * n_actions + a; }

    void validate() const; // throws std::invalid_argument naming the first bad row
    std::string to_json_string() const;
    static TabularMdp from_json_string(const std::string& text);
    static TabularMdp load(const std::string& path);
    void save(const std::string& path) const;
};

struct Policy {
    Eigen::MatrixXd probs; // S x A, each row a distribution over actions

    static Policy uniform(int n_states, int n_actions);
    void validate() const;
};

// Discounted state-action occupancy: lambda(s*A + a) >= 0, sums to one, and
// satisfies the flow equalities of the occupancy polytope.
struct OccupancyMeasure {
    int n_states = 0;
    int n_actions = 0;
    Eigen::VectorXd lambda;

    int sa(int s, int a) const { return s * n_actions + a; }

    // Largest violation of the flow equalities
    //   sum_a lambda(s,a) = (1-gamma) rho(s) + gamma sum_{s',a'} P(s|s',a') lambda(s',a')
    double flow_residual(const TabularMdp& mdp) const;
};

struct Trajectory {
    std::vector<std::pair<int, int>> steps; // (state, action), length K
    std::uint64_t stream_key = 0;           // RNG stream the sample came from
};

struct ValueFunctions {
    double v_rho = 0.0;     // E_{s~rho} V(s)
    Eigen::VectorXd q;      // S*A
    Eigen::VectorXd adv;    // S*A, advantage Q(s,a) - V(s)
    Eigen::VectorXd v;      // S, state values
};

// State-transition matrix under a policy: P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const Policy& policy);

// Exact occupancy via the flow linear system d = (1-gamma) rho + gamma P_pi^T d,
// then lambda(s,a) = d(s) pi(a|s).
OccupancyMeasure occupancy_exact(const TabularMdp& mdp, const Policy& policy);

// State marginal d(s) = sum_a lambda(s,a).
Eigen::VectorXd state_occupancy(const OccupancyMeasure& occ);

// pi(a|s) = lambda(s,a) / sum_a' lambda(s,a'); throws when a state carries no mass.
Policy policy_from_occupancy(const OccupancyMeasure& occ);

// Exact policy evaluation for an arbitrary reward vector over S*A.
ValueFunctions value_q_advantage(const TabularMdp& mdp, const Policy& policy,
                                 const Eigen::VectorXd& reward);

// Length-K sample path from rho under the policy, driven by the given stream.
Trajectory rollout(const TabularMdp& mdp, const Policy& policy, int horizon,
                   StreamRng& rng);

// Batch of n rollouts using streams derive_stream(seed, iteration, i).
// Deterministic in (seed, iteration, n, horizon) and independent of `workers`.
std::vector<Trajectory> rollout_batch(const TabularMdp& mdp, const Policy& policy,
                                      int horizon, int n, std::uint64_t seed,
                                      std::uint64_t iteration = 0, int workers = 1);

// Empirical occupancy (1-gamma)/n sum_i sum_{k=0}^{K-1} gamma^k e(s_k, a_k).
// Mass sums to 1 - gamma^K.
OccupancyMeasure occupancy_estimate(const std::vector<Trajectory>& trajectories,
                                    double gamma, int n_states, int n_actions);

} // namespace ccmdp
