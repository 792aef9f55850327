#include "ccmdp/mdp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace ccmdp {

namespace {

constexpr double kProbTol = 1e-12;

void check_distribution(const Eigen::Ref<const Eigen::VectorXd>& p,
                        const std::string& what) {
    for (int i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || p[i] < -kProbTol)
            throw std::invalid_argument(what + ": entry " + std::to_string(i) +
                                        " = " + std::to_string(p[i]) +
                                        " is not a probability");
    }
    if (std::abs(p.sum() - 1.0) > 1e-12)
        throw std::invalid_argument(what + ": sums to " + std::to_string(p.sum()) +
                                    ", expected 1");
}

} // namespace

void TabularMdp::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("TabularMdp: state and action counts must be positive");
    if (gamma < 0.0 || gamma >= 1.0)
        throw std::invalid_argument("TabularMdp: gamma must lie in [0, 1)");
    if (transition.rows() != n_states * n_actions || transition.cols() != n_states)
        throw std::invalid_argument("TabularMdp: transition must be (S*A) x S");
    if (rho.size() != n_states)
        throw std::invalid_argument("TabularMdp: rho must have one entry per state");
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            check_distribution(transition.row(sa(s, a)).transpose(),
                               "transition row (s=" + std::to_string(s) +
                                   ", a=" + std::to_string(a) + ")");
    check_distribution(rho, "rho");
}

Policy Policy::uniform(int n_states, int n_actions) {
    Policy p;
    p.probs = Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions);
    return p;
}

void Policy::validate() const {
    for (int s = 0; s < probs.rows(); ++s)
        check_distribution(probs.row(s).transpose(), "policy row s=" + std::to_string(s));
}

double OccupancyMeasure::flow_residual(const TabularMdp& mdp) const {
    Eigen::VectorXd d = state_occupancy(*this);
    Eigen::VectorXd inflow = mdp.transition.transpose() * lambda;
    Eigen::VectorXd rhs = (1.0 - mdp.gamma) * mdp.rho + mdp.gamma * inflow;
    return (d - rhs).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const Policy& policy) {
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            p_pi.row(s) += policy.probs(s, a) * mdp.transition.row(mdp.sa(s, a));
    return p_pi;
}

OccupancyMeasure occupancy_exact(const TabularMdp& mdp, const Policy& policy) {
    if (policy.probs.rows() != mdp.n_states || policy.probs.cols() != mdp.n_actions)
        throw std::invalid_argument("occupancy_exact: policy dimensions do not match MDP");

    Eigen::MatrixXd p_pi = policy_transition(mdp, policy);
    Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p_pi.transpose();
    Eigen::VectorXd d = system.partialPivLu().solve((1.0 - mdp.gamma) * mdp.rho);

    OccupancyMeasure occ;
    occ.n_states = mdp.n_states;
    occ.n_actions = mdp.n_actions;
    occ.lambda.resize(mdp.n_states * mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        double ds = d[s] < 0.0 && d[s] >= -kProbTol ? 0.0 : d[s];
        for (int a = 0; a < mdp.n_actions; ++a)
            occ.lambda[occ.sa(s, a)] = ds * policy.probs(s, a);
    }
    return occ;
}

Eigen::VectorXd state_occupancy(const OccupancyMeasure& occ) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(occ.n_states);
    for (int s = 0; s < occ.n_states; ++s)
        for (int a = 0; a < occ.n_actions; ++a) d[s] += occ.lambda[occ.sa(s, a)];
    return d;
}

Policy policy_from_occupancy(const OccupancyMeasure& occ) {
    Eigen::VectorXd d = state_occupancy(occ);
    Policy policy;
    policy.probs.resize(occ.n_states, occ.n_actions);
    for (int s = 0; s < occ.n_states; ++s) {
        if (d[s] <= 0.0)
            throw std::invalid_argument("policy_from_occupancy: state " + std::to_string(s) +
                                        " has zero occupancy mass");
        for (int a = 0; a < occ.n_actions; ++a) {
            double p = occ.lambda[occ.sa(s, a)] / d[s];
            policy.probs(s, a) = (p < 0.0 && p >= -kProbTol) ? 0.0 : p;
        }
        policy.probs.row(s) /= policy.probs.row(s).sum();
    }
    return policy;
}

ValueFunctions value_q_advantage(const TabularMdp& mdp, const Policy& policy,
                                 const Eigen::VectorXd& reward) {
    if (reward.size() != mdp.n_states * mdp.n_actions)
        throw std::invalid_argument("value_q_advantage: reward must have S*A entries");
    if (policy.probs.rows() != mdp.n_states || policy.probs.cols() != mdp.n_actions)
        throw std::invalid_argument("value_q_advantage: policy dimensions do not match MDP");

    // State values solve v = r_pi + gamma P_pi v.
    Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            r_pi[s] += policy.probs(s, a) * reward[mdp.sa(s, a)];
    Eigen::MatrixXd p_pi = policy_transition(mdp, policy);
    Eigen::MatrixXd system =
        Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p_pi;
    ValueFunctions out;
    out.v = system.partialPivLu().solve(r_pi);
    out.q = reward + mdp.gamma * mdp.transition * out.v;
    out.adv.resize(out.q.size());
    for (int s = 0; s < mdp.n_states; ++s) {
        double vs = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) vs += policy.probs(s, a) * out.q[mdp.sa(s, a)];
        for (int a = 0; a < mdp.n_actions; ++a) out.adv[mdp.sa(s, a)] = out.q[mdp.sa(s, a)] - vs;
    }
    out.v_rho = mdp.rho.dot(out.v);
    return out;
}

Trajectory rollout(const TabularMdp& mdp, const Policy& policy, int horizon,
                   StreamRng& rng) {
    if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
    Trajectory traj;
    traj.stream_key = rng.key();
    traj.steps.reserve(horizon);
    int s = rng.next_categorical({mdp.rho.data(), static_cast<size_t>(mdp.rho.size())});
    for (int k = 0; k < horizon; ++k) {
        Eigen::VectorXd row = policy.probs.row(s).transpose();
        int a = rng.next_categorical({row.data(), static_cast<size_t>(row.size())});
        traj.steps.emplace_back(s, a);
        Eigen::VectorXd next = mdp.transition.row(mdp.sa(s, a)).transpose();
        s = rng.next_categorical({next.data(), static_cast<size_t>(next.size())});
    }
    return traj;
}

std::vector<Trajectory> rollout_batch(const TabularMdp& mdp, const Policy& policy,
                                      int horizon, int n, std::uint64_t seed,
                                      std::uint64_t iteration, int workers) {
    std::vector<Trajectory> out(n);
    auto work = [&](int tid, int stride) {
        for (int i = tid; i < n; i += stride) {
            StreamRng rng(derive_stream(seed, iteration, static_cast<std::uint64_t>(i)));
            out[i] = rollout(mdp, policy, horizon, rng);
        }
    };
    if (workers <= 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
        for (auto& th : pool) th.join();
    }
    return out;
}

OccupancyMeasure occupancy_estimate(const std::vector<Trajectory>& trajectories,
                                    double gamma, int n_states, int n_actions) {
    if (trajectories.empty())
        throw std::invalid_argument("occupancy_estimate: empty trajectory list");
    const size_t horizon = trajectories.front().steps.size();
    for (const auto& t : trajectories)
        if (t.steps.size() != horizon)
            throw std::invalid_argument("occupancy_estimate: trajectories differ in length");

    OccupancyMeasure occ;
    occ.n_states = n_states;
    occ.n_actions = n_actions;
    occ.lambda = Eigen::VectorXd::Zero(n_states * n_actions);
    for (const auto& traj : trajectories) {
        double w = 1.0;
        for (const auto& [s, a] : traj.steps) {
            occ.lambda[occ.sa(s, a)] += w;
            w *= gamma;
        }
    }
    occ.lambda *= (1.0 - gamma) / static_cast<double>(trajectories.size());
    return occ;
}

// --- serialization ---

std::string TabularMdp::to_json_string() const {
    nlohmann::json j;
    j["n_states"] = n_states;
    j["n_actions"] = n_actions;
    j["gamma"] = gamma;
    j["rho"] = std::vector<double>(rho.data(), rho.data() + rho.size());
    auto& trans = j["transition"] = nlohmann::json::array();
    for (int s = 0; s < n_states; ++s) {
        nlohmann::json per_state = nlohmann::json::array();
        for (int a = 0; a < n_actions; ++a) {
            const auto row = transition.row(sa(s, a));
            per_state.push_back(std::vector<double>(row.begin(), row.end()));
        }
        trans.push_back(std::move(per_state));
    }
    return j.dump(2);
}

TabularMdp TabularMdp::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TabularMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    auto rho = j.at("rho").get<std::vector<double>>();
    mdp.rho = Eigen::Map<const Eigen::VectorXd>(rho.data(), rho.size());
    const auto& trans = j.at("transition");
    if (static_cast<int>(trans.size()) != mdp.n_states)
        throw std::invalid_argument("MDP json: transition must have n_states outer entries");
    mdp.transition.resize(mdp.n_states * mdp.n_actions, mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        if (static_cast<int>(trans[s].size()) != mdp.n_actions)
            throw std::invalid_argument("MDP json: transition[" + std::to_string(s) +
                                        "] must have n_actions entries");
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto row = trans[s][a].get<std::vector<double>>();
            if (static_cast<int>(row.size()) != mdp.n_states)
                throw std::invalid_argument("MDP json: transition[" + std::to_string(s) + "][" +
                                            std::to_string(a) + "] must have n_states entries");
            mdp.transition.row(mdp.sa(s, a)) =
                Eigen::Map<const Eigen::RowVectorXd>(row.data(), row.size());
        }
    }
    mdp.validate();
    return mdp;
}

TabularMdp TabularMdp::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open MDP file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

void TabularMdp::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write MDP file: " + path);
    out << to_json_string() << "\n";
}

} // namespace ccmdp
