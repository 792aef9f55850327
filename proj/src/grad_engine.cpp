#include "ccmdp/grad_engine.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace ccmdp {

std::string to_string(GradMode mode) {
    switch (mode) {
        case GradMode::exact: return "exact";
        case GradMode::reinforce: return "reinforce";
        case GradMode::variational: return "variational";
    }
    return "?";
}

GradMode grad_mode_from_string(const std::string& name) {
    if (name == "exact") return GradMode::exact;
    if (name == "reinforce") return GradMode::reinforce;
    if (name == "variational") return GradMode::variational;
    throw std::invalid_argument("unknown gradient mode: " + name);
}

std::string to_string(ConstraintMode mode) {
    return mode == ConstraintMode::exact ? "exact" : "fenchel";
}

ConstraintMode constraint_mode_from_string(const std::string& name) {
    if (name == "exact") return ConstraintMode::exact;
    if (name == "fenchel") return ConstraintMode::fenchel;
    throw std::invalid_argument("unknown constraint mode: " + name);
}

void GradEstimatorConfig::validate() const {
    if (n < 1) throw std::invalid_argument("GradEstimatorConfig: n must be >= 1");
    if (K < 1) throw std::invalid_argument("GradEstimatorConfig: K must be >= 1");
    if (inner_iters < 1)
        throw std::invalid_argument("GradEstimatorConfig: inner_iters must be >= 1");
    if (delta <= 0.0) throw std::invalid_argument("GradEstimatorConfig: delta must be > 0");
}

Eigen::VectorXd exact_value_gradient(const TabularMdp& mdp, const ThetaParams& theta,
                                     const Policy& policy, const Eigen::VectorXd& w) {
    OccupancyMeasure occ = occupancy_exact(mdp, policy);
    ValueFunctions vals = value_q_advantage(mdp, policy, w);
    const double scale = 1.0 / (1.0 - mdp.gamma);

    if (theta.kind == ParamKind::direct) {
        Eigen::VectorXd d = state_occupancy(occ);
        Eigen::VectorXd grad(mdp.n_states * mdp.n_actions);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                grad[mdp.sa(s, a)] = scale * d[s] * vals.q[mdp.sa(s, a)];
        return grad;
    }
    if (theta.kind == ParamKind::tabular_softmax) {
        // score form collapses to lambda(s,a) * advantage(s,a) componentwise
        return scale * occ.lambda.cwiseProduct(vals.adv);
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.dim());
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            double weight = occ.lambda[mdp.sa(s, a)];
            if (weight == 0.0) continue;
            grad += scale * weight * vals.q[mdp.sa(s, a)] *
                    log_policy_gradient(theta, policy, mdp.n_states, mdp.n_actions, s, a);
        }
    return grad;
}

Eigen::MatrixXd occupancy_jacobian(const TabularMdp& mdp, const ThetaParams& theta) {
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    Policy policy = build_policy(theta, S, A);
    Eigen::MatrixXd p_pi = policy_transition(mdp, policy);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(S, S) -
                                            mdp.gamma * p_pi.transpose());
    Eigen::VectorXd d = lu.solve((1.0 - mdp.gamma) * mdp.rho);

    // dpi_j(s,a) = d pi(a|s) / d theta_j for each parameter component
    auto policy_derivative = [&](int j) {
        Eigen::MatrixXd dpi = Eigen::MatrixXd::Zero(S, A);
        if (theta.kind == ParamKind::direct) {
            dpi(j / A, j % A) = 1.0;
        } else if (theta.kind == ParamKind::tabular_softmax) {
            const int sj = j / A;
            const int aj = j % A;
            for (int a = 0; a < A; ++a)
                dpi(sj, a) =
                    policy.probs(sj, a) * ((a == aj ? 1.0 : 0.0) - policy.probs(sj, aj));
        } else {
            for (int s = 0; s < S; ++s) {
                double mean_phi = 0.0;
                for (int a = 0; a < A; ++a)
                    mean_phi += policy.probs(s, a) * theta.features(mdp.sa(s, a), j);
                for (int a = 0; a < A; ++a)
                    dpi(s, a) =
                        policy.probs(s, a) * (theta.features(mdp.sa(s, a), j) - mean_phi);
            }
        }
        return dpi;
    };

    Eigen::MatrixXd jac(S * A, theta.dim());
    for (int j = 0; j < theta.dim(); ++j) {
        Eigen::MatrixXd dpi = policy_derivative(j);
        // d/dtheta_j of the flow system: (I - gamma P_pi^T) dd = gamma dP_pi^T d
        Eigen::MatrixXd dp_pi = Eigen::MatrixXd::Zero(S, S);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                if (dpi(s, a) == 0.0) continue;
                dp_pi.row(s) += dpi(s, a) * mdp.transition.row(mdp.sa(s, a));
            }
        Eigen::VectorXd dd = lu.solve(mdp.gamma * dp_pi.transpose() * d);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                jac(mdp.sa(s, a), j) = dd[s] * policy.probs(s, a) + d[s] * dpi(s, a);
    }
    return jac;
}

Eigen::VectorXd exact_grad(const TabularMdp& mdp, const ThetaParams& theta, double mu,
                           const ObjectiveSpec& obj, const ConstraintSpec& con) {
    if (mu < 0.0) throw std::invalid_argument("exact_grad: mu must be >= 0");
    Policy policy = build_policy(theta, mdp.n_states, mdp.n_actions);
    OccupancyMeasure occ = occupancy_exact(mdp, policy);
    Eigen::VectorXd z = lagrangian_eval_grad(obj, con, occ.lambda, mu).second;
    return (1.0 - mdp.gamma) * exact_value_gradient(mdp, theta, policy, z);
}

Eigen::VectorXd reinforce_grad(const TabularMdp& mdp, const ThetaParams& theta, double mu,
                               const ObjectiveSpec& obj, const ConstraintSpec& con,
                               const GradEstimatorConfig& cfg, std::uint64_t iteration,
                               int workers) {
    cfg.validate();
    if (theta.kind == ParamKind::direct)
        throw std::invalid_argument("reinforce_grad: direct kind unsupported");
    if (mu < 0.0) throw std::invalid_argument("reinforce_grad: mu must be >= 0");

    Policy policy = build_policy(theta, mdp.n_states, mdp.n_actions);
    std::vector<Trajectory> trajs =
        rollout_batch(mdp, policy, cfg.K, cfg.n, cfg.seed, iteration, workers);
    OccupancyMeasure lambda_hat =
        occupancy_estimate(trajs, mdp.gamma, mdp.n_states, mdp.n_actions);
    // pseudo-reward frozen once per call from the batch occupancy
    Eigen::VectorXd r_hat = lagrangian_eval_grad(obj, con, lambda_hat.lambda, mu).second;

    std::vector<Eigen::VectorXd> partial(trajs.size());
    auto work = [&](int tid, int stride) {
        for (size_t i = tid; i < trajs.size(); i += stride) {
            Eigen::VectorXd score_sum = Eigen::VectorXd::Zero(theta.dim());
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(theta.dim());
            double discount = 1.0;
            for (const auto& [s, a] : trajs[i].steps) {
                score_sum +=
                    log_policy_gradient(theta, policy, mdp.n_states, mdp.n_actions, s, a);
                acc += discount * r_hat[mdp.sa(s, a)] * score_sum;
                discount *= mdp.gamma;
            }
            partial[i] = std::move(acc);
        }
    };
    if (workers <= 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
        for (auto& th : pool) th.join();
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.dim());
    for (const auto& p : partial) grad += p;
    return grad * (1.0 - mdp.gamma) / static_cast<double>(trajs.size());
}

Eigen::VectorXd variational_grad(const TabularMdp& mdp, const ThetaParams& theta, double mu,
                                 const ObjectiveSpec& obj, const ConstraintSpec& con,
                                 const GradEstimatorConfig& cfg) {
    cfg.validate();
    if (mu < 0.0) throw std::invalid_argument("variational_grad: mu must be >= 0");

    Policy policy = build_policy(theta, mdp.n_states, mdp.n_actions);
    OccupancyMeasure occ = occupancy_exact(mdp, policy);
    Eigen::MatrixXd jac = occupancy_jacobian(mdp, theta);
    LagrangianQuadratic quad = lagrangian_quadratic(obj, con, mu);

    const double delta = cfg.delta;
    const double step_x = cfg.step_x > 0.0 ? cfg.step_x : 0.5 / delta;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(theta.dim());

    if (quad.quad == 0.0) {
        // Purely linear Lagrangian: the conjugate is finite only at z = lin,
        // so the inner problem collapses to ascent in x at that single point.
        Eigen::VectorXd target = jac.transpose() * quad.lin;
        for (int it = 0; it < cfg.inner_iters; ++it) x += step_x * delta * (target - x);
        return x;
    }

    const double box = cfg.z_box > 0.0
                           ? cfg.z_box
                           : 2.0 * (obj.l_f1() + std::max(1.0, mu) * con.l_g1());
    const double step_z = cfg.step_z > 0.0 ? cfg.step_z : quad.quad;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(occ.lambda.size());
    for (int it = 0; it < cfg.inner_iters; ++it) {
        Eigen::VectorXd grad_x = delta * (jac.transpose() * z - x);
        // inf_lambda {<z,lambda> - L} is attained at (lin - z) / (2 quad)
        Eigen::VectorXd lambda_min = (quad.lin - z) / (2.0 * quad.quad);
        Eigen::VectorXd grad_z = occ.lambda + delta * (jac * x) - lambda_min;
        x += step_x * grad_x;
        z = (z - step_z * grad_z).cwiseMax(-box).cwiseMin(box);
    }
    return x;
}

Eigen::VectorXd lagrangian_grad(const TabularMdp& mdp, const ThetaParams& theta, double mu,
                                const ObjectiveSpec& obj, const ConstraintSpec& con,
                                const GradEstimatorConfig& cfg, std::uint64_t iteration,
                                int workers) {
    switch (cfg.mode) {
        case GradMode::exact: return exact_grad(mdp, theta, mu, obj, con);
        case GradMode::reinforce:
            return reinforce_grad(mdp, theta, mu, obj, con, cfg, iteration, workers);
        case GradMode::variational: return variational_grad(mdp, theta, mu, obj, con, cfg);
    }
    throw std::logic_error("lagrangian_grad: unreachable");
}

double constraint_value(const TabularMdp& mdp, const ThetaParams& theta,
                        const ConstraintSpec& con, ConstraintMode mode,
                        const FenchelOpts& opts) {
    Policy policy = build_policy(theta, mdp.n_states, mdp.n_actions);
    OccupancyMeasure occ = occupancy_exact(mdp, policy);
    if (mode == ConstraintMode::exact) return g_eval_grad(con, occ.lambda).first;

    if (con.kind == ConstraintSpec::Kind::linear) {
        // sup over z is attained only at the conjugate's support point
        Eigen::VectorXd z = con.c / (1.0 - con.gamma);
        double v = (1.0 - mdp.gamma) * value_q_advantage(mdp, policy, z).v_rho;
        return v - g_conjugate(con, z);
    }
    // projected gradient ascent on h(z) = <z, lambda(theta)> - g*(z)
    Eigen::VectorXd z = Eigen::VectorXd::Zero(occ.lambda.size());
    Eigen::VectorXd best_z = z;
    double best = occ.lambda.dot(z) - g_conjugate(con, z);
    for (int it = 0; it < opts.z_iters; ++it) {
        Eigen::VectorXd grad = occ.lambda - con.center - 0.5 * z;
        z = (z + opts.z_step * grad).cwiseMax(-opts.z_box).cwiseMin(opts.z_box);
        double h = occ.lambda.dot(z) - g_conjugate(con, z);
        if (h > best) {
            best = h;
            best_z = z;
        }
    }
    return (1.0 - mdp.gamma) * value_q_advantage(mdp, policy, best_z).v_rho -
           g_conjugate(con, best_z);
}

// --- serialization ---

std::string GradEstimatorConfig::to_json_string() const {
    nlohmann::json j;
    j["mode"] = to_string(mode);
    j["seed"] = seed;
    if (mode == GradMode::reinforce) {
        j["n"] = n;
        j["K"] = K;
    }
    if (mode == GradMode::variational) {
        j["inner_iters"] = inner_iters;
        j["step_x"] = step_x;
        j["step_z"] = step_z;
        j["z_box"] = z_box;
        j["delta"] = delta;
    }
    return j.dump();
}

GradEstimatorConfig GradEstimatorConfig::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    GradEstimatorConfig cfg;
    cfg.mode = grad_mode_from_string(j.at("mode").get<std::string>());
    cfg.n = j.value("n", cfg.n);
    cfg.K = j.value("K", cfg.K);
    cfg.inner_iters = j.value("inner_iters", cfg.inner_iters);
    cfg.step_x = j.value("step_x", cfg.step_x);
    cfg.step_z = j.value("step_z", cfg.step_z);
    cfg.z_box = j.value("z_box", cfg.z_box);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

} // namespace ccmdp
