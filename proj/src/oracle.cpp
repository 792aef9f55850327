#include "ccmdp/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace ccmdp {

namespace {

// -g as a concave quadratic, for feasibility runs.
LagrangianQuadratic negated_constraint(const ConstraintSpec& con, int dim) {
    LagrangianQuadratic q;
    q.lin = Eigen::VectorXd::Zero(dim);
    if (con.kind == ConstraintSpec::Kind::linear) {
        q.lin = -con.c / (1.0 - con.gamma);
        q.constant = con.budget;
    } else {
        q.quad = 1.0;
        q.lin = 2.0 * con.center;
        q.constant = con.radius * con.radius - con.center.squaredNorm();
    }
    return q;
}

// Restricted master: maximize q over the convex hull of the vertices. The
// weight problem is a tiny simplex-constrained QP, solved by an active-set
// sweep on the KKT system.
void solve_master(const LagrangianQuadratic& q, const std::vector<Eigen::VectorXd>& vertices,
                  Eigen::VectorXd& weights) {
    const int m = static_cast<int>(vertices.size());
    if (m == 1) {
        weights = Eigen::VectorXd::Ones(1);
        return;
    }
    Eigen::MatrixXd vmat(vertices[0].size(), m);
    for (int i = 0; i < m; ++i) vmat.col(i) = vertices[i];
    Eigen::VectorXd b = vmat.transpose() * q.lin;
    if (q.quad == 0.0) {
        int best = 0;
        for (int i = 1; i < m; ++i)
            if (b[i] > b[best]) best = i;
        weights = Eigen::VectorXd::Zero(m);
        weights[best] = 1.0;
        return;
    }
    Eigen::MatrixXd qmat = q.quad * (vmat.transpose() * vmat); // maximize b'w - w'Qw
    const double scale = qmat.trace() / m + b.cwiseAbs().maxCoeff() + 1.0;

    Eigen::VectorXd beta = weights.cwiseMax(0.0);
    double total = beta.sum();
    beta = total > 0.0 ? Eigen::VectorXd(beta / total)
                       : Eigen::VectorXd(Eigen::VectorXd::Constant(m, 1.0 / m));
    std::vector<char> active(m, 0);
    bool any = false;
    for (int i = 0; i < m; ++i) {
        active[i] = beta[i] > 1e-15;
        any = any || active[i];
    }
    if (!any) active[0] = 1;

    for (int round = 0; round < 6 * m + 40; ++round) {
        std::vector<int> idx;
        for (int i = 0; i < m; ++i)
            if (active[i]) idx.push_back(i);
        const int k = static_cast<int>(idx.size());

        // equality-constrained stationary point on the current support
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
        Eigen::VectorXd rhs(k + 1);
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) kkt(i, j) = 2.0 * qmat(idx[i], idx[j]);
            kkt(i, i) += 1e-13 * scale; // affinely dependent vertices
            kkt(i, k) = kkt(k, i) = 1.0;
            rhs[i] = b[idx[i]];
        }
        rhs[k] = 1.0;
        Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
        Eigen::VectorXd beta_eq = Eigen::VectorXd::Zero(m);
        for (int i = 0; i < k; ++i) beta_eq[idx[i]] = sol[i];

        double min_on_support = 0.0;
        for (int i : idx) min_on_support = std::min(min_on_support, beta_eq[i]);
        if (min_on_support >= -1e-13) {
            beta = beta_eq.cwiseMax(0.0);
            beta /= beta.sum();
            const double nu = sol[k];
            Eigen::VectorXd reduced = b - 2.0 * qmat * beta;
            int add = -1;
            double best = nu + 1e-11 * scale;
            for (int i = 0; i < m; ++i)
                if (!active[i] && reduced[i] > best) {
                    best = reduced[i];
                    add = i;
                }
            if (add < 0) break;
            active[add] = 1;
        } else {
            // walk toward the stationary point until a weight hits zero
            double t_max = 1.0;
            int drop = -1;
            for (int i : idx)
                if (beta_eq[i] < beta[i]) {
                    double t = beta[i] / (beta[i] - beta_eq[i]);
                    if (t < t_max) {
                        t_max = t;
                        drop = i;
                    }
                }
            beta += t_max * (beta_eq - beta);
            beta = beta.cwiseMax(0.0);
            if (drop >= 0) {
                active[drop] = 0;
                beta[drop] = 0.0;
            }
            beta /= beta.sum();
        }
    }
    weights = beta;
}

} // namespace

VertexSolution lambda_linear_oracle(const TabularMdp& mdp, const Eigen::VectorXd& w) {
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    const double tie_tol = 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff() / (1.0 - mdp.gamma));

    std::vector<int> action(S, 0);
    for (int s = 0; s < S; ++s)
        for (int a = 1; a < A; ++a)
            if (w[mdp.sa(s, a)] > w[mdp.sa(s, action[s])] + tie_tol) action[s] = a;

    auto as_policy = [&](const std::vector<int>& act) {
        Policy p;
        p.probs = Eigen::MatrixXd::Zero(S, A);
        for (int s = 0; s < S; ++s) p.probs(s, act[s]) = 1.0;
        return p;
    };

    Policy policy = as_policy(action);
    for (int sweep = 0; sweep < 500; ++sweep) {
        ValueFunctions vals = value_q_advantage(mdp, policy, w);
        bool changed = false;
        for (int s = 0; s < S; ++s) {
            int best = 0;
            for (int a = 1; a < A; ++a)
                if (vals.q[mdp.sa(s, a)] > vals.q[mdp.sa(s, best)] + tie_tol) best = a;
            if (vals.q[mdp.sa(s, best)] > vals.q[mdp.sa(s, action[s])] + tie_tol) {
                action[s] = best;
                changed = true;
            }
        }
        if (!changed) break;
        policy = as_policy(action);
    }

    VertexSolution out;
    out.policy = policy;
    out.occ = occupancy_exact(mdp, policy);
    out.value = w.dot(out.occ.lambda);
    return out;
}

InnerMaxResult maximize_over_polytope(const TabularMdp& mdp, const LagrangianQuadratic& q,
                                      double tol, int max_oracle_calls,
                                      const InnerMaxResult* warm_start) {
    InnerMaxResult res;
    if (warm_start && !warm_start->vertices.empty()) {
        res.vertices = warm_start->vertices;
        res.weights = warm_start->weights;
    } else {
        res.vertices = {occupancy_exact(mdp, Policy::uniform(mdp.n_states, mdp.n_actions))
                            .lambda};
        res.weights = Eigen::VectorXd::Ones(1);
    }
    solve_master(q, res.vertices, res.weights);

    for (int it = 0; it < max_oracle_calls; ++it) {
        Eigen::VectorXd lambda = Eigen::VectorXd::Zero(res.vertices[0].size());
        for (size_t i = 0; i < res.vertices.size(); ++i)
            lambda += res.weights[i] * res.vertices[i];
        Eigen::VectorXd grad = q.grad(lambda);
        VertexSolution vertex = lambda_linear_oracle(mdp, grad);
        ++res.oracle_calls;
        res.fw_gap = grad.dot(vertex.occ.lambda - lambda);
        res.lambda = lambda;
        res.value = q.eval(lambda);
        if (res.fw_gap <= tol) return res;

        bool known = false;
        for (const auto& v : res.vertices)
            if ((v - vertex.occ.lambda).lpNorm<Eigen::Infinity>() < 1e-14) {
                known = true;
                break;
            }
        if (!known) {
            res.vertices.push_back(vertex.occ.lambda);
            Eigen::VectorXd w2(res.weights.size() + 1);
            w2 << res.weights, 0.0;
            res.weights = w2;
        }
        solve_master(q, res.vertices, res.weights);

        // prune dead vertices
        std::vector<Eigen::VectorXd> keep_v;
        std::vector<double> keep_w;
        for (size_t i = 0; i < res.vertices.size(); ++i)
            if (res.weights[i] > 1e-14) {
                keep_v.push_back(res.vertices[i]);
                keep_w.push_back(res.weights[i]);
            }
        if (!keep_v.empty()) {
            res.vertices = std::move(keep_v);
            res.weights = Eigen::Map<Eigen::VectorXd>(keep_w.data(), keep_w.size());
            res.weights /= res.weights.sum();
        }
    }
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(res.vertices[0].size());
    for (size_t i = 0; i < res.vertices.size(); ++i)
        lambda += res.weights[i] * res.vertices[i];
    res.lambda = lambda;
    res.value = q.eval(lambda);
    return res;
}

OracleSolution solve_saddle_fw(const TabularMdp& mdp, const ObjectiveSpec& obj,
                               const ConstraintSpec& con, double tol, int max_iters) {
    const int dim = mdp.n_states * mdp.n_actions;
    int oracle_calls = 0;

    // Slater data: stored witness, or a preliminary feasibility run.
    double xi = 0.0;
    double f_tilde = 0.0;
    if (con.slater) {
        con.verify_slater(mdp);
        Policy pi = build_policy(con.slater->theta_tilde, mdp.n_states, mdp.n_actions);
        Eigen::VectorXd lam = occupancy_exact(mdp, pi).lambda;
        xi = con.slater->xi;
        f_tilde = f_eval_grad(obj, lam).first;
    } else {
        InnerMaxResult feas =
            maximize_over_polytope(mdp, negated_constraint(con, dim), tol * 0.01, 5000);
        oracle_calls += feas.oracle_calls;
        double g_min = g_eval_grad(con, feas.lambda).first;
        if (g_min >= -tol)
            throw std::runtime_error(
                "solve_saddle_fw: instance is not strictly feasible (min g = " +
                std::to_string(g_min) + ")");
        xi = -g_min;
        f_tilde = f_eval_grad(obj, feas.lambda).first;
    }
    const double mu_cap = (obj.m_f() - f_tilde) / xi + 1.0;

    const double inner_tol = tol * 0.05;
    const double cs_tol = tol * 0.25;
    double mu = 0.0;
    double step = mu_cap / 2.0;
    int prev_sign = 0;

    InnerMaxResult inner;
    bool have_inner = false;
    // bracket around the violation sign change, for the piecewise-linear case
    double g_lo = 0.0, g_hi = 0.0;
    Eigen::VectorXd lam_lo, lam_hi;

    while (oracle_calls < max_iters) {
        LagrangianQuadratic q = lagrangian_quadratic(obj, con, mu);
        inner = maximize_over_polytope(mdp, q, inner_tol, max_iters - oracle_calls,
                                       have_inner ? &inner : nullptr);
        have_inner = true;
        oracle_calls += inner.oracle_calls;
        inner.oracle_calls = 0;
        double viol = g_eval_grad(con, inner.lambda).first;

        if (viol > 0.0) {
            g_lo = viol;
            lam_lo = inner.lambda;
        } else {
            g_hi = viol;
            lam_hi = inner.lambda;
        }
        if (mu == 0.0 && viol <= 0.0) break;             // constraint inactive
        if (std::abs(viol) * std::max(mu, 1.0) <= cs_tol) break;
        int sign = viol > 0.0 ? 1 : -1;
        if (prev_sign != 0 && sign != prev_sign) step *= 0.5;
        prev_sign = sign;
        if (step <= 1e-15 * mu_cap) break;
        mu = std::min(std::max(mu + step * sign, 0.0), mu_cap);
    }

    // Primal recovery. The strictly concave cases land on a feasible point as
    // mu is refined; the linear-linear kink needs the two bracketing vertices
    // mixed to the constraint boundary.
    Eigen::VectorXd lambda_hat = inner.lambda;
    double g_hat = g_eval_grad(con, lambda_hat).first;
    LagrangianQuadratic q_now = lagrangian_quadratic(obj, con, mu);
    if (q_now.quad == 0.0 && mu > 0.0 && lam_lo.size() > 0 && lam_hi.size() > 0 &&
        g_lo > 0.0 && g_hi < 0.0) {
        double w = g_lo / (g_lo - g_hi);
        Eigen::VectorXd mix = w * lam_hi + (1.0 - w) * lam_lo;
        double g_mix = g_eval_grad(con, mix).first;
        bool better = g_hat > 0.0 ||
                      f_eval_grad(obj, mix).first >= f_eval_grad(obj, lambda_hat).first;
        if (g_mix <= 1e-10 && better) {
            lambda_hat = mix;
            g_hat = g_mix;
        }
    }
    if (g_hat > 0.0 && xi > 0.0) {
        // pull toward the Slater point just enough to restore feasibility
        Eigen::VectorXd lam_slater;
        if (con.slater) {
            Policy pi = build_policy(con.slater->theta_tilde, mdp.n_states, mdp.n_actions);
            lam_slater = occupancy_exact(mdp, pi).lambda;
        } else {
            InnerMaxResult feas =
                maximize_over_polytope(mdp, negated_constraint(con, dim), tol * 0.01, 5000);
            lam_slater = feas.lambda;
        }
        double t = g_hat / (g_hat + xi);
        for (int guard = 0; guard < 60 && g_hat > 0.0; ++guard) {
            lambda_hat = (1.0 - t) * lambda_hat + t * lam_slater;
            g_hat = g_eval_grad(con, lambda_hat).first;
            t = std::min(1.0, 2.0 * t);
        }
    }

    // Certificate at the recovered pair: weak duality gives
    // F_opt <= D(mu) <= f(lambda_hat) + fw_gap + |mu g(lambda_hat)|.
    Eigen::VectorXd grad_here = q_now.grad(lambda_hat);
    VertexSolution probe = lambda_linear_oracle(mdp, grad_here);
    ++oracle_calls;
    double fw_gap = grad_here.dot(probe.occ.lambda - lambda_hat);
    double cs_residual = std::abs(mu * g_hat);

    OracleSolution out;
    out.lambda_star.n_states = mdp.n_states;
    out.lambda_star.n_actions = mdp.n_actions;
    out.lambda_star.lambda = lambda_hat;
    out.F_star = f_eval_grad(obj, lambda_hat).first;
    out.mu_star = mu;
    out.duality_gap = fw_gap + cs_residual;
    out.iterations = oracle_calls;
    out.certified = out.duality_gap <= tol && g_hat <= 1e-10;
    return out;
}

OracleSolution brute_force_policy_grid(const TabularMdp& mdp, const ObjectiveSpec& obj,
                                       const ConstraintSpec& con, int resolution) {
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    if (S * (A - 1) > 4)
        throw std::invalid_argument("brute_force_policy_grid: grid dimensionality cap is "
                                    "n_states * (n_actions - 1) <= 4");
    if (resolution < 1)
        throw std::invalid_argument("brute_force_policy_grid: resolution must be >= 1");

    // per-state grid rows: all length-A integer compositions of `resolution`
    std::vector<Eigen::VectorXd> rows;
    std::vector<int> counts(A, 0);
    auto emit = [&](auto&& self, int pos, int left) -> void {
        if (pos == A - 1) {
            counts[pos] = left;
            Eigen::VectorXd row(A);
            for (int a = 0; a < A; ++a) row[a] = static_cast<double>(counts[a]) / resolution;
            rows.push_back(row);
            return;
        }
        for (int k = 0; k <= left; ++k) {
            counts[pos] = k;
            self(self, pos + 1, left - k);
        }
    };
    emit(emit, 0, resolution);

    Policy policy;
    policy.probs.resize(S, A);
    bool any_feasible = false;
    double best_f = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_lambda;
    double prev_f = std::numeric_limits<double>::quiet_NaN();
    double max_neighbor_delta = 0.0;
    long evaluated = 0;

    std::vector<size_t> idx(S, 0);
    while (true) {
        for (int s = 0; s < S; ++s) policy.probs.row(s) = rows[idx[s]].transpose();
        Eigen::VectorXd lam = occupancy_exact(mdp, policy).lambda;
        double fv = f_eval_grad(obj, lam).first;
        double gv = g_eval_grad(con, lam).first;
        ++evaluated;
        // consecutive enumeration steps move one grid cell in the last state
        if (std::isfinite(prev_f))
            max_neighbor_delta = std::max(max_neighbor_delta, std::abs(fv - prev_f));
        prev_f = fv;
        if (gv <= 0.0 && fv > best_f) {
            best_f = fv;
            best_lambda = lam;
            any_feasible = true;
        }
        int s = S - 1;
        while (s >= 0 && ++idx[s] == rows.size()) {
            idx[s] = 0;
            --s;
            prev_f = std::numeric_limits<double>::quiet_NaN();
        }
        if (s < 0) break;
    }
    if (!any_feasible)
        throw std::runtime_error("brute_force_policy_grid: infeasible instance, no grid "
                                 "policy satisfies g <= 0");

    OracleSolution out;
    out.lambda_star.n_states = S;
    out.lambda_star.n_actions = A;
    out.lambda_star.lambda = best_lambda;
    out.F_star = best_f;
    out.mu_star = 0.0;
    out.duality_gap = max_neighbor_delta;
    out.iterations = static_cast<int>(evaluated);
    out.certified = true;
    return out;
}

DualityReport duality_check(const TabularMdp& mdp, const ObjectiveSpec& obj,
                            const ConstraintSpec& con, const OracleSolution& solution,
                            double gap_tol) {
    if (!con.slater)
        throw std::invalid_argument("duality_check: constraint carries no Slater witness");
    con.verify_slater(mdp);
    Policy pi = build_policy(con.slater->theta_tilde, mdp.n_states, mdp.n_actions);
    Eigen::VectorXd lam_tilde = occupancy_exact(mdp, pi).lambda;
    double f_tilde = f_eval_grad(obj, lam_tilde).first;

    LagrangianQuadratic q = lagrangian_quadratic(obj, con, solution.mu_star);
    InnerMaxResult inner = maximize_over_polytope(mdp, q, gap_tol * 0.01, 200000);

    DualityReport rep;
    rep.d_mu = inner.value + inner.fw_gap; // upper bound on the dual value
    rep.gap = std::abs(solution.F_star - inner.value);
    rep.mu_bound = (solution.F_star - f_tilde) / con.slater->xi;
    rep.gap_ok = rep.gap <= gap_tol;
    rep.bound_ok = solution.mu_star <= rep.mu_bound + 1e-9;
    return rep;
}

std::string OracleSolution::to_json_string() const {
    nlohmann::json j;
    j["lambda_star"] = std::vector<double>(lambda_star.lambda.data(),
                                           lambda_star.lambda.data() +
                                               lambda_star.lambda.size());
    j["F_star"] = F_star;
    j["mu_star"] = mu_star;
    j["duality_gap"] = duality_gap;
    j["iterations"] = iterations;
    j["certified"] = certified;
    return j.dump(2);
}

} // namespace ccmdp
