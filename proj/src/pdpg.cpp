#include "ccmdp/pdpg.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ccmdp {

std::string to_string(RateVariant v) {
    return v == RateVariant::concave ? "concave" : "strongly_concave";
}

RateVariant rate_variant_from_string(const std::string& name) {
    if (name == "concave") return RateVariant::concave;
    if (name == "strongly_concave") return RateVariant::strongly_concave;
    throw std::invalid_argument("unknown rate variant: " + name);
}

void PdpgConfig::validate() const {
    if (T < 1) throw std::invalid_argument("PdpgConfig: T must be >= 1");
    if (eta1 <= 0.0 || eta2 <= 0.0)
        throw std::invalid_argument("PdpgConfig: step sizes must be positive");
    if (C0 <= 0.0) throw std::invalid_argument("PdpgConfig: C0 must be positive");
    if (mu0 < 0.0 || mu0 > C0)
        throw std::invalid_argument("PdpgConfig: mu0 must lie in [0, C0]");
    if (delta < 0.0) throw std::invalid_argument("PdpgConfig: delta must be >= 0");
    if (workers < 1) throw std::invalid_argument("PdpgConfig: workers must be >= 1");
    estimator.validate();
}

namespace {

IterateLog run_loop(const TabularMdp& mdp, const ObjectiveSpec& obj,
                    const ConstraintSpec& con, const PdpgConfig& cfg) {
    cfg.validate();
    if (cfg.delta > 0.0) {
        if (!con.slater)
            throw std::invalid_argument("run_pdpg0: pessimism requires a Slater witness");
        con.verify_slater(mdp);
        if (cfg.delta >= con.slater->xi)
            throw std::invalid_argument("run_pdpg0: delta = " + std::to_string(cfg.delta) +
                                        " must stay below the Slater slack xi = " +
                                        std::to_string(con.slater->xi));
    }

    GradEstimatorConfig est = cfg.estimator;
    est.seed = derive_stream(cfg.seed, est.seed);

    ThetaParams theta = cfg.theta0;
    double mu = cfg.mu0;
    double eta1 = cfg.eta1;
    int halvings = 0;

    IterateLog log;
    log.delta = cfg.delta;
    log.records.reserve(cfg.T);
    double sum_f = 0.0;
    double sum_g = 0.0;
    const int tail_start = cfg.T / 2;
    Eigen::VectorXd tail_sum = Eigen::VectorXd::Zero(mdp.n_states * mdp.n_actions);

    for (int t = 0; t < cfg.T; ++t) {
        Policy policy = build_policy(theta, mdp.n_states, mdp.n_actions);
        OccupancyMeasure occ = occupancy_exact(mdp, policy);
        if (t >= tail_start) tail_sum += occ.lambda;
        double f_val = f_eval_grad(obj, occ.lambda).first;
        double g_val = g_eval_grad(con, occ.lambda).first;

        Eigen::VectorXd grad =
            lagrangian_grad(mdp, theta, mu, obj, con, est, static_cast<std::uint64_t>(t),
                            cfg.workers);
        if (!grad.allFinite())
            throw std::runtime_error("pdpg: non-finite gradient at iteration " +
                                     std::to_string(t));

        double g_hat = cfg.constraint_mode == ConstraintMode::exact
                           ? g_val
                           : constraint_value(mdp, theta, con, ConstraintMode::fenchel);

        log.records.push_back({t, f_val, g_val, g_val + cfg.delta, mu, grad.norm()});
        sum_f += f_val;
        sum_g += g_val;

        ThetaParams next = project_theta(theta.values + eta1 * grad, theta.kind,
                                         theta.box_bound, mdp.n_states, mdp.n_actions,
                                         theta.features);
        if (cfg.ascent_guard && est.mode == GradMode::exact) {
            auto lagrangian_at = [&](const ThetaParams& th) {
                Eigen::VectorXd lam =
                    occupancy_exact(mdp, build_policy(th, mdp.n_states, mdp.n_actions))
                        .lambda;
                return lagrangian_eval_grad(obj, con, lam, mu).first;
            };
            double base = lagrangian_at(theta);
            while (halvings < 20 && lagrangian_at(next) < base - 1e-12) {
                eta1 *= 0.5;
                ++halvings;
                next = project_theta(theta.values + eta1 * grad, theta.kind,
                                     theta.box_bound, mdp.n_states, mdp.n_actions,
                                     theta.features);
            }
        }
        theta = next;
        mu = std::min(std::max(mu + cfg.eta2 * (g_hat + cfg.delta), 0.0), cfg.C0);
    }

    log.theta_final = theta;
    log.mean_f = sum_f / cfg.T;
    log.avg_violation = std::max(0.0, sum_g) / cfg.T;
    log.lambda_tail_avg = tail_sum / (cfg.T - tail_start);
    return log;
}

} // namespace

IterateLog run_pdpg(const TabularMdp& mdp, const ObjectiveSpec& obj,
                    const ConstraintSpec& con, const PdpgConfig& cfg) {
    if (cfg.delta != 0.0)
        throw std::invalid_argument("run_pdpg: delta must be 0, use run_pdpg0");
    return run_loop(mdp, obj, con, cfg);
}

IterateLog run_pdpg0(const TabularMdp& mdp, const ObjectiveSpec& obj,
                     const ConstraintSpec& con, const PdpgConfig& cfg) {
    return run_loop(mdp, obj, con, cfg);
}

HyperParams derive_hyperparams(RateVariant variant, const RateConstants& c, double T) {
    if (c.xi <= 0.0) throw std::invalid_argument("derive_hyperparams: xi must be positive");
    if (c.ell_L <= 0.0)
        throw std::invalid_argument("derive_hyperparams: ell_L must be positive");
    HyperParams h;
    h.C0 = 1.0 + (c.M_F - c.F_tilde) / c.xi;
    h.eta1 = 1.0 / c.ell_L;
    h.eta2 = variant == RateVariant::concave ? std::pow(T, -2.0 / 3.0)
                                             : std::pow(T, -0.5);
    return h;
}

double solve_delta(RateVariant variant, const DeltaConstants& c, double T) {
    if (c.xi <= 0.0) throw std::invalid_argument("solve_delta: xi must be positive");
    if (T < 1.0) throw std::invalid_argument("solve_delta: T must be >= 1");

    const double mg = c.M_G + c.xi; // |G_delta| bound on the pessimistic problem
    auto rhs = [&](double delta) {
        double c0 = 1.0 + (c.M_F - c.F_tilde) / (c.xi - delta);
        if (variant == RateVariant::concave) {
            return (2.0 * c.M_F + mg * mg / 2.0) / std::pow(T, 2.0 / 3.0) +
                   (2.0 * c.ell_L * c.ell_theta * c.ell_theta + 2.0 * mg * mg +
                    c0 * c0 / 2.0) /
                       std::cbrt(T);
        }
        if (c.eps_tilde <= 0.0)
            throw std::invalid_argument("solve_delta: strongly concave variant needs "
                                        "eps_tilde > 0");
        return (c.M_L + c.M_F + c0 * c.xi) / (c.eps_tilde * T) +
               (mg * mg / c.eps_tilde + (mg * mg + c0 * c0) / 2.0) / std::sqrt(T);
    };

    double delta = 0.0;
    for (int it = 0; it < 100; ++it) {
        if (delta >= c.xi)
            throw std::runtime_error("solve_delta: iterate reached the Slater slack; "
                                     "increase T");
        double next = rhs(delta);
        if (std::abs(next - delta) <= 1e-12) {
            delta = next;
            break;
        }
        delta = next;
    }
    if (delta >= c.xi)
        throw std::runtime_error("solve_delta: solution delta = " + std::to_string(delta) +
                                 " does not satisfy delta < xi = " + std::to_string(c.xi) +
                                 "; increase T");
    if (std::abs(rhs(delta) - delta) > 1e-10)
        throw std::runtime_error("solve_delta: fixed point did not converge");
    return delta;
}

double default_ell_theta_proxy(const TabularMdp& mdp) {
    double rho_min = mdp.rho.minCoeff();
    if (rho_min <= 0.0)
        throw std::invalid_argument("default_ell_theta_proxy: requires rho > 0 elementwise");
    double d0 = (1.0 - mdp.gamma) * rho_min;
    return std::sqrt(2.0 * (1.0 + mdp.n_actions)) / d0;
}

double default_eps_tilde_proxy(double sigma, double ell_theta, double ell_L) {
    if (sigma <= 0.0)
        throw std::invalid_argument("default_eps_tilde_proxy: sigma must be positive");
    return sigma / (sigma + 2.0 * ell_theta * ell_theta * ell_L);
}

RunMetrics run_metrics(const IterateLog& log, double F_star) {
    const int T = static_cast<int>(log.records.size());
    if (T == 0) return {};
    double sum_f = 0.0;
    double sum_g = 0.0;
    for (const auto& r : log.records) {
        sum_f += r.f;
        sum_g += r.g;
    }
    RunMetrics m;
    m.avg_gap = F_star - sum_f / T;
    m.avg_violation = std::max(0.0, sum_g) / T;
    const int tail_start = T / 2;
    double tail_f = 0.0;
    for (int t = tail_start; t < T; ++t) tail_f += log.records[t].f;
    m.tail_gap = F_star - tail_f / (T - tail_start);
    return m;
}

std::string IterateLog::csv_string() const {
    std::string out = "t,F,G,G_delta,mu,grad_norm\n";
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.f, r.g,
                      r.g_delta, r.mu, r.grad_norm);
        out += buf;
    }
    return out;
}

void IterateLog::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write CSV: " + path);
    out << csv_string();
}

} // namespace ccmdp
