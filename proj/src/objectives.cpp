#include "ccmdp/objectives.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace ccmdp {

ObjectiveSpec ObjectiveSpec::linear(Eigen::VectorXd reward, double gamma) {
    if (gamma < 0.0 || gamma >= 1.0)
        throw std::invalid_argument("ObjectiveSpec::linear: gamma must lie in [0, 1)");
    ObjectiveSpec o;
    o.kind = Kind::linear;
    o.r = std::move(reward);
    o.gamma = gamma;
    return o;
}

ObjectiveSpec ObjectiveSpec::neg_sq_distance(Eigen::VectorXd target, double scale) {
    if (scale <= 0.0)
        throw std::invalid_argument("ObjectiveSpec::neg_sq_distance: scale must be positive");
    ObjectiveSpec o;
    o.kind = Kind::neg_sq_distance;
    o.target = std::move(target);
    o.scale = scale;
    return o;
}

double ObjectiveSpec::m_f() const {
    // diam(Lambda) <= sqrt(2), so the squared distance never exceeds 2
    return kind == Kind::linear ? r.cwiseAbs().maxCoeff() / (1.0 - gamma) : 2.0 * scale;
}

double ObjectiveSpec::sigma() const { return kind == Kind::linear ? 0.0 : 2.0 * scale; }

double ObjectiveSpec::l_f1() const {
    return kind == Kind::linear ? r.cwiseAbs().maxCoeff() / (1.0 - gamma) : 2.0 * scale;
}

double ObjectiveSpec::l_f2() const { return kind == Kind::linear ? 0.0 : 2.0 * scale; }

ConstraintSpec ConstraintSpec::linear(Eigen::VectorXd cost, double budget, double gamma) {
    if (gamma < 0.0 || gamma >= 1.0)
        throw std::invalid_argument("ConstraintSpec::linear: gamma must lie in [0, 1)");
    ConstraintSpec c;
    c.kind = Kind::linear;
    c.c = std::move(cost);
    c.budget = budget;
    c.gamma = gamma;
    return c;
}

ConstraintSpec ConstraintSpec::sq_ball(Eigen::VectorXd center, double radius) {
    if (radius < 0.0)
        throw std::invalid_argument("ConstraintSpec::sq_ball: radius must be nonnegative");
    ConstraintSpec c;
    c.kind = Kind::sq_ball;
    c.center = std::move(center);
    c.radius = radius;
    return c;
}

double ConstraintSpec::m_g() const {
    if (kind == Kind::linear)
        return c.cwiseAbs().maxCoeff() / (1.0 - gamma) + std::abs(budget);
    return std::max(radius * radius, 2.0 - radius * radius);
}

double ConstraintSpec::l_g1() const {
    return kind == Kind::linear ? c.cwiseAbs().maxCoeff() / (1.0 - gamma) : 2.0;
}

double ConstraintSpec::l_g2() const { return kind == Kind::linear ? 0.0 : 2.0; }

void ConstraintSpec::verify_slater(const TabularMdp& mdp) const {
    if (!slater) throw std::invalid_argument("constraint carries no Slater witness");
    if (slater->xi <= 0.0)
        throw std::invalid_argument("Slater witness: xi must be positive");
    Policy pi = build_policy(slater->theta_tilde, mdp.n_states, mdp.n_actions);
    OccupancyMeasure occ = occupancy_exact(mdp, pi);
    double g = g_eval_grad(*this, occ.lambda).first;
    if (g > -slater->xi + 1e-12)
        throw std::invalid_argument("Slater witness violated: g(lambda(theta_tilde)) = " +
                                    std::to_string(g) + " > -xi = " +
                                    std::to_string(-slater->xi));
}

std::pair<double, Eigen::VectorXd> f_eval_grad(const ObjectiveSpec& obj,
                                               const Eigen::VectorXd& lambda) {
    if (obj.kind == ObjectiveSpec::Kind::linear) {
        if (lambda.size() != obj.r.size())
            throw std::invalid_argument("f_eval_grad: dimension mismatch");
        Eigen::VectorXd grad = obj.r / (1.0 - obj.gamma);
        return {grad.dot(lambda), grad};
    }
    if (lambda.size() != obj.target.size())
        throw std::invalid_argument("f_eval_grad: dimension mismatch");
    Eigen::VectorXd diff = lambda - obj.target;
    return {-obj.scale * diff.squaredNorm(), -2.0 * obj.scale * diff};
}

std::pair<double, Eigen::VectorXd> g_eval_grad(const ConstraintSpec& con,
                                               const Eigen::VectorXd& lambda) {
    if (con.kind == ConstraintSpec::Kind::linear) {
        if (lambda.size() != con.c.size())
            throw std::invalid_argument("g_eval_grad: dimension mismatch");
        Eigen::VectorXd grad = con.c / (1.0 - con.gamma);
        return {grad.dot(lambda) - con.budget, grad};
    }
    if (lambda.size() != con.center.size())
        throw std::invalid_argument("g_eval_grad: dimension mismatch");
    Eigen::VectorXd diff = lambda - con.center;
    return {diff.squaredNorm() - con.radius * con.radius, 2.0 * diff};
}

std::pair<double, Eigen::VectorXd> lagrangian_eval_grad(const ObjectiveSpec& obj,
                                                        const ConstraintSpec& con,
                                                        const Eigen::VectorXd& lambda,
                                                        double mu) {
    if (mu < 0.0) throw std::invalid_argument("lagrangian_eval_grad: mu must be >= 0");
    auto [fv, fg] = f_eval_grad(obj, lambda);
    auto [gv, gg] = g_eval_grad(con, lambda);
    return {fv - mu * gv, fg - mu * gg};
}

double g_conjugate(const ConstraintSpec& con, const Eigen::VectorXd& z) {
    if (!z.allFinite()) throw std::invalid_argument("g_conjugate: non-finite input");
    if (con.kind == ConstraintSpec::Kind::linear) {
        Eigen::VectorXd support = con.c / (1.0 - con.gamma);
        double tol = 1e-12 * std::max(1.0, support.cwiseAbs().maxCoeff());
        if ((z - support).cwiseAbs().maxCoeff() <= tol) return con.budget;
        return std::numeric_limits<double>::infinity();
    }
    return z.dot(con.center) + 0.25 * z.squaredNorm() + con.radius * con.radius;
}

LagrangianQuadratic lagrangian_quadratic(const ObjectiveSpec& obj,
                                         const ConstraintSpec& con, double mu) {
    if (mu < 0.0) throw std::invalid_argument("lagrangian_quadratic: mu must be >= 0");
    const int n = obj.kind == ObjectiveSpec::Kind::linear
                      ? static_cast<int>(obj.r.size())
                      : static_cast<int>(obj.target.size());
    LagrangianQuadratic q;
    q.lin = Eigen::VectorXd::Zero(n);
    if (obj.kind == ObjectiveSpec::Kind::linear) {
        q.lin += obj.r / (1.0 - obj.gamma);
    } else {
        q.quad += obj.scale;
        q.lin += 2.0 * obj.scale * obj.target;
        q.constant -= obj.scale * obj.target.squaredNorm();
    }
    if (con.kind == ConstraintSpec::Kind::linear) {
        q.lin -= mu * con.c / (1.0 - con.gamma);
        q.constant += mu * con.budget;
    } else {
        q.quad += mu;
        q.lin += 2.0 * mu * con.center;
        q.constant += mu * (con.radius * con.radius - con.center.squaredNorm());
    }
    return q;
}

ComposedSmoothness composed_smoothness(double l_f1, double l_f2, double l_g1,
                                       double l_g2, double m_f, double m_g,
                                       ParamKind kind, SmoothnessConstants psi,
                                       double c0, double gamma, int n_actions) {
    if (c0 < 0.0) throw std::invalid_argument("composed_smoothness: C0 must be >= 0");
    const double om = 1.0 - gamma;
    auto compose = [&](double l1, double l2) {
        if (kind == ParamKind::direct)
            return (4.0 * l1 * gamma * n_actions + l2 * std::pow(n_actions, 1.5)) / (om * om);
        const double p1 = psi.l_psi_1;
        const double p2 = psi.l_psi_2;
        return 4.0 * l2 * p1 * p1 / std::pow(om, 4) + 8.0 * p1 * p1 * l1 / std::pow(om, 3) +
               2.0 * l1 * (p2 + p1 * p1) / (om * om);
    };
    ComposedSmoothness out;
    out.l_F = compose(l_f1, l_f2);
    out.l_G = compose(l_g1, l_g2);
    out.l_L = out.l_F + c0 * out.l_G;
    out.M_L = m_f + c0 * m_g;
    return out;
}

ComposedSmoothness composed_smoothness(const ObjectiveSpec& obj, const ConstraintSpec& con,
                                       ParamKind kind, SmoothnessConstants psi, double c0,
                                       double gamma, int n_actions) {
    return composed_smoothness(obj.l_f1(), obj.l_f2(), con.l_g1(), con.l_g2(), obj.m_f(),
                               con.m_g(), kind, psi, c0, gamma, n_actions);
}

// --- serialization ---

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

} // namespace

std::string ObjectiveSpec::to_json_string() const {
    nlohmann::json j;
    if (kind == Kind::linear) {
        j["kind"] = "linear";
        j["r"] = to_vec(r);
        j["gamma"] = gamma;
    } else {
        j["kind"] = "neg_sq_distance";
        j["target"] = to_vec(target);
        j["scale"] = scale;
    }
    return j.dump();
}

ObjectiveSpec ObjectiveSpec::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear")
        return linear(from_vec(j.at("r").get<std::vector<double>>()),
                      j.at("gamma").get<double>());
    if (kind == "neg_sq_distance")
        return neg_sq_distance(from_vec(j.at("target").get<std::vector<double>>()),
                               j.value("scale", 1.0));
    throw std::invalid_argument("unknown objective kind: " + kind);
}

std::string ConstraintSpec::to_json_string() const {
    nlohmann::json j;
    if (kind == Kind::linear) {
        j["kind"] = "linear";
        j["c"] = to_vec(c);
        j["budget"] = budget;
        j["gamma"] = gamma;
    } else {
        j["kind"] = "sq_ball";
        j["center"] = to_vec(center);
        j["radius"] = radius;
    }
    if (slater) {
        j["slater"]["theta_tilde"] =
            nlohmann::json::parse(slater->theta_tilde.to_json_string());
        j["slater"]["xi"] = slater->xi;
    }
    return j.dump();
}

ConstraintSpec ConstraintSpec::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    ConstraintSpec out;
    if (kind == "linear") {
        out = linear(from_vec(j.at("c").get<std::vector<double>>()),
                     j.at("budget").get<double>(), j.at("gamma").get<double>());
    } else if (kind == "sq_ball") {
        out = sq_ball(from_vec(j.at("center").get<std::vector<double>>()),
                      j.at("radius").get<double>());
    } else {
        throw std::invalid_argument("unknown constraint kind: " + kind);
    }
    if (j.contains("slater")) {
        SlaterWitness w;
        w.theta_tilde = ThetaParams::from_json_string(j["slater"]["theta_tilde"].dump());
        w.xi = j["slater"].at("xi").get<double>();
        out.slater = std::move(w);
    }
    return out;
}

} // namespace ccmdp
