#include "ccmdp/policy_param.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace ccmdp {

std::string to_string(ParamKind kind) {
    switch (kind) {
        case ParamKind::tabular_softmax: return "tabular_softmax";
        case ParamKind::linear_softmax: return "linear_softmax";
        case ParamKind::direct: return "direct";
    }
    return "?";
}

ParamKind param_kind_from_string(const std::string& name) {
    if (name == "tabular_softmax") return ParamKind::tabular_softmax;
    if (name == "linear_softmax") return ParamKind::linear_softmax;
    if (name == "direct") return ParamKind::direct;
    throw std::invalid_argument("unknown parameterization kind: " + name);
}

ThetaParams ThetaParams::tabular(int n_states, int n_actions, double box_bound) {
    ThetaParams t;
    t.kind = ParamKind::tabular_softmax;
    t.values = Eigen::VectorXd::Zero(n_states * n_actions);
    t.box_bound = box_bound;
    return t;
}

ThetaParams ThetaParams::linear(Eigen::MatrixXd features, double box_bound) {
    ThetaParams t;
    t.kind = ParamKind::linear_softmax;
    t.values = Eigen::VectorXd::Zero(features.cols());
    t.features = std::move(features);
    t.box_bound = box_bound;
    return t;
}

ThetaParams ThetaParams::direct_from(const Policy& policy) {
    ThetaParams t;
    t.kind = ParamKind::direct;
    t.values.resize(policy.probs.size());
    for (int s = 0; s < policy.probs.rows(); ++s)
        for (int a = 0; a < policy.probs.cols(); ++a)
            t.values[s * policy.probs.cols() + a] = policy.probs(s, a);
    return t;
}

SmoothnessConstants psi_constants(const ThetaParams& theta) {
    switch (theta.kind) {
        case ParamKind::tabular_softmax: return {1.0, 0.0};
        case ParamKind::linear_softmax: {
            double max_row = 0.0;
            for (int i = 0; i < theta.features.rows(); ++i)
                max_row = std::max(max_row, theta.features.row(i).norm());
            return {max_row, 0.0};
        }
        case ParamKind::direct:
            throw std::invalid_argument("psi_constants: direct kind has no logit map");
    }
    return {};
}

namespace {

Eigen::VectorXd logits_for_state(const ThetaParams& theta, int n_actions, int s) {
    Eigen::VectorXd psi(n_actions);
    if (theta.kind == ParamKind::tabular_softmax) {
        psi = theta.values.segment(s * n_actions, n_actions);
    } else {
        for (int a = 0; a < n_actions; ++a)
            psi[a] = theta.features.row(s * n_actions + a).dot(theta.values);
    }
    return psi;
}

} // namespace

Policy build_policy(const ThetaParams& theta, int n_states, int n_actions) {
    Policy policy;
    policy.probs.resize(n_states, n_actions);
    if (theta.kind == ParamKind::direct) {
        if (theta.values.size() != n_states * n_actions)
            throw std::invalid_argument("build_policy: direct parameter size mismatch");
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a)
                policy.probs(s, a) = theta.values[s * n_actions + a];
        policy.validate();
        return policy;
    }
    if (theta.kind == ParamKind::tabular_softmax &&
        theta.values.size() != n_states * n_actions)
        throw std::invalid_argument("build_policy: tabular parameter size mismatch");
    if (theta.kind == ParamKind::linear_softmax &&
        (theta.features.rows() != n_states * n_actions ||
         theta.features.cols() != theta.values.size()))
        throw std::invalid_argument("build_policy: feature matrix size mismatch");

    for (int s = 0; s < n_states; ++s) {
        Eigen::VectorXd psi = logits_for_state(theta, n_actions, s);
        if (!psi.allFinite())
            throw std::invalid_argument("build_policy: non-finite logits at state " +
                                        std::to_string(s));
        Eigen::VectorXd e = (psi.array() - psi.maxCoeff()).exp();
        policy.probs.row(s) = e.transpose() / e.sum();
    }
    return policy;
}

Eigen::VectorXd log_policy_gradient(const ThetaParams& theta, const Policy& policy,
                                    int n_states, int n_actions, int s, int a) {
    if (theta.kind == ParamKind::direct)
        throw std::invalid_argument(
            "log_policy_gradient: unsupported for the direct kind; use the "
            "occupancy-gradient path");
    if (s < 0 || s >= n_states || a < 0 || a >= n_actions)
        throw std::invalid_argument("log_policy_gradient: state-action out of range");

    if (theta.kind == ParamKind::tabular_softmax) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.values.size());
        for (int ap = 0; ap < n_actions; ++ap)
            grad[s * n_actions + ap] = (ap == a ? 1.0 : 0.0) - policy.probs(s, ap);
        return grad;
    }
    // linear: phi(s,a) - sum_a' pi(a'|s) phi(s,a')
    Eigen::VectorXd grad = theta.features.row(s * n_actions + a);
    for (int ap = 0; ap < n_actions; ++ap)
        grad -= policy.probs(s, ap) * theta.features.row(s * n_actions + ap).transpose();
    return grad;
}

Eigen::VectorXd log_policy_gradient(const ThetaParams& theta, int n_states,
                                    int n_actions, int s, int a) {
    Policy policy = build_policy(theta, n_states, n_actions);
    return log_policy_gradient(theta, policy, n_states, n_actions, s, a);
}

Eigen::VectorXd simplex_project(const Eigen::VectorXd& x) {
    const int n = static_cast<int>(x.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    // stable sort by descending value keeps ties deterministic
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return x[i] > x[j]; });
    double cum = 0.0;
    double tau = 0.0;
    int support = 0;
    for (int k = 0; k < n; ++k) {
        cum += x[order[k]];
        double candidate = (cum - 1.0) / (k + 1);
        if (x[order[k]] - candidate > 0.0) {
            tau = candidate;
            support = k + 1;
        }
    }
    (void)support;
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out[i] = std::max(0.0, x[i] - tau);
    return out;
}

ThetaParams project_theta(const Eigen::VectorXd& theta_raw, ParamKind kind,
                          double box_bound, int n_states, int n_actions,
                          const Eigen::MatrixXd& features) {
    if (!theta_raw.allFinite())
        throw std::invalid_argument("project_theta: non-finite input");
    ThetaParams out;
    out.kind = kind;
    out.box_bound = box_bound;
    if (kind == ParamKind::direct) {
        if (theta_raw.size() != n_states * n_actions)
            throw std::invalid_argument("project_theta: direct parameter size mismatch");
        out.values.resize(theta_raw.size());
        for (int s = 0; s < n_states; ++s)
            out.values.segment(s * n_actions, n_actions) =
                simplex_project(theta_raw.segment(s * n_actions, n_actions));
    } else {
        out.values = theta_raw.cwiseMax(-box_bound).cwiseMin(box_bound);
        out.features = features;
    }
    return out;
}

std::string ThetaParams::to_json_string() const {
    nlohmann::json j;
    j["kind"] = to_string(kind);
    j["values"] = std::vector<double>(values.data(), values.data() + values.size());
    j["box_bound"] = box_bound;
    if (kind == ParamKind::linear_softmax) {
        auto& rows = j["features"] = nlohmann::json::array();
        for (int i = 0; i < features.rows(); ++i) {
            const auto row = features.row(i);
            rows.push_back(std::vector<double>(row.begin(), row.end()));
        }
    }
    return j.dump();
}

ThetaParams ThetaParams::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ThetaParams t;
    t.kind = param_kind_from_string(j.at("kind").get<std::string>());
    auto vals = j.at("values").get<std::vector<double>>();
    t.values = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
    t.box_bound = j.value("box_bound", 50.0);
    if (j.contains("features")) {
        const auto& rows = j["features"];
        t.features.resize(rows.size(), t.values.size());
        for (size_t i = 0; i < rows.size(); ++i) {
            auto row = rows[i].get<std::vector<double>>();
            t.features.row(i) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), row.size());
        }
    }
    if (!t.values.allFinite())
        throw std::invalid_argument("ThetaParams json: non-finite values");
    return t;
}

} // namespace ccmdp
