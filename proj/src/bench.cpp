#include "ccmdp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ccmdp {

GridworldSpec default_gridworld() {
    GridworldSpec spec;
    spec.width = 10;
    spec.height = 10;
    spec.start = {0, 4};
    spec.target = {9, 4};
    // central penalty block, leaving a corridor above and below
    for (int x = 3; x <= 6; ++x)
        for (int y = 3; y <= 5; ++y) spec.penalty_region.push_back({x, y});
    spec.gamma = 0.9;
    spec.d0 = 0.2;
    // demo: the lower route, with a wasteful zigzag at column 3 that a
    // learner can cut while staying inside the feasibility ball
    spec.demo_path = {{0, 4}, {0, 5}, {0, 6}, {0, 7}, {1, 7}, {2, 7}, {3, 7},
                      {3, 8}, {4, 8}, {4, 7}, {5, 7}, {6, 7}, {7, 7}, {8, 7},
                      {9, 7}, {9, 6}, {9, 5}, {9, 4}};
    return spec;
}

namespace {

enum GridAction { kLeft = 0, kRight = 1, kUp = 2, kDown = 3, kStay = 4 };
constexpr int kGridActions = 5;

Cell apply_move(const GridworldSpec& spec, Cell c, int action) {
    switch (action) {
        case kLeft: c.x = std::max(0, c.x - 1); break;
        case kRight: c.x = std::min(spec.width - 1, c.x + 1); break;
        case kUp: c.y = std::max(0, c.y - 1); break;
        case kDown: c.y = std::min(spec.height - 1, c.y + 1); break;
        default: break;
    }
    return c;
}

int move_between(const Cell& from, const Cell& to) {
    int dx = to.x - from.x;
    int dy = to.y - from.y;
    if (dx == -1 && dy == 0) return kLeft;
    if (dx == 1 && dy == 0) return kRight;
    if (dx == 0 && dy == -1) return kUp;
    if (dx == 0 && dy == 1) return kDown;
    if (dx == 0 && dy == 0) return kStay;
    return -1;
}

void check_in_bounds(const GridworldSpec& spec, const Cell& c, const std::string& what) {
    if (c.x < 0 || c.x >= spec.width || c.y < 0 || c.y >= spec.height)
        throw std::invalid_argument("gridworld: " + what + " cell (" + std::to_string(c.x) +
                                    "," + std::to_string(c.y) + ") out of bounds");
}

} // namespace

GridworldInstance make_gridworld(const GridworldSpec& spec) {
    if (spec.width < 1 || spec.height < 1)
        throw std::invalid_argument("gridworld: empty grid");
    check_in_bounds(spec, spec.start, "start");
    check_in_bounds(spec, spec.target, "target");
    for (const auto& c : spec.penalty_region) check_in_bounds(spec, c, "penalty");
    if (spec.demo_path.empty())
        throw std::invalid_argument("gridworld: demo path must be nonempty");
    for (const auto& c : spec.demo_path) check_in_bounds(spec, c, "demo");
    if (!(spec.demo_path.front() == spec.start))
        throw std::invalid_argument("gridworld: demo path must begin at the start cell");

    // 64-bit intermediate so a 200x200 grid cannot overflow the index math
    const std::int64_t n_states64 =
        static_cast<std::int64_t>(spec.width) * static_cast<std::int64_t>(spec.height);
    const int S = static_cast<int>(n_states64);
    const int A = kGridActions;

    GridworldInstance inst;
    inst.spec = spec;
    inst.mdp.n_states = S;
    inst.mdp.n_actions = A;
    inst.mdp.gamma = spec.gamma;
    inst.mdp.rho = Eigen::VectorXd::Zero(S);
    inst.mdp.rho[spec.state(spec.start)] = 1.0;
    inst.mdp.transition = Eigen::MatrixXd::Zero(S * A, S);
    inst.reward = Eigen::VectorXd::Zero(S * A);

    std::vector<bool> penalized(S, false);
    for (const auto& c : spec.penalty_region) penalized[spec.state(c)] = true;

    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            Cell c{x, y};
            int s = spec.state(c);
            for (int a = 0; a < A; ++a) {
                Cell next = apply_move(spec, c, a);
                inst.mdp.transition(inst.mdp.sa(s, a), spec.state(next)) = 1.0;
                double r = spec.step_reward;
                if (c == spec.target) r += spec.goal_reward;
                if (penalized[s]) r += spec.penalty_reward;
                inst.reward[inst.mdp.sa(s, a)] = r;
            }
        }
    inst.mdp.validate();

    // deterministic demo policy: follow the path, stay everywhere else
    std::map<int, int> demo_action;
    for (size_t i = 0; i + 1 < spec.demo_path.size(); ++i) {
        int mv = move_between(spec.demo_path[i], spec.demo_path[i + 1]);
        if (mv < 0)
            throw std::invalid_argument("gridworld: disconnected demo path between step " +
                                        std::to_string(i) + " and " + std::to_string(i + 1));
        int s = spec.state(spec.demo_path[i]);
        auto [it, inserted] = demo_action.emplace(s, mv);
        if (!inserted && it->second != mv)
            throw std::invalid_argument("gridworld: demo path revisits cell with a "
                                        "different move at step " + std::to_string(i));
    }
    demo_action.emplace(spec.state(spec.demo_path.back()), kStay);

    inst.demo_policy.probs = Eigen::MatrixXd::Zero(S, A);
    for (int s = 0; s < S; ++s) {
        auto it = demo_action.find(s);
        inst.demo_policy.probs(s, it == demo_action.end() ? kStay : it->second) = 1.0;
    }
    inst.lambda0 = occupancy_exact(inst.mdp, inst.demo_policy);
    return inst;
}

namespace {

double sample_gamma(StreamRng& rng, double alpha) {
    if (alpha < 1.0) {
        double u = rng.next_uniform();
        while (u <= 0.0) u = rng.next_uniform();
        return sample_gamma(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double u1 = rng.next_uniform();
        if (u1 <= 0.0) continue;
        double u2 = rng.next_uniform();
        double x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = rng.next_uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

} // namespace

TabularMdp make_random_mdp(std::uint64_t seed, int n_states, int n_actions, double gamma,
                           double concentration) {
    if (concentration <= 0.0)
        throw std::invalid_argument("make_random_mdp: concentration must be positive");
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.rho = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
    mdp.transition.resize(n_states * n_actions, n_states);
    StreamRng rng(seed, 0xD1A1C);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            Eigen::VectorXd row(n_states);
            for (int sp = 0; sp < n_states; ++sp) row[sp] = sample_gamma(rng, concentration);
            double total = row.sum();
            if (total <= 0.0)
                row = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
            else
                row /= total;
            mdp.transition.row(mdp.sa(s, a)) = row.transpose();
        }
    mdp.validate();
    return mdp;
}

// --- experiment configuration ---

namespace {

GridworldSpec gridworld_from_json(const nlohmann::json& j) {
    GridworldSpec spec = default_gridworld();
    if (j.contains("width")) {
        // explicit geometry replaces the default layout wholesale
        spec = GridworldSpec{};
        spec.width = j.at("width").get<int>();
        spec.height = j.at("height").get<int>();
        auto cell = [](const nlohmann::json& c) {
            return Cell{c.at(0).get<int>(), c.at(1).get<int>()};
        };
        spec.start = cell(j.at("start"));
        spec.target = cell(j.at("target"));
        for (const auto& c : j.value("penalty_region", nlohmann::json::array()))
            spec.penalty_region.push_back(cell(c));
        for (const auto& c : j.at("demo_path")) spec.demo_path.push_back(cell(c));
    }
    spec.step_reward = j.value("step_reward", spec.step_reward);
    spec.goal_reward = j.value("goal_reward", spec.goal_reward);
    spec.penalty_reward = j.value("penalty_reward", spec.penalty_reward);
    spec.gamma = j.value("gamma", spec.gamma);
    spec.d0 = j.value("d0", spec.d0);
    return spec;
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ExperimentConfig cfg;
    cfg.raw_json = text;
    cfg.schema = j.value("schema", 0);
    if (cfg.schema != 1)
        throw std::invalid_argument("experiment config: expected schema 1, got " +
                                    std::to_string(cfg.schema));

    const auto& inst = j.at("instance");
    cfg.instance_type = inst.at("type").get<std::string>();
    if (cfg.instance_type == "gridworld") {
        cfg.gridworld = gridworld_from_json(inst);
    } else if (cfg.instance_type == "random_mdp") {
        cfg.rand_seed = inst.value("seed", 0);
        cfg.rand_states = inst.at("n_states").get<int>();
        cfg.rand_actions = inst.at("n_actions").get<int>();
        cfg.rand_gamma = inst.at("gamma").get<double>();
        cfg.rand_concentration = inst.value("concentration", 1.0);
    } else if (cfg.instance_type == "file") {
        cfg.mdp_path = inst.at("path").get<std::string>();
    } else {
        throw std::invalid_argument("experiment config: unknown instance type " +
                                    cfg.instance_type);
    }
    if (j.contains("objective")) cfg.objective_json = j["objective"].dump();
    if (j.contains("constraint")) cfg.constraint_json = j["constraint"].dump();

    const auto& s = j.at("solver");
    cfg.T = s.at("T").get<int>();
    cfg.eta1 = s.value("eta1", -1.0);
    cfg.eta2 = s.value("eta2", -1.0);
    cfg.C0 = s.value("C0", -1.0);
    cfg.mu0 = s.value("mu0", 0.0);
    cfg.delta = s.value("delta", 0.0);
    cfg.auto_delta = s.value("auto_delta", false);
    cfg.variant = rate_variant_from_string(s.value("variant", "concave"));
    cfg.param_kind = param_kind_from_string(s.value("param_kind", "tabular_softmax"));
    if (s.contains("theta0")) cfg.theta0_json = s["theta0"].dump();
    if (s.contains("estimator"))
        cfg.estimator = GradEstimatorConfig::from_json_string(s["estimator"].dump());
    cfg.constraint_mode =
        constraint_mode_from_string(s.value("constraint_mode", "exact"));
    cfg.seed = s.value("seed", 0);
    cfg.workers = s.value("workers", 1);
    cfg.ascent_guard = s.value("ascent_guard", false);

    if (j.contains("oracle")) {
        cfg.oracle_tol = j["oracle"].value("tol", 1e-6);
        cfg.oracle_max_iters = j["oracle"].value("max_iters", 200000);
    }
    cfg.output_dir = j.value("output_dir", "out");
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open experiment config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

ProblemSetup build_problem(const ExperimentConfig& cfg) {
    ProblemSetup p;
    if (cfg.instance_type == "gridworld") {
        p.grid = make_gridworld(cfg.gridworld);
        p.mdp = p.grid->mdp;
    } else if (cfg.instance_type == "random_mdp") {
        p.mdp = make_random_mdp(cfg.rand_seed, cfg.rand_states, cfg.rand_actions,
                                cfg.rand_gamma, cfg.rand_concentration);
    } else {
        p.mdp = TabularMdp::load(cfg.mdp_path);
    }

    nlohmann::json obj_j = nlohmann::json::parse(cfg.objective_json);
    if (obj_j.at("kind") == "instance_reward") {
        if (!p.grid)
            throw std::invalid_argument("objective instance_reward needs a gridworld");
        p.obj = ObjectiveSpec::linear(p.grid->reward, p.mdp.gamma);
    } else {
        p.obj = ObjectiveSpec::from_json_string(cfg.objective_json);
    }

    nlohmann::json con_j = nlohmann::json::parse(cfg.constraint_json);
    if (con_j.at("kind") == "instance_demo_ball") {
        if (!p.grid)
            throw std::invalid_argument("constraint instance_demo_ball needs a gridworld");
        p.con = ConstraintSpec::sq_ball(p.grid->lambda0.lambda, p.grid->spec.d0);
        SlaterWitness w;
        w.theta_tilde = ThetaParams::direct_from(p.grid->demo_policy);
        w.xi = p.grid->spec.d0 * p.grid->spec.d0;
        p.con.slater = std::move(w);
    } else {
        p.con = ConstraintSpec::from_json_string(cfg.constraint_json);
    }
    if (p.con.slater) p.con.verify_slater(p.mdp);
    return p;
}

PdpgConfig resolve_solver(const ExperimentConfig& cfg, const ProblemSetup& p) {
    PdpgConfig s;
    s.T = cfg.T;
    s.mu0 = cfg.mu0;
    s.estimator = cfg.estimator;
    s.constraint_mode = cfg.constraint_mode;
    s.seed = cfg.seed;
    s.workers = cfg.workers;
    s.ascent_guard = cfg.ascent_guard;

    const int S = p.mdp.n_states;
    const int A = p.mdp.n_actions;
    if (!cfg.theta0_json.empty() && cfg.theta0_json.find("demo_soft") != std::string::npos) {
        // gridworld-only: logits biased toward the demo action by `scale`
        if (!p.grid)
            throw std::invalid_argument("theta0 demo_soft needs a gridworld instance");
        nlohmann::json j = nlohmann::json::parse(cfg.theta0_json);
        double scale = j.is_object() ? j.value("scale", 2.0) : 2.0;
        s.theta0 = ThetaParams::tabular(S, A);
        for (int st = 0; st < S; ++st)
            for (int a = 0; a < A; ++a)
                s.theta0.values[st * A + a] = scale * p.grid->demo_policy.probs(st, a);
    } else if (!cfg.theta0_json.empty()) {
        s.theta0 = ThetaParams::from_json_string(cfg.theta0_json);
    } else if (cfg.param_kind == ParamKind::direct) {
        s.theta0 = ThetaParams::direct_from(Policy::uniform(S, A));
    } else if (cfg.param_kind == ParamKind::linear_softmax) {
        s.theta0 = ThetaParams::linear(Eigen::MatrixXd::Identity(S * A, S * A));
    } else {
        s.theta0 = ThetaParams::tabular(S, A);
    }

    double f_tilde = 0.0;
    double xi = 0.0;
    const bool have_witness = p.con.slater.has_value();
    if (have_witness) {
        Policy pi = build_policy(p.con.slater->theta_tilde, S, A);
        f_tilde = f_eval_grad(p.obj, occupancy_exact(p.mdp, pi).lambda).first;
        xi = p.con.slater->xi;
    }
    auto need_witness = [&](const char* what) {
        if (!have_witness)
            throw std::invalid_argument(std::string("resolve_solver: ") + what +
                                        " needs a Slater witness on the constraint");
    };

    if (cfg.C0 > 0.0) {
        s.C0 = cfg.C0;
    } else {
        need_witness("deriving C0");
        s.C0 = 1.0 + (p.obj.m_f() - f_tilde) / xi;
    }

    double ell_l = 0.0;
    auto composed = [&]() {
        SmoothnessConstants psi{};
        if (s.theta0.kind != ParamKind::direct) psi = psi_constants(s.theta0);
        return composed_smoothness(p.obj, p.con, s.theta0.kind, psi, s.C0, p.mdp.gamma, A);
    };
    if (cfg.eta1 > 0.0) {
        s.eta1 = cfg.eta1;
    } else {
        ell_l = composed().l_L;
        s.eta1 = 1.0 / ell_l;
    }
    s.eta2 = cfg.eta2 > 0.0
                 ? cfg.eta2
                 : (cfg.variant == RateVariant::concave ? std::pow(cfg.T, -2.0 / 3.0)
                                                        : std::pow(cfg.T, -0.5));

    if (cfg.auto_delta) {
        need_witness("auto_delta");
        if (ell_l == 0.0) ell_l = composed().l_L;
        DeltaConstants dc;
        dc.M_F = p.obj.m_f();
        dc.M_G = p.con.m_g();
        dc.M_L = dc.M_F + s.C0 * dc.M_G;
        dc.F_tilde = f_tilde;
        dc.xi = xi;
        dc.ell_L = ell_l;
        dc.ell_theta = default_ell_theta_proxy(p.mdp);
        if (cfg.variant == RateVariant::strongly_concave)
            dc.eps_tilde = default_eps_tilde_proxy(p.obj.sigma(), dc.ell_theta, ell_l);
        s.delta = solve_delta(cfg.variant, dc, cfg.T);
    } else {
        s.delta = cfg.delta;
    }
    return s;
}

// --- experiment runner ---

namespace {

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_heatmap_csv(const std::string& path, const OccupancyMeasure& occ) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write heatmap: " + path);
    for (int s = 0; s < occ.n_states; ++s) {
        for (int a = 0; a < occ.n_actions; ++a) {
            if (a) out << ",";
            out << format_double(occ.lambda[occ.sa(s, a)]);
        }
        out << "\n";
    }
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    ExperimentResult res;

    ProblemSetup problem = build_problem(cfg);
    try {
        res.oracle = solve_saddle_fw(problem.mdp, problem.obj, problem.con, cfg.oracle_tol,
                                     cfg.oracle_max_iters);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("experiment stage oracle: ") + e.what());
    }

    PdpgConfig solver = resolve_solver(cfg, problem);
    try {
        res.log = run_pdpg0(problem.mdp, problem.obj, problem.con, solver);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("experiment stage solver: ") + e.what());
    }
    res.metrics = run_metrics(res.log, res.oracle.F_star);

    res.reported.n_states = problem.mdp.n_states;
    res.reported.n_actions = problem.mdp.n_actions;
    res.reported.lambda = res.log.lambda_tail_avg;
    res.report_f = f_eval_grad(problem.obj, res.reported.lambda).first;
    res.report_g = g_eval_grad(problem.con, res.reported.lambda).first;

    namespace fs = std::filesystem;
    fs::path out_dir = cfg.output_dir;
    if (const char* root = std::getenv("CCMDP_OUTPUT_ROOT"); root && *root)
        out_dir = fs::path(root) / out_dir;
    fs::create_directories(out_dir);

    res.log_csv_path = (out_dir / "log.csv").string();
    res.heatmap_path = (out_dir / "heatmap.csv").string();
    res.summary_path = (out_dir / "summary.json").string();
    res.log.write_csv(res.log_csv_path);
    write_heatmap_csv(res.heatmap_path, res.reported);

    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    nlohmann::json summary;
    summary["config"] = nlohmann::json::parse(cfg.raw_json.empty() ? "{}" : cfg.raw_json);
    summary["T"] = cfg.T;
    summary["avg_gap"] = res.metrics.avg_gap;
    summary["avg_violation"] = res.metrics.avg_violation;
    summary["tail_gap"] = res.metrics.tail_gap;
    summary["F_star"] = res.oracle.F_star;
    summary["mu_star"] = res.oracle.mu_star;
    summary["oracle_certified"] = res.oracle.certified;
    summary["delta"] = res.log.delta;
    summary["report"] = {{"f", res.report_f}, {"g", res.report_g}};
    summary["wall_time_s"] = res.wall_time_s;
    std::ofstream out(res.summary_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write summary: " + res.summary_path);
    out << summary.dump(2) << "\n";
    return res;
}

RateFit rate_fit(std::vector<std::pair<double, double>> metric_by_T) {
    if (metric_by_T.size() < 4)
        throw std::invalid_argument("rate_fit: need at least 4 values of T");
    std::sort(metric_by_T.begin(), metric_by_T.end());
    double t_min = metric_by_T.front().first;
    double t_max = metric_by_T.back().first;
    if (t_min <= 0.0 || t_max / t_min < 99.999)
        throw std::invalid_argument("rate_fit: T values must span at least two decades");

    RateFit fit;
    const int n = static_cast<int>(metric_by_T.size());
    Eigen::VectorXd xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        double metric = metric_by_T[i].second;
        if (metric < 1e-12) {
            metric = 1e-12;
            fit.floored = true;
        }
        xs[i] = std::log(metric_by_T[i].first);
        ys[i] = std::log(metric);
    }
    const double x_mean = xs.mean();
    const double y_mean = ys.mean();
    const double sxx = (xs.array() - x_mean).square().sum();
    const double sxy = ((xs.array() - x_mean) * (ys.array() - y_mean)).sum();
    const double syy = (ys.array() - y_mean).square().sum();
    fit.slope = sxy / sxx;
    fit.intercept = y_mean - fit.slope * x_mean;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

} // namespace ccmdp
