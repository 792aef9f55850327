#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ccmdp/mdp.hpp"
#include "ccmdp/objectives.hpp"
#include "ccmdp/oracle.hpp"
#include "ccmdp/pdpg.hpp"

namespace ccmdp {

struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
};

// Deterministic grid MDP with five actions (left, right, up, down, stay);
// moves into walls clamp. The demo path defines a deterministic policy whose
// exact occupancy becomes the constraint center lambda0.
struct GridworldSpec {
    int width = 10;
    int height = 10;
    Cell start;
    Cell target;
    std::vector<Cell> penalty_region;
    double step_reward = 0.0;
    double goal_reward = 1.0;
    double penalty_reward = -1.0;
    double gamma = 0.9;
    std::vector<Cell> demo_path;
    double d0 = 0.2;

    int state(const Cell& c) const { return c.y * width + c.x; }
};

// The bundled two-corridor layout: start and target on the middle row, a
// penalty block between them, demo path taking the lower route.
GridworldSpec default_gridworld();

struct GridworldInstance {
    GridworldSpec spec;
    TabularMdp mdp;
    Eigen::VectorXd reward;
    Policy demo_policy;
    OccupancyMeasure lambda0;
};

GridworldInstance make_gridworld(const GridworldSpec& spec);

// Transition rows drawn from a symmetric Dirichlet(concentration), uniform
// initial distribution; deterministic per seed.
TabularMdp make_random_mdp(std::uint64_t seed, int n_states, int n_actions, double gamma,
                           double concentration);

struct ExperimentConfig {
    int schema = 1;

    std::string instance_type = "gridworld"; // gridworld | random_mdp | file
    GridworldSpec gridworld = default_gridworld();
    std::uint64_t rand_seed = 0;
    int rand_states = 3;
    int rand_actions = 2;
    double rand_gamma = 0.6;
    double rand_concentration = 1.0;
    std::string mdp_path;

    // Objective/constraint JSON. The sentinels {"kind":"instance_reward"} and
    // {"kind":"instance_demo_ball"} resolve against the gridworld instance.
    std::string objective_json = R"({"kind":"instance_reward"})";
    std::string constraint_json = R"({"kind":"instance_demo_ball"})";

    int T = 1000;
    double eta1 = -1.0; // < 0: derive from the smoothness bounds
    double eta2 = -1.0; // < 0: T^(-2/3) or T^(-1/2) per variant
    double C0 = -1.0;   // < 0: 1 + (M_F - F_tilde)/xi from the Slater witness
    double mu0 = 0.0;
    double delta = 0.0;
    bool auto_delta = false; // solve the pessimism equation with default proxies
    RateVariant variant = RateVariant::concave;
    ParamKind param_kind = ParamKind::tabular_softmax;
    std::string theta0_json; // empty: zero logits / uniform table
    GradEstimatorConfig estimator;
    ConstraintMode constraint_mode = ConstraintMode::exact;
    std::uint64_t seed = 0;
    int workers = 1;
    bool ascent_guard = false;

    double oracle_tol = 1e-6;
    int oracle_max_iters = 200000;
    std::string output_dir = "out";

    std::string raw_json; // original text, echoed into the summary

    static ExperimentConfig from_json_string(const std::string& text);
    static ExperimentConfig load(const std::string& path);
};

struct ProblemSetup {
    TabularMdp mdp;
    ObjectiveSpec obj;
    ConstraintSpec con;
    std::optional<GridworldInstance> grid;
};

ProblemSetup build_problem(const ExperimentConfig& cfg);

// Solver config with every derived quantity resolved (step sizes, C0, delta,
// initial parameters).
PdpgConfig resolve_solver(const ExperimentConfig& cfg, const ProblemSetup& problem);

struct ExperimentResult {
    OracleSolution oracle;
    IterateLog log;
    RunMetrics metrics;
    OccupancyMeasure reported; // tail-averaged occupancy of the run
    double report_f = 0.0;
    double report_g = 0.0;
    double wall_time_s = 0.0;
    std::string log_csv_path;
    std::string summary_path;
    std::string heatmap_path;
};

// Full pipeline: oracle, PDPG/PDPG-0 run, artifact files (log.csv,
// summary.json, heatmap.csv) under the config's output directory. The
// CCMDP_OUTPUT_ROOT environment variable, when set, prefixes output_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    bool floored = false; // some metric was clamped to 1e-12 before the log
};

// Least-squares fit of log(avg_gap + avg_violation) against log T.
// Requires at least 4 points spanning two decades of T.
RateFit rate_fit(std::vector<std::pair<double, double>> metric_by_T);

} // namespace ccmdp
