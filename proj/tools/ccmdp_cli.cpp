#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccmdp/bench.hpp"
#include "ccmdp/mdp.hpp"
#include "ccmdp/oracle.hpp"

namespace {

using namespace ccmdp;

int cmd_run(const std::string& config_path, int workers) {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (workers > 0) cfg.workers = workers;
    ExperimentResult res = run_experiment(cfg);
    std::cout << "F_star          " << res.oracle.F_star << "\n"
              << "avg_gap         " << res.metrics.avg_gap << "\n"
              << "avg_violation   " << res.metrics.avg_violation << "\n"
              << "tail_gap        " << res.metrics.tail_gap << "\n"
              << "report f / g    " << res.report_f << " / " << res.report_g << "\n"
              << "wall time [s]   " << res.wall_time_s << "\n"
              << "artifacts       " << res.log_csv_path << ", " << res.summary_path << ", "
              << res.heatmap_path << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<int>& ts, int workers) {
    ExperimentConfig base = ExperimentConfig::load(config_path);
    if (workers > 0) base.workers = workers;
    for (int t : ts) {
        ExperimentConfig cfg = base;
        cfg.T = t;
        cfg.output_dir =
            (std::filesystem::path(base.output_dir) / ("T" + std::to_string(t))).string();
        ExperimentResult res = run_experiment(cfg);
        std::cout << "T=" << t << "  avg_gap=" << res.metrics.avg_gap
                  << "  avg_violation=" << res.metrics.avg_violation << "  ("
                  << res.summary_path << ")\n";
    }
    return 0;
}

int cmd_oracle(const std::string& config_path) {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    ProblemSetup problem = build_problem(cfg);
    OracleSolution sol =
        solve_saddle_fw(problem.mdp, problem.obj, problem.con, cfg.oracle_tol,
                        cfg.oracle_max_iters);
    std::cout << sol.to_json_string() << "\n";
    return sol.certified ? 0 : 2;
}

int cmd_ratefit(const std::string& dir) {
    std::vector<std::pair<double, double>> points;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().filename() != "summary.json") continue;
        std::ifstream in(entry.path());
        nlohmann::json j = nlohmann::json::parse(in);
        points.emplace_back(j.at("T").get<double>(),
                            j.at("avg_gap").get<double>() +
                                j.at("avg_violation").get<double>());
    }
    RateFit fit = rate_fit(points);
    std::cout << "points     " << points.size() << "\n"
              << "slope      " << fit.slope << "\n"
              << "intercept  " << fit.intercept << "\n"
              << "r_squared  " << fit.r_squared << "\n";
    if (fit.floored) std::cout << "note: some metrics floored at 1e-12 before log\n";
    return 0;
}

int cmd_validate(const std::string& mdp_path) {
    TabularMdp mdp = TabularMdp::load(mdp_path); // load() validates
    std::cout << "ok: " << mdp.n_states << " states, " << mdp.n_actions
              << " actions, gamma " << mdp.gamma << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular convex-CMDP primal-dual solver toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string dir;
    std::string mdp_path;
    std::vector<int> sweep_ts;
    int workers = 0;

    auto* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("config", config_path, "experiment config json")->required();
    run->add_option("--workers", workers, "rollout worker threads");

    auto* sweep = app.add_subcommand("sweep", "run the experiment across iteration counts");
    sweep->add_option("config", config_path, "experiment config json")->required();
    sweep->add_option("--T", sweep_ts, "iteration counts")->required()->delimiter(',');
    sweep->add_option("--workers", workers, "rollout worker threads");

    auto* oracle = app.add_subcommand("oracle", "solve the instance to ground truth");
    oracle->add_option("config", config_path, "experiment config json")->required();

    auto* ratefit = app.add_subcommand("ratefit", "fit a convergence rate over summaries");
    ratefit->add_option("dir", dir, "directory holding summary.json files")->required();

    auto* validate = app.add_subcommand("validate", "check an MDP json file");
    validate->add_option("mdp", mdp_path, "MDP json file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, workers);
        if (sweep->parsed()) return cmd_sweep(config_path, sweep_ts, workers);
        if (oracle->parsed()) return cmd_oracle(config_path);
        if (ratefit->parsed()) return cmd_ratefit(dir);
        if (validate->parsed()) return cmd_validate(mdp_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
