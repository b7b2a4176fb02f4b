#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "rbpsc/bounds.hpp"
#include "rbpsc/exact_mdp.hpp"
#include "rbpsc/harness.hpp"
#include "rbpsc/instance.hpp"
#include "rbpsc/policies.hpp"
#include "rbpsc/relaxation.hpp"
#include "rbpsc/simulate.hpp"

using namespace rbpsc;

namespace {

struct Common {
    std::string instance;
    std::optional<double> alpha;
    std::string out;
    std::uint64_t seed = 0;
    double tol = 1e-6;
    std::size_t max_exact_states = ExactGuard{}.max_joint_states;
};

ProblemInstance load(const Common& c) {
    auto inst = load_instance(c.instance);
    if (c.alpha) inst.discount = *c.alpha;
    require_valid(inst);
    return inst;
}

void emit(const nlohmann::json& doc, const std::string& out) {
    if (out.empty()) {
        std::cout << doc.dump(2) << "\n";
        return;
    }
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << doc.dump(2) << "\n";
}

nlohmann::json ranks(std::span<const int> v) {
    auto j = nlohmann::json::array();
    for (int k : v) j.push_back(k + 1);
    return j;
}

int cmd_gen(const Common& c, const GeneratorParams& params, const std::string& suite) {
    ProblemInstance inst = suite.empty() ? generate_random_instance(params) : table_suite(suite).build();
    if (c.alpha) inst.discount = *c.alpha;
    if (c.out.empty()) {
        std::cout << instance_to_json(inst).dump(2) << "\n";
    } else {
        save_instance(inst, c.out);
    }
    return 0;
}

int cmd_solve_exact(const Common& c) {
    const auto inst = load(c);
    ExactGuard guard;
    guard.max_joint_states = c.max_exact_states;
    const JointModel model(inst, guard);
    const auto sol = solve_exact(model);
    const auto vi = value_iteration(model, c.tol);
    const auto policy = extract_policy(model, sol);
    const auto& idx = model.indexer();
    const std::size_t start = idx.rank(idx.site_rank(std::vector<int>(inst.n_sites(), 0)),
                                       idx.permutation_rank(inst.initial_placement));
    nlohmann::json doc = {
        {"joint_states", model.num_states()},
        {"actions", model.num_actions()},
        {"optimal_value", sol.optimal_value},
        {"lp_objective", sol.lp_objective},
        {"value_iteration_value", model.initial_value(vi.values)},
        {"value_iteration_iterations", vi.iterations},
        {"first_action_from_zero_states", ranks(idx.permutation(policy[start]))},
    };
    emit(doc, c.out);
    return 0;
}

int cmd_relax(const Common& c) {
    const auto inst = load(c);
    const auto sol = solve_relaxation(inst);
    if (c.out.empty()) {
        std::cout << "Z_r " << sol.objective << "\n";
    } else {
        save_relaxation(sol, c.out);
        std::cout << "Z_r " << sol.objective << " written to " << c.out << "\n";
    }
    return 0;
}

int cmd_simulate(const Common& c, const std::string& policy_name, int trajectories, int threads,
                 const std::string& relaxation_path, const std::string& log_path) {
    const auto inst = load(c);
    PolicySpec spec;
    spec.kind = parse_policy_kind(policy_name);
    spec.seed = c.seed;
    if (spec.kind == PolicyKind::one_step_lookahead || spec.kind == PolicyKind::primal_dual) {
        spec.relaxation = std::make_shared<const RelaxationSolution>(
            relaxation_path.empty() ? solve_relaxation(inst) : load_relaxation(relaxation_path));
    }
    SimConfig cfg;
    cfg.n_trajectories = trajectories;
    cfg.truncation_tol = c.tol;
    cfg.master_seed = c.seed;
    cfg.threads = threads;

    std::unique_ptr<std::ofstream> log_file;
    std::unique_ptr<TrajectoryLog> log;
    if (!log_path.empty()) {
        log_file = std::make_unique<std::ofstream>(log_path);
        if (!*log_file) throw std::runtime_error("cannot write " + log_path);
        log = std::make_unique<TrajectoryLog>(*log_file);
        log->header();
    }
    const auto rep = evaluate_policy(inst, make_policy(inst, spec), cfg, log.get());
    nlohmann::json doc = {
        {"policy", to_string(spec.kind)},
        {"mean", rep.mean},
        {"std_error", rep.std_error},
        {"n_trajectories", rep.n_trajectories},
        {"horizon", rep.horizon},
        {"ci95", {rep.ci95.first, rep.ci95.second}},
    };
    emit(doc, c.out);
    return 0;
}

int cmd_bench(const Common& c, const std::vector<std::string>& suites,
              const std::vector<std::string>& instances, const std::vector<double>& alphas,
              const std::vector<std::string>& policies, int trajectories, int workers, int threads,
              bool no_exact, bool no_timings) {
    ExperimentConfig cfg;
    for (const auto& s : suites) {
        if (s == "table") {
            for (auto& src : table_suites()) cfg.instances.push_back(src);
        } else {
            cfg.instances.push_back(table_suite(s));
        }
    }
    for (const auto& p : instances) cfg.instances.push_back(instance_from_file(p));
    if (cfg.instances.empty()) throw std::invalid_argument("bench needs --suite or --instance");
    cfg.alphas = alphas;
    if (!policies.empty()) {
        cfg.policies.clear();
        for (const auto& p : policies) cfg.policies.push_back(parse_policy_kind(p));
    }
    cfg.sim.n_trajectories = trajectories;
    cfg.sim.truncation_tol = c.tol;
    cfg.sim.master_seed = c.seed;
    cfg.sim.threads = threads;
    cfg.exact = !no_exact;
    cfg.guard.max_joint_states = c.max_exact_states;
    cfg.workers = workers;
    cfg.record_timings = !no_timings;

    const auto rows = run_benchmark(cfg);
    if (c.out.empty()) {
        write_results(rows, std::cout);
    } else {
        write_results(rows, std::filesystem::path(c.out));
    }
    bool failed = false;
    for (const auto& row : rows) {
        if (!row.failed()) continue;
        failed = true;
        std::cerr << "row " << row.problem << " alpha=" << row.alpha << " failed: " << row.error
                  << "\n";
    }
    return failed ? 1 : 0;
}

void add_common(CLI::App* app, Common& c, bool needs_instance) {
    auto* opt = app->add_option("--instance", c.instance, "instance file");
    if (needs_instance) opt->required()->check(CLI::ExistingFile);
    app->add_option("--alpha", c.alpha, "discount factor override")->check(CLI::Range(0.0, 1.0));
    app->add_option("--out", c.out, "output path (stdout when omitted)");
    app->add_option("--seed", c.seed, "master seed");
    app->add_option("--tol", c.tol, "tolerance (truncation or value iteration)")
        ->check(CLI::PositiveNumber);
    app->add_option("--max-exact-states", c.max_exact_states, "exact enumeration guard");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Restless bandits with switching costs: exact solver, relaxation, heuristics"};
    app.require_subcommand(1);

    Common gen_c, exact_c, relax_c, sim_c, bench_c;
    GeneratorParams params;
    std::string gen_suite;
    auto* gen = app.add_subcommand("gen", "write a random or benchmark-suite instance");
    gen->add_option("--alpha", gen_c.alpha, "discount factor")->check(CLI::Range(0.0, 1.0));
    gen->add_option("--out", gen_c.out, "instance file (stdout when omitted)");
    gen->add_option("--seed", params.seed, "generator seed");
    gen->add_option("--sites", params.n_sites, "N")->check(CLI::PositiveNumber);
    gen->add_option("--servers", params.n_servers, "M")->check(CLI::PositiveNumber);
    gen->add_option("--states", params.states_per_site, "states per site")->check(CLI::PositiveNumber);
    gen->add_option("--cost-scale", params.cost_scale, "switching costs are uniform on [0, s]");
    gen->add_option("--reward-scale", params.reward_scale, "rewards are uniform on [0, s]");
    gen->add_option("--suite", gen_suite, "benchmark family p1..p8 instead of a random instance");

    auto* exact = app.add_subcommand("solve-exact", "solve a small instance exactly");
    add_common(exact, exact_c, true);
    exact_c.tol = 1e-8;

    auto* relax = app.add_subcommand("relax", "solve the marginal relaxation");
    add_common(relax, relax_c, true);

    std::string policy = "osl", relaxation_path, log_path;
    int trajectories = 10'000, threads = 1;
    auto* sim = app.add_subcommand("simulate", "Monte-Carlo value of a policy");
    add_common(sim, sim_c, true);
    sim->add_option("--policy", policy, "osl | pd | greedy | random");
    sim->add_option("--trajectories", trajectories)->check(CLI::PositiveNumber);
    sim->add_option("--threads", threads)->check(CLI::PositiveNumber);
    sim->add_option("--relaxation", relaxation_path, "stored relaxation solution")
        ->check(CLI::ExistingFile);
    sim->add_option("--log", log_path, "per-step trajectory log (csv)");

    std::vector<std::string> suites, instances, policies;
    std::vector<double> alphas;
    int workers = 1;
    bool no_exact = false, no_timings = false;
    auto* bench = app.add_subcommand("bench", "run a benchmark table");
    add_common(bench, bench_c, false);
    bench->remove_option(bench->get_option("--instance"));
    bench->remove_option(bench->get_option("--alpha"));
    bench->add_option("--suite", suites, "table | p1..p8 | lure | mabp")->delimiter(',');
    bench->add_option("--instance", instances, "instance files")->check(CLI::ExistingFile);
    bench->add_option("--alpha", alphas, "discount factors (default: per suite)")->delimiter(',');
    bench->add_option("--policy", policies, "greedy,osl")->delimiter(',');
    bench->add_option("--trajectories", trajectories)->check(CLI::PositiveNumber);
    bench->add_option("--workers", workers, "rows solved concurrently")->check(CLI::PositiveNumber);
    bench->add_option("--threads", threads, "simulation threads per row")->check(CLI::PositiveNumber);
    bench->add_flag("--no-exact", no_exact, "skip exact solves");
    bench->add_flag("--no-timings", no_timings, "leave wall-time columns blank");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return cmd_gen(gen_c, params, gen_suite);
        if (*exact) return cmd_solve_exact(exact_c);
        if (*relax) return cmd_relax(relax_c);
        if (*sim) return cmd_simulate(sim_c, policy, trajectories, threads, relaxation_path, log_path);
        if (*bench)
            return cmd_bench(bench_c, suites, instances, alphas, policies, trajectories, workers,
                             threads, no_exact, no_timings);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
