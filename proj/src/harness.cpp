#include "rbpsc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>

#include "rbpsc/bounds.hpp"
#include "rbpsc/relaxation.hpp"

namespace rbpsc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Matrix identity(int k) {
    Matrix m(k, std::vector<double>(k, 0.0));
    for (int i = 0; i < k; ++i) m[i][i] = 1.0;
    return m;
}

std::vector<double> point_mass(int k, int at) {
    std::vector<double> v(k, 0.0);
    v[at] = 1.0;
    return v;
}

/// Random restless instance with free stays, a deterministic start in
/// state 0, and off-diagonal costs scaled to the requested ratio.
ProblemInstance restless(std::uint64_t seed, int n, int m, int k, double ratio,
                         double reward_scale) {
    GeneratorParams params;
    params.seed = seed;
    params.n_sites = n;
    params.n_servers = m;
    params.states_per_site = k;
    params.cost_scale = ratio > 0.0 ? 1.0 : 0.0;
    params.reward_scale = reward_scale;
    params.discount = 0.9;
    auto inst = generate_random_instance(params);
    for (auto& site : inst.sites) site.initial_dist = point_mass(k, 0);
    for (int j = 0; j < n; ++j) inst.switch_cost[j][j] = 0.0;
    std::iota(inst.initial_placement.begin(), inst.initial_placement.end(), 0);
    if (ratio > 0.0) rescale_costs(inst, ratio);
    return inst;
}

/// Classical bandit: only the served site moves, idle sites earn nothing.
ProblemInstance bandit(std::uint64_t seed, bool deteriorating, double ratio) {
    auto inst = restless(seed, 4, 1, 3, ratio, 60.0);
    RngStream rng(mix_seed(seed ^ 0xd1b54a32d192ed03ULL));
    for (auto& site : inst.sites) {
        const int k = site.state_count;
        site.passive_transition = identity(k);
        site.passive_reward.assign(k, 0.0);
        if (deteriorating) {
            std::sort(site.active_reward.begin(), site.active_reward.end(), std::greater<>());
            // only moves towards worse states
            for (int x = 0; x < k; ++x) {
                auto& row = site.active_transition[x];
                double total = 0.0;
                for (int y = 0; y < k; ++y) {
                    row[y] = y >= x ? 0.05 + rng.uniform() : 0.0;
                    total += row[y];
                }
                for (double& p : row) p /= total;
            }
        }
    }
    return inst;
}

std::string format_number(const std::optional<double>& v) {
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return buf;
}

std::optional<double> parse_optional(const std::string& field) {
    if (field.empty()) return std::nullopt;
    return std::stod(field);
}

} // namespace

InstanceSource instance_from_file(const std::filesystem::path& path) {
    return {path.stem().string(), [path] { return load_instance(path); }, {}};
}

InstanceSource instance_from_generator(std::string problem, const GeneratorParams& params) {
    return {std::move(problem), [params] { return generate_random_instance(params); },
            {params.discount}};
}

void rescale_costs(ProblemInstance& inst, double target_ratio) {
    const double current = switch_ratio(inst);
    if (current == 0.0) {
        if (target_ratio == 0.0) return;
        throw std::invalid_argument("cannot rescale all-zero switching costs");
    }
    const double factor = target_ratio / current;
    for (auto& row : inst.switch_cost)
        for (double& c : row) c *= factor;
}

ProblemInstance lure_instance(double discount) {
    constexpr int n = 4;
    constexpr int k = 5;
    ProblemInstance inst;
    inst.n_servers = 2;
    inst.discount = discount;
    inst.initial_placement = {0, 1, 2, 3};
    for (int j = 0; j < n; ++j) {
        SiteModel site;
        site.state_count = k;
        site.initial_dist = point_mass(k, 0);
        site.passive_reward.assign(k, 0.0);
        if (j < 2) {
            site.active_transition = identity(k);
            site.passive_transition = identity(k);
            site.active_reward.assign(k, 40.0);
        } else {
            site.active_reward = {64.0, 4.0, 2.0, 0.0, 0.0};
            site.active_transition.assign(k, std::vector<double>(k, 0.0));
            site.passive_transition.assign(k, std::vector<double>(k, 0.0));
            for (int x = 0; x < k; ++x) {
                site.active_transition[x][std::min(x + 1, k - 1)] = 1.0;
                // idle remote sites recover one level at a time, half the time
                site.passive_transition[x][std::max(x - 1, 0)] += 0.5;
                site.passive_transition[x][x] += 0.5;
            }
        }
        inst.sites.push_back(std::move(site));
    }
    // cheap to reach the remote sites, expensive to leave them
    inst.switch_cost.assign(n, std::vector<double>(n, 0.0));
    for (int from = 0; from < n; ++from)
        for (int to = 0; to < n; ++to)
            if (from != to) inst.switch_cost[from][to] = from < 2 ? (to < 2 ? 0.0 : 8.0) : 96.0;
    rescale_costs(inst, 1.39);
    return inst;
}

std::vector<InstanceSource> table_suites() {
    const std::vector<double> long_run{0.5, 0.9, 0.99};
    const std::vector<double> standard{0.5, 0.9, 0.95};
    return {
        {"p1", [] { return bandit(101, false, 0.0); }, long_run},
        {"p2", [] { return bandit(102, true, 0.0); }, long_run},
        {"p3", [] { return bandit(102, true, 0.6); }, long_run},
        {"p4", [] { return lure_instance(0.9); }, standard},
        {"p5", [] { return restless(105, 6, 2, 4, 0.0, 20.0); }, standard},
        {"p6", [] { return restless(106, 6, 2, 4, 1.51, 20.0); }, standard},
        {"p7", [] { return restless(107, 20, 15, 3, 1.16, 20.0); }, standard},
        {"p8", [] { return restless(108, 30, 15, 2, 2.18, 60.0); }, standard},
    };
}

InstanceSource table_suite(const std::string& name) {
    const std::string key = name == "lure" ? "p4" : name == "mabp" ? "p1" : name;
    for (auto& s : table_suites())
        if (s.problem == key) return s;
    throw std::invalid_argument("unknown suite '" + name + "'");
}

ResultRow run_row(const InstanceSource& source, double alpha, const ExperimentConfig& cfg,
                  std::uint64_t row_seed) {
    ResultRow row;
    row.problem = source.problem;
    row.alpha = alpha;
    try {
        auto inst = source.build();
        inst.discount = alpha;
        require_valid(inst);
        row.n = inst.n_sites();
        row.m = inst.n_servers;
        row.states = max_state_count(inst);
        row.c_over_r = switch_ratio(inst);

        auto start = Clock::now();
        auto rel = std::make_shared<const RelaxationSolution>(solve_relaxation(inst));
        if (cfg.record_timings) row.t_relax_s = seconds_since(start);
        row.z_r = rel->objective;

        SimConfig sim = cfg.sim;
        sim.master_seed = row_seed;
        start = Clock::now();
        for (PolicyKind kind : cfg.policies) {
            const auto report = evaluate_policy(inst, make_policy(inst, {kind, rel, row_seed}), sim);
            if (kind == PolicyKind::greedy) {
                row.z_g = report.mean;
                row.z_g_se = report.std_error;
            } else if (kind == PolicyKind::one_step_lookahead) {
                row.z_osl = report.mean;
                row.z_osl_se = report.std_error;
            } else {
                throw std::invalid_argument(std::string("policy ") + to_string(kind) +
                                            " has no results column");
            }
        }
        if (cfg.record_timings) row.t_sim_s = seconds_since(start);

        if (cfg.exact) {
            std::optional<JointModel> model;
            try {
                model.emplace(inst, cfg.guard);
            } catch (const GuardExceeded&) {
                // too large for enumeration: the exact columns stay blank
            }
            if (model) {
                const auto exact = solve_exact(*model);
                row.z_star = exact.optimal_value;
                row.bound_slack = adp_gap_bound(*model, *rel, exact).slack;
            }
        }
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

std::vector<ResultRow> run_benchmark(const ExperimentConfig& cfg) {
    if (cfg.instances.empty()) throw std::invalid_argument("experiment lists no instances");
    struct Job {
        const InstanceSource* source;
        double alpha;
    };
    std::vector<Job> jobs;
    for (const auto& source : cfg.instances) {
        const auto& alphas = cfg.alphas.empty() ? source.default_alphas : cfg.alphas;
        if (alphas.empty())
            throw std::invalid_argument("no discount given for instance " + source.problem);
        for (double a : alphas) jobs.push_back({&source, a});
    }

    std::vector<ResultRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++)
            rows[k] = run_row(*jobs[k].source, jobs[k].alpha, cfg,
                              trajectory_seed(cfg.sim.master_seed, k));
    };
    const int workers = std::clamp(cfg.workers, 1, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

std::string format_row(const ResultRow& row) {
    if (row.problem.find_first_of(",\n\"") != std::string::npos)
        throw std::invalid_argument("problem id may not contain commas, quotes or newlines");
    std::ostringstream out;
    out << row.problem << ',' << row.n << ',' << row.m << ',' << row.states << ','
        << format_number(row.c_over_r) << ',' << format_number(row.alpha);
    for (const auto* v : {&row.z_star, &row.z_r, &row.z_g, &row.z_g_se, &row.z_osl, &row.z_osl_se,
                          &row.bound_slack, &row.t_relax_s, &row.t_sim_s})
        out << ',' << format_number(*v);
    return out.str();
}

void write_results(const std::vector<ResultRow>& rows, std::ostream& out) {
    out << kResultsHeader << '\n';
    for (const auto& row : rows) out << format_row(row) << '\n';
}

void write_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_results(rows, out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<ResultRow> read_results(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kResultsHeader)
        throw std::invalid_argument("results file has an unexpected header");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 15) throw std::invalid_argument("results row does not have 15 fields: " + line);
        ResultRow row;
        row.problem = f[0];
        row.n = std::stoi(f[1]);
        row.m = std::stoi(f[2]);
        row.states = std::stoi(f[3]);
        row.c_over_r = std::stod(f[4]);
        row.alpha = std::stod(f[5]);
        std::optional<double>* slots[] = {&row.z_star,   &row.z_r,         &row.z_g,
                                          &row.z_g_se,   &row.z_osl,       &row.z_osl_se,
                                          &row.bound_slack, &row.t_relax_s, &row.t_sim_s};
        for (int k = 0; k < 9; ++k) *slots[k] = parse_optional(f[6 + k]);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return read_results(in);
}

} // namespace rbpsc
