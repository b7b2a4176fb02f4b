#include "rbpsc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace rbpsc {

int truncation_horizon(double alpha, double r_max, double tol) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("discount must be in [0, 1)");
    if (!(tol > 0.0)) throw std::invalid_argument("truncation tolerance must be positive");
    if (r_max < 0.0) throw std::invalid_argument("r_max must be nonnegative");
    if (r_max <= tol) return 0;
    if (alpha == 0.0) return 1;
    int t = static_cast<int>(std::ceil(std::log(tol / r_max) / std::log(alpha)));
    t = std::max(t, 0);
    while (std::pow(alpha, t) * r_max >= tol) ++t;
    while (t > 0 && std::pow(alpha, t - 1) * r_max < tol) --t;
    return t;
}

double truncation_bias(double alpha, double r_max, int horizon) {
    return std::pow(alpha, horizon) * r_max / (1.0 - alpha);
}

TrajectoryLog::TrajectoryLog(std::ostream& out) : out_(out) {}

void TrajectoryLog::header() { out_ << "trajectory,t,state,placement,action,reward\n"; }

namespace {
void write_vector(std::ostream& out, std::span<const int> v) {
    for (std::size_t k = 0; k < v.size(); ++k) out << (k ? " " : "") << v[k] + 1;
}
} // namespace

void TrajectoryLog::step(int trajectory, int t, std::span<const int> x, std::span<const int> s,
                         std::span<const int> a, double reward) {
    out_ << trajectory << ',' << t << ',';
    write_vector(out_, x);
    out_ << ',';
    write_vector(out_, s);
    out_ << ',';
    write_vector(out_, a);
    out_ << ',' << reward << '\n';
}

double rollout_from(const ProblemInstance& inst, const Policy& policy, std::span<const int> x0,
                    std::span<const int> s0, int horizon, RngStream& rng, TrajectoryLog* log,
                    int trajectory) {
    std::vector<int> x(x0.begin(), x0.end());
    Permutation s(s0.begin(), s0.end());
    double total = 0.0;
    double weight = 1.0;
    for (int t = 0; t < horizon; ++t) {
        Permutation a = policy(x, s);
        const double r = immediate_reward(inst, x, s, a);
        if (log) log->step(trajectory, t, x, s, a, r);
        total += weight * r;
        weight *= inst.discount;
        x = sample_transition(inst, x, a, rng);
        s = std::move(a);
    }
    return total;
}

double rollout(const ProblemInstance& inst, const Policy& policy, int horizon, RngStream& rng,
               TrajectoryLog* log, int trajectory) {
    const auto x0 = sample_initial_states(inst, rng);
    return rollout_from(inst, policy, x0, inst.initial_placement, horizon, rng, log, trajectory);
}

std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t k) {
    return mix_seed(mix_seed(master_seed) ^ mix_seed(k + 0x632be59bd9b4e019ULL));
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double total = 0.0;
        for (double v : values) total += v;
        return total;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

EvaluationReport evaluate_policy(const ProblemInstance& inst, const Policy& policy,
                                 const SimConfig& cfg, TrajectoryLog* log) {
    if (cfg.n_trajectories < 1) throw std::invalid_argument("n_trajectories must be >= 1");
    if (!(cfg.truncation_tol > 0.0)) throw std::invalid_argument("truncation_tol must be positive");
    const double r_max = cfg.r_max > 0.0 ? cfg.r_max : max_abs_reward(inst);
    const int horizon = truncation_horizon(inst.discount, r_max, cfg.truncation_tol);
    const int n = cfg.n_trajectories;

    std::vector<double> values(n);
    auto run_range = [&](int begin, int end) {
        for (int k = begin; k < end; ++k) {
            RngStream rng(trajectory_seed(cfg.master_seed, static_cast<std::uint64_t>(k)));
            values[k] = rollout(inst, policy, horizon, rng, log, k);
        }
    };
    const int threads = log ? 1 : std::clamp(cfg.threads, 1, n);
    if (threads == 1) {
        run_range(0, n);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w)
            pool.emplace_back(run_range, static_cast<int>(static_cast<long long>(n) * w / threads),
                              static_cast<int>(static_cast<long long>(n) * (w + 1) / threads));
        for (auto& th : pool) th.join();
    }

    EvaluationReport report;
    report.n_trajectories = n;
    report.horizon = horizon;
    report.mean = pairwise_sum(values) / n;
    if (n > 1) {
        std::vector<double> sq(n);
        for (int k = 0; k < n; ++k) sq[k] = (values[k] - report.mean) * (values[k] - report.mean);
        report.std_error = std::sqrt(pairwise_sum(sq) / (n - 1) / n);
    }
    report.ci95 = {report.mean - 1.96 * report.std_error, report.mean + 1.96 * report.std_error};
    return report;
}

} // namespace rbpsc
