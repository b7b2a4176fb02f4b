#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>

#include "rbpsc/exact_mdp.hpp"
#include "rbpsc/instance.hpp"

namespace rbpsc {

struct SimConfig {
    int n_trajectories = 10'000;
    double truncation_tol = 1e-6;
    std::uint64_t master_seed = 0;
    /// Largest |R((x;s),a)|; a value <= 0 means "use max_abs_reward(inst)".
    double r_max = 0.0;
    /// Worker threads; the estimate does not depend on this.
    int threads = 1;
};

struct EvaluationReport {
    double mean = 0.0;
    double std_error = 0.0;
    int n_trajectories = 0;
    int horizon = 0;
    std::pair<double, double> ci95{0.0, 0.0};
};

/// Smallest T with alpha^T r_max < tol; 0 when r_max < tol already.
int truncation_horizon(double alpha, double r_max, double tol);

/// Truncation bias bound alpha^T r_max / (1 - alpha).
double truncation_bias(double alpha, double r_max, int horizon);

/// Optional per-step trace sink: (trajectory, t, x, s, a, reward).
class TrajectoryLog {
public:
    explicit TrajectoryLog(std::ostream& out);
    void header();
    void step(int trajectory, int t, std::span<const int> x, std::span<const int> s,
              std::span<const int> a, double reward);

private:
    std::ostream& out_;
};

/// Discounted reward sum_{t<T} alpha^t R of one trajectory. Initial site
/// states are drawn from nu and agents start at the initial placement.
double rollout(const ProblemInstance& inst, const Policy& policy, int horizon, RngStream& rng,
               TrajectoryLog* log = nullptr, int trajectory = 0);

/// Same, from a given joint state.
double rollout_from(const ProblemInstance& inst, const Policy& policy, std::span<const int> x0,
                    std::span<const int> s0, int horizon, RngStream& rng,
                    TrajectoryLog* log = nullptr, int trajectory = 0);

/// Seed of trajectory k under a master seed.
std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t k);

/// Mean and standard error over independent trajectories. Each trajectory
/// has its own stream, so the result is independent of cfg.threads.
EvaluationReport evaluate_policy(const ProblemInstance& inst, const Policy& policy,
                                 const SimConfig& cfg, TrajectoryLog* log = nullptr);

/// Pairwise (cascade) sum.
double pairwise_sum(std::span<const double> values);

} // namespace rbpsc
