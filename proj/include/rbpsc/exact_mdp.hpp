#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rbpsc/instance.hpp"
#include "rbpsc/lp.hpp"
#include "rbpsc/marginals.hpp"

namespace rbpsc {

/// Size limits of the exact (enumerated) path. Exceeding any of them is an
/// error, never a truncation.
struct ExactGuard {
    int max_sites = 8;
    std::size_t max_joint_states = 200'000;
    std::size_t max_nonzeros = 2'000'000;
};

class GuardExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// All permutations of {0..n-1} in lexicographic order.
std::vector<Permutation> enumerate_permutations(int n, int max_sites = ExactGuard{}.max_sites);

/// Lexicographic rank of a permutation (Lehmer code).
std::size_t permutation_rank(std::span<const int> perm);

struct JointState {
    std::vector<int> site_states;
    Permutation placement;
    friend bool operator==(const JointState&, const JointState&) = default;
};

/// Bijection between joint states (x;s) and dense ranks
/// rank = site_rank(x) * N! + permutation_rank(s), with site 0 the most
/// significant digit of site_rank.
class JointIndexer {
public:
    JointIndexer(const ProblemInstance& inst, const ExactGuard& guard = {});

    int n_sites() const { return static_cast<int>(radix_.size()); }
    std::size_t num_site_configs() const { return num_configs_; }
    std::size_t num_permutations() const { return perms_.size(); }
    std::size_t num_states() const { return num_configs_ * perms_.size(); }

    const std::vector<Permutation>& permutations() const { return perms_; }
    const Permutation& permutation(std::size_t rank) const { return perms_.at(rank); }
    std::size_t permutation_rank(std::span<const int> perm) const;

    std::size_t site_rank(std::span<const int> x) const;
    std::vector<int> site_config(std::size_t rank) const;

    std::size_t rank(const JointState& state) const {
        return rank(site_rank(state.site_states), permutation_rank(state.placement));
    }
    std::size_t rank(std::size_t site_rank, std::size_t perm_rank) const {
        return site_rank * perms_.size() + perm_rank;
    }
    JointState unrank(std::size_t rank) const;

private:
    std::vector<int> radix_;
    std::size_t num_configs_ = 1;
    std::vector<Permutation> perms_;
};

/// Enumerated transition and reward structure shared by the exact routines.
class JointModel {
public:
    JointModel(const ProblemInstance& inst, const ExactGuard& guard = {});

    const ProblemInstance& instance() const { return inst_; }
    const JointIndexer& indexer() const { return indexer_; }
    std::size_t num_states() const { return indexer_.num_states(); }
    std::size_t num_actions() const { return indexer_.num_permutations(); }

    double reward(std::size_t state, std::size_t action) const {
        return rewards_[state * num_actions() + action];
    }

    struct Successor {
        std::size_t site_rank;
        double prob;
    };
    /// Distribution of the next site configuration from site configuration
    /// `site_rank` under action `action`.
    const std::vector<Successor>& successors(std::size_t site_rank, std::size_t action) const {
        return rows_[mask_id_[action] * indexer_.num_site_configs() + site_rank];
    }

    /// r + alpha * E[v(next)] for taking `action` in `state`.
    double q_value(std::size_t state, std::size_t action, std::span<const double> v) const;
    /// Highest q-value, ties to the lowest (lexicographically smallest) action.
    std::size_t greedy_action(std::size_t state, std::span<const double> v) const;

    /// nu(x;s) for the product-form initial distribution.
    double initial_prob(std::size_t state) const;
    /// sum over states of nu(x;s) v(x;s)
    double initial_value(std::span<const double> v) const;

    /// Number of nonzeros of the exact occupation-measure LP.
    std::size_t lp_nonzeros() const { return lp_nonzeros_; }

private:
    ProblemInstance inst_;
    JointIndexer indexer_;
    std::vector<double> rewards_;
    std::vector<int> mask_id_;
    std::vector<std::vector<Successor>> rows_;
    std::vector<double> config_prob_;
    std::size_t initial_perm_rank_ = 0;
    std::size_t lp_nonzeros_ = 0;
};

/// Stationary deterministic policy over the enumerated space: the action
/// rank taken in every joint-state rank.
using TabularPolicy = std::vector<std::size_t>;

/// A stationary policy as a function of the joint state.
using Policy = std::function<Permutation(std::span<const int> x, std::span<const int> s)>;

TabularPolicy tabulate(const JointModel& model, const Policy& policy);

/// Occupation-measure LP: one variable per ((x;s),a), one balance row per (x;s).
lp::LpModel build_exact_primal(const JointModel& model);

struct ExactSolution {
    /// rho over (state, action), index state * N! + action.
    std::vector<double> occupation;
    /// Optimal reward-to-go per joint state: the duals of the balance rows,
    /// completed on states the optimal measure never visits by policy
    /// iteration from the recovered policy.
    std::vector<double> value_vector;
    /// nu-weighted optimal discounted reward J*(nu).
    double optimal_value = 0.0;
    /// (1 - alpha) * optimal_value, the LP optimum.
    double lp_objective = 0.0;
};

ExactSolution solve_exact(const JointModel& model);

struct ValueIterationResult {
    std::vector<double> values;
    int iterations = 0;
    double residual = 0.0;
};

/// Bellman iteration until the sup-norm residual is at most tol. Accepts
/// discount in [0,1) so the myopic limit can be checked.
ValueIterationResult value_iteration(const JointModel& model, double tol);

/// Solves (I - alpha P_u) J = R_u.
std::vector<double> policy_evaluation_exact(const JointModel& model, const TabularPolicy& policy);

/// Recovers a stationary policy from the occupation measure.
TabularPolicy extract_policy(const JointModel& model, const ExactSolution& sol);

/// Projects the occupation measure onto the marginal variables.
MarginalVector marginalize(const JointModel& model, const MarginalIndex& index,
                           const ExactSolution& sol);

} // namespace rbpsc
