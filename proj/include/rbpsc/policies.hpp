#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "rbpsc/exact_mdp.hpp"
#include "rbpsc/instance.hpp"
#include "rbpsc/lp.hpp"
#include "rbpsc/relaxation.hpp"

namespace rbpsc {

/// m[i][a]: score of sending agent i to site a.
struct ScoreMatrix {
    Matrix entries;
    lp::Sense sense = lp::Sense::maximize;

    int size() const { return static_cast<int>(entries.size()); }
};

/// Optimal assignment for the matrix's sense. Among optimal assignments the
/// lexicographically smallest permutation is returned; scores within
/// 1e-9 * (1 + max |m|) of each other count as equal.
Permutation hungarian(const ScoreMatrix& scores);

/// sum_i m[i][perm[i]]
double assignment_value(const ScoreMatrix& scores, std::span<const int> perm);

/// One-step lookahead scores
///   m[i][a] = r_a(x_a) - c_{s_i a}[i active] + alpha sum_y lambda^i_{a,y} p_a(x_a, y)
/// with the active or passive chain of agent i.
ScoreMatrix osl_scores(const ProblemInstance& inst, const RelaxationSolution& rel,
                       std::span<const int> x, std::span<const int> s);
Permutation osl_action(const ProblemInstance& inst, const RelaxationSolution& rel,
                       std::span<const int> x, std::span<const int> s);

/// Index of undesirability: sum over agents of the reduced costs of the
/// marginals the move (x;s) -> a touches.
double pd_index(const ProblemInstance& inst, const RelaxationSolution& rel,
                std::span<const int> x, std::span<const int> s, std::span<const int> a);

/// Per-(agent, site) reduced-cost sums; pd_index(a) = sum_i g[i][a_i]. Minimize.
ScoreMatrix pd_scores(const ProblemInstance& inst, const RelaxationSolution& rel,
                      const MarginalIndex& index, std::span<const int> x, std::span<const int> s);
Permutation pd_action(const ProblemInstance& inst, const RelaxationSolution& rel,
                      std::span<const int> x, std::span<const int> s);

/// Immediate-reward scores only (zero reward-to-go).
ScoreMatrix greedy_scores(const ProblemInstance& inst, std::span<const int> x,
                          std::span<const int> s);
Permutation greedy_action(const ProblemInstance& inst, std::span<const int> x,
                          std::span<const int> s);

/// Uniformly random permutation, a fixed function of (seed, x, s).
Permutation random_action(int n_sites, std::uint64_t seed, std::span<const int> x,
                          std::span<const int> s);

enum class PolicyKind { one_step_lookahead, primal_dual, greedy, random };

const char* to_string(PolicyKind kind);
/// Accepts "osl", "pd", "greedy", "random" and the long names.
PolicyKind parse_policy_kind(const std::string& name);

struct PolicySpec {
    PolicyKind kind = PolicyKind::greedy;
    /// Required by one_step_lookahead and primal_dual. Both heuristics should
    /// point at the same object when they are compared.
    std::shared_ptr<const RelaxationSolution> relaxation;
    std::uint64_t seed = 0;
};

/// Checks the policy spec against the instance once and returns a policy that
/// skips per-call checks. The instance must outlive the policy.
Policy make_policy(const ProblemInstance& inst, const PolicySpec& spec);

} // namespace rbpsc
