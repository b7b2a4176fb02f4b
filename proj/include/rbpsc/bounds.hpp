#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rbpsc/exact_mdp.hpp"
#include "rbpsc/relaxation.hpp"

namespace rbpsc {

/// Separable value estimate J~(x;s) = sum_i lambda^i_{s_i, x_{s_i}}.
double approx_value(const ProblemInstance& inst, const RelaxationSolution& rel,
                    std::span<const int> x, std::span<const int> s);

/// J~ at every enumerated joint state.
std::vector<double> approx_value_vector(const JointModel& model, const RelaxationSolution& rel);

struct DualSlackReport {
    /// J(x;s) - alpha sum P J - R((x;s),a), index state * N! + action.
    std::vector<double> slacks;
    double min_slack = 0.0;
    std::size_t argmin_state = 0;
    std::size_t argmin_action = 0;
};

/// Slack of a value vector in every constraint of the exact dual program.
DualSlackReport dual_feasibility_slacks(const JointModel& model, std::span<const double> values);

/// Discounted state frequencies F = (1 - alpha) nu^T sum_t alpha^t P_u^t.
std::vector<double> occupation_measure(const JointModel& model, const TabularPolicy& policy);

/// Occupation measure for an explicit transition matrix over a small state
/// space (dense rows), used where no joint model exists.
std::vector<double> occupation_measure(const Matrix& transition, std::span<const double> nu,
                                       double alpha);

struct BoundReport {
    /// nu^T (J* - J_u) for the one-step lookahead policy u
    double lhs = 0.0;
    /// F_u^T (J~ - J*) / (1 - alpha)
    double rhs = 0.0;
    double slack = 0.0;
    double min_dual_slack = 0.0;
    double optimal_value = 0.0;
    double policy_value = 0.0;
};

/// Audits the lookahead policy built from `rel` against the exact optimum.
BoundReport adp_gap_bound(const JointModel& model, const RelaxationSolution& rel);
BoundReport adp_gap_bound(const JointModel& model, const RelaxationSolution& rel,
                          const ExactSolution& exact);

} // namespace rbpsc
