#include "rbpsc/bounds.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "rbpsc/policies.hpp"
#include "sparse_solve.hpp"

namespace rbpsc {

namespace {

double lambda_sum(const RelaxationSolution& rel, std::span<const int> x, std::span<const int> s) {
    double total = 0.0;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) total += rel.lambda(i, s[i], x[s[i]]);
    return total;
}

std::vector<double> solve_frequencies(std::size_t n, std::vector<Eigen::Triplet<double>> triplets,
                                      const std::vector<double>& rhs) {
    double residual = 0.0;
    auto f = detail::sparse_solve(n, triplets, rhs, residual);
    if (residual > 1e-9) {
        std::ostringstream msg;
        msg << "occupation measure residual " << residual << " exceeds tolerance";
        throw std::runtime_error(msg.str());
    }
    return f;
}

} // namespace

double approx_value(const ProblemInstance& inst, const RelaxationSolution& rel,
                    std::span<const int> x, std::span<const int> s) {
    require_matching(inst, rel);
    if (static_cast<int>(x.size()) != inst.n_sites() || !is_permutation(s, inst.n_sites()))
        throw std::invalid_argument("state does not match the instance");
    return lambda_sum(rel, x, s);
}

std::vector<double> approx_value_vector(const JointModel& model, const RelaxationSolution& rel) {
    require_matching(model.instance(), rel);
    const auto& idx = model.indexer();
    std::vector<double> out(model.num_states());
    for (std::size_t c = 0; c < idx.num_site_configs(); ++c) {
        const auto x = idx.site_config(c);
        for (std::size_t p = 0; p < idx.num_permutations(); ++p)
            out[idx.rank(c, p)] = lambda_sum(rel, x, idx.permutation(p));
    }
    return out;
}

DualSlackReport dual_feasibility_slacks(const JointModel& model, std::span<const double> values) {
    if (values.size() != model.num_states()) throw std::invalid_argument("value vector size mismatch");
    const std::size_t actions = model.num_actions();
    DualSlackReport report;
    report.slacks.resize(model.num_states() * actions);
    report.min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < model.num_states(); ++s) {
        for (std::size_t a = 0; a < actions; ++a) {
            const double slack = values[s] - model.q_value(s, a, values);
            report.slacks[s * actions + a] = slack;
            if (slack < report.min_slack) {
                report.min_slack = slack;
                report.argmin_state = s;
                report.argmin_action = a;
            }
        }
    }
    return report;
}

std::vector<double> occupation_measure(const JointModel& model, const TabularPolicy& policy) {
    const std::size_t states = model.num_states();
    if (policy.size() != states) throw std::invalid_argument("policy table size mismatch");
    const std::size_t perms = model.num_actions();
    const double alpha = model.instance().discount;
    // (I - alpha P_u)^T F = (1 - alpha) nu
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> rhs(states);
    for (std::size_t s = 0; s < states; ++s) {
        const std::size_t a = policy[s];
        if (a >= perms) throw std::out_of_range("policy action rank out of range");
        rhs[s] = (1.0 - alpha) * model.initial_prob(s);
        triplets.emplace_back(s, s, 1.0);
        for (const auto& succ : model.successors(s / perms, a))
            triplets.emplace_back(model.indexer().rank(succ.site_rank, a), s, -alpha * succ.prob);
    }
    return solve_frequencies(states, std::move(triplets), rhs);
}

std::vector<double> occupation_measure(const Matrix& transition, std::span<const double> nu,
                                       double alpha) {
    const std::size_t n = transition.size();
    if (nu.size() != n) throw std::invalid_argument("initial distribution size mismatch");
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> rhs(n);
    for (std::size_t s = 0; s < n; ++s) {
        if (transition[s].size() != n) throw std::invalid_argument("transition matrix not square");
        rhs[s] = (1.0 - alpha) * nu[s];
        triplets.emplace_back(s, s, 1.0);
        for (std::size_t t = 0; t < n; ++t)
            if (transition[s][t] != 0.0) triplets.emplace_back(t, s, -alpha * transition[s][t]);
    }
    return solve_frequencies(n, std::move(triplets), rhs);
}

BoundReport adp_gap_bound(const JointModel& model, const RelaxationSolution& rel) {
    return adp_gap_bound(model, rel, solve_exact(model));
}

BoundReport adp_gap_bound(const JointModel& model, const RelaxationSolution& rel,
                          const ExactSolution& exact) {
    const auto& inst = model.instance();
    const double alpha = inst.discount;
    const auto approx = approx_value_vector(model, rel);

    PolicySpec spec{PolicyKind::one_step_lookahead,
                    std::shared_ptr<const RelaxationSolution>(&rel, [](const auto*) {}), 0};
    const auto policy = tabulate(model, make_policy(inst, spec));
    const auto values = policy_evaluation_exact(model, policy);
    const auto freq = occupation_measure(model, policy);

    BoundReport report;
    report.optimal_value = exact.optimal_value;
    report.policy_value = model.initial_value(values);
    report.lhs = report.optimal_value - report.policy_value;
    double weighted = 0.0;
    for (std::size_t s = 0; s < model.num_states(); ++s)
        weighted += freq[s] * (approx[s] - exact.value_vector[s]);
    report.rhs = weighted / (1.0 - alpha);
    report.slack = report.rhs - report.lhs;
    report.min_dual_slack = dual_feasibility_slacks(model, approx).min_slack;
    return report;
}

} // namespace rbpsc
