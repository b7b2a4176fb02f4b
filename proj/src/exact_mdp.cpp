#include "rbpsc/exact_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "sparse_solve.hpp"

namespace rbpsc {

namespace {

// Mass below this is treated as zero when reading the occupation measure.
constexpr double kMassTol = 1e-12;

std::string format_ranks(std::span<const int> values) {
    std::string out;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (k) out += ',';
        out += std::to_string(values[k] + 1);
    }
    return out;
}

void require_exact_instance(const ProblemInstance& inst) {
    auto report = validate_instance(inst);
    // the value-iteration oracle also accepts alpha = 0
    std::erase_if(report.violations, [&](const Violation& v) {
        return v.field == "discount" && inst.discount == 0.0;
    });
    if (!report.ok()) throw std::invalid_argument("invalid instance:\n" + report.to_string());
}

} // namespace

std::vector<Permutation> enumerate_permutations(int n, int max_sites) {
    if (n < 1) throw std::invalid_argument("permutations need n >= 1");
    if (n > max_sites)
        throw GuardExceeded("permutation enumeration guard exceeded: N=" + std::to_string(n) +
                            " > " + std::to_string(max_sites));
    std::vector<Permutation> out;
    Permutation p(n);
    std::iota(p.begin(), p.end(), 0);
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

std::size_t permutation_rank(std::span<const int> perm) {
    const std::size_t n = perm.size();
    std::size_t rank = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t smaller = 0;
        for (std::size_t j = i + 1; j < n; ++j)
            if (perm[j] < perm[i]) ++smaller;
        rank = rank * (n - i) + smaller;
    }
    return rank;
}

JointIndexer::JointIndexer(const ProblemInstance& inst, const ExactGuard& guard) {
    perms_ = enumerate_permutations(inst.n_sites(), guard.max_sites);
    for (const auto& site : inst.sites) {
        radix_.push_back(site.state_count);
        if (num_configs_ > guard.max_joint_states)
            throw GuardExceeded("joint state guard exceeded");
        num_configs_ *= static_cast<std::size_t>(site.state_count);
    }
    if (num_states() > guard.max_joint_states)
        throw GuardExceeded("joint state guard exceeded: " + std::to_string(num_states()) +
                            " > " + std::to_string(guard.max_joint_states));
}

std::size_t JointIndexer::permutation_rank(std::span<const int> perm) const {
    if (!is_permutation(perm, n_sites())) throw std::invalid_argument("not a permutation");
    return rbpsc::permutation_rank(perm);
}

std::size_t JointIndexer::site_rank(std::span<const int> x) const {
    if (x.size() != radix_.size()) throw std::invalid_argument("site state dimension mismatch");
    std::size_t rank = 0;
    for (std::size_t n = 0; n < radix_.size(); ++n) {
        if (x[n] < 0 || x[n] >= radix_[n]) throw std::out_of_range("site state out of range");
        rank = rank * radix_[n] + x[n];
    }
    return rank;
}

std::vector<int> JointIndexer::site_config(std::size_t rank) const {
    std::vector<int> x(radix_.size());
    for (std::size_t n = radix_.size(); n-- > 0;) {
        x[n] = static_cast<int>(rank % radix_[n]);
        rank /= radix_[n];
    }
    return x;
}

JointState JointIndexer::unrank(std::size_t rank) const {
    return {site_config(rank / perms_.size()), perms_.at(rank % perms_.size())};
}

JointModel::JointModel(const ProblemInstance& inst, const ExactGuard& guard)
    : inst_(inst), indexer_(inst, guard) {
    require_exact_instance(inst_);
    const int n = inst_.n_sites();
    const std::size_t configs = indexer_.num_site_configs();
    const std::size_t actions = num_actions();

    // group actions by the set of sites they activate
    std::unordered_map<unsigned, int> mask_ids;
    std::vector<unsigned> masks;
    for (const auto& a : indexer_.permutations()) {
        unsigned mask = 0;
        for (int i = 0; i < inst_.n_servers; ++i) mask |= 1u << a[i];
        auto [it, inserted] = mask_ids.try_emplace(mask, static_cast<int>(masks.size()));
        if (inserted) masks.push_back(mask);
        mask_id_.push_back(it->second);
    }

    rows_.resize(masks.size() * configs);
    std::size_t nnz_per_perm = 0;
    for (std::size_t m = 0; m < masks.size(); ++m) {
        for (std::size_t xr = 0; xr < configs; ++xr) {
            const auto x = indexer_.site_config(xr);
            auto& row = rows_[m * configs + xr];
            // odometer over next configurations with nonzero probability
            std::vector<std::vector<std::pair<int, double>>> factors(n);
            for (int site = 0; site < n; ++site) {
                const auto& p = inst_.transition(site, (masks[m] >> site) & 1u)[x[site]];
                for (int y = 0; y < static_cast<int>(p.size()); ++y)
                    if (p[y] > 0.0) factors[site].push_back({y, p[y]});
            }
            std::vector<std::size_t> digit(n, 0);
            while (true) {
                double prob = 1.0;
                std::size_t next = 0;
                for (int site = 0; site < n; ++site) {
                    const auto& [y, p] = factors[site][digit[site]];
                    prob *= p;
                    next = next * inst_.sites[site].state_count + y;
                }
                row.push_back({next, prob});
                int site = n - 1;
                while (site >= 0 && ++digit[site] == factors[site].size()) digit[site--] = 0;
                if (site < 0) break;
            }
            std::sort(row.begin(), row.end(),
                      [](const Successor& a, const Successor& b) { return a.site_rank < b.site_rank; });
        }
    }
    for (std::size_t xr = 0; xr < configs; ++xr)
        for (std::size_t a = 0; a < actions; ++a) nnz_per_perm += 1 + successors(xr, a).size();
    lp_nonzeros_ = nnz_per_perm * actions;
    if (lp_nonzeros_ > guard.max_nonzeros)
        throw GuardExceeded("exact LP guard exceeded: " + std::to_string(lp_nonzeros_) +
                            " nonzeros > " + std::to_string(guard.max_nonzeros));

    rewards_.resize(num_states() * actions);
    for (std::size_t state = 0; state < num_states(); ++state) {
        const auto js = indexer_.unrank(state);
        for (std::size_t a = 0; a < actions; ++a)
            rewards_[state * actions + a] =
                immediate_reward(inst_, js.site_states, js.placement, indexer_.permutation(a));
    }

    config_prob_.resize(configs);
    for (std::size_t xr = 0; xr < configs; ++xr) {
        const auto x = indexer_.site_config(xr);
        double p = 1.0;
        for (int site = 0; site < n; ++site) p *= inst_.sites[site].initial_dist[x[site]];
        config_prob_[xr] = p;
    }
    initial_perm_rank_ = indexer_.permutation_rank(inst_.initial_placement);
}

double JointModel::q_value(std::size_t state, std::size_t action, std::span<const double> v) const {
    const std::size_t perms = num_actions();
    double expected = 0.0;
    for (const auto& succ : successors(state / perms, action))
        expected += succ.prob * v[succ.site_rank * perms + action];
    return reward(state, action) + inst_.discount * expected;
}

std::size_t JointModel::greedy_action(std::size_t state, std::span<const double> v) const {
    std::size_t best = 0;
    double best_q = q_value(state, 0, v);
    for (std::size_t a = 1; a < num_actions(); ++a) {
        const double q = q_value(state, a, v);
        if (q > best_q + 1e-12 * (1.0 + std::abs(best_q))) {
            best_q = q;
            best = a;
        }
    }
    return best;
}

double JointModel::initial_prob(std::size_t state) const {
    const std::size_t perms = num_actions();
    if (state % perms != initial_perm_rank_) return 0.0;
    return config_prob_[state / perms];
}

double JointModel::initial_value(std::span<const double> v) const {
    double total = 0.0;
    for (std::size_t xr = 0; xr < config_prob_.size(); ++xr)
        total += config_prob_[xr] * v[indexer_.rank(xr, initial_perm_rank_)];
    return total;
}

TabularPolicy tabulate(const JointModel& model, const Policy& policy) {
    const auto& idx = model.indexer();
    TabularPolicy table(model.num_states());
    for (std::size_t state = 0; state < table.size(); ++state) {
        const auto js = idx.unrank(state);
        table[state] = idx.permutation_rank(policy(js.site_states, js.placement));
    }
    return table;
}

lp::LpModel build_exact_primal(const JointModel& model) {
    const auto& inst = model.instance();
    const auto& idx = model.indexer();
    const std::size_t perms = model.num_actions();
    const double alpha = inst.discount;

    lp::LpModel lpm(lp::Sense::maximize);
    for (std::size_t state = 0; state < model.num_states(); ++state) {
        const auto js = idx.unrank(state);
        lpm.add_constraint("balance[x=" + format_ranks(js.site_states) + "|s=" +
                               format_ranks(js.placement) + "]",
                           lp::RowSense::equal, (1.0 - alpha) * model.initial_prob(state));
    }
    for (std::size_t state = 0; state < model.num_states(); ++state) {
        const auto js = idx.unrank(state);
        const std::string prefix = "rho[x=" + format_ranks(js.site_states) + "|s=" +
                                   format_ranks(js.placement) + "|a=";
        for (std::size_t a = 0; a < perms; ++a) {
            const int col = lpm.add_variable(prefix + format_ranks(idx.permutation(a)) + "]", 0.0,
                                             lp::kInf, model.reward(state, a));
            lpm.add_entry(static_cast<int>(state), col, 1.0);
            for (const auto& succ : model.successors(state / perms, a))
                lpm.add_entry(static_cast<int>(idx.rank(succ.site_rank, a)), col,
                              -alpha * succ.prob);
        }
    }
    return lpm;
}

ExactSolution solve_exact(const JointModel& model) {
    const auto lpm = build_exact_primal(model);
    const auto sol = lp::solve_lp(lpm);
    if (!sol.optimal())
        throw std::runtime_error(std::string("exact LP failed: ") + lp::to_string(sol.status) +
                                 " (" + sol.message + ")");
    const double alpha = model.instance().discount;
    ExactSolution out;
    out.occupation = sol.primal;
    out.value_vector = sol.dual;
    out.lp_objective = sol.objective;
    out.optimal_value = sol.objective / (1.0 - alpha);

    // The balance duals equal J* only where the optimal occupation measure
    // has mass; elsewhere any dual-feasible upper bound is optimal for the LP.
    // Policy iteration from the recovered policy gives J* on every state.
    auto policy = extract_policy(model, out);
    const std::size_t actions = model.num_actions();
    for (int iter = 0; iter < 1000; ++iter) {
        out.value_vector = policy_evaluation_exact(model, policy);
        bool changed = false;
        for (std::size_t s = 0; s < model.num_states(); ++s) {
            double best_q = model.q_value(s, policy[s], out.value_vector);
            for (std::size_t a = 0; a < actions; ++a) {
                const double q = model.q_value(s, a, out.value_vector);
                if (q > best_q + 1e-10 * (1.0 + std::abs(best_q))) {
                    best_q = q;
                    policy[s] = a;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    return out;
}

ValueIterationResult value_iteration(const JointModel& model, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    const std::size_t states = model.num_states();
    const std::size_t actions = model.num_actions();
    const double alpha = model.instance().discount;

    // start from a constant so the first residual is bounded by the reward span
    double floor_reward = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < actions; ++a) best = std::max(best, model.reward(s, a));
        floor_reward = std::min(floor_reward, best);
    }
    ValueIterationResult result;
    std::vector<double> v(states, floor_reward / (1.0 - alpha));
    std::vector<double> next(states);
    const int max_iterations = 10'000'000;
    while (result.iterations < max_iterations) {
        double residual = 0.0;
        for (std::size_t s = 0; s < states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < actions; ++a) best = std::max(best, model.q_value(s, a, v));
            next[s] = best;
            residual = std::max(residual, std::abs(best - v[s]));
        }
        v.swap(next);
        ++result.iterations;
        result.residual = residual;
        if (residual <= tol) break;
    }
    result.values = std::move(v);
    return result;
}

std::vector<double> policy_evaluation_exact(const JointModel& model, const TabularPolicy& policy) {
    const std::size_t states = model.num_states();
    if (policy.size() != states) throw std::invalid_argument("policy table size mismatch");
    const std::size_t perms = model.num_actions();
    const double alpha = model.instance().discount;

    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> rhs(states);
    double scale = 1.0;
    for (std::size_t s = 0; s < states; ++s) {
        const std::size_t a = policy[s];
        if (a >= perms) throw std::out_of_range("policy action rank out of range");
        rhs[s] = model.reward(s, a);
        scale = std::max(scale, std::abs(rhs[s]));
        triplets.emplace_back(s, s, 1.0);
        for (const auto& succ : model.successors(s / perms, a))
            triplets.emplace_back(s, model.indexer().rank(succ.site_rank, a), -alpha * succ.prob);
    }
    double residual = 0.0;
    auto values = detail::sparse_solve(states, triplets, rhs, residual);
    if (residual > 1e-9 * scale) {
        std::ostringstream msg;
        msg << "policy evaluation residual " << residual << " exceeds tolerance";
        throw std::runtime_error(msg.str());
    }
    return values;
}

TabularPolicy extract_policy(const JointModel& model, const ExactSolution& sol) {
    const std::size_t states = model.num_states();
    const std::size_t actions = model.num_actions();
    TabularPolicy policy(states);
    for (std::size_t s = 0; s < states; ++s) {
        const double* rho = sol.occupation.data() + s * actions;
        const double mass = std::accumulate(rho, rho + actions, 0.0);
        if (mass > kMassTol) {
            policy[s] = static_cast<std::size_t>(
                std::find_if(rho, rho + actions, [](double r) { return r > kMassTol; }) - rho);
        } else {
            policy[s] = model.greedy_action(s, sol.value_vector);
        }
    }
    return policy;
}

MarginalVector marginalize(const JointModel& model, const MarginalIndex& index,
                           const ExactSolution& sol) {
    const auto& idx = model.indexer();
    const std::size_t actions = model.num_actions();
    const int n = idx.n_sites();
    MarginalVector marginals(index.size(), 0.0);
    for (std::size_t s = 0; s < model.num_states(); ++s) {
        const auto js = idx.unrank(s);
        for (std::size_t a = 0; a < actions; ++a) {
            const double rho = sol.occupation[s * actions + a];
            if (rho == 0.0) continue;
            const auto& dest = idx.permutation(a);
            for (int i = 0; i < n; ++i) {
                const int from = js.placement[i];
                const int to = dest[i];
                marginals[index.index(i, Anchor::origin, js.site_states[from], from, to)] += rho;
                if (from != to)
                    marginals[index.index(i, Anchor::destination, js.site_states[to], from, to)] +=
                        rho;
            }
        }
    }
    return marginals;
}

} // namespace rbpsc
