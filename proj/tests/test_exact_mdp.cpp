#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "rbpsc/exact_mdp.hpp"

using namespace rbpsc;

namespace {

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

/// Value from placement (1,2) of a stationary policy on the two-site
/// single-state instance, by solving the 2x2 system J = R_u + alpha P_u J by
/// hand. `from12` and `from21` are true when the policy swaps the agents.
double two_site_value(double move_cost, bool from12, bool from21) {
    const double alpha = 0.5;
    // state 0: server at site 1; state 1: server at site 2
    const double r0 = from12 ? 3.0 - move_cost : 1.0;
    const double r1 = from21 ? 1.0 : 3.0;
    const int n0 = from12 ? 1 : 0;
    const int n1 = from21 ? 0 : 1;
    // J0 = r0 + alpha J[n0], J1 = r1 + alpha J[n1]
    double a[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
    a[0][n0] -= alpha;
    a[1][n1] -= alpha;
    const double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    return (r0 * a[1][1] - a[0][1] * r1) / det;
}

} // namespace

TEST_CASE("permutation enumeration") {
    CHECK(enumerate_permutations(1) == std::vector<Permutation>{{0}});
    const auto p3 = enumerate_permutations(3);
    REQUIRE(p3.size() == 6);
    CHECK(p3.front() == Permutation{0, 1, 2});
    CHECK(p3.back() == Permutation{2, 1, 0});
    CHECK(std::is_sorted(p3.begin(), p3.end()));
    CHECK(enumerate_permutations(4).size() == 24);
    CHECK_THROWS_AS(enumerate_permutations(9), GuardExceeded);
    for (std::size_t r = 0; r < p3.size(); ++r) CHECK(permutation_rank(p3[r]) == r);
}

TEST_CASE("joint indexer is a bijection") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = fixtures::small_random(seed);
        const JointIndexer idx(inst);
        for (std::size_t r = 0; r < idx.num_states(); ++r) CHECK(idx.rank(idx.unrank(r)) == r);
    }
    GeneratorParams p;
    p.n_sites = 9;
    p.n_servers = 1;
    p.states_per_site = 1;
    CHECK_THROWS_AS(JointIndexer(generate_random_instance(p)), GuardExceeded);
    ExactGuard small;
    small.max_joint_states = 10;
    p.n_sites = 3;
    p.states_per_site = 2;
    CHECK_THROWS_AS(JointIndexer(generate_random_instance(p), small), GuardExceeded);
}

TEST_CASE("exact primal structure") {
    GeneratorParams p;
    p.n_sites = 2;
    p.n_servers = 1;
    p.states_per_site = 2;
    p.discount = 0.8;
    const JointModel model(generate_random_instance(p));
    const auto lpm = build_exact_primal(model);
    CHECK(model.num_states() == 8);
    CHECK(model.num_actions() == 2);
    CHECK(lpm.num_vars() == 16);
    CHECK(lpm.num_rows() == 8);
    double rhs = 0.0;
    for (const auto& row : lpm.constraints()) rhs += row.rhs;
    CHECK(rhs == doctest::Approx(0.2));

    const JointModel one(fixtures::single_state());
    const auto lp1 = build_exact_primal(one);
    CHECK(lp1.num_vars() == 1);
    CHECK(lp1.num_rows() == 1);

    ExactGuard tight;
    tight.max_nonzeros = 10;
    CHECK_THROWS_AS(JointModel(generate_random_instance(p), tight), GuardExceeded);
}

TEST_CASE("exact values of hand-solvable instances") {
    const JointModel one(fixtures::single_state());
    const auto s1 = solve_exact(one);
    CHECK(s1.optimal_value == doctest::Approx(2.0));
    CHECK(s1.lp_objective == doctest::Approx(1.0));

    for (double cost : {1.0, 10.0}) {
        double oracle = -1e9;
        for (bool a : {false, true})
            for (bool b : {false, true}) oracle = std::max(oracle, two_site_value(cost, a, b));
        const JointModel model(fixtures::move_once(cost));
        CHECK(solve_exact(model).optimal_value == doctest::Approx(oracle).epsilon(1e-9));
    }
    CHECK(two_site_value(1.0, true, false) == doctest::Approx(5.0));
    CHECK(solve_exact(JointModel(fixtures::move_once(1.0))).optimal_value == doctest::Approx(5.0));
    CHECK(solve_exact(JointModel(fixtures::move_once(10.0))).optimal_value == doctest::Approx(2.0));
}

TEST_CASE("occupation measure is a probability measure satisfying balance") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const JointModel model(fixtures::small_random(seed));
        const auto sol = solve_exact(model);
        double total = 0.0;
        for (double r : sol.occupation) {
            CHECK(r >= -1e-9);
            total += r;
        }
        CHECK(std::abs(total - 1.0) <= 1e-7);
        CHECK(std::abs(sol.lp_objective - (1 - model.instance().discount) * sol.optimal_value) <=
              1e-7);
        const auto lpm = build_exact_primal(model);
        const auto act = lpm.row_activity(sol.occupation);
        for (int r = 0; r < lpm.num_rows(); ++r)
            CHECK(std::abs(act[r] - lpm.constraints()[r].rhs) <= 1e-7);
    }
}

TEST_CASE("value iteration") {
    const JointModel one(fixtures::single_state());
    const auto vi = value_iteration(one, 1e-12);
    CHECK(vi.values[0] == doctest::Approx(2.0));

    SUBCASE("myopic limit") {
        auto inst = fixtures::small_random(4);
        inst.discount = 0.0;
        const JointModel model(inst);
        const auto v = value_iteration(model, 1e-12);
        for (std::size_t s = 0; s < model.num_states(); ++s) {
            double best = -1e300;
            for (std::size_t a = 0; a < model.num_actions(); ++a) best = std::max(best, model.reward(s, a));
            CHECK(v.values[s] == doctest::Approx(best));
        }
    }

    SUBCASE("agrees with the LP in sup norm, within the iteration bound") {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const JointModel model(fixtures::small_random(seed));
            const double tol = 1e-8;
            const auto vi = value_iteration(model, tol);
            const auto sol = solve_exact(model);
            CHECK(vi.residual <= tol);
            CHECK(sup_diff(vi.values, sol.value_vector) <= 1e-5);
            double lo = 1e300, hi = -1e300;
            for (std::size_t s = 0; s < model.num_states(); ++s)
                for (std::size_t a = 0; a < model.num_actions(); ++a) {
                    lo = std::min(lo, model.reward(s, a));
                    hi = std::max(hi, model.reward(s, a));
                }
            const double alpha = model.instance().discount;
            const double span = hi - lo > 0 ? hi - lo : 1.0;
            const int bound =
                static_cast<int>(std::ceil(std::log(tol * (1 - alpha) / span) / std::log(alpha))) + 1;
            CHECK(vi.iterations <= bound);
        }
    }
}

TEST_CASE("policy evaluation and extraction") {
    const JointModel model(fixtures::move_once(1.0));
    const auto sol = solve_exact(model);
    const auto policy = extract_policy(model, sol);
    const auto& idx = model.indexer();
    const std::size_t s12 = idx.rank(0, idx.permutation_rank(Permutation{0, 1}));
    const std::size_t s21 = idx.rank(0, idx.permutation_rank(Permutation{1, 0}));
    CHECK(idx.permutation(policy[s12]) == Permutation{1, 0});
    CHECK(idx.permutation(policy[s21]) == Permutation{1, 0});
    CHECK(model.initial_value(policy_evaluation_exact(model, policy)) == doctest::Approx(5.0));

    TabularPolicy stay(2);
    stay[s12] = idx.permutation_rank(Permutation{0, 1});
    stay[s21] = idx.permutation_rank(Permutation{1, 0});
    CHECK(model.initial_value(policy_evaluation_exact(model, stay)) == doctest::Approx(2.0));

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const JointModel m(fixtures::small_random(seed));
        const auto es = solve_exact(m);
        const auto opt = extract_policy(m, es);
        const auto values = policy_evaluation_exact(m, opt);
        CHECK(sup_diff(values, es.value_vector) <= 1e-6);
        CHECK(m.initial_value(values) == doctest::Approx(es.optimal_value).epsilon(1e-9));
        // arbitrary policies cannot do better
        TabularPolicy other(m.num_states());
        for (std::size_t s = 0; s < other.size(); ++s) other[s] = (s * 7 + seed) % m.num_actions();
        CHECK(m.initial_value(policy_evaluation_exact(m, other)) <= es.optimal_value + 1e-6);
    }
}

TEST_CASE("unvisited states get the Bellman-greedy action") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const JointModel m(fixtures::small_random(seed));
        const auto es = solve_exact(m);
        const auto policy = extract_policy(m, es);
        const std::size_t actions = m.num_actions();
        for (std::size_t s = 0; s < m.num_states(); ++s) {
            double mass = 0.0;
            for (std::size_t a = 0; a < actions; ++a) mass += es.occupation[s * actions + a];
            if (mass <= 1e-12) CHECK(policy[s] == m.greedy_action(s, es.value_vector));
        }
    }
}

TEST_CASE("marginals") {
    SUBCASE("single site: the marginal is the occupation measure") {
        GeneratorParams p;
        p.n_sites = 1;
        p.n_servers = 1;
        p.states_per_site = 3;
        p.seed = 2;
        const JointModel model(generate_random_instance(p));
        const auto sol = solve_exact(model);
        const MarginalIndex index(model.instance());
        const auto marg = marginalize(model, index, sol);
        REQUIRE(marg.size() == sol.occupation.size());
        for (std::size_t k = 0; k < marg.size(); ++k) CHECK(marg[k] == doctest::Approx(sol.occupation[k]));
    }

    SUBCASE("each agent's origin marginals sum to one") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const JointModel model(fixtures::small_random(seed));
            const auto sol = solve_exact(model);
            const MarginalIndex index(model.instance());
            const auto marg = marginalize(model, index, sol);
            std::vector<double> total(model.instance().n_sites(), 0.0);
            for (int k = 0; k < index.size(); ++k)
                if (index.key(k).anchor == Anchor::origin) total[index.key(k).agent] += marg[k];
            for (double t : total) CHECK(std::abs(t - 1.0) <= 1e-7);
        }
    }
}
