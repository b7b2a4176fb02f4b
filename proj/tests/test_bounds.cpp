#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "rbpsc/bounds.hpp"
#include "rbpsc/exact_mdp.hpp"
#include "rbpsc/relaxation.hpp"

using namespace rbpsc;

TEST_CASE("separable value estimate") {
    const auto one = fixtures::single_state();
    const auto rel = solve_relaxation(one);
    CHECK(approx_value(one, rel, std::vector<int>{0}, Permutation{0}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(approx_value(fixtures::single_state(2.0), rel, std::vector<int>{0}, Permutation{0}),
                    InstanceMismatch);

    SUBCASE("single site: the estimate is the stored dual") {
        GeneratorParams p;
        p.seed = 3;
        p.n_sites = 1;
        p.n_servers = 1;
        p.states_per_site = 3;
        const auto inst = generate_random_instance(p);
        const auto r = solve_relaxation(inst);
        for (int x = 0; x < 3; ++x)
            CHECK(approx_value(inst, r, std::vector<int>{x}, Permutation{0}) == r.lambda(0, 0, x));
    }

    SUBCASE("vector form agrees with pointwise evaluation") {
        const auto inst = fixtures::small_random(6);
        const JointModel model(inst);
        const auto r = solve_relaxation(inst);
        const auto v = approx_value_vector(model, r);
        for (std::size_t s = 0; s < model.num_states(); ++s) {
            const auto js = model.indexer().unrank(s);
            CHECK(v[s] == approx_value(inst, r, js.site_states, js.placement));
        }
    }
}

TEST_CASE("passive agents are interchangeable in the estimate") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GeneratorParams p;
        p.seed = seed;
        p.n_sites = 4;
        p.n_servers = 2;
        p.states_per_site = 2;
        p.cost_scale = 2.0;
        const auto inst = generate_random_instance(p);
        const auto rel = solve_relaxation(inst);
        const JointModel model(inst);
        const auto& idx = model.indexer();
        for (std::size_t s = 0; s < model.num_states(); ++s) {
            const auto js = idx.unrank(s);
            auto swapped = js.placement;
            std::swap(swapped[2], swapped[3]);
            CHECK(approx_value(inst, rel, js.site_states, js.placement) ==
                  doctest::Approx(approx_value(inst, rel, js.site_states, swapped)).epsilon(1e-7));
        }
    }
}

TEST_CASE("dual feasibility") {
    SUBCASE("the optimal value function is feasible and tight") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const JointModel model(fixtures::small_random(seed));
            const auto sol = solve_exact(model);
            const auto rep = dual_feasibility_slacks(model, sol.value_vector);
            CHECK(rep.min_slack >= -1e-7);
            for (std::size_t s = 0; s < model.num_states(); ++s) {
                const auto first = rep.slacks.begin() + static_cast<long>(s * model.num_actions());
                CHECK(*std::min_element(first, first + static_cast<long>(model.num_actions())) <=
                      1e-6);
            }
        }
    }

    SUBCASE("relaxation duals give a feasible estimate") {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const auto inst = fixtures::small_random(seed);
            const JointModel model(inst);
            const auto rep = dual_feasibility_slacks(model, approx_value_vector(model, solve_relaxation(inst)));
            CAPTURE(seed);
            CHECK(rep.min_slack >= -1e-7);
        }
    }

    SUBCASE("zero is infeasible when rewards are positive") {
        const JointModel model(fixtures::move_once(0.0));
        const auto rep = dual_feasibility_slacks(model, std::vector<double>(model.num_states(), 0.0));
        CHECK(rep.min_slack == doctest::Approx(-3.0));
        CHECK(rep.slacks[rep.argmin_state * model.num_actions() + rep.argmin_action] == rep.min_slack);
    }

    CHECK_THROWS_AS(dual_feasibility_slacks(JointModel(fixtures::single_state()), std::vector<double>{}),
                    std::invalid_argument);
}

TEST_CASE("occupation frequencies") {
    const auto cycle = occupation_measure(Matrix{{0, 1}, {1, 0}}, std::vector<double>{1, 0}, 0.5);
    CHECK(cycle[0] == doctest::Approx(2.0 / 3.0));
    CHECK(cycle[1] == doctest::Approx(1.0 / 3.0));
    CHECK(occupation_measure(Matrix{{1}}, std::vector<double>{1}, 0.9)[0] == doctest::Approx(1.0));

    const JointModel one(fixtures::single_state());
    CHECK(occupation_measure(one, TabularPolicy{0}) == std::vector<double>{1.0});

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const JointModel model(fixtures::small_random(seed));
        TabularPolicy policy(model.num_states());
        for (std::size_t s = 0; s < policy.size(); ++s) policy[s] = (s * 3 + seed) % model.num_actions();
        const auto f = occupation_measure(model, policy);
        CHECK(std::abs(std::accumulate(f.begin(), f.end(), 0.0) - 1.0) <= 1e-9);
        for (double v : f) CHECK(v >= -1e-12);
        // nu' J_u = F' R_u / (1 - alpha)
        const auto values = policy_evaluation_exact(model, policy);
        double weighted = 0.0;
        for (std::size_t s = 0; s < f.size(); ++s) weighted += f[s] * model.reward(s, policy[s]);
        CHECK(weighted / (1 - model.instance().discount) ==
              doctest::Approx(model.initial_value(values)).epsilon(1e-9));
    }
    CHECK_THROWS_AS(occupation_measure(Matrix{{1, 0}}, std::vector<double>{1}, 0.5),
                    std::invalid_argument);
}

TEST_CASE("gap bound") {
    SUBCASE("single site: no gap") {
        GeneratorParams p;
        p.seed = 12;
        p.n_sites = 1;
        p.n_servers = 1;
        p.states_per_site = 3;
        p.discount = 0.8;
        const auto inst = generate_random_instance(p);
        const auto rep = adp_gap_bound(JointModel(inst), solve_relaxation(inst));
        CHECK(std::abs(rep.lhs) <= 1e-7);
        CHECK(std::abs(rep.rhs) <= 1e-6);
    }

    SUBCASE("random instances") {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const auto inst = fixtures::small_random(seed);
            const JointModel model(inst);
            const auto rep = adp_gap_bound(model, solve_relaxation(inst));
            CAPTURE(seed);
            CHECK(rep.lhs >= -1e-6);
            CHECK(rep.slack >= -1e-6);
            CHECK(rep.min_dual_slack >= -1e-7);
            CHECK(rep.slack == doctest::Approx(rep.rhs - rep.lhs));
            CHECK(rep.optimal_value == doctest::Approx(solve_exact(model).optimal_value));
        }
    }
}
