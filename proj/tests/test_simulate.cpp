#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>

#include "fixtures.hpp"
#include "rbpsc/exact_mdp.hpp"
#include "rbpsc/policies.hpp"
#include "rbpsc/relaxation.hpp"
#include "rbpsc/simulate.hpp"

using namespace rbpsc;

namespace {

/// The policy as a table over the enumerated joint states.
TabularPolicy table_of(const JointModel& model, const Policy& policy) {
    const auto& idx = model.indexer();
    TabularPolicy table(model.num_states());
    for (std::size_t s = 0; s < table.size(); ++s) {
        const auto js = idx.unrank(s);
        table[s] = idx.permutation_rank(policy(js.site_states, js.placement));
    }
    return table;
}

ProblemInstance tiny(std::uint64_t seed) {
    GeneratorParams p;
    p.seed = seed;
    p.n_sites = 3;
    p.n_servers = 1 + static_cast<int>(seed % 2);
    p.states_per_site = 2;
    p.cost_scale = 2.0;
    p.discount = 0.8;
    return generate_random_instance(p);
}

} // namespace

TEST_CASE("truncation horizon") {
    CHECK(truncation_horizon(0.5, 100.0, 1e-6) == 27);
    CHECK(truncation_horizon(0.9, 10.0, 1e-6) == 153);
    CHECK(truncation_horizon(0.9, 1e-6, 1e-6) == 0);
    CHECK(truncation_horizon(0.9, 1e-7, 1e-6) == 0);
    CHECK(truncation_horizon(0.9, 0.0, 1e-6) == 0);
    for (double alpha : {0.1, 0.5, 0.9, 0.99})
        for (double r : {1.0, 3.7, 250.0}) {
            const int t = truncation_horizon(alpha, r, 1e-6);
            CHECK(std::pow(alpha, t) * r < 1e-6);
            CHECK(std::pow(alpha, t - 1) * r >= 1e-6);
        }
    CHECK(truncation_bias(0.5, 100.0, 27) == doctest::Approx(std::pow(0.5, 27) * 200.0));
    CHECK_THROWS_AS(truncation_horizon(1.0, 1.0, 1e-6), std::invalid_argument);
    CHECK_THROWS_AS(truncation_horizon(0.5, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("rollout") {
    const auto inst = fixtures::single_state();
    const auto greedy = make_policy(inst, {PolicyKind::greedy, nullptr, 0});
    RngStream rng(1);
    CHECK(rollout(inst, greedy, 3, rng) == doctest::Approx(1.75));
    CHECK(rollout(inst, greedy, 0, rng) == 0.0);

    SUBCASE("the same seed replays the same trajectory") {
        const auto r = tiny(4);
        const auto pol = make_policy(r, {PolicyKind::random, nullptr, 2});
        RngStream a(77), b(77);
        CHECK(rollout(r, pol, 50, a) == rollout(r, pol, 50, b));
    }

    SUBCASE("deterministic chains match the exact value up to the truncation bias") {
        const auto mv = fixtures::move_once(1.0);
        const JointModel model(mv);
        const auto pol = make_policy(mv, {PolicyKind::greedy, nullptr, 0});
        const double exact = model.initial_value(policy_evaluation_exact(model, table_of(model, pol)));
        const double r_max = max_abs_reward(mv);
        for (int t : {1, 5, 20}) {
            RngStream rng(0);
            CHECK(std::abs(rollout(mv, pol, t, rng) - exact) <=
                  truncation_bias(mv.discount, r_max, t) + 1e-12);
        }
    }

    SUBCASE("log rows") {
        std::ostringstream out;
        TrajectoryLog log(out);
        log.header();
        const auto mv = fixtures::move_once(1.0);
        RngStream rng(0);
        rollout(mv, make_policy(mv, {PolicyKind::greedy, nullptr, 0}), 2, rng, &log, 7);
        CHECK(out.str() ==
              "trajectory,t,state,placement,action,reward\n"
              "7,0,1 1,1 2,2 1,2\n"
              "7,1,1 1,2 1,2 1,3\n");
    }
}

TEST_CASE("evaluation") {
    SUBCASE("deterministic instance has zero spread") {
        const auto mv = fixtures::move_once(1.0);
        const auto pol = make_policy(mv, {PolicyKind::greedy, nullptr, 0});
        SimConfig cfg;
        cfg.n_trajectories = 50;
        const auto rep = evaluate_policy(mv, pol, cfg);
        RngStream rng(0);
        CHECK(rep.std_error == 0.0);
        CHECK(rep.mean == doctest::Approx(rollout(mv, pol, rep.horizon, rng)));
        CHECK(rep.ci95.first <= rep.mean);
        CHECK(rep.ci95.second >= rep.mean);
        CHECK(rep.horizon == truncation_horizon(0.5, max_abs_reward(mv), 1e-6));
    }

    SUBCASE("Monte Carlo agrees with exact evaluation") {
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            const auto inst = tiny(seed);
            const JointModel model(inst);
            auto rel = std::make_shared<const RelaxationSolution>(solve_relaxation(inst));
            for (auto kind : {PolicyKind::one_step_lookahead, PolicyKind::greedy}) {
                const auto pol = make_policy(inst, {kind, rel, 0});
                const double exact =
                    model.initial_value(policy_evaluation_exact(model, table_of(model, pol)));
                SimConfig cfg;
                cfg.master_seed = 100 + seed;
                const auto rep = evaluate_policy(inst, pol, cfg);
                const double bias =
                    truncation_bias(inst.discount, max_abs_reward(inst), rep.horizon);
                CAPTURE(seed);
                CHECK(std::abs(rep.mean - exact) <= 3 * rep.std_error + bias);
            }
        }
    }

    SUBCASE("thread count does not change the estimate") {
        const auto inst = tiny(3);
        const auto pol = make_policy(inst, {PolicyKind::random, nullptr, 5});
        SimConfig cfg;
        cfg.n_trajectories = 1000;
        cfg.master_seed = 9;
        const auto one = evaluate_policy(inst, pol, cfg);
        cfg.threads = 3;
        const auto three = evaluate_policy(inst, pol, cfg);
        CHECK(one.mean == three.mean);
        CHECK(one.std_error == three.std_error);
        cfg.master_seed = 10;
        CHECK(evaluate_policy(inst, pol, cfg).mean != one.mean);
    }

    SUBCASE("standard error shrinks like one over root n") {
        const auto inst = tiny(1);
        const auto pol = make_policy(inst, {PolicyKind::random, nullptr, 1});
        double ratio = 0.0;
        constexpr int repeats = 5;
        for (int k = 0; k < repeats; ++k) {
            SimConfig cfg;
            cfg.master_seed = 1000 + k;
            cfg.n_trajectories = 2000;
            const double small = evaluate_policy(inst, pol, cfg).std_error;
            cfg.master_seed = 2000 + k;
            cfg.n_trajectories = 4000;
            ratio += evaluate_policy(inst, pol, cfg).std_error / small;
        }
        ratio /= repeats;
        CHECK(std::abs(ratio - 1.0 / std::sqrt(2.0)) <= 0.2 / std::sqrt(2.0));
    }

    SimConfig bad;
    bad.n_trajectories = 0;
    CHECK_THROWS_AS(evaluate_policy(fixtures::single_state(),
                                    make_policy(fixtures::single_state(), {}), bad),
                    std::invalid_argument);
}

TEST_CASE("seeds and sums") {
    CHECK(trajectory_seed(1, 0) != trajectory_seed(1, 1));
    CHECK(trajectory_seed(1, 0) != trajectory_seed(2, 0));
    CHECK(trajectory_seed(5, 5) == trajectory_seed(5, 5));
    std::vector<double> v(1000);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = 0.1 * static_cast<double>(k);
    CHECK(pairwise_sum(v) == doctest::Approx(0.1 * 999 * 1000 / 2));
    CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}
