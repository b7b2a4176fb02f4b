#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "fixtures.hpp"
#include "rbpsc/exact_mdp.hpp"
#include "rbpsc/relaxation.hpp"

using namespace rbpsc;

namespace {

ProblemInstance uniform_states(std::uint64_t seed, int n, int m, int k) {
    GeneratorParams p;
    p.seed = seed;
    p.n_sites = n;
    p.n_servers = m;
    p.states_per_site = k;
    p.cost_scale = 2.0;
    return generate_random_instance(p);
}

/// Marginal variables counted straight from their definition: one per
/// (agent, origin state, s, a) and (agent, destination state, s, a) with
/// s != a, plus one per (agent, state, j, j).
int count_marginals(const ProblemInstance& inst) {
    int count = 0;
    const int n = inst.n_sites();
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s)
            for (int a = 0; a < n; ++a)
                count += s == a ? inst.sites[s].state_count
                                : inst.sites[s].state_count + inst.sites[a].state_count;
    return count;
}

} // namespace

TEST_CASE("relaxation size") {
    const auto inst = uniform_states(1, 4, 2, 3);
    const auto model = build_relaxation(inst);
    CHECK(count_marginals(inst) == 336);
    CHECK(model.lp.num_vars() == 336);
    CHECK(model.index.size() == 336);
    const auto& l = model.layout;
    CHECK(l.family_end(Family::st0) - l.family_begin(Family::st0) == 4 * 4 * 3);
    CHECK(l.family_end(Family::compat) - l.family_begin(Family::compat) == 64);
    CHECK(l.family_end(Family::st1) - l.family_begin(Family::st1) == 12);
    CHECK(l.family_end(Family::st2) - l.family_begin(Family::st2) == 16);
    CHECK(l.family_end(Family::st3) - l.family_begin(Family::st3) == 16);
    CHECK(model.lp.num_rows() == l.num_rows());

    const auto small = build_relaxation(uniform_states(2, 3, 1, 2));
    CHECK(small.layout.family_end(Family::st1) - small.layout.family_begin(Family::st1) == 6);

    // heterogeneous state counts
    auto mixed = uniform_states(3, 3, 1, 2);
    mixed.sites[1] = uniform_states(4, 1, 1, 4).sites[0];
    CHECK(build_relaxation(mixed).lp.num_vars() == count_marginals(mixed));
}

TEST_CASE("marginal keys") {
    const MarginalIndex index(std::vector<int>{2, 3});
    CHECK(index.size() == 2 * (2 + 3 + (2 + 3) + (3 + 2)));
    for (int k = 0; k < index.size(); ++k) CHECK(index.index(index.key(k)) == k);
    // keys with s == a are one variable whatever the anchor
    CHECK(index.index(0, Anchor::origin, 1, 1, 1) == index.index(0, Anchor::destination, 1, 1, 1));
    CHECK_THROWS_AS(index.index(0, Anchor::origin, 2, 0, 1), std::out_of_range);
    CHECK_NOTHROW(index.index(0, Anchor::destination, 2, 0, 1));
    CHECK_THROWS_AS(index.index(2, Anchor::origin, 0, 0, 1), std::out_of_range);
}

TEST_CASE("single site: the relaxation is the exact LP") {
    GeneratorParams p;
    p.seed = 8;
    p.n_sites = 1;
    p.n_servers = 1;
    p.states_per_site = 3;
    p.discount = 0.7;
    const auto inst = generate_random_instance(p);
    const auto rel = build_relaxation(inst);
    const JointModel joint(inst);
    const auto exact = build_exact_primal(joint);
    REQUIRE(rel.lp.num_vars() == exact.num_vars());
    // the st0 rows carry the whole model; every other row is empty with rhs 0
    const auto a = rel.lp.compress();
    const auto b = exact.compress();
    CHECK(a.start == b.start);
    CHECK(a.index == b.index);
    for (std::size_t k = 0; k < a.value.size(); ++k) CHECK(a.value[k] == doctest::Approx(b.value[k]));
    for (int j = 0; j < exact.num_vars(); ++j)
        CHECK(rel.lp.variables()[j].objective == doctest::Approx(exact.variables()[j].objective));
    for (int r = 0; r < exact.num_rows(); ++r)
        CHECK(rel.lp.constraints()[r].rhs == doctest::Approx(exact.constraints()[r].rhs));
    for (int r = exact.num_rows(); r < rel.lp.num_rows(); ++r) CHECK(rel.lp.constraints()[r].rhs == 0.0);

    const auto sol = solve_relaxation(inst);
    CHECK(sol.objective == doctest::Approx(solve_exact(joint).optimal_value).epsilon(1e-9));
    CHECK(solve_relaxation(fixtures::single_state()).objective == doctest::Approx(2.0));
}

TEST_CASE("upper bound on the exact optimum") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto inst = fixtures::small_random(seed);
        const auto zr = solve_relaxation(inst).objective;
        const auto zs = solve_exact(JointModel(inst)).optimal_value;
        CHECK(zr >= zs - 1e-6);
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto inst = uniform_states(seed, 3, 1, 2);
        CHECK(solve_relaxation(inst).objective >= solve_exact(JointModel(inst)).optimal_value - 1e-6);
    }
}

TEST_CASE("duals and reduced costs") {
    SUBCASE("single state: every reduced cost vanishes") {
        const auto inst = fixtures::single_state();
        const auto sol = solve_relaxation(inst);
        const auto index = sol.index();
        for (int k = 0; k < index.size(); ++k) {
            CHECK(std::abs(sol.gamma_bar[k]) <= 1e-9);
            CHECK(std::abs(reduced_cost_recompute(inst, sol, index.key(k))) <= 1e-9);
        }
        CHECK(sol.lambda(0, 0, 0) == doctest::Approx(2.0));
    }

    SUBCASE("closed form matches the solver on every key") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto inst = seed < 10 ? fixtures::small_random(seed) : uniform_states(seed, 4, 2, 2);
            const auto sol = solve_relaxation(inst);
            const auto index = sol.index();
            double worst = 0.0;
            for (int k = 0; k < index.size(); ++k) {
                const double g = reduced_cost_recompute(inst, sol, index.key(k));
                worst = std::max(worst, std::abs(g - sol.gamma_bar[k]));
                CHECK(sol.gamma_bar[k] >= -1e-7);
                CHECK(sol.rho_bar[k] >= -1e-9);
                CHECK(std::abs(sol.rho_bar[k] * sol.gamma_bar[k]) <= 1e-7);
                if (sol.rho_bar[k] > 1e-6) CHECK(g <= 1e-6);
            }
            CHECK(worst <= 1e-6);
        }
    }

    SUBCASE("unknown keys are rejected") {
        const auto inst = fixtures::move_once(1.0);
        const auto sol = solve_relaxation(inst);
        CHECK_THROWS_AS(reduced_cost_recompute(inst, sol, MarginalKey{3, Anchor::origin, 0, 0, 1}),
                        std::out_of_range);
        CHECK_THROWS_AS(reduced_cost_recompute(fixtures::move_once(2.0), sol,
                                               MarginalKey{0, Anchor::origin, 0, 0, 1}),
                        InstanceMismatch);
    }
}

TEST_CASE("marginal feasibility") {
    SUBCASE("exact marginals satisfy every family") {
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            const auto inst = fixtures::small_random(seed);
            const JointModel model(inst);
            const auto marg = marginalize(model, MarginalIndex(inst), solve_exact(model));
            const auto report = verify_marginal_feasibility(inst, marg);
            for (int f = 0; f < kNumFamilies; ++f) CHECK(report.family_residual[f] <= 1e-8);
            CHECK(report.nonnegativity <= 1e-9);
        }
    }

    SUBCASE("all-zero marginals violate only the flow balance") {
        const auto inst = fixtures::small_random(11);
        const auto report =
            verify_marginal_feasibility(inst, MarginalVector(MarginalIndex(inst).size(), 0.0));
        double max_nu = 0.0;
        for (const auto& site : inst.sites)
            for (double p : site.initial_dist) max_nu = std::max(max_nu, p);
        CHECK(report.residual(Family::st0) == doctest::Approx((1 - inst.discount) * max_nu));
        for (Family f : {Family::compat, Family::st1, Family::st2, Family::st3})
            CHECK(report.residual(f) == 0.0);
    }

    SUBCASE("the optimal relaxation point") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto inst = uniform_states(seed, 4, 2, 3);
            const auto report = verify_marginal_feasibility(inst, solve_relaxation(inst).rho_bar);
            CHECK(report.max_residual() <= 1e-7);
        }
    }

    CHECK_THROWS_AS(verify_marginal_feasibility(fixtures::single_state(), MarginalVector(3)),
                    std::invalid_argument);
}

TEST_CASE("persistence") {
    const auto inst = uniform_states(5, 3, 2, 2);
    const auto sol = solve_relaxation(inst);
    const auto path = std::filesystem::temp_directory_path() / "rbpsc_relaxation.json";
    save_relaxation(sol, path);
    const auto back = load_relaxation(path);
    CHECK(back.instance_hash == sol.instance_hash);
    CHECK(back.objective == sol.objective);
    CHECK(back.rho_bar == sol.rho_bar);
    CHECK(back.gamma_bar == sol.gamma_bar);
    CHECK(back.lambda_bar == sol.lambda_bar);
    CHECK(back.xi_bar == sol.xi_bar);
    CHECK_NOTHROW(require_matching(inst, back));
    auto other = inst;
    other.switch_cost[0][1] += 1.0;
    CHECK_THROWS_AS(require_matching(other, back), InstanceMismatch);
    std::filesystem::remove(path);
}

TEST_CASE("repeated solves pin the same dual") {
    const auto inst = uniform_states(9, 4, 2, 2);
    const auto a = solve_relaxation(inst);
    const auto b = solve_relaxation(inst);
    CHECK(a.lambda_bar == b.lambda_bar);
    CHECK(a.gamma_bar == b.gamma_bar);
}
