#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "rbpsc/harness.hpp"
#include "rbpsc/policies.hpp"

using namespace rbpsc;

namespace {

/// Best assignment value by enumerating all permutations.
double brute_force_best(const ScoreMatrix& m) {
    Permutation p(m.size());
    std::iota(p.begin(), p.end(), 0);
    const bool maximize = m.sense == lp::Sense::maximize;
    double best = maximize ? -1e300 : 1e300;
    do {
        const double v = assignment_value(m, p);
        best = maximize ? std::max(best, v) : std::min(best, v);
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

/// Lexicographically smallest permutation whose value is within `tol` of the optimum.
Permutation brute_force_lex(const ScoreMatrix& m, double tol) {
    const double best = brute_force_best(m);
    Permutation p(m.size());
    std::iota(p.begin(), p.end(), 0);
    do {
        if (std::abs(assignment_value(m, p) - best) <= tol) return p;
    } while (std::next_permutation(p.begin(), p.end()));
    return {};
}

ScoreMatrix random_matrix(RngStream& rng, int n, lp::Sense sense) {
    ScoreMatrix m{Matrix(n, std::vector<double>(n)), sense};
    for (auto& row : m.entries)
        for (double& v : row) v = rng.uniform() * 200.0 - 100.0;
    return m;
}

ProblemInstance medium(std::uint64_t seed, int n, int m, int k) {
    GeneratorParams p;
    p.seed = seed;
    p.n_sites = n;
    p.n_servers = m;
    p.states_per_site = k;
    p.cost_scale = 3.0;
    p.discount = 0.9;
    return generate_random_instance(p);
}

std::vector<Permutation> perms_of(int n) {
    Permutation p(n);
    std::iota(p.begin(), p.end(), 0);
    std::vector<Permutation> out;
    do out.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    return out;
}

} // namespace

TEST_CASE("hungarian: small cases") {
    CHECK(hungarian(ScoreMatrix{{{1, 2}, {2, 4}}, lp::Sense::maximize}) == Permutation{0, 1});
    CHECK(assignment_value(ScoreMatrix{{{1, 2}, {2, 4}}, lp::Sense::maximize}, Permutation{0, 1}) ==
          5.0);
    CHECK(hungarian(ScoreMatrix{{{1, 2}, {2, 4}}, lp::Sense::minimize}) == Permutation{1, 0});
    CHECK(hungarian(ScoreMatrix{{{7}}, lp::Sense::maximize}) == Permutation{0});
    CHECK(hungarian(ScoreMatrix{{}, lp::Sense::maximize}).empty());
    CHECK(hungarian(ScoreMatrix{{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}}, lp::Sense::minimize}) ==
          Permutation{1, 0, 2});
    CHECK_THROWS_AS(hungarian(ScoreMatrix{{{1, 2}}, lp::Sense::maximize}), std::invalid_argument);
    CHECK_THROWS_AS(hungarian(ScoreMatrix{{{1, NAN}, {0, 0}}, lp::Sense::maximize}),
                    std::invalid_argument);
    CHECK_THROWS_AS(assignment_value(ScoreMatrix{{{1, 2}, {2, 4}}}, Permutation{0, 0}),
                    std::invalid_argument);
}

TEST_CASE("hungarian: ties go to the lexicographically smallest permutation") {
    for (int n = 1; n <= 6; ++n) {
        Permutation id(n);
        std::iota(id.begin(), id.end(), 0);
        const Matrix zero(n, std::vector<double>(n, 0.0));
        CHECK(hungarian(ScoreMatrix{zero, lp::Sense::maximize}) == id);
        CHECK(hungarian(ScoreMatrix{zero, lp::Sense::minimize}) == id);
    }
    // both diagonals optimal; {0,1,2} wins over {2,1,0}
    CHECK(hungarian(ScoreMatrix{{{1, 0, 1}, {0, 1, 0}, {1, 0, 1}}, lp::Sense::maximize}) ==
          Permutation{0, 1, 2});
    // the two derangements tie; {1,2,0} comes first
    CHECK(hungarian(ScoreMatrix{{{0, 5, 5}, {5, 0, 5}, {5, 5, 0}}, lp::Sense::maximize}) ==
          Permutation{1, 2, 0});

    RngStream rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + rng.below(5);
        // small integer entries produce many ties
        ScoreMatrix m{Matrix(n, std::vector<double>(n)),
                      trial % 2 ? lp::Sense::maximize : lp::Sense::minimize};
        for (auto& row : m.entries)
            for (double& v : row) v = static_cast<double>(rng.below(3));
        CHECK(hungarian(m) == brute_force_lex(m, 1e-9));
    }
}

TEST_CASE("hungarian matches brute force on random 6x6 matrices") {
    RngStream rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = random_matrix(rng, 6, trial % 2 ? lp::Sense::maximize : lp::Sense::minimize);
        CHECK(assignment_value(m, hungarian(m)) == brute_force_best(m));
    }
}

TEST_CASE("greedy scores") {
    const auto inst = fixtures::move_once(1.0);
    const std::vector<int> x{0, 0};
    const auto g = greedy_scores(inst, x, Permutation{0, 1});
    // agent 0 serves: stay 1, move 3 - 1; agent 1 is passive with reward 0
    CHECK(g.entries[0][0] == 1.0);
    CHECK(g.entries[0][1] == 2.0);
    CHECK(g.entries[1][0] == 0.0);
    CHECK(g.entries[1][1] == 0.0);
    CHECK(greedy_action(inst, x, Permutation{0, 1}) == Permutation{1, 0});
    CHECK(greedy_action(fixtures::move_once(5.0), x, Permutation{0, 1}) == Permutation{0, 1});
    CHECK_THROWS_AS(greedy_scores(inst, std::vector<int>{0}, Permutation{0, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(greedy_scores(inst, x, Permutation{1, 1}), std::invalid_argument);
}

TEST_CASE("single site: every policy stays") {
    const auto inst = fixtures::single_state();
    const auto rel = solve_relaxation(inst);
    const std::vector<int> x{0};
    const Permutation s{0};
    CHECK(osl_action(inst, rel, x, s) == s);
    CHECK(pd_action(inst, rel, x, s) == s);
    CHECK(greedy_action(inst, x, s) == s);
    CHECK(random_action(1, 3, x, s) == s);
    // m = r + alpha lambda = 1 + 0.5 * 2
    CHECK(osl_scores(inst, rel, x, s).entries[0][0] == doctest::Approx(2.0));
}

TEST_CASE("lookahead with zero reward-to-go is greedy") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = medium(seed, 4, 2, 2);
        auto rel = solve_relaxation(inst);
        std::fill(rel.lambda_bar.begin(), rel.lambda_bar.end(), 0.0);
        const std::vector<int> x(4, 1);
        const Permutation s{3, 1, 0, 2};
        CHECK(osl_scores(inst, rel, x, s).entries == greedy_scores(inst, x, s).entries);
        CHECK(osl_action(inst, rel, x, s) == greedy_action(inst, x, s));
    }
}

TEST_CASE("lookahead and primal-dual agree") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const int n = 2 + static_cast<int>(seed % 4);
        const auto inst = medium(seed, n, 1 + static_cast<int>(seed % 2), 2);
        const auto rel = solve_relaxation(inst);
        const auto index = rel.index();
        const auto perms = perms_of(n);
        RngStream rng(seed);
        for (int probe = 0; probe < 20; ++probe) {
            std::vector<int> x(n);
            for (int j = 0; j < n; ++j) x[j] = rng.below(inst.sites[j].state_count);
            const auto& s = perms[rng.below(static_cast<int>(perms.size()))];
            const auto m = osl_scores(inst, rel, x, s);
            const auto g = pd_scores(inst, rel, index, x, s);
            double lo = 1e300, hi = -1e300;
            for (const auto& a : perms) {
                const double total = pd_index(inst, rel, x, s, a) + assignment_value(m, a);
                lo = std::min(lo, total);
                hi = std::max(hi, total);
                CHECK(assignment_value(g, a) == doctest::Approx(pd_index(inst, rel, x, s, a)));
            }
            CHECK(hi - lo <= 1e-6);
            CHECK(osl_action(inst, rel, x, s) == pd_action(inst, rel, x, s));
        }
    }
}

TEST_CASE("policies from a spec") {
    const auto inst = medium(3, 4, 2, 2);
    auto rel = std::make_shared<const RelaxationSolution>(solve_relaxation(inst));
    const std::vector<int> x{0, 1, 0, 1};
    const Permutation s{0, 1, 2, 3};
    CHECK(make_policy(inst, {PolicyKind::one_step_lookahead, rel, 0})(x, s) ==
          osl_action(inst, *rel, x, s));
    CHECK(make_policy(inst, {PolicyKind::primal_dual, rel, 0})(x, s) == pd_action(inst, *rel, x, s));
    CHECK(make_policy(inst, {PolicyKind::greedy, nullptr, 0})(x, s) == greedy_action(inst, x, s));
    CHECK_THROWS_AS(make_policy(inst, {PolicyKind::one_step_lookahead, nullptr, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_policy(medium(4, 4, 2, 2), {PolicyKind::primal_dual, rel, 0}),
                    InstanceMismatch);
    CHECK_THROWS_AS(osl_action(medium(4, 4, 2, 2), *rel, x, s), InstanceMismatch);

    const auto random = make_policy(inst, {PolicyKind::random, nullptr, 9});
    CHECK(random(x, s) == random(x, s));
    CHECK(random(x, s) == random_action(4, 9, x, s));
    std::set<Permutation> seen;
    for (std::uint64_t seed = 0; seed < 200; ++seed) seen.insert(random_action(4, seed, x, s));
    CHECK(seen.size() == 24);

    for (auto kind : {PolicyKind::one_step_lookahead, PolicyKind::primal_dual, PolicyKind::greedy,
                      PolicyKind::random})
        CHECK(parse_policy_kind(to_string(kind)) == kind);
    CHECK(parse_policy_kind("one_step_lookahead") == PolicyKind::one_step_lookahead);
    CHECK_THROWS_AS(parse_policy_kind("index"), std::invalid_argument);
}

TEST_CASE("lure: greedy is drawn to the remote sites, lookahead is not") {
    for (double alpha : {0.5, 0.9, 0.95}) {
        const auto inst = lure_instance(alpha);
        const auto rel = solve_relaxation(inst);
        const std::vector<int> x(inst.n_sites(), 0);
        const auto& s = inst.initial_placement;
        auto remote = [&](const Permutation& a) {
            for (int i = 0; i < inst.n_servers; ++i)
                if (a[i] >= 2) return true;
            return false;
        };
        CAPTURE(alpha);
        CHECK(remote(greedy_action(inst, x, s)));
        CHECK_FALSE(remote(osl_action(inst, rel, x, s)));
    }
}
