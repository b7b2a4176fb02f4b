#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "rbpsc/instance.hpp"

using namespace rbpsc;

namespace {

/// Every joint site configuration of the instance.
std::vector<std::vector<int>> all_configs(const ProblemInstance& inst) {
    std::vector<std::vector<int>> out{{}};
    for (const auto& site : inst.sites) {
        std::vector<std::vector<int>> next;
        for (const auto& prefix : out)
            for (int x = 0; x < site.state_count; ++x) {
                auto v = prefix;
                v.push_back(x);
                next.push_back(std::move(v));
            }
        out = std::move(next);
    }
    return out;
}

std::vector<Permutation> all_perms(int n) {
    Permutation p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    std::vector<Permutation> out;
    do out.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
    return out;
}

} // namespace

TEST_CASE("validation") {
    SUBCASE("identity chain is valid") { CHECK(validate_instance(fixtures::single_state()).ok()); }

    SUBCASE("row summing to 0.9") {
        auto inst = fixtures::single_state();
        inst.sites[0].active_transition = {{0.9}};
        const auto report = validate_instance(inst);
        REQUIRE_FALSE(report.ok());
        REQUIRE(report.violations.size() == 1);
        CHECK(report.violations[0].residual == doctest::Approx(0.1));
        CHECK(report.violations[0].message.find("row-stochastic residual 0.1") != std::string::npos);
    }

    SUBCASE("placement that is not a permutation") {
        auto inst = fixtures::move_once(1.0);
        inst.initial_placement = {0, 0};
        const auto report = validate_instance(inst);
        REQUIRE_FALSE(report.ok());
        CHECK(report.to_string().find("not a permutation") != std::string::npos);
    }

    SUBCASE("other invariants") {
        auto inst = fixtures::move_once(1.0);
        inst.n_servers = 3;
        CHECK_FALSE(validate_instance(inst).ok());
        inst = fixtures::move_once(1.0);
        inst.discount = 1.0;
        CHECK_FALSE(validate_instance(inst).ok());
        inst = fixtures::move_once(1.0);
        inst.sites[1].initial_dist = {-0.5};
        CHECK_FALSE(validate_instance(inst).ok());
        inst = fixtures::move_once(1.0);
        inst.switch_cost[0][1] = std::nan("");
        CHECK_FALSE(validate_instance(inst).ok());
        inst = fixtures::move_once(-4.0); // negative costs are allowed
        CHECK(validate_instance(inst).ok());
        CHECK_THROWS_AS(require_valid(ProblemInstance{}), std::invalid_argument);
    }
}

TEST_CASE("immediate reward") {
    const auto one = fixtures::single_state(2.0, 0.5);
    const std::vector<int> x{0};
    const Permutation id{0};
    CHECK(immediate_reward(one, x, id, id) == doctest::Approx(1.5));

    auto two = fixtures::move_once(1.0);
    const std::vector<int> x2{0, 0};
    CHECK(immediate_reward(two, x2, Permutation{0, 1}, Permutation{1, 0}) == doctest::Approx(2.0));

    SUBCASE("no passive terms when every agent is active") {
        auto inst = fixtures::move_once(1.0);
        inst.n_servers = 2;
        inst.sites[0].passive_reward = {100.0};
        inst.sites[1].passive_reward = {100.0};
        for (const auto& s : all_perms(2))
            for (const auto& a : all_perms(2)) CHECK(immediate_reward(inst, x2, s, a) < 100.0);
    }

    SUBCASE("independent of the passive agents' labels") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            GeneratorParams p;
            p.seed = seed;
            p.n_sites = 4;
            p.n_servers = 2;
            p.states_per_site = 2;
            const auto inst = generate_random_instance(p);
            for (const auto& x : all_configs(inst))
                for (const auto& s : all_perms(4))
                    for (const auto& a : all_perms(4)) {
                        auto s2 = s;
                        auto a2 = a;
                        std::swap(s2[2], s2[3]);
                        std::swap(a2[2], a2[3]);
                        CHECK(immediate_reward(inst, x, s, a) ==
                              doctest::Approx(immediate_reward(inst, x, s2, a2)));
                    }
        }
    }

    CHECK_THROWS(immediate_reward(two, x, Permutation{0, 1}, Permutation{0, 1}));
}

TEST_CASE("joint transition probabilities") {
    SUBCASE("product of the served and idle entries") {
        ProblemInstance inst;
        inst.n_servers = 1;
        SiteModel a = fixtures::single_state_site(1.0);
        a.state_count = 2;
        a.active_transition = {{0.7, 0.3}, {0.5, 0.5}};
        a.passive_transition = {{1.0, 0.0}, {0.0, 1.0}};
        a.active_reward = {1, 1};
        a.passive_reward = {0, 0};
        a.initial_dist = {1, 0};
        SiteModel b = a;
        b.active_transition = {{1.0, 0.0}, {0.0, 1.0}};
        b.passive_transition = {{0.4, 0.6}, {0.2, 0.8}};
        inst.sites = {a, b};
        inst.switch_cost = {{0, 0}, {0, 0}};
        inst.initial_placement = {0, 1};
        const std::vector<int> x{0, 0}, next{1, 1};
        CHECK(joint_transition_prob(inst, x, Permutation{0, 1}, next) == doctest::Approx(0.18));
    }

    SUBCASE("identity chains") {
        auto inst = fixtures::move_once(0.0);
        CHECK(joint_transition_prob(inst, std::vector<int>{0, 0}, Permutation{1, 0},
                                    std::vector<int>{0, 0}) == 1.0);
    }

    SUBCASE("rows sum to one") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            GeneratorParams p;
            p.seed = seed;
            p.n_sites = 3;
            p.n_servers = 1 + static_cast<int>(seed % 3);
            p.states_per_site = 3;
            const auto inst = generate_random_instance(p);
            const auto configs = all_configs(inst);
            for (const auto& x : configs)
                for (const auto& a : all_perms(3)) {
                    double total = 0.0;
                    for (const auto& y : configs) total += joint_transition_prob(inst, x, a, y);
                    CHECK(std::abs(total - 1.0) <= 1e-9);
                }
        }
    }
}

TEST_CASE("sampling") {
    SUBCASE("identity chains never move") {
        const auto inst = fixtures::move_once(0.0);
        RngStream rng(3);
        for (int k = 0; k < 100; ++k)
            CHECK(sample_transition(inst, std::vector<int>{0, 0}, Permutation{1, 0}, rng) ==
                  std::vector<int>{0, 0});
    }

    SUBCASE("frequencies match the transition law") {
        GeneratorParams p;
        p.seed = 5;
        p.n_sites = 2;
        p.n_servers = 1;
        p.states_per_site = 3;
        const auto inst = generate_random_instance(p);
        const std::vector<int> x{1, 2};
        const Permutation a{1, 0};
        constexpr int draws = 100'000;
        std::map<std::vector<int>, int> counts;
        RngStream rng(99);
        for (int k = 0; k < draws; ++k) ++counts[sample_transition(inst, x, a, rng)];
        for (const auto& y : all_configs(inst)) {
            const double prob = joint_transition_prob(inst, x, a, y);
            const double freq = static_cast<double>(counts[y]) / draws;
            const double se = std::sqrt(prob * (1 - prob) / draws);
            CHECK(std::abs(freq - prob) <= 3 * se + 1e-12);
        }
    }

    SUBCASE("fresh streams with the same seed agree") {
        const auto inst = fixtures::small_random(17);
        RngStream r1(42), r2(42);
        std::vector<int> x1(inst.n_sites(), 0), x2 = x1;
        const auto a = inst.initial_placement;
        for (int t = 0; t < 50; ++t) {
            x1 = sample_transition(inst, x1, a, r1);
            x2 = sample_transition(inst, x2, a, r2);
            CHECK(x1 == x2);
        }
    }

    SUBCASE("uniform variates lie in [0, 1)") {
        RngStream rng(0);
        for (int k = 0; k < 1000; ++k) {
            const double u = rng.uniform();
            CHECK(u >= 0.0);
            CHECK(u < 1.0);
        }
    }
}

TEST_CASE("generator") {
    GeneratorParams p;
    p.seed = 7;
    p.n_sites = 3;
    p.n_servers = 2;
    p.states_per_site = 3;
    CHECK(instance_to_json(generate_random_instance(p)) ==
          instance_to_json(generate_random_instance(p)));
    p.cost_scale = 0.0;
    for (const auto& row : generate_random_instance(p).switch_cost)
        for (double c : row) CHECK(c == 0.0);
    for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(validate_instance(fixtures::small_random(seed)).ok());
    p.n_servers = 4;
    CHECK_THROWS_AS(generate_random_instance(p), std::invalid_argument);
}

TEST_CASE("switch ratio") {
    auto inst = fixtures::move_once(2.0);
    inst.switch_cost = {{2, 2}, {2, 2}};
    inst.sites[0].active_reward = {4};
    inst.sites[1].active_reward = {4};
    CHECK(switch_ratio(inst) == doctest::Approx(0.5));

    inst.switch_cost = {{0, 0}, {0, 0}};
    CHECK(switch_ratio(inst) == 0.0);

    auto one = fixtures::single_state(2.0, 3.0);
    CHECK(switch_ratio(one) == doctest::Approx(1.5));

    one.sites[0].active_reward = {0.0};
    CHECK_THROWS_AS(switch_ratio(one), std::domain_error);
}

TEST_CASE("persistence") {
    const auto inst = fixtures::small_random(23);
    const auto dir = std::filesystem::temp_directory_path();
    const auto first = dir / "rbpsc_instance_a.json";
    const auto second = dir / "rbpsc_instance_b.json";
    save_instance(inst, first);
    const auto loaded = load_instance(first);
    save_instance(loaded, second);
    auto slurp = [](const std::filesystem::path& path) {
        std::ifstream in(path);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    CHECK(slurp(first) == slurp(second));
    CHECK(instance_hash(inst) == instance_hash(loaded));
    CHECK(loaded.initial_placement == inst.initial_placement);
    CHECK(loaded.switch_cost == inst.switch_cost);

    auto doc = instance_to_json(inst);
    CHECK(doc["format"] == kInstanceFormat);
    doc["format"] = "other";
    CHECK_THROWS_AS(instance_from_json(doc), std::invalid_argument);

    auto changed = inst;
    changed.discount = inst.discount / 2;
    CHECK(instance_hash(changed) != instance_hash(inst));
    std::filesystem::remove(first);
    std::filesystem::remove(second);
}
