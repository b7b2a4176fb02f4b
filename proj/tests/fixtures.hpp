#pragma once

#include <cstdint>

#include "rbpsc/instance.hpp"

namespace fixtures {

using rbpsc::Matrix;
using rbpsc::ProblemInstance;
using rbpsc::SiteModel;

inline SiteModel single_state_site(double active_reward, double passive_reward = 0.0) {
    SiteModel site;
    site.state_count = 1;
    site.active_transition = {{1.0}};
    site.passive_transition = {{1.0}};
    site.active_reward = {active_reward};
    site.passive_reward = {passive_reward};
    site.initial_dist = {1.0};
    return site;
}

/// N = M = 1, one state: value r / (1 - alpha) when c = 0.
inline ProblemInstance single_state(double reward = 1.0, double stay_cost = 0.0,
                                    double discount = 0.5) {
    ProblemInstance inst;
    inst.n_servers = 1;
    inst.sites = {single_state_site(reward)};
    inst.switch_cost = {{stay_cost}};
    inst.discount = discount;
    inst.initial_placement = {0};
    return inst;
}

/// Two single-state sites with active rewards 1 and 3, one server starting
/// at site 1; moving to site 2 costs `move_cost`.
inline ProblemInstance move_once(double move_cost) {
    ProblemInstance inst;
    inst.n_servers = 1;
    inst.sites = {single_state_site(1.0), single_state_site(3.0)};
    inst.switch_cost = {{0.0, move_cost}, {0.0, 0.0}};
    inst.discount = 0.5;
    inst.initial_placement = {0, 1};
    return inst;
}

/// Seeded small random instance: N in {1,2,3}, M <= min(2, N), |S| <= 3,
/// discount in [0.5, 0.95).
inline ProblemInstance small_random(std::uint64_t seed, int max_sites = 3) {
    rbpsc::RngStream rng(rbpsc::mix_seed(seed + 1000));
    rbpsc::GeneratorParams p;
    p.seed = seed;
    p.n_sites = 1 + rng.below(max_sites);
    p.n_servers = 1 + rng.below(std::min(2, p.n_sites));
    p.states_per_site = 1 + rng.below(3);
    p.cost_scale = rng.uniform() * 5.0;
    p.reward_scale = 1.0 + rng.uniform() * 9.0;
    p.discount = 0.5 + 0.45 * rng.uniform();
    return rbpsc::generate_random_instance(p);
}

} // namespace fixtures
