#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace rbpsc {

/// Dense row-major square matrix of transition probabilities.
using Matrix = std::vector<std::vector<double>>;

/// Positions of the N agents: component i is the site occupied by agent i.
/// Agents [0, M) are the real (active) servers, [M, N) the passive placeholders.
/// Sites are 0-based in memory and 1-based in files and on the command line.
using Permutation = std::vector<int>;

/// One site (project) of the problem.
struct SiteModel {
    int state_count = 1;
    Matrix active_transition;        // p1
    Matrix passive_transition;       // p0
    std::vector<double> active_reward;  // r1
    std::vector<double> passive_reward; // r0
    std::vector<double> initial_dist;   // nu_n
};

/// Complete restless bandit problem with switching costs.
struct ProblemInstance {
    int n_servers = 1;
    std::vector<SiteModel> sites;
    /// switch_cost[k][l] is paid when an active agent moves from site k to l.
    Matrix switch_cost;
    double discount = 0.5;
    Permutation initial_placement;

    int n_sites() const { return static_cast<int>(sites.size()); }
    bool is_active(int agent) const { return agent < n_servers; }

    const Matrix& transition(int site, bool active) const {
        return active ? sites[site].active_transition : sites[site].passive_transition;
    }
    double reward(int site, bool active, int state) const {
        return active ? sites[site].active_reward[state] : sites[site].passive_reward[state];
    }
};

/// Tolerance on row sums of stochastic matrices and probability vectors.
inline constexpr double kStochasticTol = 1e-9;

struct Violation {
    std::string field;
    std::string message;
    double residual = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

ValidationReport validate_instance(const ProblemInstance& inst);

/// Throws std::invalid_argument with the report text if the instance is invalid.
void require_valid(const ProblemInstance& inst);

bool is_permutation(std::span<const int> p, int n);

/// R((x;s),a): active agents earn r1 at their destination minus the switching
/// cost, passive agents earn r0 at theirs.
double immediate_reward(const ProblemInstance& inst, std::span<const int> x,
                        std::span<const int> s, std::span<const int> a);

/// Probability that the sites move from x to x_next under assignment a.
double joint_transition_prob(const ProblemInstance& inst, std::span<const int> x,
                             std::span<const int> a, std::span<const int> x_next);

/// Seeded stream of uniform variates; one stream per trajectory or caller.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits; identical on every platform.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [0, n).
    int below(int n) { return static_cast<int>(uniform() * n); }

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer, used to derive independent seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t value);

/// Draws an index from a discrete distribution by inversion.
int sample_index(std::span<const double> probs, RngStream& rng);

std::vector<int> sample_transition(const ProblemInstance& inst, std::span<const int> x,
                                   std::span<const int> a, RngStream& rng);

std::vector<int> sample_initial_states(const ProblemInstance& inst, RngStream& rng);

/// Parameters of the random instance generator.
struct GeneratorParams {
    std::uint64_t seed = 0;
    int n_sites = 2;
    int n_servers = 1;
    int states_per_site = 2;
    double cost_scale = 1.0;
    double reward_scale = 1.0;
    double discount = 0.9;
};

ProblemInstance generate_random_instance(const GeneratorParams& params);

/// Mean switching cost over all N*N entries divided by the mean active reward.
double switch_ratio(const ProblemInstance& inst);

/// Upper bound on |R((x;s),a)| over all states and actions.
double max_abs_reward(const ProblemInstance& inst);

/// Largest state count over the sites.
int max_state_count(const ProblemInstance& inst);

nlohmann::json instance_to_json(const ProblemInstance& inst);
ProblemInstance instance_from_json(const nlohmann::json& doc);
void save_instance(const ProblemInstance& inst, const std::filesystem::path& path);
ProblemInstance load_instance(const std::filesystem::path& path);

/// Stable 64-bit fingerprint of the serialized instance (FNV-1a).
std::uint64_t instance_hash(const ProblemInstance& inst);

inline constexpr const char* kInstanceFormat = "rbpsc-v1";

} // namespace rbpsc
