#include "rbpsc/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rbpsc {

namespace {

void check_distribution(std::span<const double> row, const std::string& field,
                        std::vector<Violation>& out) {
    double sum = 0.0;
    double most_negative = 0.0;
    bool finite = true;
    for (double v : row) {
        if (!std::isfinite(v)) finite = false;
        sum += v;
        most_negative = std::min(most_negative, v);
    }
    if (!finite) {
        out.push_back({field, "non-finite probability", 0.0});
        return;
    }
    if (most_negative < 0.0) {
        out.push_back({field, "negative probability", -most_negative});
    }
    const double residual = std::abs(sum - 1.0);
    if (residual > kStochasticTol) {
        std::ostringstream msg;
        msg << "row-stochastic residual " << residual;
        out.push_back({field, msg.str(), residual});
    }
}

void check_matrix(const Matrix& m, int n, const std::string& field,
                  std::vector<Violation>& out) {
    if (static_cast<int>(m.size()) != n) {
        out.push_back({field, "expected " + std::to_string(n) + " rows", 0.0});
        return;
    }
    for (int r = 0; r < n; ++r) {
        const std::string row_field = field + "[" + std::to_string(r) + "]";
        if (static_cast<int>(m[r].size()) != n) {
            out.push_back({row_field, "expected " + std::to_string(n) + " columns", 0.0});
            continue;
        }
        check_distribution(m[r], row_field, out);
    }
}

void check_vector(const std::vector<double>& v, int n, const std::string& field,
                  std::vector<Violation>& out) {
    if (static_cast<int>(v.size()) != n) {
        out.push_back({field, "expected " + std::to_string(n) + " entries", 0.0});
        return;
    }
    for (double e : v) {
        if (!std::isfinite(e)) {
            out.push_back({field, "non-finite entry", 0.0});
            return;
        }
    }
}

void check_sizes(const ProblemInstance& inst, std::span<const int> x, std::span<const int> s,
                 std::span<const int> a) {
    const auto n = static_cast<std::size_t>(inst.n_sites());
    if (x.size() != n || s.size() != n || a.size() != n)
        throw std::invalid_argument("state or action dimension does not match the instance");
}

/// Dirichlet(1,...,1)-style draw: normalized uniforms, bounded away from zero.
std::vector<double> random_distribution(int n, RngStream& rng) {
    std::vector<double> row(n);
    for (auto& v : row) v = 0.05 + rng.uniform();
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    for (auto& v : row) v /= total;
    // absorb rounding so the row sums to one as closely as doubles allow
    const double drift = 1.0 - std::accumulate(row.begin(), row.end(), 0.0);
    row[std::distance(row.begin(), std::max_element(row.begin(), row.end()))] += drift;
    return row;
}

Matrix matrix_from_json(const nlohmann::json& j) { return j.get<Matrix>(); }

} // namespace

std::string ValidationReport::to_string() const {
    if (ok()) return "ok";
    std::ostringstream out;
    for (const auto& v : violations) out << v.field << ": " << v.message << "\n";
    return out.str();
}

bool is_permutation(std::span<const int> p, int n) {
    if (static_cast<int>(p.size()) != n) return false;
    std::vector<char> seen(n, 0);
    for (int v : p) {
        if (v < 0 || v >= n || seen[v]) return false;
        seen[v] = 1;
    }
    return true;
}

ValidationReport validate_instance(const ProblemInstance& inst) {
    ValidationReport report;
    auto& out = report.violations;
    const int n = inst.n_sites();
    if (n < 1) out.push_back({"n_sites", "at least one site required", 0.0});
    if (inst.n_servers < 1 || inst.n_servers > n)
        out.push_back({"n_servers", "must satisfy 1 <= M <= N", 0.0});
    if (!(inst.discount > 0.0 && inst.discount < 1.0))
        out.push_back({"discount", "must lie in (0,1)", 0.0});
    if (!is_permutation(inst.initial_placement, n))
        out.push_back({"initial_placement", "not a permutation", 0.0});

    if (static_cast<int>(inst.switch_cost.size()) != n) {
        out.push_back({"switch_cost", "expected N rows", 0.0});
    } else {
        for (int k = 0; k < n; ++k) check_vector(inst.switch_cost[k], n,
                                                 "switch_cost[" + std::to_string(k) + "]", out);
    }

    for (int site = 0; site < n; ++site) {
        const auto& sm = inst.sites[site];
        const std::string prefix = "sites[" + std::to_string(site) + "].";
        if (sm.state_count < 1) {
            out.push_back({prefix + "state_count", "must be positive", 0.0});
            continue;
        }
        check_matrix(sm.active_transition, sm.state_count, prefix + "active_transition", out);
        check_matrix(sm.passive_transition, sm.state_count, prefix + "passive_transition", out);
        check_vector(sm.active_reward, sm.state_count, prefix + "active_reward", out);
        check_vector(sm.passive_reward, sm.state_count, prefix + "passive_reward", out);
        if (static_cast<int>(sm.initial_dist.size()) != sm.state_count)
            out.push_back({prefix + "initial_dist", "expected state_count entries", 0.0});
        else
            check_distribution(sm.initial_dist, prefix + "initial_dist", out);
    }
    return report;
}

void require_valid(const ProblemInstance& inst) {
    const auto report = validate_instance(inst);
    if (!report.ok()) throw std::invalid_argument("invalid instance:\n" + report.to_string());
}

double immediate_reward(const ProblemInstance& inst, std::span<const int> x,
                        std::span<const int> s, std::span<const int> a) {
    check_sizes(inst, x, s, a);
    double total = 0.0;
    for (int i = 0; i < inst.n_sites(); ++i) {
        const int dest = a[i];
        if (inst.is_active(i)) {
            total += inst.sites[dest].active_reward[x[dest]] - inst.switch_cost[s[i]][dest];
        } else {
            total += inst.sites[dest].passive_reward[x[dest]];
        }
    }
    return total;
}

double joint_transition_prob(const ProblemInstance& inst, std::span<const int> x,
                             std::span<const int> a, std::span<const int> x_next) {
    check_sizes(inst, x, a, x_next);
    double prob = 1.0;
    for (int i = 0; i < inst.n_sites() && prob != 0.0; ++i) {
        const int site = a[i];
        prob *= inst.transition(site, inst.is_active(i))[x[site]][x_next[site]];
    }
    return prob;
}

std::uint64_t mix_seed(std::uint64_t value) {
    value += 0x9e3779b97f4a7c15ULL;
    value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
    value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
    return value ^ (value >> 31);
}

int sample_index(std::span<const double> probs, RngStream& rng) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    int last_positive = 0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] <= 0.0) continue;
        cumulative += probs[k];
        last_positive = static_cast<int>(k);
        if (u < cumulative) return last_positive;
    }
    return last_positive;
}

std::vector<int> sample_transition(const ProblemInstance& inst, std::span<const int> x,
                                   std::span<const int> a, RngStream& rng) {
    check_sizes(inst, x, a, a);
    std::vector<int> next(x.size());
    // sites are drawn in site order so the stream consumption is independent of a
    std::vector<char> active(x.size(), 0);
    for (int i = 0; i < inst.n_servers; ++i) active[a[i]] = 1;
    for (int site = 0; site < inst.n_sites(); ++site) {
        const auto& row = inst.transition(site, active[site] != 0)[x[site]];
        next[site] = sample_index(row, rng);
    }
    return next;
}

std::vector<int> sample_initial_states(const ProblemInstance& inst, RngStream& rng) {
    std::vector<int> x(inst.n_sites());
    for (int site = 0; site < inst.n_sites(); ++site)
        x[site] = sample_index(inst.sites[site].initial_dist, rng);
    return x;
}

ProblemInstance generate_random_instance(const GeneratorParams& params) {
    if (params.n_sites < 1 || params.n_servers < 1 || params.n_servers > params.n_sites)
        throw std::invalid_argument("generator requires 1 <= M <= N");
    if (params.states_per_site < 1) throw std::invalid_argument("states_per_site must be >= 1");
    if (params.cost_scale < 0.0 || params.reward_scale < 0.0)
        throw std::invalid_argument("cost_scale and reward_scale must be nonnegative");
    if (!(params.discount > 0.0 && params.discount < 1.0))
        throw std::invalid_argument("discount must lie in (0,1)");

    RngStream rng(mix_seed(params.seed));
    const int n = params.n_sites;
    const int k = params.states_per_site;

    ProblemInstance inst;
    inst.n_servers = params.n_servers;
    inst.discount = params.discount;
    inst.sites.resize(n);
    for (auto& site : inst.sites) {
        site.state_count = k;
        site.active_transition.resize(k);
        site.passive_transition.resize(k);
        for (int r = 0; r < k; ++r) site.active_transition[r] = random_distribution(k, rng);
        for (int r = 0; r < k; ++r) site.passive_transition[r] = random_distribution(k, rng);
        site.active_reward.resize(k);
        site.passive_reward.resize(k);
        for (auto& v : site.active_reward) v = params.reward_scale * rng.uniform();
        for (auto& v : site.passive_reward) v = params.reward_scale * rng.uniform();
        site.initial_dist = random_distribution(k, rng);
    }
    inst.switch_cost.assign(n, std::vector<double>(n, 0.0));
    for (auto& row : inst.switch_cost)
        for (auto& v : row) v = params.cost_scale * rng.uniform();

    inst.initial_placement.resize(n);
    std::iota(inst.initial_placement.begin(), inst.initial_placement.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(inst.initial_placement[i],
                                              inst.initial_placement[rng.below(i + 1)]);
    return inst;
}

double switch_ratio(const ProblemInstance& inst) {
    double cost_sum = 0.0;
    std::size_t cost_count = 0;
    for (const auto& row : inst.switch_cost) {
        for (double c : row) cost_sum += c;
        cost_count += row.size();
    }
    double reward_sum = 0.0;
    std::size_t reward_count = 0;
    for (const auto& site : inst.sites) {
        for (double r : site.active_reward) reward_sum += r;
        reward_count += site.active_reward.size();
    }
    const double mean_reward = reward_count ? reward_sum / reward_count : 0.0;
    if (mean_reward == 0.0) throw std::domain_error("mean active reward is zero");
    return (cost_count ? cost_sum / cost_count : 0.0) / mean_reward;
}

double max_abs_reward(const ProblemInstance& inst) {
    double bound = 0.0;
    for (const auto& site : inst.sites) {
        double largest = 0.0;
        for (double r : site.active_reward) largest = std::max(largest, std::abs(r));
        for (double r : site.passive_reward) largest = std::max(largest, std::abs(r));
        bound += largest;
    }
    double cost = 0.0;
    for (const auto& row : inst.switch_cost)
        for (double c : row) cost = std::max(cost, std::abs(c));
    return bound + inst.n_servers * cost;
}

int max_state_count(const ProblemInstance& inst) {
    int k = 0;
    for (const auto& site : inst.sites) k = std::max(k, site.state_count);
    return k;
}

nlohmann::json instance_to_json(const ProblemInstance& inst) {
    nlohmann::json doc;
    doc["format"] = kInstanceFormat;
    doc["n_sites"] = inst.n_sites();
    doc["n_servers"] = inst.n_servers;
    doc["discount"] = inst.discount;
    std::vector<int> placement(inst.initial_placement);
    for (auto& p : placement) ++p;
    doc["initial_placement"] = placement;
    std::vector<double> flat;
    for (const auto& row : inst.switch_cost) flat.insert(flat.end(), row.begin(), row.end());
    doc["switch_cost"] = flat;
    doc["sites"] = nlohmann::json::array();
    for (const auto& site : inst.sites) {
        doc["sites"].push_back({
            {"state_count", site.state_count},
            {"active_transition", site.active_transition},
            {"passive_transition", site.passive_transition},
            {"active_reward", site.active_reward},
            {"passive_reward", site.passive_reward},
            {"initial_dist", site.initial_dist},
        });
    }
    return doc;
}

ProblemInstance instance_from_json(const nlohmann::json& doc) {
    if (doc.value("format", std::string{}) != kInstanceFormat)
        throw std::invalid_argument(std::string("instance file must carry format \"") +
                                    kInstanceFormat + "\"");
    ProblemInstance inst;
    const int n = doc.at("n_sites").get<int>();
    inst.n_servers = doc.at("n_servers").get<int>();
    inst.discount = doc.at("discount").get<double>();
    inst.initial_placement = doc.at("initial_placement").get<std::vector<int>>();
    for (auto& p : inst.initial_placement) --p;
    const auto flat = doc.at("switch_cost").get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("switch_cost must hold N*N entries");
    inst.switch_cost.assign(n, std::vector<double>(n));
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) inst.switch_cost[k][l] = flat[k * n + l];
    const auto& sites = doc.at("sites");
    if (static_cast<int>(sites.size()) != n)
        throw std::invalid_argument("sites array must hold n_sites entries");
    for (const auto& js : sites) {
        SiteModel site;
        site.active_transition = matrix_from_json(js.at("active_transition"));
        site.passive_transition = matrix_from_json(js.at("passive_transition"));
        site.state_count = js.contains("state_count")
                               ? js.at("state_count").get<int>()
                               : static_cast<int>(site.active_transition.size());
        site.active_reward = js.at("active_reward").get<std::vector<double>>();
        site.passive_reward = js.at("passive_reward").get<std::vector<double>>();
        site.initial_dist = js.at("initial_dist").get<std::vector<double>>();
        inst.sites.push_back(std::move(site));
    }
    return inst;
}

void save_instance(const ProblemInstance& inst, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << instance_to_json(inst).dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

ProblemInstance load_instance(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    auto inst = instance_from_json(nlohmann::json::parse(in));
    require_valid(inst);
    return inst;
}

std::uint64_t instance_hash(const ProblemInstance& inst) {
    const std::string text = instance_to_json(inst).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace rbpsc
