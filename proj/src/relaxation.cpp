#include "rbpsc/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rbpsc {

namespace {

std::vector<int> counts_of(const ProblemInstance& inst) {
    std::vector<int> counts;
    for (const auto& site : inst.sites) counts.push_back(site.state_count);
    return counts;
}

std::vector<int> prefix_offsets(const std::vector<int>& counts) {
    std::vector<int> offsets(counts.size() + 1, 0);
    std::partial_sum(counts.begin(), counts.end(), offsets.begin() + 1);
    return offsets;
}

std::string row_name(const char* family, std::initializer_list<int> ids) {
    std::string out(family);
    out += '[';
    bool first = true;
    for (int id : ids) {
        if (!first) out += '|';
        out += std::to_string(id + 1);
        first = false;
    }
    out += ']';
    return out;
}

/// Objective coefficient of a marginal: rewards are attached to the
/// destination-anchored variables (and to the stay variables).
double objective_of(const ProblemInstance& inst, const MarginalKey& key) {
    if (key.anchor == Anchor::origin && !key.stays()) return 0.0;
    const bool active = inst.is_active(key.agent);
    return inst.reward(key.to_site, active, key.site_state) -
           (active ? inst.switch_cost[key.from_site][key.to_site] : 0.0);
}

/// alpha * sum_y p(x, y) lambda^i_{site, y}
double expected_lambda(const ProblemInstance& inst, const RelaxationSolution& sol, int agent,
                       int site, int state) {
    const auto& row = inst.transition(site, inst.is_active(agent))[state];
    double total = 0.0;
    for (int y = 0; y < static_cast<int>(row.size()); ++y)
        total += row[y] * sol.lambda(agent, site, y);
    return inst.discount * total;
}

/// The relaxation with the rows of all passive agents summed into those of
/// the first passive agent. Its duals are the optimal duals of the full
/// model that give every passive agent the same multipliers, when such a
/// dual exists. `merged[r]` is the aggregated row of original row r.
lp::LpModel merge_passive_rows(const ProblemInstance& inst, const RelaxationModel& model,
                               std::vector<int>& merged) {
    const int n = inst.n_sites();
    const int first = inst.n_servers;
    const auto& layout = model.layout;
    std::vector<int> target(model.lp.num_rows());
    std::iota(target.begin(), target.end(), 0);
    for (int i = first + 1; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            for (int x = 0; x < inst.sites[j].state_count; ++x)
                target[layout.st0(i, j, x)] = layout.st0(first, j, x);
            for (int a = 0; a < n; ++a) target[layout.compat(i, j, a)] = layout.compat(first, j, a);
            target[layout.st2(i, j)] = layout.st2(first, j);
            target[layout.st3(i, j)] = layout.st3(first, j);
        }

    lp::LpModel out(model.lp.sense());
    for (const auto& v : model.lp.variables()) out.add_variable(v.name, v.lower, v.upper, v.objective);
    std::vector<double> rhs(model.lp.num_rows(), 0.0);
    for (int r = 0; r < model.lp.num_rows(); ++r) rhs[target[r]] += model.lp.constraints()[r].rhs;
    std::vector<int> new_index(model.lp.num_rows(), -1);
    for (int r = 0; r < model.lp.num_rows(); ++r) {
        if (target[r] != r) continue;
        const auto& row = model.lp.constraints()[r];
        new_index[r] = out.add_constraint(row.name, row.sense, rhs[r]);
    }
    merged.resize(model.lp.num_rows());
    for (int r = 0; r < model.lp.num_rows(); ++r) merged[r] = new_index[target[r]];
    for (const auto& e : model.lp.entries()) out.add_entry(merged[e.row], e.col, e.value);
    return out;
}

} // namespace

const char* to_string(Family family) {
    switch (family) {
    case Family::st0: return "st0";
    case Family::compat: return "compat";
    case Family::st1: return "st1";
    case Family::st2: return "st2";
    case Family::st3: return "st3";
    }
    return "?";
}

RelaxationLayout::RelaxationLayout(std::vector<int> state_counts)
    : n_(static_cast<int>(state_counts.size())) {
    site_offset_ = prefix_offsets(state_counts);
    total_states_ = site_offset_.back();
    site_offset_.pop_back();
    const int sizes[kNumFamilies] = {n_ * total_states_, n_ * n_ * n_, total_states_, n_ * n_,
                                     n_ * n_};
    int row = 0;
    for (int f = 0; f < kNumFamilies; ++f) {
        begin_[f] = row;
        row += sizes[f];
    }
    end_ = row;
}

int RelaxationLayout::family_end(Family f) const {
    const int k = static_cast<int>(f);
    return k + 1 < kNumFamilies ? begin_[k + 1] : end_;
}

Family RelaxationLayout::family_of(int row) const {
    for (int f = kNumFamilies - 1; f >= 0; --f)
        if (row >= begin_[f]) return static_cast<Family>(f);
    return Family::st0;
}

RelaxationModel build_relaxation(const ProblemInstance& inst) {
    require_valid(inst);
    const int n = inst.n_sites();
    const double alpha = inst.discount;
    RelaxationModel model{lp::LpModel(lp::Sense::maximize), MarginalIndex(inst),
                          RelaxationLayout(counts_of(inst))};
    auto& lpm = model.lp;
    const auto& layout = model.layout;

    for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s)
            for (int x = 0; x < inst.sites[s].state_count; ++x) {
                const double rhs = inst.initial_placement[i] == s
                                       ? (1.0 - alpha) * inst.sites[s].initial_dist[x]
                                       : 0.0;
                lpm.add_constraint(row_name("st0", {i, s, x}), lp::RowSense::equal, rhs);
            }
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s)
            for (int a = 0; a < n; ++a)
                lpm.add_constraint(row_name("compat", {i, s, a}), lp::RowSense::equal, 0.0);
    for (int j = 0; j < n; ++j)
        for (int x = 0; x < inst.sites[j].state_count; ++x)
            lpm.add_constraint(row_name("st1", {j, x}), lp::RowSense::equal, 0.0);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < n; ++a)
            lpm.add_constraint(row_name("st2", {i, a}), lp::RowSense::equal, 0.0);
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s)
            lpm.add_constraint(row_name("st3", {i, s}), lp::RowSense::equal, 0.0);

    for (const auto& key : model.index.keys()) {
        const int col = lpm.add_variable(to_string(key), 0.0, lp::kInf, objective_of(inst, key));
        const int i = key.agent;
        const int s = key.from_site;
        const int a = key.to_site;
        const int x = key.site_state;
        const bool active = inst.is_active(i);
        const bool originates = key.anchor == Anchor::origin;
        const bool arrives = key.anchor == Anchor::destination || key.stays();

        if (originates) {
            lpm.add_entry(layout.st0(i, s, x), col, 1.0);
            if (!key.stays()) {
                lpm.add_entry(layout.compat(i, s, a), col, 1.0);
                lpm.add_entry(layout.st1(s, x), col, 1.0);
            }
            // agent i does not go to any other site; nobody else goes to a
            for (int other = 0; other < n; ++other) {
                if (other != a) lpm.add_entry(layout.st2(i, other), col, 1.0);
                if (other != i) lpm.add_entry(layout.st2(other, a), col, -1.0);
            }
        }
        if (arrives) {
            const auto& row = inst.transition(a, active)[x];
            for (int y = 0; y < static_cast<int>(row.size()); ++y)
                if (row[y] != 0.0) lpm.add_entry(layout.st0(i, a, y), col, -alpha * row[y]);
            if (!key.stays()) {
                lpm.add_entry(layout.compat(i, s, a), col, -1.0);
                lpm.add_entry(layout.st1(a, x), col, -1.0);
            }
            // agent i does not leave any other site; nobody else leaves s
            for (int other = 0; other < n; ++other) {
                if (other != s) lpm.add_entry(layout.st3(i, other), col, 1.0);
                if (other != i) lpm.add_entry(layout.st3(other, s), col, -1.0);
            }
        }
    }
    return model;
}

void require_matching(const ProblemInstance& inst, const RelaxationSolution& sol) {
    if (instance_hash(inst) != sol.instance_hash)
        throw InstanceMismatch("relaxation solution was computed for a different instance");
}

RelaxationSolution solve_relaxation(const ProblemInstance& inst, const lp::SolveOptions& options) {
    const auto model = build_relaxation(inst);
    const auto lps = lp::solve_lp(model.lp, options);
    if (!lps.optimal())
        throw std::runtime_error(std::string("relaxation LP failed: ") + lp::to_string(lps.status) +
                                 " (" + lps.message + ")");
    const int n = inst.n_sites();
    const auto& layout = model.layout;

    RelaxationSolution sol;
    sol.instance_hash = instance_hash(inst);
    sol.state_counts = counts_of(inst);
    sol.site_offsets = prefix_offsets(sol.state_counts);
    sol.n_servers = inst.n_servers;
    sol.discount = inst.discount;
    sol.lp_objective = lps.objective;
    sol.objective = lps.objective / (1.0 - inst.discount);
    sol.rho_bar = lps.primal;

    // Passive agents are interchangeable, but the solver's dual need not
    // treat them alike. Prefer the optimal dual that does.
    std::vector<double> y = lps.dual;
    std::vector<double> reduced_cost = lps.reduced_cost;
    if (n - inst.n_servers >= 2) {
        std::vector<int> merged;
        const auto sym = lp::solve_lp(merge_passive_rows(inst, model, merged), options);
        if (sym.optimal() &&
            std::abs(sym.objective - lps.objective) <= 1e-9 * (1.0 + std::abs(lps.objective))) {
            for (int r = 0; r < model.lp.num_rows(); ++r) y[r] = sym.dual[merged[r]];
            reduced_cost = sym.reduced_cost;
        }
    }
    sol.gamma_bar.resize(reduced_cost.size());
    std::transform(reduced_cost.begin(), reduced_cost.end(), sol.gamma_bar.begin(),
                   [](double d) { return -d; });

    const int total = layout.total_states();
    sol.lambda_bar.resize(static_cast<std::size_t>(n) * total);
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < n; ++s)
            for (int x = 0; x < inst.sites[s].state_count; ++x)
                sol.lambda_bar[i * total + layout.site_offset(s) + x] = y[layout.st0(i, s, x)];
    sol.mu_bar.assign(y.begin() + layout.family_begin(Family::compat),
                      y.begin() + layout.family_end(Family::compat));
    sol.kappa_bar.assign(y.begin() + layout.family_begin(Family::st1),
                         y.begin() + layout.family_end(Family::st1));
    sol.zeta_bar.assign(y.begin() + layout.family_begin(Family::st2),
                        y.begin() + layout.family_end(Family::st2));
    sol.xi_bar.assign(y.begin() + layout.family_begin(Family::st3),
                      y.begin() + layout.family_end(Family::st3));
    return sol;
}

double reduced_cost_recompute(const ProblemInstance& inst, const RelaxationSolution& sol,
                              const MarginalKey& key) {
    require_matching(inst, sol);
    const int n = inst.n_sites();
    // validates the key against the instance
    static_cast<void>(sol.index().index(key));
    const int i = key.agent;
    const int s = key.from_site;
    const int a = key.to_site;
    const int x = key.site_state;

    double zeta_others = 0.0; // sum over i' != i of zeta^{i'}_a
    double xi_others = 0.0;   // sum over i' != i of xi^{i'}_s
    double zeta_own = 0.0;    // sum over a' != a of zeta^i_{a'}
    double xi_own = 0.0;      // sum over s' != s of xi^i_{s'}
    for (int k = 0; k < n; ++k) {
        if (k != i) {
            zeta_others += sol.zeta(k, a);
            xi_others += sol.xi(k, s);
        }
        if (k != a) zeta_own += sol.zeta(i, k);
        if (k != s) xi_own += sol.xi(i, k);
    }

    if (key.stays()) {
        return sol.lambda(i, s, x) - expected_lambda(inst, sol, i, s, x) - zeta_others -
               xi_others + zeta_own + xi_own - objective_of(inst, key);
    }
    if (key.anchor == Anchor::origin) {
        return sol.lambda(i, s, x) + sol.mu(i, s, a) + sol.kappa(s, x) - zeta_others + zeta_own;
    }
    return -expected_lambda(inst, sol, i, a, x) - sol.mu(i, s, a) - sol.kappa(a, x) - xi_others +
           xi_own - objective_of(inst, key);
}

double FeasibilityReport::max_residual() const {
    return std::max(*std::max_element(std::begin(family_residual), std::end(family_residual)),
                    nonnegativity);
}

FeasibilityReport verify_marginal_feasibility(const ProblemInstance& inst,
                                              const MarginalVector& marginals) {
    const auto model = build_relaxation(inst);
    if (static_cast<int>(marginals.size()) != model.index.size())
        throw std::invalid_argument("marginal vector does not match the instance key space");
    FeasibilityReport report;
    const auto activity = model.lp.row_activity(marginals);
    const auto& rows = model.lp.constraints();
    for (int r = 0; r < model.lp.num_rows(); ++r) {
        auto& slot = report.family_residual[static_cast<int>(model.layout.family_of(r))];
        slot = std::max(slot, std::abs(activity[r] - rows[r].rhs));
    }
    for (double v : marginals) report.nonnegativity = std::max(report.nonnegativity, -v);
    return report;
}

nlohmann::json relaxation_to_json(const RelaxationSolution& sol) {
    std::ostringstream hash;
    hash << std::hex << sol.instance_hash;
    return {
        {"format", "rbpsc-relaxation-v1"},
        {"instance_hash", hash.str()},
        {"state_counts", sol.state_counts},
        {"n_servers", sol.n_servers},
        {"discount", sol.discount},
        {"objective", sol.objective},
        {"lp_objective", sol.lp_objective},
        {"rho_bar", sol.rho_bar},
        {"gamma_bar", sol.gamma_bar},
        {"lambda_bar", sol.lambda_bar},
        {"mu_bar", sol.mu_bar},
        {"kappa_bar", sol.kappa_bar},
        {"zeta_bar", sol.zeta_bar},
        {"xi_bar", sol.xi_bar},
    };
}

RelaxationSolution relaxation_from_json(const nlohmann::json& doc) {
    if (doc.value("format", std::string{}) != "rbpsc-relaxation-v1")
        throw std::invalid_argument("not a relaxation solution file");
    RelaxationSolution sol;
    sol.instance_hash = std::stoull(doc.at("instance_hash").get<std::string>(), nullptr, 16);
    sol.state_counts = doc.at("state_counts").get<std::vector<int>>();
    sol.site_offsets = prefix_offsets(sol.state_counts);
    sol.n_servers = doc.at("n_servers").get<int>();
    sol.discount = doc.at("discount").get<double>();
    sol.objective = doc.at("objective").get<double>();
    sol.lp_objective = doc.at("lp_objective").get<double>();
    sol.rho_bar = doc.at("rho_bar").get<std::vector<double>>();
    sol.gamma_bar = doc.at("gamma_bar").get<std::vector<double>>();
    sol.lambda_bar = doc.at("lambda_bar").get<std::vector<double>>();
    sol.mu_bar = doc.at("mu_bar").get<std::vector<double>>();
    sol.kappa_bar = doc.at("kappa_bar").get<std::vector<double>>();
    sol.zeta_bar = doc.at("zeta_bar").get<std::vector<double>>();
    sol.xi_bar = doc.at("xi_bar").get<std::vector<double>>();

    const std::size_t n = sol.state_counts.size();
    const auto keys = static_cast<std::size_t>(sol.index().size());
    const auto total = static_cast<std::size_t>(sol.total_states());
    if (sol.rho_bar.size() != keys || sol.gamma_bar.size() != keys ||
        sol.lambda_bar.size() != n * total || sol.mu_bar.size() != n * n * n ||
        sol.kappa_bar.size() != total || sol.zeta_bar.size() != n * n || sol.xi_bar.size() != n * n)
        throw std::invalid_argument("relaxation solution file has inconsistent array sizes");
    return sol;
}

void save_relaxation(const RelaxationSolution& sol, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << relaxation_to_json(sol).dump() << "\n";
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

RelaxationSolution load_relaxation(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return relaxation_from_json(nlohmann::json::parse(in));
}

} // namespace rbpsc
