#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "rbpsc/instance.hpp"
#include "rbpsc/lp.hpp"
#include "rbpsc/marginals.hpp"

namespace rbpsc {

enum class Family { st0, compat, st1, st2, st3 };
inline constexpr int kNumFamilies = 5;
const char* to_string(Family family);

/// Row numbering of the relaxation LP. Families are laid out contiguously
/// in the order st0, compat, st1, st2, st3.
///   st0(i,s,x)   per-agent flow balance, rhs (1-alpha) nu_s(x) [d_i = s]
///   compat(i,s,a) origin and destination marginals carry the same mass
///   st1(j,x)     flow out of site j in state x equals flow into it
///   st2(i,a)     agent i avoids a exactly when another agent goes to a
///   st3(i,s)     agent i avoids leaving s exactly when another agent leaves s
class RelaxationLayout {
public:
    explicit RelaxationLayout(std::vector<int> state_counts);

    int n_sites() const { return n_; }
    int num_rows() const { return end_; }
    int family_begin(Family f) const { return begin_[static_cast<int>(f)]; }
    int family_end(Family f) const;
    Family family_of(int row) const;

    int st0(int agent, int site, int state) const {
        return begin_[0] + agent * total_states_ + site_offset_[site] + state;
    }
    int compat(int agent, int from, int to) const { return begin_[1] + (agent * n_ + from) * n_ + to; }
    int st1(int site, int state) const { return begin_[2] + site_offset_[site] + state; }
    int st2(int agent, int site) const { return begin_[3] + agent * n_ + site; }
    int st3(int agent, int site) const { return begin_[4] + agent * n_ + site; }

    int site_offset(int site) const { return site_offset_[site]; }
    int total_states() const { return total_states_; }

private:
    int n_;
    std::vector<int> site_offset_;
    int total_states_ = 0;
    int begin_[kNumFamilies] = {};
    int end_ = 0;
};

struct RelaxationModel {
    lp::LpModel lp;
    MarginalIndex index;
    RelaxationLayout layout;
};

RelaxationModel build_relaxation(const ProblemInstance& inst);

/// Optimal marginals, duals and reduced costs of the relaxation.
///
/// Duals are the multipliers y of the dual program min b'y s.t. A'y >= c,
/// i.e. shadow prices of the equality rows; gamma_bar = A'y - c >= 0 is the
/// rate at which the optimum decreases per unit of the corresponding marginal.
struct RelaxationSolution {
    std::uint64_t instance_hash = 0;
    std::vector<int> state_counts;
    std::vector<int> site_offsets; // prefix sums of state_counts, size N + 1
    int n_servers = 0;
    double discount = 0.0;

    /// Optimal value on the discounted-reward scale (LP optimum / (1 - alpha)).
    double objective = 0.0;
    double lp_objective = 0.0;

    MarginalVector rho_bar;
    MarginalVector gamma_bar;

    std::vector<double> lambda_bar; // [agent][site_offset + state]
    std::vector<double> mu_bar;     // [agent][from][to]
    std::vector<double> kappa_bar;  // [site_offset + state]
    std::vector<double> zeta_bar;   // [agent][site]
    std::vector<double> xi_bar;     // [agent][site]

    int n_sites() const { return static_cast<int>(state_counts.size()); }
    int site_offset(int site) const { return site_offsets[site]; }
    int total_states() const { return site_offsets.back(); }

    double lambda(int agent, int site, int state) const {
        return lambda_bar[agent * total_states() + site_offset(site) + state];
    }
    double mu(int agent, int from, int to) const {
        return mu_bar[(agent * n_sites() + from) * n_sites() + to];
    }
    double kappa(int site, int state) const { return kappa_bar[site_offset(site) + state]; }
    double zeta(int agent, int site) const { return zeta_bar[agent * n_sites() + site]; }
    double xi(int agent, int site) const { return xi_bar[agent * n_sites() + site]; }

    MarginalIndex index() const { return MarginalIndex(state_counts); }
    double gamma(const MarginalIndex& index, const MarginalKey& key) const {
        return gamma_bar[index.index(key)];
    }
};

/// Thrown when a stored solution is used with a different instance.
class InstanceMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

void require_matching(const ProblemInstance& inst, const RelaxationSolution& sol);

RelaxationSolution solve_relaxation(const ProblemInstance& inst,
                                    const lp::SolveOptions& options = {});

/// Reduced cost of one marginal rebuilt from the stored duals.
double reduced_cost_recompute(const ProblemInstance& inst, const RelaxationSolution& sol,
                              const MarginalKey& key);

struct FeasibilityReport {
    double family_residual[kNumFamilies] = {};
    /// Largest negative part over all marginals.
    double nonnegativity = 0.0;

    double residual(Family f) const { return family_residual[static_cast<int>(f)]; }
    double max_residual() const;
};

FeasibilityReport verify_marginal_feasibility(const ProblemInstance& inst,
                                              const MarginalVector& marginals);

nlohmann::json relaxation_to_json(const RelaxationSolution& sol);
RelaxationSolution relaxation_from_json(const nlohmann::json& doc);
void save_relaxation(const RelaxationSolution& sol, const std::filesystem::path& path);
RelaxationSolution load_relaxation(const std::filesystem::path& path);

} // namespace rbpsc
