#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rbpsc/exact_mdp.hpp"
#include "rbpsc/instance.hpp"
#include "rbpsc/policies.hpp"
#include "rbpsc/simulate.hpp"

namespace rbpsc {

/// A named way to obtain an instance. The discount is overridden per row.
struct InstanceSource {
    std::string problem;
    std::function<ProblemInstance()> build;
    /// Discounts used when the experiment does not list its own.
    std::vector<double> default_alphas;
};

InstanceSource instance_from_file(const std::filesystem::path& path);
InstanceSource instance_from_generator(std::string problem, const GeneratorParams& params);

/// The eight benchmark families, shaped (N, M, |S|, c/r) like the published
/// experiment table:
///   p1 (4,1,3,0)      bandit: passive sites frozen, no passive reward
///   p2 (4,1,3,0)      bandit with active rewards that only deteriorate
///   p3 (4,1,3,0.6)    p2 with switching costs
///   p4 (4,2,5,1.39)   two remote lure sites, see lure_instance
///   p5 (6,2,4,0)      restless, free switching
///   p6 (6,2,4,1.51)
///   p7 (20,15,3,1.16)
///   p8 (30,15,2,2.18)
std::vector<InstanceSource> table_suites();
/// One suite by name ("p1".."p8", or "lure" for p4, "mabp" for p1).
InstanceSource table_suite(const std::string& name);

/// Two home sites with a steady reward and two remote sites whose first
/// active reward beats home after the trip there, but which decay on every
/// visit and are expensive to leave.
ProblemInstance lure_instance(double discount);

/// Scales the switching costs so that switch_ratio(inst) == target.
void rescale_costs(ProblemInstance& inst, double target_ratio);

struct ExperimentConfig {
    std::vector<InstanceSource> instances;
    /// Overrides every source's default discounts when nonempty.
    std::vector<double> alphas;
    std::vector<PolicyKind> policies{PolicyKind::greedy, PolicyKind::one_step_lookahead};
    SimConfig sim;
    bool exact = true;
    ExactGuard guard;
    /// Rows solved concurrently.
    int workers = 1;
    /// Wall-time columns; off gives byte-identical files across runs.
    bool record_timings = true;
};

struct ResultRow {
    std::string problem;
    int n = 0;
    int m = 0;
    int states = 0;
    double c_over_r = 0.0;
    double alpha = 0.0;
    std::optional<double> z_star;
    std::optional<double> z_r;
    std::optional<double> z_g;
    std::optional<double> z_g_se;
    std::optional<double> z_osl;
    std::optional<double> z_osl_se;
    std::optional<double> bound_slack;
    std::optional<double> t_relax_s;
    std::optional<double> t_sim_s;
    /// Failure description; not part of the results file.
    std::string error;

    bool failed() const { return !error.empty(); }
};

/// Rows in config order: instances outer, discounts inner.
std::vector<ResultRow> run_benchmark(const ExperimentConfig& cfg);

/// Solves and evaluates one (instance, discount) pair.
ResultRow run_row(const InstanceSource& source, double alpha, const ExperimentConfig& cfg,
                  std::uint64_t row_seed);

inline constexpr const char* kResultsHeader =
    "problem,N,M,states,c_over_r,alpha,Z_star,Z_r,Z_g,Z_g_se,Z_osl,Z_osl_se,bound_slack,"
    "t_relax_s,t_sim_s";

std::string format_row(const ResultRow& row);
void write_results(const std::vector<ResultRow>& rows, std::ostream& out);
void write_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
std::vector<ResultRow> read_results(std::istream& in);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

} // namespace rbpsc
