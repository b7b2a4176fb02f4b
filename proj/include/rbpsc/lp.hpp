#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace rbpsc::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { maximize, minimize };
enum class RowSense { equal, less_equal, greater_equal };
enum class Status { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(Status status);

struct Variable {
    std::string name;
    double lower = 0.0;
    double upper = kInf;
    double objective = 0.0;
};

struct Constraint {
    std::string name;
    RowSense sense = RowSense::equal;
    double rhs = 0.0;
};

struct Entry {
    int row;
    int col;
    double value;
};

/// Sparse linear program assembled entry by entry. Duplicate (row, col)
/// entries are summed when the model is compressed.
class LpModel {
public:
    explicit LpModel(Sense sense = Sense::maximize) : sense_(sense) {}

    int add_variable(std::string name, double lower = 0.0, double upper = kInf,
                     double objective = 0.0);
    int add_constraint(std::string name, RowSense sense, double rhs);
    void add_entry(int row, int col, double value);
    void set_objective(int col, double value) { vars_.at(col).objective = value; }

    Sense sense() const { return sense_; }
    int num_vars() const { return static_cast<int>(vars_.size()); }
    int num_rows() const { return static_cast<int>(rows_.size()); }
    const std::vector<Variable>& variables() const { return vars_; }
    const std::vector<Constraint>& constraints() const { return rows_; }
    const std::vector<Entry>& entries() const { return entries_; }

    /// Throws std::invalid_argument on out-of-range entries, duplicate
    /// identifiers, inverted bounds or non-finite data.
    void validate() const;

    /// Column-compressed copy with duplicates merged and explicit zeros dropped.
    struct Compressed {
        std::vector<int> start;   // size num_vars + 1
        std::vector<int> index;   // row indices
        std::vector<double> value;
    };
    Compressed compress() const;

    /// Row activities A x.
    std::vector<double> row_activity(const std::vector<double>& x) const;

private:
    Sense sense_;
    std::vector<Variable> vars_;
    std::vector<Constraint> rows_;
    std::vector<Entry> entries_;
};

/// Residual certificates computed from the returned vectors, independently of
/// the backend's own bookkeeping.
struct Certificate {
    double primal_residual = 0.0;   // max violation of rows and bounds
    double dual_residual = 0.0;     // max sign violation of duals and reduced costs
    double reduced_cost_residual = 0.0; // max |reduced_cost - (c - A^T y)|
    double complementarity = 0.0;   // max |slack * multiplier| over rows and columns
    double duality_gap = 0.0;       // |primal objective - dual objective|
    double dual_objective = 0.0;
};

/// Sign conventions, for either sense:
///   dual[r]         = rate of change of the optimal objective per unit of rhs[r];
///   reduced_cost[j] = c_j - sum_r A_rj dual[r].
/// At a maximizing optimum, variables resting at a finite lower bound have
/// reduced_cost <= 0; at a minimizing one, >= 0.
struct LpSolution {
    Status status = Status::numerical_failure;
    double objective = 0.0;
    std::vector<double> primal;
    std::vector<double> dual;
    std::vector<double> reduced_cost;
    Certificate certificate;
    std::string message;

    bool optimal() const { return status == Status::optimal; }
};

struct SolveOptions {
    double primal_tolerance = 1e-10;
    double dual_tolerance = 1e-10;
    double time_limit_s = kInf;
    bool verbose = false;
};

/// Tolerances of the certificate checks behind Status::optimal.
inline constexpr double kFeasibilityTol = 1e-7;
inline constexpr double kGapRelTol = 1e-6;

LpSolution solve_lp(const LpModel& model, const SolveOptions& options = {});

/// Recomputes the certificate for any primal/dual pair.
Certificate certify(const LpModel& model, const std::vector<double>& primal,
                    const std::vector<double>& dual, const std::vector<double>& reduced_cost);

/// Writes the model in free MPS format.
void write_mps(const LpModel& model, const std::filesystem::path& path);

} // namespace rbpsc::lp
