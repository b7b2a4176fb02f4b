#include "rbpsc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "Highs.h"

namespace rbpsc::lp {

const char* to_string(Status status) {
    switch (status) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

int LpModel::add_variable(std::string name, double lower, double upper, double objective) {
    vars_.push_back({std::move(name), lower, upper, objective});
    return num_vars() - 1;
}

int LpModel::add_constraint(std::string name, RowSense sense, double rhs) {
    rows_.push_back({std::move(name), sense, rhs});
    return num_rows() - 1;
}

void LpModel::add_entry(int row, int col, double value) {
    entries_.push_back({row, col, value});
}

void LpModel::validate() const {
    std::unordered_set<std::string> names;
    for (const auto& v : vars_) {
        if (!names.insert(v.name).second)
            throw std::invalid_argument("duplicate variable identifier " + v.name);
        if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower > v.upper)
            throw std::invalid_argument("invalid bounds on " + v.name);
        if (!std::isfinite(v.objective))
            throw std::invalid_argument("non-finite objective coefficient on " + v.name);
    }
    names.clear();
    for (const auto& r : rows_) {
        if (!names.insert(r.name).second)
            throw std::invalid_argument("duplicate constraint identifier " + r.name);
        if (!std::isfinite(r.rhs))
            throw std::invalid_argument("non-finite right-hand side on " + r.name);
    }
    for (const auto& e : entries_) {
        if (e.row < 0 || e.row >= num_rows() || e.col < 0 || e.col >= num_vars())
            throw std::invalid_argument("coefficient references an undeclared row or variable");
        if (!std::isfinite(e.value)) throw std::invalid_argument("non-finite coefficient");
    }
}

LpModel::Compressed LpModel::compress() const {
    std::vector<Entry> sorted(entries_);
    std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });
    Compressed out;
    out.start.assign(num_vars() + 1, 0);
    for (std::size_t k = 0; k < sorted.size();) {
        const int row = sorted[k].row;
        const int col = sorted[k].col;
        double sum = 0.0;
        while (k < sorted.size() && sorted[k].row == row && sorted[k].col == col)
            sum += sorted[k++].value;
        if (sum == 0.0) continue;
        out.index.push_back(row);
        out.value.push_back(sum);
        ++out.start[col + 1];
    }
    for (int j = 0; j < num_vars(); ++j) out.start[j + 1] += out.start[j];
    return out;
}

std::vector<double> LpModel::row_activity(const std::vector<double>& x) const {
    std::vector<double> activity(num_rows(), 0.0);
    for (const auto& e : entries_) activity[e.row] += e.value * x[e.col];
    return activity;
}

Certificate certify(const LpModel& model, const std::vector<double>& primal,
                    const std::vector<double>& dual, const std::vector<double>& reduced_cost) {
    Certificate cert;
    const bool maximize = model.sense() == Sense::maximize;
    const auto& vars = model.variables();
    const auto& rows = model.constraints();
    const auto activity = model.row_activity(primal);

    std::vector<double> recomputed(vars.size());
    for (std::size_t j = 0; j < vars.size(); ++j) recomputed[j] = vars[j].objective;
    for (const auto& e : model.entries()) recomputed[e.col] -= e.value * dual[e.row];

    double primal_obj = 0.0;
    double dual_obj = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double slack = rows[r].rhs - activity[r];
        const double y = dual[r];
        dual_obj += rows[r].rhs * y;
        switch (rows[r].sense) {
        case RowSense::equal:
            cert.primal_residual = std::max(cert.primal_residual, std::abs(slack));
            break;
        case RowSense::less_equal:
            cert.primal_residual = std::max(cert.primal_residual, -slack);
            cert.dual_residual = std::max(cert.dual_residual, maximize ? -y : y);
            cert.complementarity = std::max(cert.complementarity, std::abs(slack * y));
            break;
        case RowSense::greater_equal:
            cert.primal_residual = std::max(cert.primal_residual, slack);
            cert.dual_residual = std::max(cert.dual_residual, maximize ? y : -y);
            cert.complementarity = std::max(cert.complementarity, std::abs(slack * y));
            break;
        }
    }
    for (std::size_t j = 0; j < vars.size(); ++j) {
        const auto& v = vars[j];
        const double x = primal[j];
        const double d = reduced_cost[j];
        primal_obj += v.objective * x;
        cert.primal_residual = std::max({cert.primal_residual, v.lower - x, x - v.upper});
        cert.reduced_cost_residual =
            std::max(cert.reduced_cost_residual, std::abs(d - recomputed[j]));
        // "push" > 0 means the objective improves by increasing x_j
        const double push = maximize ? d : -d;
        if (push > 0.0) {
            if (std::isinf(v.upper)) cert.dual_residual = std::max(cert.dual_residual, push);
            else {
                dual_obj += d * v.upper;
                cert.complementarity = std::max(cert.complementarity, std::abs(d * (v.upper - x)));
            }
        } else if (push < 0.0) {
            if (std::isinf(v.lower)) cert.dual_residual = std::max(cert.dual_residual, -push);
            else {
                dual_obj += d * v.lower;
                cert.complementarity = std::max(cert.complementarity, std::abs(d * (x - v.lower)));
            }
        }
    }
    cert.dual_objective = dual_obj;
    cert.duality_gap = std::abs(primal_obj - dual_obj);
    return cert;
}

LpSolution solve_lp(const LpModel& model, const SolveOptions& options) {
    model.validate();
    const auto& vars = model.variables();
    const auto& rows = model.constraints();
    const bool maximize = model.sense() == Sense::maximize;

    HighsLp hlp;
    hlp.num_col_ = model.num_vars();
    hlp.num_row_ = model.num_rows();
    hlp.sense_ = maximize ? ObjSense::kMaximize : ObjSense::kMinimize;
    for (const auto& v : vars) {
        hlp.col_cost_.push_back(v.objective);
        hlp.col_lower_.push_back(std::isinf(v.lower) ? -kHighsInf : v.lower);
        hlp.col_upper_.push_back(std::isinf(v.upper) ? kHighsInf : v.upper);
    }
    for (const auto& r : rows) {
        hlp.row_lower_.push_back(r.sense == RowSense::less_equal ? -kHighsInf : r.rhs);
        hlp.row_upper_.push_back(r.sense == RowSense::greater_equal ? kHighsInf : r.rhs);
    }
    auto csc = model.compress();
    hlp.a_matrix_.format_ = MatrixFormat::kColwise;
    hlp.a_matrix_.num_col_ = hlp.num_col_;
    hlp.a_matrix_.num_row_ = hlp.num_row_;
    hlp.a_matrix_.start_ = std::move(csc.start);
    hlp.a_matrix_.index_ = std::move(csc.index);
    hlp.a_matrix_.value_ = std::move(csc.value);

    Highs highs;
    highs.setOptionValue("output_flag", options.verbose);
    highs.setOptionValue("threads", 1);
    highs.setOptionValue("random_seed", 0);
    highs.setOptionValue("solver", "simplex");
    highs.setOptionValue("primal_feasibility_tolerance", options.primal_tolerance);
    highs.setOptionValue("dual_feasibility_tolerance", options.dual_tolerance);
    if (std::isfinite(options.time_limit_s))
        highs.setOptionValue("time_limit", options.time_limit_s);

    LpSolution sol;
    if (highs.passModel(std::move(hlp)) == HighsStatus::kError) {
        sol.message = "backend rejected the model";
        return sol;
    }
    const HighsStatus run_status = highs.run();
    const HighsModelStatus status = highs.getModelStatus();

    if (status == HighsModelStatus::kInfeasible) {
        sol.status = Status::infeasible;
        sol.message = "primal infeasible";
        return sol;
    }
    if (status == HighsModelStatus::kUnbounded ||
        status == HighsModelStatus::kUnboundedOrInfeasible) {
        // disambiguate with a feasibility-only solve
        if (status == HighsModelStatus::kUnboundedOrInfeasible) {
            Highs probe;
            probe.setOptionValue("output_flag", false);
            HighsLp copy = highs.getLp();
            copy.col_cost_.assign(copy.num_col_, 0.0);
            probe.passModel(std::move(copy));
            probe.run();
            if (probe.getModelStatus() == HighsModelStatus::kInfeasible) {
                sol.status = Status::infeasible;
                sol.message = "primal infeasible";
                return sol;
            }
        }
        sol.status = Status::unbounded;
        sol.message = "objective unbounded";
        return sol;
    }

    const HighsSolution& hs = highs.getSolution();
    if (hs.value_valid) {
        sol.primal = hs.col_value;
        sol.objective = highs.getInfo().objective_function_value;
    }
    if (hs.dual_valid) {
        sol.dual = hs.row_dual;
        sol.reduced_cost = hs.col_dual;
    }
    if (status != HighsModelStatus::kOptimal || run_status == HighsStatus::kError ||
        !hs.value_valid || !hs.dual_valid) {
        sol.status = Status::numerical_failure;
        sol.message = "backend stopped with status " + highs.modelStatusToString(status);
        if (hs.value_valid && hs.dual_valid)
            sol.certificate = certify(model, sol.primal, sol.dual, sol.reduced_cost);
        return sol;
    }

    sol.certificate = certify(model, sol.primal, sol.dual, sol.reduced_cost);
    const auto& c = sol.certificate;
    const bool certified = c.primal_residual <= kFeasibilityTol &&
                           c.dual_residual <= kFeasibilityTol &&
                           c.reduced_cost_residual <= kFeasibilityTol &&
                           c.complementarity <= kFeasibilityTol &&
                           c.duality_gap <= kGapRelTol * (1.0 + std::abs(sol.objective));
    sol.status = certified ? Status::optimal : Status::numerical_failure;
    if (!certified) sol.message = "solution failed its optimality certificate";
    return sol;
}

void write_mps(const LpModel& model, const std::filesystem::path& path) {
    model.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "NAME rbpsc\n";
    out << "OBJSENSE\n    " << (model.sense() == Sense::maximize ? "MAX" : "MIN") << "\n";
    out << "ROWS\n N obj\n";
    for (const auto& r : model.constraints()) {
        const char tag = r.sense == RowSense::equal ? 'E'
                         : r.sense == RowSense::less_equal ? 'L' : 'G';
        out << " " << tag << " " << r.name << "\n";
    }
    out << "COLUMNS\n";
    const auto csc = model.compress();
    const auto& vars = model.variables();
    const auto& rows = model.constraints();
    for (int j = 0; j < model.num_vars(); ++j) {
        if (vars[j].objective != 0.0)
            out << "    " << vars[j].name << " obj " << vars[j].objective << "\n";
        for (int k = csc.start[j]; k < csc.start[j + 1]; ++k)
            out << "    " << vars[j].name << " " << rows[csc.index[k]].name << " "
                << csc.value[k] << "\n";
        if (vars[j].objective == 0.0 && csc.start[j] == csc.start[j + 1])
            out << "    " << vars[j].name << " obj 0\n";
    }
    out << "RHS\n";
    for (const auto& r : rows)
        if (r.rhs != 0.0) out << "    rhs " << r.name << " " << r.rhs << "\n";
    out << "BOUNDS\n";
    for (const auto& v : vars) {
        const bool lo_inf = std::isinf(v.lower);
        const bool up_inf = std::isinf(v.upper);
        if (lo_inf && up_inf) {
            out << " FR bnd " << v.name << "\n";
            continue;
        }
        if (!lo_inf && !up_inf && v.lower == v.upper) {
            out << " FX bnd " << v.name << " " << v.lower << "\n";
            continue;
        }
        if (lo_inf) out << " MI bnd " << v.name << "\n";
        else if (v.lower != 0.0) out << " LO bnd " << v.name << " " << v.lower << "\n";
        if (!up_inf) out << " UP bnd " << v.name << " " << v.upper << "\n";
    }
    out << "ENDATA\n";
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

} // namespace rbpsc::lp
