#include "rbpsc/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rbpsc {

namespace {

constexpr double kTieRelTol = 1e-9;

void require_square(const ScoreMatrix& scores) {
    const int n = scores.size();
    for (const auto& row : scores.entries) {
        if (static_cast<int>(row.size()) != n)
            throw std::invalid_argument("score matrix is not square");
        for (double v : row)
            if (!std::isfinite(v)) throw std::invalid_argument("score matrix has a non-finite entry");
    }
}

void require_state(const ProblemInstance& inst, std::span<const int> x, std::span<const int> s) {
    const int n = inst.n_sites();
    if (static_cast<int>(x.size()) != n || !is_permutation(s, n))
        throw std::invalid_argument("state does not match the instance");
    for (int j = 0; j < n; ++j)
        if (x[j] < 0 || x[j] >= inst.sites[j].state_count)
            throw std::invalid_argument("site state out of range");
}

/// Alternating-path search used by the lexicographic pass: from the row that
/// lost its column, reach `target` through tight edges of unfixed rows and
/// columns, then shift the matching along the path.
bool reroute(int start_row, int target, const std::vector<std::vector<char>>& tight,
             const std::vector<char>& fixed_col, std::vector<int>& row_of,
             std::vector<int>& col_of, int banned_col) {
    const int n = static_cast<int>(tight.size());
    std::vector<int> parent_row(n, -1); // column -> row it was reached from
    std::vector<char> seen(n, 0);
    std::vector<int> queue{start_row};
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const int r = queue[head];
        for (int c = 0; c < n; ++c) {
            if (seen[c] || fixed_col[c] || c == banned_col || !tight[r][c]) continue;
            seen[c] = 1;
            parent_row[c] = r;
            if (c == target) {
                int col = c;
                while (true) {
                    const int row = parent_row[col];
                    const int previous = row_of[row];
                    row_of[row] = col;
                    col_of[col] = row;
                    if (row == start_row) return true;
                    col = previous;
                }
            }
            queue.push_back(col_of[c]);
        }
    }
    return false;
}

Permutation hungarian_min(const Matrix& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    constexpr double inf = std::numeric_limits<double>::infinity();
    // potentials and matching, 1-based with a sentinel column 0
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_of(n), col_of(n);
    for (int j = 1; j <= n; ++j) {
        row_of[p[j] - 1] = j - 1;
        col_of[j - 1] = p[j] - 1;
    }

    double scale = 0.0;
    for (const auto& row : cost)
        for (double c : row) scale = std::max(scale, std::abs(c));
    const double eps = kTieRelTol * (1.0 + scale);
    std::vector<std::vector<char>> tight(n, std::vector<char>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) tight[i][j] = cost[i][j] - u[i + 1] - v[j + 1] <= eps;

    // Fix rows in order, each to the smallest column that still admits a
    // perfect matching on the tight graph.
    std::vector<char> fixed_col(n, 0);
    for (int i = 0; i < n; ++i) {
        const int current = row_of[i];
        for (int j = 0; j < current; ++j) {
            if (fixed_col[j] || !tight[i][j]) continue;
            const int displaced = col_of[j];
            auto rows = row_of;
            auto cols = col_of;
            // free column `current` by detaching row i, then let `displaced` reach it
            rows[i] = j;
            cols[j] = i;
            rows[displaced] = -1;
            if (reroute(displaced, current, tight, fixed_col, rows, cols, j)) {
                row_of = std::move(rows);
                col_of = std::move(cols);
                break;
            }
        }
        fixed_col[row_of[i]] = 1;
    }
    return row_of;
}

ScoreMatrix osl_scores_unchecked(const ProblemInstance& inst, const RelaxationSolution& rel,
                                 std::span<const int> x, std::span<const int> s) {
    const int n = inst.n_sites();
    ScoreMatrix out{Matrix(n, std::vector<double>(n)), lp::Sense::maximize};
    for (int i = 0; i < n; ++i) {
        const bool active = inst.is_active(i);
        for (int a = 0; a < n; ++a) {
            const auto& row = inst.transition(a, active)[x[a]];
            double future = 0.0;
            for (int y = 0; y < static_cast<int>(row.size()); ++y)
                future += rel.lambda(i, a, y) * row[y];
            out.entries[i][a] = inst.reward(a, active, x[a]) -
                                (active ? inst.switch_cost[s[i]][a] : 0.0) +
                                inst.discount * future;
        }
    }
    return out;
}

ScoreMatrix pd_scores_unchecked(const ProblemInstance& inst, const RelaxationSolution& rel,
                                const MarginalIndex& index, std::span<const int> x,
                                std::span<const int> s) {
    const int n = inst.n_sites();
    ScoreMatrix out{Matrix(n, std::vector<double>(n)), lp::Sense::minimize};
    for (int i = 0; i < n; ++i) {
        const int from = s[i];
        for (int a = 0; a < n; ++a) {
            double g = rel.gamma_bar[index.index(i, Anchor::origin, x[from], from, a)];
            if (a != from) g += rel.gamma_bar[index.index(i, Anchor::destination, x[a], from, a)];
            out.entries[i][a] = g;
        }
    }
    return out;
}

} // namespace

Permutation hungarian(const ScoreMatrix& scores) {
    require_square(scores);
    if (scores.sense == lp::Sense::minimize) return hungarian_min(scores.entries);
    Matrix cost = scores.entries;
    for (auto& row : cost)
        for (double& c : row) c = -c;
    return hungarian_min(cost);
}

double assignment_value(const ScoreMatrix& scores, std::span<const int> perm) {
    if (!is_permutation(perm, scores.size()))
        throw std::invalid_argument("assignment is not a permutation of the score matrix");
    double total = 0.0;
    for (int i = 0; i < scores.size(); ++i) total += scores.entries[i][perm[i]];
    return total;
}

ScoreMatrix osl_scores(const ProblemInstance& inst, const RelaxationSolution& rel,
                       std::span<const int> x, std::span<const int> s) {
    require_matching(inst, rel);
    require_state(inst, x, s);
    return osl_scores_unchecked(inst, rel, x, s);
}

Permutation osl_action(const ProblemInstance& inst, const RelaxationSolution& rel,
                       std::span<const int> x, std::span<const int> s) {
    return hungarian(osl_scores(inst, rel, x, s));
}

double pd_index(const ProblemInstance& inst, const RelaxationSolution& rel,
                std::span<const int> x, std::span<const int> s, std::span<const int> a) {
    require_matching(inst, rel);
    require_state(inst, x, s);
    if (!is_permutation(a, inst.n_sites())) throw std::invalid_argument("action is not a permutation");
    const auto index = rel.index();
    double total = 0.0;
    for (int i = 0; i < inst.n_sites(); ++i) {
        const int from = s[i];
        total += rel.gamma_bar[index.index(i, Anchor::origin, x[from], from, a[i])];
        if (a[i] != from)
            total += rel.gamma_bar[index.index(i, Anchor::destination, x[a[i]], from, a[i])];
    }
    return total;
}

ScoreMatrix pd_scores(const ProblemInstance& inst, const RelaxationSolution& rel,
                      const MarginalIndex& index, std::span<const int> x, std::span<const int> s) {
    require_matching(inst, rel);
    require_state(inst, x, s);
    return pd_scores_unchecked(inst, rel, index, x, s);
}

Permutation pd_action(const ProblemInstance& inst, const RelaxationSolution& rel,
                      std::span<const int> x, std::span<const int> s) {
    return hungarian(pd_scores(inst, rel, rel.index(), x, s));
}

ScoreMatrix greedy_scores(const ProblemInstance& inst, std::span<const int> x,
                          std::span<const int> s) {
    require_state(inst, x, s);
    const int n = inst.n_sites();
    ScoreMatrix out{Matrix(n, std::vector<double>(n)), lp::Sense::maximize};
    for (int i = 0; i < n; ++i) {
        const bool active = inst.is_active(i);
        for (int a = 0; a < n; ++a)
            out.entries[i][a] =
                inst.reward(a, active, x[a]) - (active ? inst.switch_cost[s[i]][a] : 0.0);
    }
    return out;
}

Permutation greedy_action(const ProblemInstance& inst, std::span<const int> x,
                          std::span<const int> s) {
    return hungarian(greedy_scores(inst, x, s));
}

Permutation random_action(int n_sites, std::uint64_t seed, std::span<const int> x,
                          std::span<const int> s) {
    std::uint64_t h = mix_seed(seed);
    for (int v : x) h = mix_seed(h ^ static_cast<std::uint64_t>(v));
    h = mix_seed(h ^ 0x5bd1e995ULL);
    for (int v : s) h = mix_seed(h ^ static_cast<std::uint64_t>(v));
    RngStream rng(h);
    Permutation perm(n_sites);
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = n_sites - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(k + 1)]);
    return perm;
}

const char* to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::one_step_lookahead: return "osl";
    case PolicyKind::primal_dual: return "pd";
    case PolicyKind::greedy: return "greedy";
    case PolicyKind::random: return "random";
    }
    return "?";
}

PolicyKind parse_policy_kind(const std::string& name) {
    if (name == "osl" || name == "one_step_lookahead") return PolicyKind::one_step_lookahead;
    if (name == "pd" || name == "primal_dual") return PolicyKind::primal_dual;
    if (name == "greedy") return PolicyKind::greedy;
    if (name == "random") return PolicyKind::random;
    throw std::invalid_argument("unknown policy '" + name + "'");
}

Policy make_policy(const ProblemInstance& inst, const PolicySpec& spec) {
    const ProblemInstance* ip = &inst;
    switch (spec.kind) {
    case PolicyKind::greedy:
        return [ip](std::span<const int> x, std::span<const int> s) {
            return greedy_action(*ip, x, s);
        };
    case PolicyKind::random: {
        const int n = inst.n_sites();
        const auto seed = spec.seed;
        return [n, seed](std::span<const int> x, std::span<const int> s) {
            return random_action(n, seed, x, s);
        };
    }
    case PolicyKind::one_step_lookahead:
    case PolicyKind::primal_dual:
        break;
    }
    if (!spec.relaxation)
        throw std::invalid_argument(std::string(to_string(spec.kind)) +
                                    " policy needs a relaxation solution");
    require_matching(inst, *spec.relaxation);
    auto rel = spec.relaxation;
    if (spec.kind == PolicyKind::one_step_lookahead) {
        return [ip, rel](std::span<const int> x, std::span<const int> s) {
            return hungarian(osl_scores_unchecked(*ip, *rel, x, s));
        };
    }
    auto index = std::make_shared<const MarginalIndex>(rel->index());
    return [ip, rel, index](std::span<const int> x, std::span<const int> s) {
        return hungarian(pd_scores_unchecked(*ip, *rel, *index, x, s));
    };
}

} // namespace rbpsc
