#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "Highs.h"
#include "rbpsc/lp.hpp"

using namespace rbpsc::lp;

namespace {

struct Halfplane {
    double a, b, rhs; // a x + b y <= rhs
};

/// Best objective over the vertices of a bounded 2-D polygon.
double vertex_oracle(double cx, double cy, const std::vector<Halfplane>& hs) {
    double best = -kInf;
    for (std::size_t p = 0; p < hs.size(); ++p) {
        for (std::size_t q = p + 1; q < hs.size(); ++q) {
            const double det = hs[p].a * hs[q].b - hs[p].b * hs[q].a;
            if (std::abs(det) < 1e-12) continue;
            const double x = (hs[p].rhs * hs[q].b - hs[p].b * hs[q].rhs) / det;
            const double y = (hs[p].a * hs[q].rhs - hs[p].rhs * hs[q].a) / det;
            bool feasible = true;
            for (const auto& h : hs) feasible = feasible && h.a * x + h.b * y <= h.rhs + 1e-9;
            if (feasible) best = std::max(best, cx * x + cy * y);
        }
    }
    return best;
}

} // namespace

TEST_CASE("single bounded variable") {
    LpModel m(Sense::maximize);
    const int x = m.add_variable("x", 0.0, kInf, 1.0);
    const int r = m.add_constraint("cap", RowSense::less_equal, 1.0);
    m.add_entry(r, x, 1.0);
    const auto sol = solve_lp(m);
    REQUIRE(sol.optimal());
    CHECK(sol.objective == doctest::Approx(1.0));
    CHECK(sol.primal[0] == doctest::Approx(1.0));
    CHECK(sol.dual[0] == doctest::Approx(1.0));
    CHECK(std::abs(sol.reduced_cost[0]) < 1e-12);
}

TEST_CASE("minimization sign conventions") {
    // min x, x >= 2: dual is d(obj)/d(rhs) = 1, reduced cost 0
    LpModel m(Sense::minimize);
    const int x = m.add_variable("x", 0.0, kInf, 1.0);
    const int r = m.add_constraint("floor", RowSense::greater_equal, 2.0);
    m.add_entry(r, x, 1.0);
    const auto sol = solve_lp(m);
    REQUIRE(sol.optimal());
    CHECK(sol.objective == doctest::Approx(2.0));
    CHECK(sol.dual[0] == doctest::Approx(1.0));

    // max -y with y >= 0 unconstrained above: y rests at its bound, reduced cost -1
    LpModel n(Sense::maximize);
    const int y = n.add_variable("y", 0.0, kInf, -1.0);
    const int e = n.add_constraint("slack", RowSense::less_equal, 5.0);
    n.add_entry(e, y, 1.0);
    const auto s2 = solve_lp(n);
    REQUIRE(s2.optimal());
    CHECK(s2.reduced_cost[0] == doctest::Approx(-1.0));
    CHECK(s2.dual[0] == doctest::Approx(0.0));
}

TEST_CASE("unbounded and infeasible") {
    LpModel m(Sense::maximize);
    m.add_variable("x", 0.0, kInf, 1.0);
    CHECK(solve_lp(m).status == Status::unbounded);

    LpModel f(Sense::maximize);
    const int x = f.add_variable("x", 0.0, kInf, 1.0);
    const int r = f.add_constraint("neg", RowSense::less_equal, -1.0);
    f.add_entry(r, x, 1.0);
    CHECK(solve_lp(f).status == Status::infeasible);
}

TEST_CASE("two-variable polytope against vertex enumeration") {
    LpModel m(Sense::maximize);
    const int x = m.add_variable("x", 0.0, kInf, 2.0);
    const int y = m.add_variable("y", 0.0, kInf, 3.0);
    const int r0 = m.add_constraint("sum", RowSense::less_equal, 4.0);
    const int r1 = m.add_constraint("xcap", RowSense::less_equal, 2.0);
    m.add_entry(r0, x, 1.0);
    m.add_entry(r0, y, 1.0);
    m.add_entry(r1, x, 1.0);
    const auto sol = solve_lp(m);
    REQUIRE(sol.optimal());
    const double oracle = vertex_oracle(2, 3, {{1, 1, 4}, {1, 0, 2}, {-1, 0, 0}, {0, -1, 0}});
    CHECK(oracle == doctest::Approx(12.0));
    CHECK(sol.objective == doctest::Approx(oracle));
    CHECK(sol.primal[0] == doctest::Approx(0.0));
    CHECK(sol.primal[1] == doctest::Approx(4.0));
}

TEST_CASE("random 2-D polytopes against vertex enumeration") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Halfplane> hs = {{-1, 0, 0}, {0, -1, 0}, {1, 0, 5}, {0, 1, 5}};
        LpModel m(Sense::maximize);
        const double cx = u(gen), cy = u(gen);
        const int x = m.add_variable("x", 0.0, 5.0, cx);
        const int y = m.add_variable("y", 0.0, 5.0, cy);
        for (int k = 0; k < 4; ++k) {
            const Halfplane h{u(gen), u(gen), 1.0 + std::abs(u(gen))};
            hs.push_back(h);
            const int r = m.add_constraint("h" + std::to_string(k), RowSense::less_equal, h.rhs);
            m.add_entry(r, x, h.a);
            m.add_entry(r, y, h.b);
        }
        const auto sol = solve_lp(m);
        REQUIRE(sol.optimal());
        CHECK(sol.objective == doctest::Approx(vertex_oracle(cx, cy, hs)).epsilon(1e-9));
        CHECK(sol.certificate.duality_gap <= 1e-6 * (1 + std::abs(sol.objective)));
    }
}

TEST_CASE("equality rows, free variables and duplicate entries") {
    // max x + y, x + y = 3 (entered as two halves), x free, 0 <= y <= 1, x <= 2.5
    LpModel m(Sense::maximize);
    const int x = m.add_variable("x", -kInf, 2.5, 1.0);
    const int y = m.add_variable("y", 0.0, 1.0, 2.0);
    const int r = m.add_constraint("eq", RowSense::equal, 3.0);
    m.add_entry(r, x, 0.5);
    m.add_entry(r, x, 0.5);
    m.add_entry(r, y, 1.0);
    const auto csc = m.compress();
    CHECK(csc.index.size() == 2);
    const auto sol = solve_lp(m);
    REQUIRE(sol.optimal());
    CHECK(sol.objective == doctest::Approx(4.0));
    CHECK(sol.primal[x] == doctest::Approx(2.0));
    CHECK(sol.primal[y] == doctest::Approx(1.0));
    CHECK(sol.dual[0] == doctest::Approx(1.0));
    CHECK(sol.reduced_cost[y] == doctest::Approx(1.0)); // at its upper bound
}

TEST_CASE("validation rejects malformed models") {
    LpModel dup(Sense::maximize);
    dup.add_variable("x");
    dup.add_variable("x");
    CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

    LpModel range(Sense::maximize);
    range.add_variable("x");
    range.add_constraint("r", RowSense::equal, 0.0);
    range.add_entry(0, 3, 1.0);
    CHECK_THROWS_AS(range.validate(), std::invalid_argument);
}

TEST_CASE("repeated solves are identical") {
    LpModel m(Sense::maximize);
    // degenerate: many optimal duals
    for (int j = 0; j < 4; ++j) m.add_variable("x" + std::to_string(j), 0.0, kInf, 1.0);
    for (int r = 0; r < 3; ++r) {
        m.add_constraint("r" + std::to_string(r), RowSense::less_equal, 1.0);
        for (int j = 0; j < 4; ++j) m.add_entry(r, j, 1.0);
    }
    const auto a = solve_lp(m);
    const auto b = solve_lp(m);
    REQUIRE(a.optimal());
    CHECK(a.objective == b.objective);
    CHECK(a.primal == b.primal);
    CHECK(a.dual == b.dual);
    CHECK(a.reduced_cost == b.reduced_cost);
}

TEST_CASE("certificate detects a wrong dual") {
    LpModel m(Sense::maximize);
    const int x = m.add_variable("x", 0.0, kInf, 1.0);
    const int r = m.add_constraint("cap", RowSense::less_equal, 1.0);
    m.add_entry(r, x, 1.0);
    const auto good = certify(m, {1.0}, {1.0}, {0.0});
    CHECK(good.duality_gap < 1e-12);
    CHECK(good.dual_residual < 1e-12);
    const auto bad = certify(m, {1.0}, {-1.0}, {2.0});
    CHECK(bad.dual_residual > 0.5);
}

TEST_CASE("MPS export reads back with the same optimum") {
    LpModel m(Sense::maximize);
    const int x = m.add_variable("x", -kInf, 3.0, 2.0);
    const int y = m.add_variable("y", 1.0, 1.0, -1.0);
    const int z = m.add_variable("z", -2.0, kInf, 1.0);
    const int r0 = m.add_constraint("a", RowSense::less_equal, 4.0);
    const int r1 = m.add_constraint("b", RowSense::greater_equal, -5.0);
    const int r2 = m.add_constraint("c", RowSense::equal, 1.5);
    m.add_entry(r0, x, 1.0);
    m.add_entry(r0, z, 1.0);
    m.add_entry(r1, x, 1.0);
    m.add_entry(r2, y, 1.0);
    m.add_entry(r2, z, -0.5);
    const auto direct = solve_lp(m);
    REQUIRE(direct.optimal());

    const auto path = std::filesystem::temp_directory_path() / "rbpsc_test_export.mps";
    write_mps(m, path);
    Highs h;
    h.setOptionValue("output_flag", false);
    REQUIRE(h.readModel(path.string()) != HighsStatus::kError);
    h.run();
    REQUIRE(h.getModelStatus() == HighsModelStatus::kOptimal);
    CHECK(h.getInfo().objective_function_value == doctest::Approx(direct.objective));
    std::filesystem::remove(path);
}
