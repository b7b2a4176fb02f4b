#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "rbpsc/harness.hpp"

using namespace rbpsc;

namespace {

int count_fields(const std::string& line) {
    int fields = 1;
    for (char c : line) fields += c == ',';
    return fields;
}

std::string render(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    write_results(rows, out);
    return out.str();
}

InstanceSource fixed(std::string name, ProblemInstance inst) {
    return {std::move(name), [inst] { return inst; }, {inst.discount}};
}

ExperimentConfig quick(std::vector<InstanceSource> sources, int trajectories) {
    ExperimentConfig cfg;
    cfg.instances = std::move(sources);
    cfg.sim.n_trajectories = trajectories;
    cfg.sim.master_seed = 11;
    cfg.record_timings = false;
    return cfg;
}

} // namespace

TEST_CASE("results file format") {
    CHECK(render({}) == std::string(kResultsHeader) + "\n");
    CHECK(count_fields(kResultsHeader) == 15);

    ResultRow row;
    row.problem = "p1";
    row.n = 4;
    row.m = 1;
    row.states = 3;
    row.c_over_r = 0.0;
    row.alpha = 0.9;
    row.z_star = 84.69123456;
    row.z_r = 85.21;
    row.z_g = 80.0;
    row.z_g_se = 0.125;
    row.z_osl = 84.5;
    row.z_osl_se = 0.25;
    row.bound_slack = 1e-9;
    row.t_relax_s = 0.5;
    row.t_sim_s = 2.0;
    const auto line = format_row(row);
    CHECK(line == "p1,4,1,3,0,0.9,84.6912,85.21,80,0.125,84.5,0.25,1e-09,0.5,2");
    CHECK(count_fields(line) == 15);

    ResultRow sparse = row;
    sparse.z_star.reset();
    sparse.bound_slack.reset();
    sparse.t_sim_s.reset();
    CHECK(count_fields(format_row(sparse)) == 15);
    CHECK(format_row(sparse) == "p1,4,1,3,0,0.9,,85.21,80,0.125,84.5,0.25,,0.5,");

    std::istringstream in(render({row, sparse}));
    const auto back = read_results(in);
    REQUIRE(back.size() == 2);
    CHECK(format_row(back[0]) == format_row(row));
    CHECK(format_row(back[1]) == format_row(sparse));
    CHECK_FALSE(back[1].z_star.has_value());
    CHECK(back[0].z_star == doctest::Approx(84.6912));

    std::istringstream bad_header("problem,N\n");
    CHECK_THROWS_AS(read_results(bad_header), std::invalid_argument);
    std::istringstream short_row(std::string(kResultsHeader) + "\np1,4,1\n");
    CHECK_THROWS_AS(read_results(short_row), std::invalid_argument);

    row.problem = "a,b";
    CHECK_THROWS_AS(format_row(row), std::invalid_argument);

    const auto path = std::filesystem::temp_directory_path() / "rbpsc_results.csv";
    write_results({sparse}, path);
    CHECK(format_row(read_results(path).at(0)) == format_row(sparse));
    std::filesystem::remove(path);
}

TEST_CASE("suites") {
    const auto suites = table_suites();
    REQUIRE(suites.size() == 8);
    const int shape[8][3] = {{4, 1, 3}, {4, 1, 3}, {4, 1, 3}, {4, 2, 5},
                             {6, 2, 4}, {6, 2, 4}, {20, 15, 3}, {30, 15, 2}};
    const double ratio[8] = {0, 0, 0.6, 1.39, 0, 1.51, 1.16, 2.18};
    for (int k = 0; k < 8; ++k) {
        const auto inst = suites[k].build();
        CAPTURE(suites[k].problem);
        CHECK(validate_instance(inst).ok());
        CHECK(inst.n_sites() == shape[k][0]);
        CHECK(inst.n_servers == shape[k][1]);
        CHECK(max_state_count(inst) == shape[k][2]);
        CHECK(switch_ratio(inst) == doctest::Approx(ratio[k]));
        CHECK(suites[k].default_alphas.size() == 3);
    }
    CHECK(table_suite("lure").problem == "p4");
    CHECK(table_suite("mabp").problem == "p1");
    CHECK_THROWS_AS(table_suite("p9"), std::invalid_argument);

    // the bandit suite freezes idle sites
    const auto p1 = table_suite("p1").build();
    for (const auto& site : p1.sites)
        for (int x = 0; x < site.state_count; ++x) {
            CHECK(site.passive_transition[x][x] == 1.0);
            CHECK(site.passive_reward[x] == 0.0);
        }
}

TEST_CASE("single-site suite: every column agrees") {
    auto cfg = quick({fixed("one", fixtures::single_state())}, 20);
    const auto rows = run_benchmark(cfg);
    REQUIRE(rows.size() == 1);
    const auto& r = rows[0];
    CHECK_FALSE(r.failed());
    REQUIRE(r.z_star);
    CHECK(*r.z_star == doctest::Approx(2.0));
    CHECK(*r.z_r == doctest::Approx(2.0));
    CHECK(*r.z_g == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(*r.z_osl == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(*r.z_g_se <= 1e-12);
    CHECK(std::abs(*r.bound_slack) <= 1e-7);
    CHECK_FALSE(r.t_relax_s);
}

TEST_CASE("rows are reproducible") {
    GeneratorParams p;
    p.seed = 21;
    p.n_sites = 3;
    p.n_servers = 1;
    p.states_per_site = 2;
    p.cost_scale = 2.0;
    auto cfg = quick({instance_from_generator("gen", p), fixed("move", fixtures::move_once(1.0))}, 300);
    cfg.alphas = {0.5, 0.8};
    const auto first = render(run_benchmark(cfg));
    CHECK(first == render(run_benchmark(cfg)));
    cfg.workers = 3;
    CHECK(first == render(run_benchmark(cfg)));
    cfg.sim.master_seed = 12;
    CHECK(first != render(run_benchmark(cfg)));

    std::istringstream in(first);
    const auto rows = read_results(in);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].problem == "gen");
    CHECK(rows[0].alpha == 0.5);
    CHECK(rows[1].alpha == 0.8);
    CHECK(rows[3].problem == "move");
}

TEST_CASE("failures stay in their row") {
    auto broken = fixtures::move_once(1.0);
    broken.sites[0].active_transition = {{0.5}};
    auto cfg = quick({fixed("bad", broken), fixed("good", fixtures::single_state())}, 10);
    const auto rows = run_benchmark(cfg);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].failed());
    CHECK_FALSE(rows[1].failed());

    cfg.exact = false;
    const auto no_exact = run_benchmark(cfg);
    CHECK_FALSE(no_exact[1].z_star);
    CHECK(no_exact[1].z_r);

    cfg.guard.max_joint_states = 0;
    cfg.exact = true;
    CHECK_FALSE(run_benchmark(cfg)[1].z_star);

    CHECK_THROWS_AS(run_benchmark(ExperimentConfig{}), std::invalid_argument);
}

TEST_CASE("table ordering holds statistically") {
    auto cfg = quick({table_suite("p1"), table_suite("p3")}, 2000);
    cfg.alphas = {0.5, 0.9};
    for (const auto& r : run_benchmark(cfg)) {
        CAPTURE(r.problem);
        CAPTURE(r.alpha);
        REQUIRE_FALSE(r.failed());
        REQUIRE(r.z_star);
        CHECK(*r.z_star <= *r.z_r + 1e-6);
        CHECK(*r.z_g <= *r.z_star + 3 * *r.z_g_se);
        CHECK(*r.z_osl <= *r.z_star + 3 * *r.z_osl_se);
        CHECK(*r.bound_slack >= -1e-6);
    }
}
