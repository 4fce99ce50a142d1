#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hofd/bench.hpp"

using namespace hofd;

namespace {

ExperimentConfig tiny_config(Experiment e, std::uint64_t seed = 5) {
    ExperimentConfig cfg;
    cfg.experiment = e;
    cfg.n = 200;
    cfg.reps = 3;
    cfg.seed = seed;
    return cfg;
}

std::string records_as_string(const std::vector<RunRecord>& records) {
    std::stringstream ss;
    write_records_csv(ss, records);
    return ss.str();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("experiment run produces the expected record set", "[bench]") {
    const ExperimentResult res = run_experiment(tiny_config(Experiment::bilinear));
    REQUIRE(res.ok);
    REQUIRE(res.total_reps == 3);

    std::set<std::string> generalized, methods;
    std::set<long long> reps;
    for (const auto& r : res.records) {
        methods.insert(r.method);
        reps.insert(r.replication);
        if (r.method == "generalized" && r.replication == 0) generalized.insert(r.index);
    }
    REQUIRE(methods == std::set<std::string>{"generalized", "dvp", "diagnostic", "oracle"});
    REQUIRE(reps == std::set<long long>{-1, 0, 1, 2});
    for (const std::string idx :
         {"S_X1", "S_X2", "S_X1X2", "S_X1_v", "S_X1_c", "S_X2_v", "S_X2_c", "sum_all",
          "bk_within_X1X2", "bk_between_pairs", "bk_stage1_residual"})
        REQUIRE(generalized.count(idx) == 1);

    SECTION("every replication closes the sum identity") {
        for (const auto& r : res.records)
            if (r.method == "generalized" && r.index == "sum_all")
                REQUIRE(std::abs(r.estimate - 1.0) < 1e-12);
    }
    SECTION("oracle rows carry replication -1 and the closed-form values") {
        const auto oracle = bilinear_model_indices(bilinear_spec(0.4));
        for (const auto& r : res.records) {
            if (r.method != "oracle") continue;
            REQUIRE(r.replication == -1);
            if (r.index == "S_X1") REQUIRE(r.estimate == oracle.row("X1").s);
        }
    }
}

TEST_CASE("different seeds change estimates but not the schema", "[bench]") {
    const ExperimentResult a = run_experiment(tiny_config(Experiment::bilinear, 1));
    const ExperimentResult b = run_experiment(tiny_config(Experiment::bilinear, 2));
    REQUIRE(a.records.size() == b.records.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        REQUIRE(a.records[i].index == b.records[i].index);
        REQUIRE(a.records[i].method == b.records[i].method);
        REQUIRE(a.records[i].replication == b.records[i].replication);
        if (a.records[i].replication >= 0 && a.records[i].estimate != b.records[i].estimate)
            any_diff = true;
    }
    REQUIRE(any_diff);
}

TEST_CASE("identical configs reproduce byte-identical outputs across thread counts",
          "[bench]") {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "hofd_bench_test";
    fs::remove_all(base);

    ExperimentConfig cfg = tiny_config(Experiment::bilinear, 11);
    cfg.reps = 4;

    cfg.out_dir = (base / "t1").string();
    run_experiment(cfg);
    cfg.out_dir = (base / "t1b").string();
    run_experiment(cfg);
    cfg.threads = 2;
    cfg.out_dir = (base / "t2").string();
    run_experiment(cfg);

    for (const char* name : {"records.csv", "summary.csv", "boxplot.csv"}) {
        const std::string first = slurp(base / "t1" / name);
        REQUIRE(first == slurp(base / "t1b" / name));
        REQUIRE(first == slurp(base / "t2" / name));
        REQUIRE(first.find('\r') == std::string::npos);
    }
    fs::remove_all(base);
}

TEST_CASE("records CSV round trip", "[bench]") {
    const ExperimentResult res = run_experiment(tiny_config(Experiment::bilinear));
    std::stringstream ss(records_as_string(res.records));
    const auto back = read_records_csv(ss);
    REQUIRE(back.size() == res.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        REQUIRE(back[i].index == res.records[i].index);
        REQUIRE(back[i].estimate == res.records[i].estimate);
        REQUIRE(back[i].converged == res.records[i].converged);
    }
}

TEST_CASE("summary statistics", "[bench]") {
    SECTION("single replication leaves the std column empty") {
        std::vector<RunRecord> recs{{"exp", 0, "S_X1", "generalized", 0.4, 1}};
        const auto rows = summarize(recs);
        REQUIRE(rows.size() == 1);
        REQUIRE(rows[0].count == 1);
        REQUIRE(rows[0].mean == 0.4);
        REQUIRE_FALSE(rows[0].has_std);
        std::stringstream ss;
        write_summary_csv(ss, rows);
        REQUIRE(ss.str().find("generalized,S_X1,1,0.4,,") != std::string::npos);
    }
    SECTION("oracle-only records summarize to the oracle values with std 0") {
        std::vector<RunRecord> recs{{"exp", -1, "S_X1", "oracle", 0.3844, 1}};
        const auto rows = summarize(recs);
        REQUIRE(rows[0].mean == 0.3844);
        REQUIRE(rows[0].has_std);
        REQUIRE(rows[0].std_dev == 0.0);
    }
    SECTION("five-number summary uses interpolated quartiles") {
        std::vector<RunRecord> recs;
        for (int r = 0; r < 5; ++r)
            recs.push_back({"exp", r, "S", "generalized", static_cast<double>(r + 1), 1});
        const auto rows = summarize(recs);
        REQUIRE(rows[0].min == 1.0);
        REQUIRE(rows[0].q1 == 2.0);
        REQUIRE(rows[0].median == 3.0);
        REQUIRE(rows[0].q3 == 4.0);
        REQUIRE(rows[0].max == 5.0);
        REQUIRE(rows[0].mean == 3.0);
        REQUIRE(rows[0].std_dev == Catch::Approx(std::sqrt(2.5)).epsilon(1e-14));
    }
    SECTION("empty record set is an error") {
        REQUIRE_THROWS_AS(summarize({}), std::invalid_argument);
    }
}

TEST_CASE("non-convergent replications are flagged, excluded and counted", "[bench]") {
    ExperimentConfig cfg = tiny_config(Experiment::bilinear);
    cfg.gs.max_iter = 1;
    cfg.gs.epsilon_rel = 1e-14;  // unreachable in one sweep
    const ExperimentResult res = run_experiment(cfg);

    REQUIRE(res.non_converged == 3);
    REQUIRE_FALSE(res.ok);  // 100% > 20%
    REQUIRE_FALSE(res.warnings.empty());
    for (const auto& r : res.records)
        if (r.replication >= 0) REQUIRE(r.converged == 0);

    // summaries keep only oracle rows
    const auto rows = summarize(res.records);
    for (const auto& row : rows) REQUIRE(row.method == "oracle");
}

TEST_CASE("admissibility gate aborts before sampling", "[bench]") {
    ExperimentInstance inst;
    inst.label = "gate";
    GaussianMixtureSpec bad = bilinear_spec(0.0);
    bad.cov2 << 1.2, 0.0, 0.0, 0.5;  // fails the eigenvalue test
    inst.gate_specs = {bad};
    inst.sampler = [](int, std::uint64_t) -> Matrix {
        throw std::logic_error("sampler must not run");
    };
    inst.model = [](const Vector& x) { return x[0]; };
    inst.pairs.blocks = {{0, 1}};

    ExperimentResult result;
    ExperimentConfig cfg = tiny_config(Experiment::bilinear);
    REQUIRE_THROWS_WITH(run_instance(inst, cfg, 1, result),
                        Catch::Matchers::ContainsSubstring("admissibility"));
}

TEST_CASE("ishigami configuration expands the a-grid into labeled instances", "[bench]") {
    ExperimentConfig cfg = tiny_config(Experiment::ishigami);
    cfg.a_grid = {3.0, 7.5};
    const auto instances = build_instances(cfg);
    REQUIRE(instances.size() == 2);
    REQUIRE(instances[0].label == "ishigami_a3");
    REQUIRE(instances[1].label == "ishigami_a7.5");
    REQUIRE(instances[0].pairs.blocks.size() == 2);
    REQUIRE(instances[0].pairs.blocks[1][1] == -1);

    cfg.a_grid.clear();
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("experiment configuration validation", "[bench]") {
    ExperimentConfig cfg;
    cfg.n = 50;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig{};
    cfg.reps = 0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_experiment("unknown"), std::invalid_argument);
}
