#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "plastinet/checkpoint.hpp"
#include "plastinet/config.hpp"
#include "plastinet/csv.hpp"
#include "plastinet/error.hpp"
#include "plastinet/moe.hpp"

using namespace plastinet;
namespace fs = std::filesystem;

TEST_CASE("csv writer/reader round trip under the strict reader") {
    const std::string path = (fs::temp_directory_path() / "plastinet_csv_test.csv").string();
    {
        CsvWriter w(path, {"a", "b", "c"});
        w.write_row({"1", "2.5", "x"});
        w.write_row({"-3", "1e-9", "hello"});
    }
    CsvTable t = read_csv(path);
    CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
    CHECK(t.rows.size() == 2);
    CHECK(t.rows[1][2] == "hello");
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("missing"), IoError);
    fs::remove(path);
}

TEST_CASE("strict reader handles quotes, CRLF, and rejects malformed rows") {
    const std::string path = (fs::temp_directory_path() / "plastinet_csv_strict.csv").string();
    {
        std::ofstream f(path, std::ios::binary);
        f << "a,b\r\n\"x,y\",\"he said \"\"hi\"\"\"\r\n1,2\n";
    }
    CsvTable t = read_csv(path);
    CHECK(t.rows[0][0] == "x,y");
    CHECK(t.rows[0][1] == "he said \"hi\"");
    CHECK(t.rows[1][0] == "1");

    {
        std::ofstream f(path, std::ios::binary);
        f << "a,b\n1,2,3\n";
    }
    CHECK_THROWS_AS(read_csv(path), IoError);

    {
        std::ofstream f(path, std::ios::binary);
        f << "a,b\n\"unterminated\n";
    }
    CHECK_THROWS_AS(read_csv(path), IoError);
    fs::remove(path);
}

TEST_CASE("plot_data: one seed yields zero std") {
    const std::string dir = (fs::temp_directory_path() / "plastinet_plot1").string();
    fs::create_directories(dir);
    const std::string log = dir + "/a.csv";
    {
        CsvWriter w(log, {"global_step", "metric"});
        w.write_row({"0", "0.5"});
        w.write_row({"10", "0.75"});
    }
    auto rows = plot_data({{"m", {log}}}, "global_step", "metric");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].mean == doctest::Approx(0.5));
    CHECK(rows[0].stddev == 0.0);
    CHECK(rows[1].step == 10);
    fs::remove_all(dir);
}

TEST_CASE("plot_data: two-point sample standard deviation") {
    const std::string dir = (fs::temp_directory_path() / "plastinet_plot2").string();
    fs::create_directories(dir);
    for (int s = 0; s < 2; ++s) {
        CsvWriter w(dir + "/s" + std::to_string(s) + ".csv", {"global_step", "m"});
        w.write_row({"5", s == 0 ? "0.4" : "0.6"});
    }
    auto rows = plot_data({{"g", {dir + "/s0.csv", dir + "/s1.csv"}}}, "global_step", "m");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean == doctest::Approx(0.5));
    CHECK(rows[0].stddev == doctest::Approx(std::sqrt(0.02 / 1.0)).epsilon(1e-9)); // 0.1414
    fs::remove_all(dir);
}

TEST_CASE("plot_data matches a hand-computed three-seed aggregation") {
    const std::string dir = (fs::temp_directory_path() / "plastinet_plot3").string();
    fs::create_directories(dir);
    const double vals[3][2] = {{0.2, 0.9}, {0.4, 0.7}, {0.9, 0.8}};
    std::vector<std::string> files;
    for (int s = 0; s < 3; ++s) {
        const std::string f = dir + "/s" + std::to_string(s) + ".csv";
        CsvWriter w(f, {"global_step", "m"});
        w.write_row({"0", CsvWriter::field(vals[s][0])});
        w.write_row({"100", CsvWriter::field(vals[s][1])});
        files.push_back(f);
    }
    auto rows = plot_data({{"g", files}}, "global_step", "m");
    REQUIRE(rows.size() == 2);
    const double mean0 = (0.2 + 0.4 + 0.9) / 3.0;
    double sq = 0.0;
    for (int s = 0; s < 3; ++s) sq += (vals[s][0] - mean0) * (vals[s][0] - mean0);
    CHECK(rows[0].mean == doctest::Approx(mean0).epsilon(1e-12));
    CHECK(rows[0].stddev == doctest::Approx(std::sqrt(sq / 2.0)).epsilon(1e-12));
    fs::remove_all(dir);
}

TEST_CASE("plot_data rejects misaligned step grids naming the file") {
    const std::string dir = (fs::temp_directory_path() / "plastinet_plot4").string();
    fs::create_directories(dir);
    {
        CsvWriter w(dir + "/a.csv", {"global_step", "m"});
        w.write_row({"0", "1"});
    }
    {
        CsvWriter w(dir + "/b.csv", {"global_step", "m"});
        w.write_row({"5", "1"});
    }
    CHECK_THROWS_WITH_AS(plot_data({{"g", {dir + "/a.csv", dir + "/b.csv"}}}, "global_step", "m"),
                         doctest::Contains("b.csv"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("experiment config round trips") {
    ExperimentConfig cfg;
    cfg.kind = "rl";
    cfg.rl.variant = RLVariant::grow_1_to_k;
    cfg.rl.k = 3;
    cfg.rl.total_steps = 1234;
    cfg.rl.growth_steps = {400, 800};
    cfg.rl.checkpoint_at = {600};
    cfg.rl.seed = 77;
    cfg.rl.env.grid = 5;
    const std::string text = serialize_experiment_config(cfg);
    ExperimentConfig back = parse_experiment_text(text, "round-trip");
    CHECK(serialize_experiment_config(back) == text);
    CHECK(back.rl.k == 3);
    CHECK(back.rl.growth_steps == std::vector<std::int64_t>{400, 800});
}

TEST_CASE("unknown fields are rejected with the offending key") {
    const std::string text = R"({"kind":"cl","cl":{"method":"none","stepz_per_chunk":5}})";
    CHECK_THROWS_WITH_AS(parse_experiment_text(text, "t"), doctest::Contains("stepz_per_chunk"),
                         ConfigError);
}

TEST_CASE("missing required fields and bad kinds are config errors") {
    CHECK_THROWS_WITH_AS(parse_experiment_text(R"({"kind":"cl","cl":{}})", "t"),
                         doctest::Contains("method"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_text(R"({"kind":"nope"})", "t"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_text(R"({"kind":"cl","rl":{},"cl":{"method":"none"}})", "t"),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_text("{ not json", "t"), ConfigError);
}

TEST_CASE("checkpoint round trip preserves every bit") {
    ParamStore params;
    Rng rng(3);
    MoELayer layer(params, "moe", 8, 4, 2, true, rng);
    // Dirty values and optimizer state.
    for (auto& e : params.entries()) {
        for (auto& m : e.adam.m) m = rng.uniform(-1, 1);
        for (auto& v : e.adam.v) v = rng.uniform(0, 1);
        e.adam.t = 17;
    }
    params.entry("moe.expert0.w_in").tensor.set_requires_grad(false);

    CheckpointMeta meta;
    meta.kind = "rl";
    meta.variant = "one_expert";
    meta.global_step = 512;
    meta.episode_count = 4;
    meta.experts_per_site = {2};
    meta.d = 8;
    meta.expert_h = 4;

    const std::string dir = (fs::temp_directory_path() / "plastinet_ckpt_test").string();
    fs::remove_all(dir);
    save_checkpoint(params, meta, dir);

    LoadedCheckpoint loaded = load_checkpoint(dir);
    CHECK(loaded.meta.global_step == 512);
    CHECK(loaded.meta.experts_per_site == std::vector<std::int64_t>{2});

    // Rebuild the same architecture with different values, then restore.
    ParamStore fresh;
    Rng rng2(99);
    MoELayer layer2(fresh, "moe", 8, 4, 2, true, rng2);
    apply_checkpoint(fresh, loaded);
    for (const auto& e : params.entries()) {
        const auto& f = fresh.entry(e.name);
        CHECK(f.tensor.data() == e.tensor.data());
        CHECK(f.adam.m == e.adam.m);
        CHECK(f.adam.v == e.adam.v);
        CHECK(f.adam.t == e.adam.t);
        CHECK(f.tensor.requires_grad() == e.tensor.requires_grad());
    }
    fs::remove_all(dir);
}

TEST_CASE("corrupt checkpoint blob fails without a partial model") {
    ParamStore params;
    Rng rng(4);
    MoELayer layer(params, "moe", 4, 2, 1, true, rng);
    CheckpointMeta meta;
    meta.kind = "rl";
    meta.d = 4;
    meta.expert_h = 2;
    meta.experts_per_site = {1};
    const std::string dir = (fs::temp_directory_path() / "plastinet_ckpt_corrupt").string();
    fs::remove_all(dir);
    save_checkpoint(params, meta, dir);
    fs::resize_file(fs::path(dir) / "params.bin", 16);
    CHECK_THROWS_AS(load_checkpoint(dir), IoError);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint shape mismatch is a config error") {
    ParamStore params;
    Rng rng(5);
    MoELayer layer(params, "moe", 4, 2, 1, true, rng);
    CheckpointMeta meta;
    meta.kind = "rl";
    meta.d = 4;
    meta.expert_h = 2;
    meta.experts_per_site = {1};
    const std::string dir = (fs::temp_directory_path() / "plastinet_ckpt_mismatch").string();
    fs::remove_all(dir);
    save_checkpoint(params, meta, dir);
    LoadedCheckpoint loaded = load_checkpoint(dir);

    ParamStore other;
    Rng rng2(6);
    MoELayer wider(other, "moe", 4, 3, 1, true, rng2); // h differs
    CHECK_THROWS_AS(apply_checkpoint(other, loaded), ConfigError);
    fs::remove_all(dir);
}
