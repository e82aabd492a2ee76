#include <sstream>
#include <string>
#include <vector>

#include "adapt/commands.hpp"
#include "adapt/data_io.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace adapt;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        out.push_back(cells);
    }
    return out;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    FAIL("missing column " << name);
    return 0;
}

// Small synthetic dataset: 1 train, 1 validation and 3 test periods.
fs::path make_dataset(const TempDir& dir) {
    SynthOptions o;
    o.spec.n_per_class = 40;
    o.spec.periods = 5;
    o.validation_periods = 1;
    std::ostringstream err;
    REQUIRE(cmd_synth(o, dir / "data/manifest.json", err) == kExitOk);
    return dir / "data/manifest.json";
}

fs::path write_config(const TempDir& dir, const std::string& name, const std::string& extra_adapt = "",
                      const std::string& seeds = "[0, 1]") {
    const auto path = dir / name;
    write_file(path, "// test config\n{\n"
                     "  \"data\": {\"manifest\": \"data/manifest.json\"},\n"
                     "  \"learner\": {\"kind\": \"logistic\"},\n"
                     "  \"adapt\": {\"threshold_benign\": 0.9" + extra_adapt + "},\n"
                     "  \"evaluation\": {\"seeds\": " + seeds + "},\n"
                     "  \"output\": {\"dir\": \"out_" + name + "\"}\n}\n");
    return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run writes its artifacts and report rebuilds them") {
    TempDir dir("run");
    make_dataset(dir);
    const auto cfg = write_config(dir, "a.json");
    std::ostringstream err;
    REQUIRE(cmd_run(cfg, err) == kExitOk);
    const auto out = dir / "out_a.json";
    for (const char* f : {"run_manifest.jsonl", "metrics.csv", "summary.csv", "calibration.csv", "final_model.json"}) {
        CHECK(fs::exists(out / f));
    }
    const auto metrics = read_file(out / "metrics.csv");
    CHECK(metrics.rfind("# config_hash=", 0) == 0);
    CHECK(read_file(out / "summary.csv").find("config_hash") != std::string::npos);
    CHECK(read_file(out / "calibration.csv").find("config_hash") != std::string::npos);
    CHECK(load_learner_file((out / "final_model.json").string())->trained());

    REQUIRE(cmd_report(out / "run_manifest.jsonl", dir / "report", err) == kExitOk);
    for (const char* f : {"metrics.csv", "summary.csv", "calibration.csv"}) {
        CHECK(read_file(dir / "report" / f) == read_file(out / f));
    }
}

TEST_CASE("runs are byte-identical") {
    TempDir dir("det");
    make_dataset(dir);
    std::ostringstream err;
    REQUIRE(cmd_run(write_config(dir, "a.json"), err) == kExitOk);
    REQUIRE(cmd_run(write_config(dir, "b.json"), err) == kExitOk);
    for (const char* f : {"metrics.csv", "summary.csv", "calibration.csv", "final_model.json"}) {
        // output dirs differ, so the hash differs; compare past the hash line
        auto a = read_file(dir / "out_a.json" / f), b = read_file(dir / "out_b.json" / f);
        if (a.rfind("# config_hash=", 0) == 0) {
            a = a.substr(a.find('\n'));
            b = b.substr(b.find('\n'));
        }
        CHECK(a == b);
    }
    REQUIRE(cmd_run(write_config(dir, "a.json"), err) == kExitOk);
    const auto first = read_file(dir / "out_a.json/metrics.csv");
    REQUIRE(cmd_run(write_config(dir, "a.json"), err) == kExitOk);
    CHECK(read_file(dir / "out_a.json/metrics.csv") == first);
}

TEST_CASE("exposure column equals prefix sums of false negatives") {
    TempDir dir("ae");
    make_dataset(dir);
    std::ostringstream err;
    REQUIRE(cmd_run(write_config(dir, "a.json", "", "[0]"), err) == kExitOk);
    const auto rows = csv_rows(read_file(dir / "out_a.json/metrics.csv"));
    const auto fn = column(rows[0], "fn"), ae = column(rows[0], "exposure");
    std::vector<std::size_t> fns, exposure;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        fns.push_back(std::stoul(rows[i][fn]));
        exposure.push_back(std::stoul(rows[i][ae]));
    }
    CHECK(exposure == oracle::prefix_sums(fns));
}

TEST_CASE("offline run has a flat model column and full metrics") {
    TempDir dir("offline");
    make_dataset(dir);
    std::ostringstream err;
    ConfigOverrides o;
    o.mode = "offline";
    o.seeds = std::vector<std::uint64_t>{0};
    REQUIRE(cmd_run(write_config(dir, "a.json"), err, o) == kExitOk);
    o.mode = "oracle";
    o.output_dir = (dir / "out_oracle").string();
    REQUIRE(cmd_run(write_config(dir, "a.json"), err, o) == kExitOk);
    const auto off = csv_rows(read_file(dir / "out_a.json/metrics.csv"));
    const auto ora = csv_rows(read_file(dir / "out_oracle/metrics.csv"));
    const auto model = column(off[0], "model_checksum"), period = column(off[0], "period_id");
    REQUIRE(off.size() == 5);  // header + 4 stream periods
    REQUIRE(ora.size() == off.size());
    for (std::size_t i = 1; i < off.size(); ++i) {
        CHECK(off[i][model] == off[1][model]);
        CHECK(off[i][period] == ora[i][period]);
        CHECK_FALSE(off[i][column(off[0], "f1")].empty());
    }
}

TEST_CASE("validation failures exit 1 with a diagnostic") {
    TempDir dir("bad");
    std::ostringstream err;
    const auto cfg = write_config(dir, "a.json");
    CHECK(cmd_run(cfg, err) == kExitValidation);
    CHECK(err.str().find((dir / "data/manifest.json").string()) != std::string::npos);

    make_dataset(dir);
    write_file(dir / "typo.json", R"({"data": {"manifest": "data/manifest.json"}, "adapt": {"lamda": 0.1}})");
    std::ostringstream err2;
    CHECK(cmd_run(dir / "typo.json", err2) == kExitValidation);
    CHECK(err2.str().find("lamda") != std::string::npos);

    write_file(dir / "range.json", R"({"data": {"manifest": "data/manifest.json"}, "adapt": {"lambda": 0.9}})");
    std::ostringstream err3;
    CHECK(cmd_run(dir / "range.json", err3) == kExitValidation);
    ConfigOverrides o;
    o.override_ranges = true;
    o.seeds = std::vector<std::uint64_t>{0};
    CHECK(cmd_run(dir / "range.json", err3, o) == kExitOk);

    std::ostringstream err4;
    CHECK(cmd_report(dir / "nope.jsonl", dir / "r", err4) == kExitValidation);
}

TEST_CASE("report rejects an incomplete run") {
    TempDir dir("incomplete");
    make_dataset(dir);
    std::ostringstream err;
    REQUIRE(cmd_run(write_config(dir, "a.json"), err) == kExitOk);
    auto text = read_file(dir / "out_a.json/run_manifest.jsonl");
    text.pop_back();
    text = text.substr(0, text.rfind('\n') + 1);  // drop the end record
    write_file(dir / "cut.jsonl", text);
    std::ostringstream err2;
    CHECK(cmd_report(dir / "cut.jsonl", dir / "r", err2) == kExitValidation);
    CHECK(err2.str().find("incomplete") != std::string::npos);
}

TEST_CASE("search logs every trial deterministically") {
    TempDir dir("search");
    make_dataset(dir);
    const auto cfg = write_config(dir, "a.json", "", "[0]");
    std::ostringstream err;
    ConfigOverrides one;
    one.budget = 1;
    REQUIRE(cmd_search(cfg, err, one) == kExitOk);
    const auto single = read_file(dir / "out_a.json/trials.jsonl");
    std::istringstream lines(single);
    std::string header, trial, rest;
    std::getline(lines, header);
    std::getline(lines, trial);
    CHECK_FALSE(std::getline(lines, rest));
    auto best_text = read_file(dir / "out_a.json/best_config.json");
    CHECK(best_text.rfind("// config_hash=", 0) == 0);
    const auto best = nlohmann::json::parse(best_text, nullptr, true, true);
    CHECK(best.at("adapt").at("lambda") == nlohmann::json::parse(trial).at("adapt").at("lambda"));

    ConfigOverrides four;
    four.budget = 4;
    REQUIRE(cmd_search(cfg, err, four) == kExitOk);
    const auto log = read_file(dir / "out_a.json/trials.jsonl");
    REQUIRE(cmd_search(cfg, err, four) == kExitOk);
    CHECK(read_file(dir / "out_a.json/trials.jsonl") == log);

    std::istringstream in(log);
    std::string line;
    std::getline(in, line);
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto t = nlohmann::json::parse(line);
        const auto learner = learner_spec_from_json(t.at("learner"));
        CHECK(check_ranges(learner).empty());
        const auto a = t.at("adapt");
        CHECK(a.at("threshold_benign").get<double>() >= 0.8);
        CHECK(a.at("threshold_benign").get<double>() <= 0.99);
        CHECK(a.at("lambda").get<double>() <= 0.5);
        ++n;
    }
    CHECK(n == 4);

    // the best config is directly runnable
    CHECK(cmd_run(dir / "out_a.json/best_config.json", err) == kExitOk);
}

TEST_CASE("search needs validation periods") {
    TempDir dir("search_noval");
    SynthOptions o;
    o.spec.n_per_class = 20;
    o.spec.periods = 3;
    std::ostringstream err;
    REQUIRE(cmd_synth(o, dir / "data/manifest.json", err) == kExitOk);
    CHECK(cmd_search(write_config(dir, "a.json"), err) == kExitValidation);
}

TEST_CASE("drift table") {
    TempDir dir("drift");
    const auto manifest = make_dataset(dir);
    std::ostringstream err;
    REQUIRE(cmd_drift(manifest, {}, dir / "d.csv", err) == kExitOk);
    const auto text = read_file(dir / "d.csv");
    CHECK(text.find("# config_hash=") == 0);
    const auto rows = csv_rows(text);
    REQUIRE(rows[0] == std::vector<std::string>{"period_id", "otdd"});
    REQUIRE(rows.size() == 6);
    CHECK(std::stod(rows[1][1]) <= 1e-6);  // train period against itself
    for (std::size_t i = 2; i < rows.size(); ++i) CHECK(std::stod(rows[i][1]) > 0.0);

    // with a reference mlp the fdd column appears
    const auto data = load_manifest(manifest);
    MlpParams mp;
    mp.layers = {8};
    mp.epochs = 2;
    save_learner(*make_learner({mp})->fit(data.initial(), 0), (dir / "mlp.json").string());
    DriftOptions opts;
    opts.model = dir / "mlp.json";
    REQUIRE(cmd_drift(manifest, opts, dir / "f.csv", err) == kExitOk);
    const auto frows = csv_rows(read_file(dir / "f.csv"));
    CHECK(frows[0] == std::vector<std::string>{"period_id", "otdd", "fdd"});
    CHECK(std::stod(frows[1][2]) <= 1e-6);

    save_learner(*make_learner(default_learner_spec(LearnerKind::logistic))->fit(data.initial(), 0),
                 (dir / "lr.json").string());
    opts.model = dir / "lr.json";
    CHECK(cmd_drift(manifest, opts, dir / "g.csv", err) == kExitValidation);
    opts.model = dir / "missing.json";
    CHECK(cmd_drift(manifest, opts, dir / "g.csv", err) == kExitValidation);
}

TEST_CASE("synth validates its split") {
    TempDir dir("synth");
    SynthOptions o;
    o.spec.periods = 3;
    o.train_periods = 2;
    o.validation_periods = 1;
    std::ostringstream err;
    CHECK(cmd_synth(o, dir / "m.json", err) == kExitValidation);
    o.train_periods = 0;
    o.validation_periods = 0;
    CHECK(cmd_synth(o, dir / "m.json", err) == kExitValidation);
}

TEST_CASE("config json round-trips and hashes stably") {
    ExperimentConfig cfg;
    cfg.manifest = "m.json";
    const auto back = config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    CHECK(config_hash(back) == config_hash(cfg));
    cfg.adapt.lambda = 0.3;
    CHECK(config_hash(back) != config_hash(cfg));
}

}
