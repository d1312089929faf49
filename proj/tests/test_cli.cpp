#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "powergp/fitting.hpp"
#include "powergp/gp_engine.hpp"
#include "powergp/util.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace powergp;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

CommandResult run_cli(const std::string& args) {
    const std::string dir = testing::temp_dir("cli");
    const std::string capture = dir + "/capture.txt";
    const std::string cmd = std::string(POWERGP_CLI_PATH) + " " + args + " > " + capture +
                            " 2>&1";
    const int status = std::system(cmd.c_str());
    CommandResult result;
    result.exit_code = WEXITSTATUS(status);
    result.output = read_text_file(capture);
    return result;
}

std::string cfg(const std::string& name) { return testing::config_dir() + "/" + name; }

} // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-data produces the full grid and is idempotent") {
    const std::string dir = testing::temp_dir("cli_gen");
    const std::string out = dir + "/train.csv";
    const auto first = run_cli("gen-data --device " + cfg("device_reference.json") +
                               " --grid " + cfg("grid_full.json") + " --out " + out);
    CHECK(first.exit_code == 0);
    CHECK(first.output.find("1215 vectors (n=135, m=9)") != std::string::npos);
    const std::string first_bytes = read_text_file(out);

    const auto second = run_cli("gen-data --device " + cfg("device_reference.json") +
                                " --grid " + cfg("grid_full.json") + " --out " + out);
    CHECK(second.exit_code == 0);
    CHECK(read_text_file(out) == first_bytes);
}

TEST_CASE("exit codes map to error families") {
    const std::string dir = testing::temp_dir("cli_err");
    SUBCASE("missing device file -> 5") {
        const auto r = run_cli("gen-data --device /nonexistent.json --grid " +
                               cfg("grid_full.json") + " --out " + dir + "/x.csv");
        CHECK(r.exit_code == 5);
    }
    SUBCASE("malformed json -> 2") {
        const std::string bad = dir + "/bad.json";
        write_text_file(bad, "{ not json");
        const auto r = run_cli("gen-data --device " + bad + " --grid " +
                               cfg("grid_full.json") + " --out " + dir + "/x.csv");
        CHECK(r.exit_code == 2);
    }
    SUBCASE("infeasible grid -> 3") {
        const std::string grid = dir + "/grid_low_vdr.json";
        write_text_file(grid, R"({"f_s_hz": [45e3], "v_in_v": [200], "d": [0.5],
            "r_t_ohm": [40], "v_dr_v": [2.0], "r_g_ohm": [3]})");
        const auto r = run_cli("gen-data --device " + cfg("device_reference.json") +
                               " --grid " + grid + " --out " + dir + "/x.csv");
        CHECK(r.exit_code == 3);
        CHECK(r.output.find("infeasible") != std::string::npos);
    }
}

TEST_CASE("full pipeline: fit-surface, validate, select, report") {
    const std::string dir = testing::temp_dir("cli_pipe");
    const std::string train = dir + "/train.csv";
    const std::string surface = dir + "/surface.json";

    REQUIRE(run_cli("gen-data --device " + cfg("device_reference.json") + " --grid " +
                    cfg("grid_full.json") + " --out " + train)
                .exit_code == 0);

    const auto fit = run_cli("fit-surface --training " + train +
                             " --reference-model --out " + surface);
    CHECK(fit.exit_code == 0);
    CHECK(fit.output.find("p1: constant") != std::string::npos);

    const auto direct = run_cli("validate --training " + train + " --surface " + surface +
                                " --mode direct --out " + dir + "/val_direct");
    CHECK(direct.exit_code == 0);
    CHECK(direct.output.find("err_max=") != std::string::npos);

    // direct validation reproduces the library's percent errors exactly
    {
        const SurfacedModel sm = load_surfaced_model(surface);
        const TrainingSet ts = load_training_set(train);
        const ErrorStats stats = percent_errors(sm.expr, sm.per_condition, ts);
        CHECK(direct.output.find("mu_err=" + g17(stats.mu_err) + "%") != std::string::npos);
        CHECK(direct.output.find("sigma_err=" + g17(stats.sigma_err) + "%") !=
              std::string::npos);
        CHECK(direct.output.find("err_max=" + g17(stats.err_max) + "%") != std::string::npos);
    }

    const auto surfaced = run_cli("validate --training " + train + " --surface " + surface +
                                  " --mode surfaced --out " + dir + "/val_surfaced");
    CHECK(surfaced.exit_code == 0);
    CHECK(fs::exists(dir + "/val_surfaced/error_histogram.svg"));

    // build a small archive so select has something to chew on
    ModelArchive archive;
    archive.runs_executed = 10;
    auto add = [&](const char* key, double rmse, double fc, int n_run, double err_max) {
        ArchiveEntry e;
        e.key = key;
        e.rmse = rmse;
        e.f_complexity = fc;
        e.n_run = n_run;
        e.n_gen = 12.0;
        e.err_max = err_max;
        e.presence = {{0, 12}};
        archive.entries.push_back(e);
    };
    add("(mul p0 fs)", 2.0, 2.0, 10, 40.0);
    add("(mul p0 (mul fs vin))", 1.0, 3.2, 9, 30.0);
    add("(mul p0 (mul fs (mul vin vin)))", 0.9, 4.4, 8, 90.0); // err_max fails
    add("(mul p0 d)", 5.0, 2.0, 3, 10.0);                      // n_run fails
    const std::string archive_path = dir + "/archive.json";
    save_archive(archive, archive_path);

    const std::string candidates = dir + "/candidates.csv";
    const auto select = run_cli("select --archive " + archive_path + " --out " + candidates);
    CHECK(select.exit_code == 0);
    const std::string cand_text = read_text_file(candidates);
    CHECK(cand_text.find("(mul p0 fs)") != std::string::npos);
    CHECK(cand_text.find("(mul p0 (mul fs vin))") != std::string::npos);
    CHECK(cand_text.find("vin vin") == std::string::npos);
    CHECK(cand_text.find("(mul p0 d)") == std::string::npos);

    // idempotence: rerunning validate and report reproduces identical bytes
    const auto surfaced_again = run_cli("validate --training " + train + " --surface " +
                                        surface + " --mode surfaced --out " + dir +
                                        "/val_surfaced2");
    CHECK(surfaced_again.exit_code == 0);
    CHECK(read_text_file(dir + "/val_surfaced2/errors.txt") ==
          read_text_file(dir + "/val_surfaced/errors.txt"));
    CHECK(read_text_file(dir + "/val_surfaced2/error_histogram.svg") ==
          read_text_file(dir + "/val_surfaced/error_histogram.svg"));

    const auto report = run_cli("report --candidates " + candidates + " --surface " + surface +
                                " --errors " + dir + "/val_surfaced/errors.txt --out " + dir +
                                "/report");
    CHECK(report.exit_code == 0);
    CHECK(fs::exists(dir + "/report/fig_pareto.svg"));
    CHECK(fs::exists(dir + "/report/fig_coefficients.svg"));
    CHECK(fs::exists(dir + "/report/fig_errors.svg"));
    CHECK(fs::exists(dir + "/report/summary.txt"));

    const auto report_again = run_cli("report --candidates " + candidates + " --surface " +
                                      surface + " --errors " + dir +
                                      "/val_surfaced/errors.txt --out " + dir + "/report2");
    CHECK(report_again.exit_code == 0);
    CHECK(read_text_file(dir + "/report2/fig_pareto.svg") ==
          read_text_file(dir + "/report/fig_pareto.svg"));
    CHECK(read_text_file(dir + "/report2/summary.txt") ==
          read_text_file(dir + "/report/summary.txt"));

    // scatter point count equals the candidate row count
    const std::string pareto_side = read_text_file(dir + "/report/fig_pareto.txt");
    std::size_t row_count = 0;
    for (char c : pareto_side) {
        if (c == '\n') ++row_count;
    }
    row_count -= 1; // header line
    std::size_t circle_count = 0;
    const std::string svg = read_text_file(dir + "/report/fig_pareto.svg");
    for (std::size_t pos = svg.find("<circle"); pos != std::string::npos;
         pos = svg.find("<circle", pos + 1)) {
        ++circle_count;
    }
    CHECK(circle_count == row_count);
    CHECK(row_count == 2);

    SUBCASE("empty candidate list still exits 0 with a notice") {
        const auto empty = run_cli("select --archive " + archive_path +
                                   " --min-nrun 99 --out " + dir + "/empty.csv");
        CHECK(empty.exit_code == 0);
        CHECK(empty.output.find("notice") != std::string::npos);
    }
}

TEST_CASE("run-gp smoke run emits logs and a deterministic archive") {
    const std::string dir = testing::temp_dir("cli_rungp");
    const std::string train = dir + "/train.csv";
    REQUIRE(run_cli("gen-data --device " + cfg("device_reference.json") + " --grid " +
                    cfg("grid_smoke.json") + " --out " + train)
                .exit_code == 0);

    const std::string gp_config = dir + "/gp_tiny.json";
    write_text_file(gp_config, R"({"population_size": 16, "generations": 3,
        "lm_max_iterations": 40})");

    const auto run1 = run_cli("run-gp --training " + train + " --run-config " + gp_config +
                              " --runs 2 --seed-base 7 --out " + dir + "/out1");
    CHECK(run1.exit_code == 0);
    CHECK(fs::exists(dir + "/out1/run_0001.tsv"));
    CHECK(fs::exists(dir + "/out1/run_0002.tsv"));
    CHECK(fs::exists(dir + "/out1/archive.json"));

    const auto run2 = run_cli("run-gp --training " + train + " --run-config " + gp_config +
                              " --runs 2 --seed-base 7 --parallel 2 --out " + dir + "/out2");
    CHECK(run2.exit_code == 0);
    CHECK(read_text_file(dir + "/out1/archive.json") ==
          read_text_file(dir + "/out2/archive.json"));
    CHECK(read_text_file(dir + "/out1/run_0001.tsv") ==
          read_text_file(dir + "/out2/run_0001.tsv"));

    // archive row count equals the number of distinct canonical strings in logs
    std::set<std::string> distinct;
    for (const char* name : {"/out1/run_0001.tsv", "/out1/run_0002.tsv"}) {
        for (const auto& gl : load_run_log(dir + name)) {
            for (const auto& rec : gl.present) distinct.insert(rec.key);
        }
    }
    const ModelArchive archive = load_archive(dir + "/out1/archive.json");
    CHECK(archive.entries.size() == distinct.size());
}

TEST_CASE("manifest refuses stale upstream artifacts") {
    const std::string dir = testing::temp_dir("cli_manifest");
    const std::string manifest = dir + "/manifest.json";
    const std::string train = dir + "/train.csv";

    REQUIRE(run_cli("--manifest " + manifest + " gen-data --device " +
                    cfg("device_reference.json") + " --grid " + cfg("grid_full.json") +
                    " --out " + train)
                .exit_code == 0);

    // untouched input passes
    const auto ok = run_cli("--manifest " + manifest + " fit-surface --training " + train +
                            " --reference-model --out " + dir + "/surface.json");
    CHECK(ok.exit_code == 0);

    // tamper with the training set behind the manifest's back
    std::string text = read_text_file(train);
    text.replace(text.rfind('\n', text.size() - 2) + 1, std::string::npos, "");
    write_text_file(train, text + "0,0,45000,200,0.1,40,10,1,99\n");

    const auto stale = run_cli("--manifest " + manifest + " fit-surface --training " + train +
                               " --reference-model --out " + dir + "/surface2.json");
    CHECK(stale.exit_code == 5);
    CHECK(stale.output.find("stale") != std::string::npos);
}

} // TEST_SUITE
