#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "gnsp/csv.hpp"

namespace fs = std::filesystem;
using namespace gnsp;
using namespace gnsp::cli;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("gnsp_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// A run small enough for a unit test.
const char* kSmallConfig =
    "[trainer]\niterations_per_task = 40\n[pretrain]\niterations = 100\nsize = 500\n"
    "[tasks]\ncount = 2\nper_class = 20\n[reference]\nsize = 200\n"
    "[probe.heldout]\nseed = 303\nsize = 100\n[output]\nembeddings = true\n";

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("run writes parseable outputs and echoes a reproducing config") {
    const auto dir = scratch("run");
    spit(dir / "small.ini", kSmallConfig);
    std::ostringstream log, err;
    REQUIRE(cmd_run(dir / "small.ini", dir / "a", std::nullopt, log, err) == kExitOk);
    for (const char* name : {"accuracy_matrix.csv", "summary.csv", "gap.csv", "recall.csv", "spectra.csv",
                             "embeddings_heldout.csv"}) {
        std::ifstream in(dir / "a" / name);
        REQUIRE(in);
        const auto table = read_csv(in);
        CHECK(!table.rows.empty());
    }
    for (const char* name : {"final.ckpt", "gap.svg", "spectra.svg", "run.log", "effective_config.ini"})
        CHECK(fs::exists(dir / "a" / name));
    CHECK(log.str().find("checkpoint 2 evaluated") != std::string::npos);

    REQUIRE(cmd_run(dir / "a" / "effective_config.ini", dir / "b", std::nullopt, log, err) == kExitOk);
    for (const char* name : {"accuracy_matrix.csv", "summary.csv", "gap.csv", "recall.csv", "spectra.csv",
                             "embeddings_heldout.csv", "final.ckpt", "gap.svg", "effective_config.ini"})
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));

    REQUIRE(cmd_run(dir / "small.ini", dir / "c", 99, log, err) == kExitOk);
    CHECK(slurp(dir / "c" / "effective_config.ini").find("seed = 99") != std::string::npos);

    std::ostringstream eval_out;
    REQUIRE(cmd_eval(dir / "a" / "final.ckpt", dir / "a" / "effective_config.ini", eval_out, err) == kExitOk);
    const std::string eval = eval_out.str();
    CHECK(eval.rfind("metric,name,value\n", 0) == 0);
    CHECK(count(eval, "accuracy,") == 2);
    CHECK(count(eval, "recall@") == 3);
    // The final accuracies match the last row of the grid.
    std::ifstream acc_in(dir / "a" / "accuracy_matrix.csv");
    const auto acc = read_csv(acc_in);
    CHECK(eval.find("accuracy,task2," + acc.rows.back()[2] + "\n") != std::string::npos);

    REQUIRE(cmd_export_embeddings(dir / "a" / "final.ckpt", "task1", dir / "e.csv", dir / "small.ini", err) ==
            kExitOk);
    std::ifstream emb_in(dir / "e.csv");
    const auto emb = read_csv(emb_in);
    CHECK(emb.rows.size() == 2 * 16);  // image and text rows for the 16 test pairs
    CHECK(emb.header.size() == 3 + 16);
    CHECK(cmd_export_embeddings(dir / "a" / "final.ckpt", "nothing", dir / "f.csv", dir / "small.ini", err) ==
          kExitRuntime);
    CHECK(cmd_eval(dir / "missing.ckpt", std::nullopt, eval_out, err) == kExitRuntime);
}

TEST_CASE("run exit codes") {
    const auto dir = scratch("codes");
    spit(dir / "bad.ini", "[trainer]\nrho = 1.5\n");
    std::ostringstream log, err;
    CHECK(cmd_run(dir / "bad.ini", dir / "out", std::nullopt, log, err) == kExitConfig);
    CHECK(err.str().find("rho") != std::string::npos);

    std::ostringstream err2;
    spit(dir / "typo.ini", "[trainer]\nrh0 = 0.1\n");
    CHECK(cmd_run(dir / "typo.ini", dir / "out", std::nullopt, log, err2) == kExitConfig);
    CHECK(err2.str().find("line 2") != std::string::npos);

    std::ostringstream err3;
    spit(dir / "ok.ini", kSmallConfig);
    spit(dir / "occupied", "not a directory");
    CHECK(cmd_run(dir / "ok.ini", dir / "occupied", std::nullopt, log, err3) == kExitRuntime);
    CHECK(err3.str().find("phase 'setup'") != std::string::npos);
}

TEST_CASE("selftest") {
    std::ostringstream out;
    CHECK(cmd_selftest({}, out) == kExitOk);
    CHECK(out.str().find("FAIL") == std::string::npos);
    CHECK(std::regex_search(out.str(), std::regex("idempotence.*[0-9]e-")));

    std::ostringstream bad;
    CHECK(cmd_selftest({true}, bad) == kExitFailure);
    CHECK(std::regex_search(bad.str(), std::regex("FAIL projector algebra\n\\s+idempotence[^\n]*VIOLATED")));
}

TEST_CASE("plot") {
    const auto dir = scratch("plot");
    std::ostringstream err;
    spit(dir / "two.csv", "x,y\n0,1\n1,3\n");
    REQUIRE(cmd_plot(dir / "two.csv", dir / "two.svg", false, err) == kExitOk);
    const std::string svg = slurp(dir / "two.svg");
    CHECK(count(svg, "<polyline") == 1);
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, std::regex("points=\"([^\"]*)\"")));
    CHECK(count(m[1].str(), ",") == 2);
    CHECK(svg.find("width=\"800\" height=\"500\"") != std::string::npos);
    REQUIRE(cmd_plot(dir / "two.csv", dir / "again.svg", false, err) == kExitOk);
    CHECK(slurp(dir / "again.svg") == svg);

    spit(dir / "empty.csv", "");
    CHECK(cmd_plot(dir / "empty.csv", dir / "e.svg", false, err) == kExitConfig);
    std::ostringstream bad_err;
    spit(dir / "bad.csv", "x,y\n0,1\n1,oops\n");
    CHECK(cmd_plot(dir / "bad.csv", dir / "b.svg", false, bad_err) == kExitConfig);
    CHECK(bad_err.str().find("3") != std::string::npos);

    const std::string gap = "checkpoint,probe,gap\n0,heldout,0.7\n0,task1,0.5\n0,task2,0.4\n"
                            "1,heldout,0.71\n1,task1,0.52\n1,task2,0.45\n";
    std::istringstream gap_in(gap);
    const std::string gap_svg = render_svg(gap_in, false);
    std::set<std::string> probes{"heldout", "task1", "task2"};
    CHECK(count(gap_svg, "<polyline") == probes.size());
    for (const auto& p : probes) CHECK(gap_svg.find(">" + p + "<") != std::string::npos);

    std::istringstream spectra_in("layer,index,eigenvalue,selected\n0,0,1,0\n0,1,0.001,1\n0,2,0,1\n1,0,2,0\n1,1,0.5,0\n");
    const std::string spectra_svg = render_svg(spectra_in, true);
    CHECK(count(spectra_svg, "<polyline") == 2);
}
