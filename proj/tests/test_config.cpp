#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gnsp/config.hpp"
#include "gnsp/experiment.hpp"

using namespace gnsp;

namespace {

ConfigError config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("config accepted: " << text);
    return ConfigError("", "");
}

std::string written(const RunConfig& cfg) {
    std::ostringstream out;
    write_config(out, cfg);
    return out.str();
}

}  // namespace

TEST_CASE("empty text gives the defaults") { CHECK(parse_config("") == RunConfig{}); }

TEST_CASE("written config parses back to the same value") {
    CHECK(parse_config(written(RunConfig{})) == RunConfig{});

    RunConfig cfg;
    cfg.trainer.method = Method::CdOnly;
    cfg.trainer.learning_rate = 0.1 + 0.2;
    cfg.trainer.seed = 18446744073709551615ULL;
    cfg.model.image_dims = {32, 8, 16};
    cfg.tasks.separations = {1.5, 2, 3};
    cfg.tasks.count = 3;
    cfg.tasks.geometry.offset = -0.25;
    cfg.probes = {{"a", 1, 50}, {"b", 2, 60}};
    cfg.recall_probe = "b";
    cfg.recall_k = {1, 60};
    cfg.emit_embeddings = true;
    const auto text = written(cfg);
    CHECK(parse_config(text) == cfg);
    CHECK(written(parse_config(text)) == text);
}

TEST_CASE("shipped default config is the built-in default") {
    CHECK(load_config(GNSP_SOURCE_DIR "/configs/default.ini") == RunConfig{});
}

TEST_CASE("values are parsed") {
    const auto cfg = parse_config(
        "# comment\n[trainer]\nmethod = PLAIN_FINETUNE\nrho = 0\n\n[tasks]\nseparations = 4, 5.5\ncount = 2\n"
        "[output]\nembeddings = 1\nrecall_probe = extra\n[probe.extra]\nseed = 9\nsize = 30\n");
    CHECK(cfg.trainer.method == Method::PlainFinetune);
    CHECK(cfg.trainer.rho == 0.0);
    CHECK(cfg.tasks.separations == std::vector<double>{4, 5.5});
    CHECK(cfg.emit_embeddings);
    REQUIRE(cfg.probes.size() == 1);
    CHECK(cfg.probes[0] == SetSpec{"extra", 9, 30});
}

TEST_CASE("errors name the key and line") {
    const auto rho = config_error("[trainer]\nrho = 1.5\n");
    CHECK(rho.key() == "trainer.rho");
    CHECK(std::string(rho.what()).find("rho") != std::string::npos);

    const auto typo = config_error("[trainer]\n\nlearnig_rate = 0.1\n");
    CHECK(typo.line() == 3);
    CHECK(typo.key() == "trainer.learnig_rate");

    const auto section = config_error("[trainer]\nrho = 0.1\n[trainr]\nseed = 1\n");
    CHECK(section.line() == 3);
    CHECK(config_error("[trainer]\n[empty]\n").line() == 2);
    CHECK(parse_config("[trainer]\n[model]\n") == RunConfig{});

    const auto value = config_error("[trainer]\nbatch_size = 6four\n");
    CHECK(value.line() == 2);
    CHECK(value.key() == "trainer.batch_size");

    CHECK(config_error("[trainer]\nbatch_size = -1\n").key() == "trainer.batch_size");
    CHECK(config_error("rho = 0.1\n").line() == 1);
    CHECK(config_error("[trainer]\nmethod = FAST\n").key() == "trainer.method");
    CHECK(config_error("[output]\nplots = yes\n").key() == "output.plots");
    CHECK(config_error("[tasks]\ncount = 3\nseparations = 1, 2\n").key() == "tasks.separations");
    CHECK(config_error("[probe.x]\nseed = 1\n").key() == "probe.x");
    CHECK(config_error("[output]\nrecall_probe = nowhere\n").key() == "output.recall_probe");
    CHECK(config_error("[output]\nrecall_k = 5000\n").key() == "output.recall_k");
    CHECK(config_error("[model]\ntext_dims = 16, 8\n").key() == "model.text_dims");
    CHECK(config_error("[trainer\n").line() == 1);
    CHECK_THROWS_AS(load_config("/nonexistent/gnsp.ini"), ConfigError);
}

TEST_CASE("experiment materialization") {
    RunConfig cfg;
    cfg.tasks.count = 3;
    cfg.tasks.separations = {1, 2, 3};
    const auto tasks = make_task_sequence(cfg);
    REQUIRE(tasks.size() == 3);
    CHECK(tasks[2].train.name == "task3");
    CHECK(tasks[1].train.images == make_task(1001, 4, 100, 32, 16, 2.0, cfg.tasks.geometry).train.images);

    const auto probes = make_probes(cfg, tasks);
    REQUIRE(probes.size() == 4);
    CHECK(probes[0].name == "heldout");
    CHECK(probes[0].size() == 2000);
    CHECK(probes[3].name == "task3");
    CHECK(find_probe(cfg, "task2").images == tasks[1].test.images);
    CHECK_THROWS_AS(find_probe(cfg, "nope"), ValueError);

    cfg.task_probes = false;
    CHECK(make_probes(cfg, tasks).size() == 1);
}
