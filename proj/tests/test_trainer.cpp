#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gnsp/config.hpp"
#include "gnsp/experiment.hpp"
#include "gnsp/trainer.hpp"

using namespace gnsp;

namespace {

struct Small {
    DualEncoder model = make_dual_encoder(ModelSpec{});
    std::vector<TaskPair> tasks{make_task(1000, 4, 100, 32, 16, 14.0, {}, "task1"),
                                make_task(1001, 4, 100, 32, 16, 14.0, {}, "task2")};
    ReferenceSet reference = make_reference_set(202, 200, 32, 16);
    std::vector<ReferenceSet> probes{make_reference_set(303, 100, 32, 16, {}, "heldout")};
};

TrainerConfig quick(Method method, std::size_t iterations = 50) {
    TrainerConfig cfg;
    cfg.method = method;
    cfg.iterations_per_task = iterations;
    return cfg;
}

bool same_weights(const EncoderStack& a, const EncoderStack& b) {
    for (std::size_t k = 0; k < a.depth(); ++k)
        if (a.layers[k].weight != b.layers[k].weight || a.layers[k].bias != b.layers[k].bias) return false;
    return true;
}

}  // namespace

TEST_CASE("method names and validation") {
    for (auto m : {Method::GnspFull, Method::GnspOnly, Method::CdOnly, Method::PlainFinetune})
        CHECK(parse_method(to_string(m)) == m);
    CHECK(parse_optimizer(to_string(OptimizerKind::Adam)) == OptimizerKind::Adam);
    CHECK_THROWS_AS(parse_method("GNSP"), ValueError);
    TrainerConfig bad;
    bad.rho = 1.5;
    CHECK_THROWS_AS(validate(bad), ValueError);
    CHECK(effective_weights(quick(Method::CdOnly)).beta_map == 0.0);
    CHECK(effective_weights(quick(Method::GnspOnly)).lambda_cd == 0.0);
}

TEST_CASE("null updates leave the model bitwise unchanged") {
    Small s;
    auto cfg = quick(Method::GnspFull);
    cfg.learning_rate = 0.0;
    auto state = init_state(s.model, s.reference, cfg);
    state = train_task(std::move(state), s.tasks[0].train, s.reference, cfg);
    CHECK(same_weights(state.model.image_encoder, s.model.image_encoder));
    CHECK(state.gram.tasks_absorbed == 1);
    CHECK(state.projector.has_value());
    CHECK(state.gram.per_layer[0].norm() > 0.0);

    cfg.learning_rate = 0.05;
    auto zeroed = init_state(s.model, s.reference, cfg);
    Projector p;
    p.layer_ids = zeroed.gram.layer_ids;
    for (auto d : zeroed.gram.layer_dims()) {
        p.per_layer.push_back(Matrix::Zero(d, d));
        p.null_dims.push_back(0);
    }
    zeroed.projector = p;
    zeroed = train_task(std::move(zeroed), s.tasks[0].train, s.reference, cfg);
    CHECK(same_weights(zeroed.model.image_encoder, s.model.image_encoder));
}

TEST_CASE("projector present iff a task was absorbed or the reference gram is used") {
    Small s;
    auto cfg = quick(Method::GnspFull, 5);
    CHECK(!init_state(s.model, s.reference, cfg).projector.has_value());
    cfg.include_reference_gram = true;
    const auto with_ref = init_state(s.model, s.reference, cfg);
    CHECK(with_ref.projector.has_value());
    CHECK(with_ref.gram.tasks_absorbed == 1);
}

TEST_CASE("rho = 0 keeps earlier layer outputs fixed") {
    Small s;
    auto cfg = quick(Method::GnspFull, 100);
    cfg.rho = 0.0;
    cfg.capture_cap = 20;  // fewer rows than the 32 input dims, so every gram is rank deficient
    auto state = init_state(s.model, s.reference, cfg);
    state = train_task(std::move(state), s.tasks[0].train, s.reference, cfg);
    const Matrix stored = s.tasks[0].train.images.topRows(20);
    const auto before = forward(state.model.image_encoder, stored, true);
    state = train_task(std::move(state), s.tasks[1].train, s.reference, cfg);
    const auto after = forward(state.model.image_encoder, stored, true);
    CHECK(!same_weights(state.model.image_encoder, s.model.image_encoder));
    for (std::size_t k = 0; k < before.trace->preactivations.size(); ++k) {
        const double diff = (after.trace->preactivations[k] - before.trace->preactivations[k]).cwiseAbs().maxCoeff();
        CHECK(diff <= 1e-8);
    }
}

TEST_CASE("run_sequence") {
    Small s;
    const std::vector<TaskPair> one{s.tasks[0]};
    const auto learned = run_sequence(s.model, one, s.reference, s.probes, quick(Method::PlainFinetune, 500));
    CHECK(learned.accuracy.grid.rows() == 2);
    CHECK(learned.accuracy.grid(1, 0) >= learned.accuracy.grid(0, 0) + 0.05);
    CHECK(learned.gaps.records.size() == 2);

    const auto idle = run_sequence(s.model, s.tasks, s.reference, s.probes, quick(Method::GnspFull, 0));
    for (Eigen::Index i = 1; i < idle.accuracy.grid.rows(); ++i)
        CHECK(idle.accuracy.grid.row(i) == idle.accuracy.grid.row(0));

    std::vector<std::size_t> seen;
    const auto a = run_sequence(s.model, s.tasks, s.reference, s.probes, quick(Method::GnspFull),
                                [&](std::size_t c, const ContinualState&) { seen.push_back(c); });
    const auto b = run_sequence(s.model, s.tasks, s.reference, s.probes, quick(Method::GnspFull));
    CHECK(seen == std::vector<std::size_t>{0, 1, 2});
    CHECK(a.accuracy.grid == b.accuracy.grid);
    CHECK(a.gaps.records == b.gaps.records);
    CHECK(bitwise_equal(a.final_state, b.final_state));
    CHECK(same_weights(a.final_state.teacher.image_encoder, s.model.image_encoder));
    CHECK(a.accuracy.task_names == std::vector<std::string>{"task1", "task2"});

    CHECK_THROWS_AS(run_sequence(s.model, {}, s.reference, s.probes, quick(Method::GnspFull)), ValueError);
}

TEST_CASE("checkpoints") {
    Small s;
    const auto run = run_sequence(s.model, s.tasks, s.reference, s.probes, quick(Method::GnspFull, 20));
    const auto& state = run.final_state;
    const auto path = std::filesystem::temp_directory_path() / "gnsp_test_trainer.ckpt";
    save_checkpoint(state, path);
    const auto loaded = load_checkpoint(path);
    CHECK(bitwise_equal(state, loaded));
    CHECK(loaded.task_index == 2);
    CHECK(loaded.rng == state.rng);
    std::filesystem::remove(path);

    auto bytes = serialize_state(state);
    auto flipped = bytes;
    flipped[20] ^= 0x01;
    CHECK_THROWS_AS(deserialize_state(flipped), CheckpointChecksumError);
    auto cut = bytes;
    cut.resize(bytes.size() / 2);
    CHECK_THROWS_AS(deserialize_state(cut), CheckpointTruncatedError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_state(magic), CheckpointFormatError);
    try {
        deserialize_state(serialize_state(state, 0));
        FAIL("version 0 accepted");
    } catch (const CheckpointVersionError& e) {
        CHECK(e.found() == 0);
        CHECK(e.expected() == 1);
        const std::string msg = e.what();
        CHECK(msg.find('0') != std::string::npos);
        CHECK(msg.find('1') != std::string::npos);
    }
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/gnsp.ckpt"), CheckpointError);
}

TEST_CASE("two-task desk benchmark: plain forgets, GNSP does not") {
    RunConfig cfg;
    cfg.tasks.count = 2;
    cfg.tasks.geometry.offset = 32.0;
    const auto exp = build_experiment(cfg);
    auto plain_cfg = cfg.trainer;
    plain_cfg.method = Method::PlainFinetune;
    const auto plain = run_sequence(exp.initial, exp.tasks, exp.reference, {}, plain_cfg);
    const auto full = run_sequence(exp.initial, exp.tasks, exp.reference, {}, cfg.trainer);
    const double plain_drop = plain.accuracy.grid(1, 0) - plain.accuracy.grid(2, 0);
    const double full_drop = full.accuracy.grid(1, 0) - full.accuracy.grid(2, 0);
    MESSAGE("plain drop " << plain_drop << ", GNSP_FULL drop " << full_drop);
    CHECK(plain_drop >= 0.15);
    CHECK(full_drop <= 0.02);
}
