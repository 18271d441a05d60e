#include "gnsp/experiment.hpp"

namespace gnsp {

namespace {

Eigen::Index image_in(const RunConfig& cfg) { return cfg.model.image_dims.front(); }
Eigen::Index text_in(const RunConfig& cfg) { return cfg.model.text_dims.front(); }

}  // namespace

std::vector<TaskPair> make_task_sequence(const RunConfig& cfg) {
    std::vector<TaskPair> tasks;
    for (std::size_t t = 0; t < cfg.tasks.count; ++t) {
        const double sep = cfg.tasks.separations.size() == 1 ? cfg.tasks.separations[0]
                                                             : cfg.tasks.separations[t];
        tasks.push_back(make_task(cfg.tasks.seed_base + t, cfg.tasks.classes, cfg.tasks.per_class,
                                  image_in(cfg), text_in(cfg), sep, cfg.tasks.geometry,
                                  "task" + std::to_string(t + 1)));
    }
    return tasks;
}

std::vector<ReferenceSet> make_probes(const RunConfig& cfg, const std::vector<TaskPair>& tasks) {
    std::vector<ReferenceSet> probes;
    for (const auto& p : cfg.probes) {
        probes.push_back(make_reference_set(p.seed, p.size, image_in(cfg), text_in(cfg), cfg.world, p.name));
    }
    if (cfg.task_probes) {
        for (const auto& t : tasks) probes.push_back(as_pairs(t.test));
    }
    return probes;
}

ReferenceSet find_probe(const RunConfig& cfg, const std::string& name) {
    for (const auto& p : cfg.probes) {
        if (p.name == name) {
            return make_reference_set(p.seed, p.size, image_in(cfg), text_in(cfg), cfg.world, p.name);
        }
    }
    for (const auto& t : make_task_sequence(cfg)) {
        if (t.test.name == name) return as_pairs(t.test);
    }
    throw ValueError("no probe or task named '" + name + "'");
}

Experiment build_experiment(const RunConfig& cfg) {
    Experiment ex;
    const auto pretrain_set = make_reference_set(cfg.pretrain_set.seed, cfg.pretrain_set.size,
                                                 image_in(cfg), text_in(cfg), cfg.world, "pretrain");
    ex.initial = pretrain(make_dual_encoder(cfg.model), pretrain_set, cfg.pretrain);
    ex.tasks = make_task_sequence(cfg);
    ex.reference = make_reference_set(cfg.reference.seed, cfg.reference.size, image_in(cfg),
                                      text_in(cfg), cfg.world, "reference");
    ex.probes = make_probes(cfg, ex.tasks);
    return ex;
}

}  // namespace gnsp
