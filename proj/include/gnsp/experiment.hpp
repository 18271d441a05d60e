#ifndef GNSP_EXPERIMENT_HPP
#define GNSP_EXPERIMENT_HPP

// Materializes a RunConfig: data, the pre-trained initial model, and the run.

#include <vector>

#include "gnsp/config.hpp"
#include "gnsp/trainer.hpp"

namespace gnsp {

struct Experiment {
    DualEncoder initial;
    std::vector<TaskPair> tasks;
    ReferenceSet reference;
    std::vector<ReferenceSet> probes;  // configured probes, then per-task test pairs if tracked
};

std::vector<TaskPair> make_task_sequence(const RunConfig& cfg);
std::vector<ReferenceSet> make_probes(const RunConfig& cfg, const std::vector<TaskPair>& tasks);

// Probe sets drawn from the world are looked up by name; task names give that
// task's test pairs. Throws ValueError for unknown names.
ReferenceSet find_probe(const RunConfig& cfg, const std::string& name);

// Includes the contrastive pre-training of the initial model.
Experiment build_experiment(const RunConfig& cfg);

}  // namespace gnsp

#endif  // GNSP_EXPERIMENT_HPP
