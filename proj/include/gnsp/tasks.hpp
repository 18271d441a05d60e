#ifndef GNSP_TASKS_HPP
#define GNSP_TASKS_HPP

// Synthetic paired image/text data: classification tasks, class-incremental
// splits of a task, and held-out reference sets drawn from a shared "world"
// of concepts.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gnsp/linalg.hpp"

namespace gnsp {

enum class Split { Train, Test };

struct TaskDataset {
    std::string name;
    Matrix images;            // N x d_image_in
    std::vector<int> labels;  // local class indices
    Matrix class_prototypes;  // C x d_text_in, text-side input per class
    Split split = Split::Train;
    int class_offset = 0;  // global index of local class 0 (class-incremental splits)

    std::size_t size() const { return labels.size(); }
    std::size_t num_classes() const { return static_cast<std::size_t>(class_prototypes.rows()); }
};

struct TaskPair {
    TaskDataset train;
    TaskDataset test;
};

// Deterministic seed derivation (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Every image sample also carries `offset` times a unit axis common to all
// tasks (fixed by axis_seed), the analog of the narrow cone that real image
// features occupy. offset = 0 leaves samples centred on the prototypes.
struct TaskGeometry {
    double offset = 0.0;
    std::uint64_t axis_seed = 0x6178697300000000ULL;
    double noise = 1.0;

    bool operator==(const TaskGeometry&) const = default;
};

// Each class gets a unit prototype direction scaled by `separation`; samples add
// the common offset and N(0, noise^2) per coordinate. The class text input is
// a Gaussian vector derived from (seed, class). 80/20 train/test split per class, classes interleaved.
TaskPair make_task(std::uint64_t seed, int n_classes, int n_per_class, Eigen::Index d_image_in,
                   Eigen::Index d_text_in, double separation, const TaskGeometry& geometry = {},
                   const std::string& name = "task");

struct ReferenceSet {
    std::string name;
    Matrix images;  // R x d_image_in
    Matrix texts;   // R x d_text_in, paired by row
    std::vector<int> concepts;

    std::size_t size() const { return static_cast<std::size_t>(images.rows()); }
};

// The broad concept mixture that reference, probe and pretraining pairs come from.
struct ReferenceWorld {
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
    int concepts = 64;
    double separation = 6.0;
    double text_noise = 0.1;

    bool operator==(const ReferenceWorld&) const = default;
};

ReferenceSet make_reference_set(std::uint64_t seed, std::size_t size, Eigen::Index d_image_in,
                                Eigen::Index d_text_in, const ReferenceWorld& world = {},
                                const std::string& name = "reference");

// Contiguous class ranges; the first C mod n splits get one extra class.
std::vector<TaskDataset> split_cil(const TaskDataset& task, int n_splits);

// A test split viewed as image/text pairs (each image with its class text input).
ReferenceSet as_pairs(const TaskDataset& task);

void write_dataset_csv(std::ostream& out, const TaskDataset& task);
void write_dataset_csv(std::ostream& out, const ReferenceSet& set);

}  // namespace gnsp

#endif  // GNSP_TASKS_HPP
