#ifndef GNSP_TRAINER_HPP
#define GNSP_TRAINER_HPP

// Continual fine-tuning engine: per-task SGD on the combined objective with
// null-space projected updates, post-task gram absorption, the plain
// fine-tuning baseline, and checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gnsp/encoder.hpp"
#include "gnsp/losses.hpp"
#include "gnsp/metrics.hpp"
#include "gnsp/projection.hpp"
#include "gnsp/tasks.hpp"

namespace gnsp {

enum class Method { GnspFull, GnspOnly, CdOnly, PlainFinetune };
enum class OptimizerKind { Sgd, Adam };

std::string to_string(Method method);
Method parse_method(const std::string& text);
std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& text);

struct TrainerConfig {
    std::size_t iterations_per_task = 500;
    std::size_t batch_size = 64;
    double learning_rate = 0.05;
    double rho = 0.15;
    double lambda_cd = 1.0;
    double beta_map = 0.75;
    Method method = Method::GnspFull;
    bool include_reference_gram = false;
    std::uint64_t seed = 0;
    std::size_t capture_cap = 10000;
    // Adam applies the projector to the final per-step delta. Experimental.
    OptimizerKind optimizer = OptimizerKind::Sgd;

    bool operator==(const TrainerConfig&) const = default;
};

void validate(const TrainerConfig& cfg);

bool uses_projection(Method method);
// Weights actually applied for a method (zeroed where the method drops a term).
LossWeights effective_weights(const TrainerConfig& cfg);

struct ModelSpec {
    std::vector<Eigen::Index> image_dims{32, 64, 64, 16};
    std::vector<Eigen::Index> text_dims{16, 64, 16};
    double temperature = 0.07;
    std::uint64_t seed = 1;

    bool operator==(const ModelSpec&) const = default;
};

// Fresh dual encoder: GELU hidden layers, trainable image tower, frozen text tower.
DualEncoder make_dual_encoder(const ModelSpec& spec);

// Contrastive pre-training of the image tower against the frozen text tower
// (symmetric InfoNCE on world pairs). Produces the "initial" model that the
// continual run starts from and distils towards.
struct PretrainConfig {
    std::size_t iterations = 2000;
    std::size_t batch_size = 64;
    double learning_rate = 1.0;
    std::uint64_t seed = 7;

    bool operator==(const PretrainConfig&) const = default;
};

DualEncoder pretrain(DualEncoder model, const ReferenceSet& data, const PretrainConfig& cfg);

struct ContinualState {
    DualEncoder model;
    DualEncoder teacher;  // frozen copy of the initial model
    GramAccumulator gram;
    std::optional<Projector> projector;
    std::size_t task_index = 0;
    std::mt19937_64 rng;
};

// Starts a run from `initial`. With include_reference_gram the reference
// set's gram is absorbed up front, so even the first task is projected.
ContinualState init_state(const DualEncoder& initial, const ReferenceSet& reference,
                          const TrainerConfig& cfg);

// Per-layer unit-norm grams of the image tower's inputs over the first
// `capture_cap` rows of `images`, streamed in chunks.
std::vector<Matrix> capture_grams(const EncoderStack& stack, const std::vector<std::size_t>& layer_ids,
                                  const Matrix& images, std::size_t capture_cap);

ContinualState train_task(ContinualState state, const TaskDataset& task,
                          const ReferenceSet& reference, const TrainerConfig& cfg);

struct RunResult {
    ContinualState final_state;
    AccuracyMatrix accuracy;
    GapSeries gaps;
};

// Optional per-checkpoint callback (checkpoint index, state after it).
using CheckpointObserver = std::function<void(std::size_t, const ContinualState&)>;

// Row 0 evaluates `initial`; then train/evaluate per task. Gaps are tracked on
// every probe at every checkpoint.
RunResult run_sequence(const DualEncoder& initial, const std::vector<TaskPair>& tasks,
                       const ReferenceSet& reference, const std::vector<ReferenceSet>& probes,
                       const TrainerConfig& cfg, const CheckpointObserver& observer = {});

// Checkpoint file: "GNSP", u32 LE version, u64 LE payload length, payload,
// u32 LE CRC-32 of the payload. Matrices are row-major little-endian doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ContinualState& state, const std::filesystem::path& path);
ContinualState load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_state(const ContinualState& state,
                                          std::uint32_t version = kCheckpointVersion);
ContinualState deserialize_state(const std::vector<std::uint8_t>& bytes);

bool bitwise_equal(const ContinualState& a, const ContinualState& b);

}  // namespace gnsp

#endif  // GNSP_TRAINER_HPP
