#ifndef GNSP_CONFIG_HPP
#define GNSP_CONFIG_HPP

// Run configuration: INI text with sections, every key optional, unknown keys
// rejected. write_config emits the fully resolved form, which parses back to
// the same RunConfig.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gnsp/error.hpp"
#include "gnsp/trainer.hpp"

namespace gnsp {

class ConfigError : public Error {
public:
    // line is 0 when the problem is not tied to one line (e.g. a bad value).
    ConfigError(const std::string& message, std::string key, std::size_t line = 0)
        : Error(message), key_(std::move(key)), line_(line) {}
    const std::string& key() const { return key_; }
    std::size_t line() const { return line_; }

private:
    std::string key_;
    std::size_t line_;
};

struct SetSpec {
    std::string name;
    std::uint64_t seed = 0;
    std::size_t size = 0;

    bool operator==(const SetSpec&) const = default;
};

struct TaskSequenceSpec {
    std::size_t count = 6;
    int classes = 4;
    int per_class = 100;
    // One value for all tasks, or one per task.
    std::vector<double> separations{14.0};
    std::uint64_t seed_base = 1000;  // task t (0-based) uses seed_base + t
    TaskGeometry geometry{16.0};

    bool operator==(const TaskSequenceSpec&) const = default;
};

struct RunConfig {
    TrainerConfig trainer;
    ModelSpec model;
    PretrainConfig pretrain;
    SetSpec pretrain_set{"pretrain", 101, 4000};
    ReferenceWorld world;
    TaskSequenceSpec tasks;
    SetSpec reference{"reference", 202, 1000};
    std::vector<SetSpec> probes{{"heldout", 303, 2000}};
    bool task_probes = true;  // also track the gap on every task's test pairs
    std::string recall_probe = "heldout";
    std::vector<std::size_t> recall_k{1, 5, 10};
    bool emit_spectra = true;
    bool emit_embeddings = false;  // per-probe embedding dumps of the final model
    bool emit_plots = true;

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const RunConfig& cfg);

// Cross-field checks (also run by parse_config).
void validate(const RunConfig& cfg);

}  // namespace gnsp

#endif  // GNSP_CONFIG_HPP
