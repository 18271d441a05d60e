#include "gnsp/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "gnsp/csv.hpp"

namespace gnsp {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) items.push_back(trim(item));
    return items;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
    T value{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + text + "'", key);
    }
    return value;
}

double parse_number(const std::string& key, const std::string& text) {
    try {
        return parse_double(text, 0);
    } catch (const Error&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + text + "'", key);
    }
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + text + "'", key);
}

template <typename T>
std::vector<T> parse_integer_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    for (const auto& item : split_list(text)) out.push_back(parse_integer<T>(key, item));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        if constexpr (std::is_floating_point_v<T>) {
            out += format_double(values[i]);
        } else {
            out += std::to_string(values[i]);
        }
    }
    return out;
}

// One entry per fixed key: how to read it into a RunConfig and how to print it.
struct Field {
    std::function<void(RunConfig&, const std::string& key, const std::string& value)> read;
    std::function<std::string(const RunConfig&)> write;
};

#define GNSP_INT(expr, type)                                                                   \
    Field {                                                                                    \
        [](RunConfig& c, const std::string& k, const std::string& v) {                         \
            expr = parse_integer<type>(k, v);                                                  \
        },                                                                                     \
            [](const RunConfig& c) { return std::to_string(expr); }                            \
    }
#define GNSP_NUM(expr)                                                                         \
    Field {                                                                                    \
        [](RunConfig& c, const std::string& k, const std::string& v) {                         \
            expr = parse_number(k, v);                                                         \
        },                                                                                     \
            [](const RunConfig& c) { return format_double(expr); }                             \
    }
#define GNSP_BOOL(expr)                                                                        \
    Field {                                                                                    \
        [](RunConfig& c, const std::string& k, const std::string& v) {                         \
            expr = parse_bool(k, v);                                                           \
        },                                                                                     \
            [](const RunConfig& c) { return std::string(expr ? "true" : "false"); }            \
    }

// Section order and key order here fix the layout of write_config.
const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>& schema() {
    static const std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>
        table = {
            {"trainer",
             {
                 {"method",
                  {[](RunConfig& c, const std::string& k, const std::string& v) {
                       try {
                           c.trainer.method = parse_method(v);
                       } catch (const Error& e) {
                           throw ConfigError("key '" + k + "': " + e.what(), k);
                       }
                   },
                   [](const RunConfig& c) { return to_string(c.trainer.method); }}},
                 {"iterations_per_task", GNSP_INT(c.trainer.iterations_per_task, std::size_t)},
                 {"batch_size", GNSP_INT(c.trainer.batch_size, std::size_t)},
                 {"learning_rate", GNSP_NUM(c.trainer.learning_rate)},
                 {"rho", GNSP_NUM(c.trainer.rho)},
                 {"lambda_cd", GNSP_NUM(c.trainer.lambda_cd)},
                 {"beta_map", GNSP_NUM(c.trainer.beta_map)},
                 {"include_reference_gram", GNSP_BOOL(c.trainer.include_reference_gram)},
                 {"seed", GNSP_INT(c.trainer.seed, std::uint64_t)},
                 {"capture_cap", GNSP_INT(c.trainer.capture_cap, std::size_t)},
                 {"optimizer",
                  {[](RunConfig& c, const std::string& k, const std::string& v) {
                       try {
                           c.trainer.optimizer = parse_optimizer(v);
                       } catch (const Error& e) {
                           throw ConfigError("key '" + k + "': " + e.what(), k);
                       }
                   },
                   [](const RunConfig& c) { return to_string(c.trainer.optimizer); }}},
             }},
            {"model",
             {
                 {"image_dims",
                  {[](RunConfig& c, const std::string& k, const std::string& v) {
                       c.model.image_dims = parse_integer_list<Eigen::Index>(k, v);
                   },
                   [](const RunConfig& c) { return join(c.model.image_dims); }}},
                 {"text_dims",
                  {[](RunConfig& c, const std::string& k, const std::string& v) {
                       c.model.text_dims = parse_integer_list<Eigen::Index>(k, v);
                   },
                   [](const RunConfig& c) { return join(c.model.text_dims); }}},
                 {"temperature", GNSP_NUM(c.model.temperature)},
                 {"seed", GNSP_INT(c.model.seed, std::uint64_t)},
             }},
            {"pretrain",
             {
                 {"iterations", GNSP_INT(c.pretrain.iterations, std::size_t)},
                 {"batch_size", GNSP_INT(c.pretrain.batch_size, std::size_t)},
                 {"learning_rate", GNSP_NUM(c.pretrain.learning_rate)},
                 {"seed", GNSP_INT(c.pretrain.seed, std::uint64_t)},
                 {"data_seed", GNSP_INT(c.pretrain_set.seed, std::uint64_t)},
                 {"size", GNSP_INT(c.pretrain_set.size, std::size_t)},
             }},
            {"world",
             {
                 {"seed", GNSP_INT(c.world.seed, std::uint64_t)},
                 {"concepts", GNSP_INT(c.world.concepts, int)},
                 {"separation", GNSP_NUM(c.world.separation)},
                 {"text_noise", GNSP_NUM(c.world.text_noise)},
             }},
            {"tasks",
             {
                 {"count", GNSP_INT(c.tasks.count, std::size_t)},
                 {"classes", GNSP_INT(c.tasks.classes, int)},
                 {"per_class", GNSP_INT(c.tasks.per_class, int)},
                 {"separations",
                  {[](RunConfig& c, const std::string& k, const std::string& v) {
                       c.tasks.separations.clear();
                       for (const auto& item : split_list(v)) {
                           c.tasks.separations.push_back(parse_number(k, item));
                       }
                   },
                   [](const RunConfig& c) { return join(c.tasks.separations); }}},
                 {"seed_base", GNSP_INT(c.tasks.seed_base, std::uint64_t)},
                 {"offset", GNSP_NUM(c.tasks.geometry.offset)},
                 {"axis_seed", GNSP_INT(c.tasks.geometry.axis_seed, std::uint64_t)},
                 {"noise", GNSP_NUM(c.tasks.geometry.noise)},
             }},
            {"reference",
             {
                 {"seed", GNSP_INT(c.reference.seed, std::uint64_t)},
                 {"size", GNSP_INT(c.reference.size, std::size_t)},
             }},
            {"probes",
             {
                 {"track_tasks", GNSP_BOOL(c.task_probes)},
             }},
            {"output",
             {
                 {"recall_probe",
                  {[](RunConfig& c, const std::string&, const std::string& v) { c.recall_probe = v; },
                   [](const RunConfig& c) { return c.recall_probe; }}},
                 {"recall_k",
                  {[](RunConfig& c, const std::string& k, const std::string& v) {
                       c.recall_k = parse_integer_list<std::size_t>(k, v);
                   },
                   [](const RunConfig& c) { return join(c.recall_k); }}},
                 {"spectra", GNSP_BOOL(c.emit_spectra)},
                 {"embeddings", GNSP_BOOL(c.emit_embeddings)},
                 {"plots", GNSP_BOOL(c.emit_plots)},
             }},
        };
    return table;
}

#undef GNSP_INT
#undef GNSP_NUM
#undef GNSP_BOOL

const std::string kProbePrefix = "probe.";

// Line of `key` inside `[section]`, for error messages. 0 if not found.
std::size_t locate(const std::string& text, const std::string& section, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    std::string current;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == ';' || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            current = trim(t.substr(1, t.size() - 2));
        } else if (current == section && trim(t.substr(0, t.find('='))) == key) {
            return n;
        }
    }
    return 0;
}

// Line of the `[section]` header, or 0.
std::size_t locate_section(const std::string& text, const std::string& section) {
    std::istringstream in(text);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        const std::string t = trim(line);
        if (!t.empty() && t.front() == '[' && t.back() == ']' &&
            trim(t.substr(1, t.size() - 2)) == section) {
            return n;
        }
    }
    return 0;
}

}  // namespace

void validate(const RunConfig& cfg) {
    auto fail = [](const std::string& key, const std::string& what) {
        throw ConfigError("key '" + key + "': " + what, key);
    };
    if (!(cfg.trainer.rho >= 0.0 && cfg.trainer.rho <= 1.0)) fail("trainer.rho", "must lie in [0, 1]");
    if (cfg.trainer.batch_size < 1) fail("trainer.batch_size", "must be >= 1");
    if (cfg.trainer.capture_cap < 1) fail("trainer.capture_cap", "must be >= 1");
    if (!(cfg.trainer.learning_rate >= 0.0)) fail("trainer.learning_rate", "must be >= 0");
    if (!(cfg.trainer.lambda_cd >= 0.0)) fail("trainer.lambda_cd", "must be >= 0");
    if (!(cfg.trainer.beta_map >= 0.0)) fail("trainer.beta_map", "must be >= 0");
    if (cfg.model.image_dims.size() < 2) fail("model.image_dims", "needs at least two sizes");
    if (cfg.model.text_dims.size() < 2) fail("model.text_dims", "needs at least two sizes");
    for (auto d : cfg.model.image_dims) {
        if (d < 1) fail("model.image_dims", "sizes must be >= 1");
    }
    for (auto d : cfg.model.text_dims) {
        if (d < 1) fail("model.text_dims", "sizes must be >= 1");
    }
    if (cfg.model.image_dims.back() != cfg.model.text_dims.back()) {
        fail("model.text_dims", "must end in the same embedding size as model.image_dims");
    }
    if (!(cfg.model.temperature > 0.0)) fail("model.temperature", "must be > 0");
    if (cfg.pretrain.batch_size < 1) fail("pretrain.batch_size", "must be >= 1");
    if (!(cfg.pretrain.learning_rate >= 0.0)) fail("pretrain.learning_rate", "must be >= 0");
    if (cfg.pretrain_set.size < 1) fail("pretrain.size", "must be >= 1");
    if (cfg.world.concepts < 1) fail("world.concepts", "must be >= 1");
    if (!(cfg.world.separation >= 0.0)) fail("world.separation", "must be >= 0");
    if (!(cfg.world.text_noise >= 0.0)) fail("world.text_noise", "must be >= 0");
    if (cfg.tasks.count < 1) fail("tasks.count", "must be >= 1");
    if (cfg.tasks.classes < 1) fail("tasks.classes", "must be >= 1");
    if (cfg.tasks.per_class < 5) fail("tasks.per_class", "must be >= 5 (one test sample per class)");
    if (cfg.tasks.separations.size() != 1 && cfg.tasks.separations.size() != cfg.tasks.count) {
        fail("tasks.separations", "needs one value or tasks.count values");
    }
    for (double s : cfg.tasks.separations) {
        if (!(s >= 0.0)) fail("tasks.separations", "must be >= 0");
    }
    if (!std::isfinite(cfg.tasks.geometry.offset)) fail("tasks.offset", "must be finite");
    if (!(cfg.tasks.geometry.noise >= 0.0)) fail("tasks.noise", "must be >= 0");
    if (cfg.reference.size < 1) fail("reference.size", "must be >= 1");
    std::set<std::string> names;
    for (const auto& p : cfg.probes) {
        if (p.size < 1) fail("probe." + p.name + ".size", "must be >= 1");
        if (!names.insert(p.name).second) fail("probe." + p.name, "duplicate probe name");
    }
    if (!names.count(cfg.recall_probe)) {
        fail("output.recall_probe", "names no [probe." + cfg.recall_probe + "] section");
    }
    for (auto k : cfg.recall_k) {
        if (k < 1) fail("output.recall_k", "values must be >= 1");
        for (const auto& p : cfg.probes) {
            if (p.name == cfg.recall_probe && k > p.size) {
                fail("output.recall_k", "values must not exceed the recall probe size");
            }
        }
    }
}

RunConfig parse_config(const std::string& text) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message(), "", e.line());
    }

    std::map<std::string, const std::vector<std::pair<std::string, Field>>*> sections;
    for (const auto& [name, fields] : schema()) sections[name] = &fields;

    // The tree drops sections without keys, so headers are checked on the text.
    {
        std::istringstream in(text);
        std::string raw;
        for (std::size_t n = 1; std::getline(in, raw); ++n) {
            const std::string t = trim(raw);
            if (t.empty() || t.front() != '[' || t.back() != ']') continue;
            const std::string name = trim(t.substr(1, t.size() - 2));
            const bool probe = name.rfind(kProbePrefix, 0) == 0;
            if (!probe && sections.count(name) == 0) {
                throw ConfigError("line " + std::to_string(n) + ": unknown section [" + name + "]",
                                  name, n);
            }
            if (probe && tree.find(name) == tree.not_found()) {
                throw ConfigError("line " + std::to_string(n) + ": section [" + name +
                                      "] needs both seed and size",
                                  name, n);
            }
        }
    }

    RunConfig cfg;
    bool probes_seen = false;
    for (const auto& [section, body] : tree) {
        const std::size_t header = locate_section(text, section);
        if (body.empty() && header == 0) {
            const std::string key = section;
            throw ConfigError("line " + std::to_string(locate(text, "", key)) + ": key '" + key +
                                  "' is outside any section",
                              key, locate(text, "", key));
        }
        if (section.rfind(kProbePrefix, 0) == 0) {
            if (!probes_seen) cfg.probes.clear();
            probes_seen = true;
            SetSpec probe{section.substr(kProbePrefix.size()), 0, 0};
            if (probe.name.empty()) throw ConfigError("empty probe name", section);
            bool has_seed = false;
            bool has_size = false;
            for (const auto& [key, node] : body) {
                const std::string full = section + "." + key;
                const std::string value = trim(node.data());
                if (key == "seed") {
                    probe.seed = parse_integer<std::uint64_t>(full, value);
                    has_seed = true;
                } else if (key == "size") {
                    probe.size = parse_integer<std::size_t>(full, value);
                    has_size = true;
                } else {
                    const auto line = locate(text, section, key);
                    throw ConfigError("line " + std::to_string(line) + ": unknown key '" + full + "'",
                                      full, line);
                }
            }
            if (!has_seed || !has_size) {
                throw ConfigError("section [" + section + "] needs both seed and size", section);
            }
            cfg.probes.push_back(probe);
            continue;
        }
        const auto it = sections.find(section);
        if (it == sections.end()) {
            throw ConfigError("line " + std::to_string(header) + ": unknown section [" + section +
                                  "]",
                              section, header);
        }
        for (const auto& [key, node] : body) {
            const std::string full = section + "." + key;
            const Field* field = nullptr;
            for (const auto& [name, f] : *it->second) {
                if (name == key) field = &f;
            }
            const auto line = locate(text, section, key);
            if (!field) {
                throw ConfigError("line " + std::to_string(line) + ": unknown key '" + full + "'",
                                  full, line);
            }
            try {
                field->read(cfg, full, trim(node.data()));
            } catch (const ConfigError& e) {
                throw ConfigError("line " + std::to_string(line) + ": " + e.what(), full, line);
            }
        }
    }
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string(), "");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

void write_config(std::ostream& out, const RunConfig& cfg) {
    bool first = true;
    for (const auto& [section, fields] : schema()) {
        if (!first) out << '\n';
        first = false;
        out << '[' << section << "]\n";
        for (const auto& [key, field] : fields) out << key << " = " << field.write(cfg) << '\n';
    }
    for (const auto& probe : cfg.probes) {
        out << "\n[" << kProbePrefix << probe.name << "]\n";
        out << "seed = " << probe.seed << '\n';
        out << "size = " << probe.size << '\n';
    }
}

}  // namespace gnsp
