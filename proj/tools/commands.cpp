#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "gnsp/config.hpp"
#include "gnsp/csv.hpp"
#include "gnsp/experiment.hpp"

namespace gnsp::cli {

namespace {

namespace fs = std::filesystem;

// Timestamps go to run.log only, never into data files.
class RunLog {
public:
    RunLog(const fs::path& path, std::ostream& echo) : file_(path), echo_(echo) {}

    void line(const std::string& message) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        file_ << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << message << '\n';
        file_.flush();
        echo_ << message << '\n';
    }

private:
    std::ofstream file_;
    std::ostream& echo_;
};

template <typename Fn>
void write_file(const fs::path& path, Fn&& fill) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    fill(out);
    if (!out) throw Error("failed writing " + path.string());
}

void write_embeddings_csv(std::ostream& out, const DualEncoder& model, const ReferenceSet& probe) {
    const Matrix images = model.embed_images(probe.images);
    const Matrix texts = model.embed_texts(probe.texts);
    out << "index,modality,concept";
    for (Eigen::Index j = 0; j < images.cols(); ++j) out << ",e_" << j;
    out << '\n';
    auto rows = [&](const Matrix& m, const char* modality) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            out << i << ',' << modality << ',' << probe.concepts[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
            out << '\n';
        }
    };
    rows(images, "image");
    rows(texts, "text");
}

std::vector<std::pair<std::size_t, double>> recall_table(const DualEncoder& model, const ReferenceSet& probe,
                                                         const std::vector<std::size_t>& ks) {
    std::vector<std::pair<std::size_t, double>> out;
    for (auto k : ks) out.emplace_back(k, retrieval_recall_at_k(model, probe, k));
    return out;
}

RunConfig config_or_default(const std::optional<fs::path>& path) {
    return path ? load_config(*path) : RunConfig{};
}

void report_config_error(std::ostream& err, const ConfigError& e) {
    err << "config error";
    if (e.line()) err << " at line " << e.line();
    if (!e.key().empty()) err << " (key " << e.key() << ")";
    err << ": " << e.what() << '\n';
}

}  // namespace

int cmd_run(const fs::path& config, const fs::path& out_dir, std::optional<std::uint64_t> seed,
            std::ostream& log, std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load_config(config);
        if (seed) cfg.trainer.seed = *seed;
    } catch (const ConfigError& e) {
        report_config_error(err, e);
        return kExitConfig;
    }

    std::string phase = "setup";
    try {
        fs::create_directories(out_dir);
        RunLog run_log(out_dir / "run.log", log);
        write_file(out_dir / "effective_config.ini", [&](std::ostream& o) { write_config(o, cfg); });

        run_log.line("building data and pre-training the initial model");
        const Experiment ex = build_experiment(cfg);

        phase = "train";
        const auto observer = [&](std::size_t checkpoint, const ContinualState&) {
            run_log.line("checkpoint " + std::to_string(checkpoint) + " evaluated");
        };
        const RunResult result = run_sequence(ex.initial, ex.tasks, ex.reference, ex.probes, cfg.trainer, observer);

        phase = "write outputs";
        write_file(out_dir / "accuracy_matrix.csv", [&](std::ostream& o) { write_accuracy_csv(o, result.accuracy); });
        write_file(out_dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, summarize(result.accuracy)); });
        write_file(out_dir / "gap.csv", [&](std::ostream& o) { write_gap_csv(o, result.gaps); });
        const ReferenceSet& recall_probe = *std::find_if(
            ex.probes.begin(), ex.probes.end(), [&](const ReferenceSet& p) { return p.name == cfg.recall_probe; });
        write_file(out_dir / "recall.csv", [&](std::ostream& o) {
            write_recall_csv(o, recall_table(result.final_state.model, recall_probe, cfg.recall_k));
        });
        if (cfg.emit_spectra) {
            write_file(out_dir / "spectra.csv", [&](std::ostream& o) {
                write_spectra_csv(o, accumulator_spectra(result.final_state.gram, cfg.trainer.rho));
            });
        }
        if (cfg.emit_embeddings) {
            for (const auto& p : cfg.probes) {
                const auto& probe = *std::find_if(ex.probes.begin(), ex.probes.end(),
                                                  [&](const ReferenceSet& s) { return s.name == p.name; });
                write_file(out_dir / ("embeddings_" + p.name + ".csv"),
                           [&](std::ostream& o) { write_embeddings_csv(o, result.final_state.model, probe); });
            }
        }
        save_checkpoint(result.final_state, out_dir / "final.ckpt");
        if (cfg.emit_plots) {
            phase = "plot";
            const auto plot = [&](const std::string& csv, const std::string& svg, bool log_y) {
                std::ifstream in(out_dir / csv);
                const std::string text = render_svg(in, log_y);
                write_file(out_dir / svg, [&](std::ostream& o) { o << text; });
            };
            plot("gap.csv", "gap.svg", false);
            if (cfg.emit_spectra) plot("spectra.csv", "spectra.svg", true);
        }
        const auto summary = summarize(result.accuracy);
        std::ostringstream msg;
        msg << "done: last " << format_double(summary.last) << ", average " << format_double(summary.average);
        if (summary.transfer) msg << ", transfer " << format_double(*summary.transfer);
        run_log.line(msg.str());
    } catch (const std::exception& e) {
        err << "runtime failure in phase '" << phase << "': " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_eval(const fs::path& checkpoint, const std::optional<fs::path>& config, std::ostream& out,
             std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = config_or_default(config);
    } catch (const ConfigError& e) {
        report_config_error(err, e);
        return kExitConfig;
    }
    try {
        const ContinualState state = load_checkpoint(checkpoint);
        const auto tasks = make_task_sequence(cfg);
        const auto probes = make_probes(cfg, tasks);
        out << "metric,name,value\n";
        for (const auto& t : tasks) {
            out << "accuracy," << t.test.name << ',' << format_double(evaluate_accuracy(state.model, t.test)) << '\n';
        }
        for (const auto& p : probes) {
            const double gap = modality_gap(state.model.embed_images(p.images), state.model.embed_texts(p.texts));
            out << "gap," << p.name << ',' << format_double(gap) << '\n';
        }
        for (const auto& p : probes) {
            if (p.name != cfg.recall_probe) continue;
            for (const auto& [k, r] : recall_table(state.model, p, cfg.recall_k)) {
                out << "recall@" << k << ',' << p.name << ',' << format_double(r) << '\n';
            }
        }
    } catch (const std::exception& e) {
        err << "eval failed: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_export_embeddings(const fs::path& checkpoint, const std::string& probe, const fs::path& out_csv,
                          const std::optional<fs::path>& config, std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = config_or_default(config);
    } catch (const ConfigError& e) {
        report_config_error(err, e);
        return kExitConfig;
    }
    try {
        const ContinualState state = load_checkpoint(checkpoint);
        const ReferenceSet set = find_probe(cfg, probe);
        write_file(out_csv, [&](std::ostream& o) { write_embeddings_csv(o, state.model, set); });
    } catch (const std::exception& e) {
        err << "export-embeddings failed: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace gnsp::cli
