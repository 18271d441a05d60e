#include "gnsp/metrics.hpp"

#include <cmath>
#include <ostream>

#include "gnsp/csv.hpp"
#include "gnsp/losses.hpp"

namespace gnsp {

std::vector<double> GapSeries::values_for(const std::string& probe) const {
    std::vector<double> out;
    for (const auto& r : records) {
        if (r.probe == probe) out.push_back(r.gap);
    }
    return out;
}

double evaluate_accuracy(const DualEncoder& model, const TaskDataset& task) {
    if (task.size() == 0) throw ValueError("evaluate_accuracy: empty test set");
    const Matrix sims = cosine_sim_matrix(model.embed_images(task.images),
                                          model.embed_texts(task.class_prototypes));
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < sims.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < sims.cols(); ++c) {
            if (sims(i, c) > sims(i, best)) best = c;
        }
        if (best == task.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(task.size());
}

AccuracySummary summarize(const AccuracyMatrix& matrix) {
    const auto& a = matrix.grid;
    const Eigen::Index tasks = a.cols();
    if (tasks < 1 || a.rows() != tasks + 1) {
        throw DimensionError("summarize: accuracy grid must be (T+1) x T, got " + shape_of(a));
    }
    AccuracySummary s;
    s.last = a.row(tasks).mean();
    s.average = a.bottomRows(tasks).colwise().mean().mean();
    if (tasks >= 2) {
        double sum = 0.0;
        // Column j (0-based) is task j+1; it is unseen in rows 0..j.
        for (Eigen::Index j = 1; j < tasks; ++j) sum += a.col(j).head(j + 1).mean();
        s.transfer = sum / static_cast<double>(tasks - 1);
    }
    return s;
}

double retrieval_recall_at_k(const DualEncoder& model, const ReferenceSet& probe, std::size_t k) {
    const std::size_t n = probe.size();
    if (n == 0) throw ValueError("retrieval_recall_at_k: empty probe");
    if (k < 1 || k > n) {
        throw ValueError("retrieval_recall_at_k: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(n) + "]");
    }
    const Matrix sims =
        cosine_sim_matrix(model.embed_images(probe.images), model.embed_texts(probe.texts));
    std::size_t hits = 0;
    for (Eigen::Index i = 0; i < sims.rows(); ++i) {
        const double own = sims(i, i);
        std::size_t ahead = 0;
        for (Eigen::Index j = 0; j < sims.cols(); ++j) {
            if (sims(i, j) > own || (sims(i, j) == own && j < i)) ++ahead;
        }
        if (ahead < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

GapSeries track_gap(const DualEncoder& model, const std::vector<ReferenceSet>& probes,
                    std::size_t checkpoint, GapSeries series) {
    for (const auto& probe : probes) {
        const double gap =
            modality_gap(model.embed_images(probe.images), model.embed_texts(probe.texts));
        series.records.push_back({checkpoint, probe.name, gap});
    }
    return series;
}

double standard_deviation(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(values.size()));
}

void write_accuracy_csv(std::ostream& out, const AccuracyMatrix& matrix) {
    out << "after_task";
    for (const auto& name : matrix.task_names) out << ',' << name;
    out << '\n';
    for (Eigen::Index i = 0; i < matrix.grid.rows(); ++i) {
        out << i;
        for (Eigen::Index j = 0; j < matrix.grid.cols(); ++j) {
            out << ',' << format_double(matrix.grid(i, j));
        }
        out << '\n';
    }
}

void write_summary_csv(std::ostream& out, const AccuracySummary& summary) {
    out << "transfer,last,average\n";
    if (summary.transfer) out << format_double(*summary.transfer);
    out << ',' << format_double(summary.last) << ',' << format_double(summary.average) << '\n';
}

void write_gap_csv(std::ostream& out, const GapSeries& series) {
    out << "checkpoint,probe,gap\n";
    for (const auto& r : series.records) {
        out << r.checkpoint << ',' << r.probe << ',' << format_double(r.gap) << '\n';
    }
}

void write_recall_csv(std::ostream& out,
                      const std::vector<std::pair<std::size_t, double>>& recall) {
    out << "k,recall\n";
    for (const auto& [k, r] : recall) out << k << ',' << format_double(r) << '\n';
}

}  // namespace gnsp
