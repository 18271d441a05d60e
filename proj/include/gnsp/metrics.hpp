#ifndef GNSP_METRICS_HPP
#define GNSP_METRICS_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gnsp/encoder.hpp"
#include "gnsp/tasks.hpp"

namespace gnsp {

// Row 0 is the initial model, row i the model after training task i;
// grid(i, j) is test accuracy on task j.
struct AccuracyMatrix {
    Matrix grid;
    std::vector<std::string> task_names;

    std::size_t num_tasks() const { return static_cast<std::size_t>(grid.cols()); }
};

struct GapRecord {
    std::size_t checkpoint = 0;
    std::string probe;
    double gap = 0.0;

    bool operator==(const GapRecord&) const = default;
};

struct GapSeries {
    std::vector<GapRecord> records;

    std::vector<double> values_for(const std::string& probe) const;
};

struct AccuracySummary {
    std::optional<double> transfer;  // absent when fewer than two tasks
    double last = 0.0;
    double average = 0.0;
};

// Fraction of samples whose highest-cosine class is the label; ties go to the
// lowest class index.
double evaluate_accuracy(const DualEncoder& model, const TaskDataset& task);

// Last = mean_j A[T][j]
// Transfer = mean_{j>=2} mean_{0<=i<j} A[i][j]     (tasks 1-based)
// Average = mean_j mean_{1<=i<=T} A[i][j]
AccuracySummary summarize(const AccuracyMatrix& matrix);

// Fraction of probe images whose paired text is among the k most similar
// probe texts. A text ranks ahead of the paired one if it is strictly more
// similar, or equally similar with a lower index.
double retrieval_recall_at_k(const DualEncoder& model, const ReferenceSet& probe, std::size_t k);

GapSeries track_gap(const DualEncoder& model, const std::vector<ReferenceSet>& probes,
                    std::size_t checkpoint, GapSeries series);

// Population standard deviation.
double standard_deviation(const std::vector<double>& values);

void write_accuracy_csv(std::ostream& out, const AccuracyMatrix& matrix);
void write_summary_csv(std::ostream& out, const AccuracySummary& summary);
void write_gap_csv(std::ostream& out, const GapSeries& series);
void write_recall_csv(std::ostream& out, const std::vector<std::pair<std::size_t, double>>& recall);

}  // namespace gnsp

#endif  // GNSP_METRICS_HPP
