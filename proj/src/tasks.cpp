#include "gnsp/tasks.hpp"

#include <cmath>
#include <ostream>
#include <random>

namespace gnsp {

namespace {

constexpr std::uint64_t kTextStream = 0x7465787400000000ULL;  // "text"

RowVector gaussian_row(std::mt19937_64& rng, Eigen::Index d, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    RowVector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = scale * normal(rng);
    return v;
}

RowVector unit_direction(std::mt19937_64& rng, Eigen::Index d) {
    RowVector v = gaussian_row(rng, d);
    while (v.norm() == 0.0) v = gaussian_row(rng, d);
    return v / v.norm();
}

void write_row(std::ostream& out, std::size_t index, int label, const RowVector& features) {
    out << index << ',' << label;
    for (Eigen::Index j = 0; j < features.size(); ++j) out << ',' << features(j);
    out << '\n';
}

void write_header(std::ostream& out, Eigen::Index d) {
    out << "index,label";
    for (Eigen::Index j = 0; j < d; ++j) out << ",feature_" << j;
    out << '\n';
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

TaskPair make_task(std::uint64_t seed, int n_classes, int n_per_class, Eigen::Index d_image_in,
                   Eigen::Index d_text_in, double separation, const TaskGeometry& geometry,
                   const std::string& name) {
    const double noise = geometry.noise;
    if (n_classes < 1 || n_per_class < 1 || d_image_in < 1 || d_text_in < 1) {
        throw ValueError("make_task: class count, samples per class and dimensions must be >= 1");
    }
    if (!(separation >= 0.0) || !(noise >= 0.0)) {
        throw ValueError("make_task: separation and noise must be non-negative");
    }
    if (!std::isfinite(geometry.offset)) throw ValueError("make_task: offset must be finite");
    std::mt19937_64 axis_rng(geometry.axis_seed);
    const RowVector offset = unit_direction(axis_rng, d_image_in) * geometry.offset;
    std::mt19937_64 rng(seed);
    const int n_train = n_per_class - n_per_class / 5;
    const int n_test = n_per_class - n_train;

    Matrix prototypes(n_classes, d_image_in);
    Matrix texts(n_classes, d_text_in);
    for (int c = 0; c < n_classes; ++c) {
        prototypes.row(c) = unit_direction(rng, d_image_in) * separation;
        std::mt19937_64 text_rng(derive_seed(seed ^ kTextStream, static_cast<std::uint64_t>(c)));
        texts.row(c) = gaussian_row(text_rng, d_text_in);
    }

    // samples[c][i], drawn class by class.
    std::vector<Matrix> samples(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) {
        Matrix& block = samples[static_cast<std::size_t>(c)];
        block.resize(n_per_class, d_image_in);
        for (int i = 0; i < n_per_class; ++i) {
            block.row(i) = prototypes.row(c) + offset + gaussian_row(rng, d_image_in, noise);
        }
    }

    auto assemble = [&](int first, int count, Split split) {
        TaskDataset ds;
        ds.name = name;
        ds.split = split;
        ds.class_prototypes = texts;
        ds.images.resize(static_cast<Eigen::Index>(count) * n_classes, d_image_in);
        Eigen::Index row = 0;
        for (int i = first; i < first + count; ++i) {
            for (int c = 0; c < n_classes; ++c) {
                ds.images.row(row++) = samples[static_cast<std::size_t>(c)].row(i);
                ds.labels.push_back(c);
            }
        }
        return ds;
    };
    return {assemble(0, n_train, Split::Train), assemble(n_train, n_test, Split::Test)};
}

ReferenceSet make_reference_set(std::uint64_t seed, std::size_t size, Eigen::Index d_image_in,
                                Eigen::Index d_text_in, const ReferenceWorld& world,
                                const std::string& name) {
    if (size < 1) throw ValueError("make_reference_set: size must be >= 1");
    if (world.concepts < 1) throw ValueError("make_reference_set: world needs >= 1 concept");
    if (d_image_in < 1 || d_text_in < 1) {
        throw ValueError("make_reference_set: dimensions must be >= 1");
    }
    std::mt19937_64 world_rng(world.seed);
    Matrix prototypes(world.concepts, d_image_in);
    Matrix texts(world.concepts, d_text_in);
    for (int c = 0; c < world.concepts; ++c) {
        prototypes.row(c) = unit_direction(world_rng, d_image_in) * world.separation;
        texts.row(c) = gaussian_row(world_rng, d_text_in);
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, world.concepts - 1);
    ReferenceSet set;
    set.name = name;
    const auto rows = static_cast<Eigen::Index>(size);
    set.images.resize(rows, d_image_in);
    set.texts.resize(rows, d_text_in);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const int c = pick(rng);
        set.concepts.push_back(c);
        set.images.row(i) = prototypes.row(c) + gaussian_row(rng, d_image_in);
        set.texts.row(i) = texts.row(c) + gaussian_row(rng, d_text_in, world.text_noise);
    }
    return set;
}

std::vector<TaskDataset> split_cil(const TaskDataset& task, int n_splits) {
    const int classes = static_cast<int>(task.num_classes());
    if (n_splits < 1 || n_splits > classes) {
        throw ValueError("split_cil: cannot split " + std::to_string(classes) + " classes into " +
                         std::to_string(n_splits) + " tasks");
    }
    std::vector<TaskDataset> out;
    int first = 0;
    for (int s = 0; s < n_splits; ++s) {
        const int count = classes / n_splits + (s < classes % n_splits ? 1 : 0);
        TaskDataset part;
        part.name = n_splits == 1 ? task.name : task.name + "/" + std::to_string(s);
        part.split = task.split;
        part.class_offset = task.class_offset + first;
        part.class_prototypes = task.class_prototypes.middleRows(first, count);
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < task.labels.size(); ++i) {
            const int label = task.labels[i];
            if (label >= first && label < first + count) {
                rows.push_back(static_cast<Eigen::Index>(i));
                part.labels.push_back(label - first);
            }
        }
        part.images = task.images(rows, Eigen::all);
        out.push_back(std::move(part));
        first += count;
    }
    return out;
}

ReferenceSet as_pairs(const TaskDataset& task) {
    ReferenceSet set;
    set.name = task.name;
    set.images = task.images;
    set.texts.resize(static_cast<Eigen::Index>(task.size()), task.class_prototypes.cols());
    for (std::size_t i = 0; i < task.size(); ++i) {
        set.texts.row(static_cast<Eigen::Index>(i)) = task.class_prototypes.row(task.labels[i]);
        set.concepts.push_back(task.labels[i] + task.class_offset);
    }
    return set;
}

void write_dataset_csv(std::ostream& out, const TaskDataset& task) {
    const auto old_precision = out.precision(17);
    write_header(out, task.images.cols());
    for (std::size_t i = 0; i < task.size(); ++i) {
        write_row(out, i, task.labels[i] + task.class_offset,
                  task.images.row(static_cast<Eigen::Index>(i)));
    }
    out.precision(old_precision);
}

void write_dataset_csv(std::ostream& out, const ReferenceSet& set) {
    const auto old_precision = out.precision(17);
    write_header(out, set.images.cols());
    for (std::size_t i = 0; i < set.size(); ++i) {
        write_row(out, i, set.concepts[i], set.images.row(static_cast<Eigen::Index>(i)));
    }
    out.precision(old_precision);
}

}  // namespace gnsp
