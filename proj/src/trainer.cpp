#include "gnsp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gnsp {

namespace {

constexpr std::size_t kCaptureChunk = 256;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// Without-replacement sampling that reshuffles at every epoch boundary.
class EpochSampler {
public:
    EpochSampler(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(rng) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        reshuffle();
    }

    std::vector<Eigen::Index> next(std::size_t count) {
        std::vector<Eigen::Index> batch;
        batch.reserve(count);
        while (batch.size() < count) {
            if (cursor_ == order_.size()) reshuffle();
            batch.push_back(static_cast<Eigen::Index>(order_[cursor_++]));
        }
        return batch;
    }

private:
    void reshuffle() {
        // Fisher-Yates with raw engine draws; std::shuffle's draw pattern is
        // implementation-defined.
        for (std::size_t i = order_.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng_() % i);
            std::swap(order_[i - 1], order_[j]);
        }
        cursor_ = 0;
    }

    std::vector<std::size_t> order_;
    std::mt19937_64& rng_;
    std::size_t cursor_ = 0;
};

Matrix rows_of(const Matrix& m, const std::vector<Eigen::Index>& rows) {
    return m(rows, Eigen::all);
}

std::vector<int> labels_of(const std::vector<int>& labels, const std::vector<Eigen::Index>& rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(labels[static_cast<std::size_t>(r)]);
    return out;
}

bool all_finite(const Gradients& g) {
    return std::all_of(g.d_weight.begin(), g.d_weight.end(),
                       [](const Matrix& m) { return m.allFinite(); });
}

struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::size_t step = 0;

    explicit AdamState(const EncoderStack& stack) {
        for (const auto& layer : stack.layers) {
            m.push_back(Matrix::Zero(layer.d_in(), layer.d_out()));
            v.push_back(Matrix::Zero(layer.d_in(), layer.d_out()));
        }
    }

    // Turns raw gradients into the per-step parameter delta (before the learning rate).
    Gradients direction(const Gradients& g) {
        ++step;
        const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
        Gradients out = g;
        for (std::size_t k = 0; k < g.d_weight.size(); ++k) {
            m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g.d_weight[k];
            v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g.d_weight[k].cwiseAbs2();
            out.d_weight[k] = (m[k] / c1).array() / ((v[k] / c2).array().sqrt() + kAdamEps);
        }
        return out;
    }
};

void apply_update(EncoderStack& stack, const Gradients& delta, double learning_rate) {
    for (std::size_t k = 0; k < stack.layers.size(); ++k) {
        if (!stack.layers[k].trainable) continue;
        stack.layers[k].weight -= learning_rate * delta.d_weight[k];
    }
}

}  // namespace

std::string to_string(Method method) {
    switch (method) {
        case Method::GnspFull: return "GNSP_FULL";
        case Method::GnspOnly: return "GNSP_ONLY";
        case Method::CdOnly: return "CD_ONLY";
        case Method::PlainFinetune: return "PLAIN_FINETUNE";
    }
    return "?";
}

Method parse_method(const std::string& text) {
    for (auto m : {Method::GnspFull, Method::GnspOnly, Method::CdOnly, Method::PlainFinetune}) {
        if (text == to_string(m)) return m;
    }
    throw ValueError("unknown method '" + text +
                     "' (expected GNSP_FULL, GNSP_ONLY, CD_ONLY or PLAIN_FINETUNE)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& text) {
    if (text == "sgd") return OptimizerKind::Sgd;
    if (text == "adam") return OptimizerKind::Adam;
    throw ValueError("unknown optimizer '" + text + "' (expected sgd or adam)");
}

void validate(const TrainerConfig& cfg) {
    if (cfg.batch_size < 1) throw ValueError("batch_size must be >= 1");
    if (cfg.capture_cap < 1) throw ValueError("capture_cap must be >= 1");
    if (!(cfg.rho >= 0.0 && cfg.rho <= 1.0)) throw ValueError("rho must lie in [0, 1]");
    if (!(cfg.learning_rate >= 0.0)) throw ValueError("learning_rate must be >= 0");
    if (!(cfg.lambda_cd >= 0.0) || !(cfg.beta_map >= 0.0)) {
        throw ValueError("lambda_cd and beta_map must be >= 0");
    }
}

bool uses_projection(Method method) {
    return method == Method::GnspFull || method == Method::GnspOnly;
}

LossWeights effective_weights(const TrainerConfig& cfg) {
    switch (cfg.method) {
        case Method::GnspFull: return {cfg.lambda_cd, cfg.beta_map};
        case Method::CdOnly: return {cfg.lambda_cd, 0.0};
        case Method::GnspOnly:
        case Method::PlainFinetune: return {0.0, 0.0};
    }
    return {0.0, 0.0};
}

DualEncoder make_dual_encoder(const ModelSpec& spec) {
    DualEncoder model;
    model.image_encoder = init_stack(spec.image_dims, Activation::Gelu, derive_seed(spec.seed, 0));
    model.text_encoder = init_stack(spec.text_dims, Activation::Gelu, derive_seed(spec.seed, 1));
    model.text_encoder.set_trainable(false);
    model.temperature = spec.temperature;
    validate(model);
    return model;
}

DualEncoder pretrain(DualEncoder model, const ReferenceSet& data, const PretrainConfig& cfg) {
    if (data.size() == 0) throw ValueError("pretrain: empty data");
    std::mt19937_64 rng(cfg.seed);
    EpochSampler sampler(data.size(), rng);
    const Matrix text_emb = model.embed_texts(data.texts);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const auto rows = sampler.next(std::min(cfg.batch_size, data.size()));
        auto fwd = forward(model.image_encoder, rows_of(data.images, rows), true);
        const LossOutput loss = map_loss(fwd.embeddings, rows_of(text_emb, rows), model.temperature);
        if (!std::isfinite(loss.value)) throw TrainingError("pretrain: non-finite loss", it);
        const Gradients g = backward(model.image_encoder, *fwd.trace, loss.d_image_embeddings);
        apply_update(model.image_encoder, g, cfg.learning_rate);
    }
    return model;
}

std::vector<Matrix> capture_grams(const EncoderStack& stack, const std::vector<std::size_t>& layer_ids,
                                  const Matrix& images, std::size_t capture_cap) {
    const auto rows = std::min<Eigen::Index>(images.rows(), static_cast<Eigen::Index>(capture_cap));
    if (rows == 0) throw ValueError("capture_grams: no rows to capture");
    std::vector<GramBuilder> builders;
    for (auto id : layer_ids) builders.emplace_back(stack.layers.at(id).d_in());
    for (Eigen::Index start = 0; start < rows; start += static_cast<Eigen::Index>(kCaptureChunk)) {
        const auto count = std::min<Eigen::Index>(static_cast<Eigen::Index>(kCaptureChunk), rows - start);
        const auto fwd = forward(stack, images.middleRows(start, count), true);
        for (std::size_t l = 0; l < layer_ids.size(); ++l) {
            builders[l].add(fwd.trace->layer_inputs[layer_ids[l]]);
        }
    }
    std::vector<Matrix> grams;
    for (const auto& b : builders) grams.push_back(b.normalized());
    return grams;
}

ContinualState init_state(const DualEncoder& initial, const ReferenceSet& reference,
                          const TrainerConfig& cfg) {
    validate(cfg);
    validate(initial);
    ContinualState state{initial, initial, GramAccumulator::empty_for(initial.image_encoder),
                         std::nullopt, 0, std::mt19937_64(cfg.seed)};
    if (cfg.include_reference_gram) {
        state.gram = accumulate(state.gram, capture_grams(initial.image_encoder, state.gram.layer_ids,
                                                          reference.images, cfg.capture_cap));
        state.projector = build_projector(state.gram, cfg.rho);
    }
    return state;
}

ContinualState train_task(ContinualState state, const TaskDataset& task,
                          const ReferenceSet& reference, const TrainerConfig& cfg) {
    validate(cfg);
    if (task.size() == 0) throw ValueError("train_task: empty task '" + task.name + "'");
    if (task.split != Split::Train) {
        throw ValueError("train_task: '" + task.name + "' is not a training split");
    }
    const LossWeights weights = effective_weights(cfg);
    const bool regularized = weights.lambda_cd > 0.0 || weights.beta_map > 0.0;
    if (regularized && reference.size() == 0) throw ValueError("train_task: empty reference set");

    DualEncoder& model = state.model;
    const double tau = model.temperature;
    const Matrix class_text = model.embed_texts(task.class_prototypes);
    Matrix student_ref_text;
    Matrix teacher_ref_image;
    Matrix teacher_ref_text;
    if (regularized) {
        student_ref_text = model.embed_texts(reference.texts);
        teacher_ref_image = state.teacher.embed_images(reference.images);
        teacher_ref_text = state.teacher.embed_texts(reference.texts);
    }
    const bool project = uses_projection(cfg.method) && state.projector.has_value();

    EpochSampler task_sampler(task.size(), state.rng);
    std::optional<EpochSampler> ref_sampler;
    if (regularized) ref_sampler.emplace(reference.size(), state.rng);
    std::optional<AdamState> adam;
    if (cfg.optimizer == OptimizerKind::Adam) adam.emplace(model.image_encoder);

    const std::size_t task_batch = std::min(cfg.batch_size, task.size());
    for (std::size_t it = 0; it < cfg.iterations_per_task; ++it) {
        const auto rows = task_sampler.next(task_batch);
        auto task_fwd = forward(model.image_encoder, rows_of(task.images, rows), true);
        const LossOutput ce =
            classification_loss(task_fwd.embeddings, class_text, labels_of(task.labels, rows), tau);
        double objective = ce.value;
        Gradients grads = backward(model.image_encoder, *task_fwd.trace, ce.d_image_embeddings);

        if (regularized) {
            const auto ref_rows = ref_sampler->next(std::min(cfg.batch_size, reference.size()));
            auto ref_fwd = forward(model.image_encoder, rows_of(reference.images, ref_rows), true);
            const Matrix ref_text = rows_of(student_ref_text, ref_rows);
            LossOutput cd;
            LossOutput map;
            if (weights.lambda_cd > 0.0) {
                cd = cd_loss(rows_of(teacher_ref_image, ref_rows), rows_of(teacher_ref_text, ref_rows),
                             ref_fwd.embeddings, ref_text, tau);
            } else {
                cd.d_image_embeddings = Matrix::Zero(ref_fwd.embeddings.rows(), ref_fwd.embeddings.cols());
            }
            if (weights.beta_map > 0.0) {
                map = map_loss(ref_fwd.embeddings, ref_text, tau);
            } else {
                map.d_image_embeddings = Matrix::Zero(ref_fwd.embeddings.rows(), ref_fwd.embeddings.cols());
            }
            const TotalLoss total = total_loss(ce, cd, map, weights);
            objective = total.value;
            grads += backward(model.image_encoder, *ref_fwd.trace,
                              total.cd.d_image_embeddings + total.map.d_image_embeddings);
        }
        if (!std::isfinite(objective) || !all_finite(grads)) {
            throw TrainingError("train_task: non-finite loss or gradient on task '" + task.name +
                                    "' at iteration " + std::to_string(it),
                                it);
        }

        Gradients delta = adam ? adam->direction(grads) : std::move(grads);
        if (project) delta = project_update(*state.projector, delta);
        apply_update(model.image_encoder, delta, cfg.learning_rate);
    }

    state.gram = accumulate(state.gram, capture_grams(model.image_encoder, state.gram.layer_ids,
                                                      task.images, cfg.capture_cap));
    state.projector = build_projector(state.gram, cfg.rho);
    ++state.task_index;
    return state;
}

RunResult run_sequence(const DualEncoder& initial, const std::vector<TaskPair>& tasks,
                       const ReferenceSet& reference, const std::vector<ReferenceSet>& probes,
                       const TrainerConfig& cfg, const CheckpointObserver& observer) {
    if (tasks.empty()) throw ValueError("run_sequence: no tasks");
    const auto count = static_cast<Eigen::Index>(tasks.size());
    RunResult result{init_state(initial, reference, cfg), {}, {}};
    result.accuracy.grid = Matrix::Zero(count + 1, count);
    for (const auto& t : tasks) result.accuracy.task_names.push_back(t.train.name);

    auto checkpoint = [&](std::size_t index) {
        const DualEncoder& model = result.final_state.model;
        for (Eigen::Index j = 0; j < count; ++j) {
            result.accuracy.grid(static_cast<Eigen::Index>(index), j) =
                evaluate_accuracy(model, tasks[static_cast<std::size_t>(j)].test);
        }
        result.gaps = track_gap(model, probes, index, std::move(result.gaps));
        if (observer) observer(index, result.final_state);
    };

    checkpoint(0);
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        result.final_state =
            train_task(std::move(result.final_state), tasks[t].train, reference, cfg);
        checkpoint(t + 1);
    }
    return result;
}

}  // namespace gnsp
