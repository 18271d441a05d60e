#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>

#include "cli.hpp"
#include "gnsp/trainer.hpp"

namespace gnsp::cli {

namespace {

struct Check {
    std::string name;
    double value;
    double bound;
};

class Report {
public:
    explicit Report(std::ostream& out) : out_(out) {}

    void group(const std::string& name, const std::vector<Check>& checks) {
        bool ok = true;
        for (const auto& c : checks) ok = ok && c.value <= c.bound;
        out_ << (ok ? "PASS " : "FAIL ") << name << '\n';
        for (const auto& c : checks) {
            char line[160];
            std::snprintf(line, sizeof line, "    %-28s %.3e  (bound %.1e)%s\n", c.name.c_str(), c.value,
                          c.bound, c.value <= c.bound ? "" : "  VIOLATED");
            out_ << line;
        }
        all_ok_ = all_ok_ && ok;
    }

    bool ok() const { return all_ok_; }

private:
    std::ostream& out_;
    bool all_ok_ = true;
};

Matrix gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

// Random accumulator of up to three absorbed grams of mixed rank.
GramAccumulator random_accumulator(std::mt19937_64& rng, Eigen::Index d) {
    GramAccumulator acc;
    acc.layer_ids = {0};
    acc.per_layer = {Matrix::Zero(d, d)};
    std::uniform_int_distribution<int> tasks(1, 3);
    std::uniform_int_distribution<Eigen::Index> rows(1, 2 * d);
    const int n = tasks(rng);
    for (int t = 0; t < n; ++t) acc = accumulate(acc, {gram_from_activations(gaussian(rng, rows(rng), d))});
    return acc;
}

std::vector<Check> projector_algebra(bool perturb) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<Eigen::Index> dim(2, 48);
    std::uniform_real_distribution<double> rho(0.0, 1.0);
    double idem = 0.0, sym = 0.0, trace = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        const auto acc = random_accumulator(rng, dim(rng));
        const auto p = build_projector(acc, rho(rng));
        Matrix m = p.per_layer[0];
        if (perturb) m *= 1.0 + 1e-4;
        const auto r = projector_residuals(m, p.null_dims[0]);
        idem = std::max(idem, r.idempotence);
        sym = std::max(sym, r.symmetry);
        trace = std::max(trace, r.trace_error);
    }
    return {{"idempotence ||P^2-P||_F", idem, 1e-8},
            {"symmetry max|P-P^T|", sym, 1e-8},
            {"trace |tr(P)-null_dim|", trace, 1e-6}};
}

std::vector<Check> null_space_exactness() {
    std::mt19937_64 rng(12);
    double worst = 0.0;
    double dim_error = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::Index d = 16;
        const Eigen::Index r = 1 + trial % 12;
        const Matrix x = matmul(gaussian(rng, 40, r), gaussian(rng, r, d));
        GramAccumulator acc{{Matrix::Zero(d, d)}, {0}, 0};
        acc = accumulate(acc, {gram_from_activations(x)});
        const auto p = build_projector(acc, 0.0);
        const Matrix g = gaussian(rng, d, 8);
        const Matrix update = matmul(p.per_layer[0], g);
        worst = std::max(worst, frobenius_norm(Matrix(matmul(x, update))) / (frobenius_norm(x) * frobenius_norm(g)));
        dim_error = std::max(dim_error, std::abs(static_cast<double>(p.null_dims[0]) - static_cast<double>(d - r)));
    }
    return {{"||X P G|| / (||X|| ||G||)", worst, 1e-8}, {"|null_dim - (d - r)|", dim_error, 0.0}};
}

double relative_error(const Gradients& a, const Gradients& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.d_weight.size(); ++k) {
        num += (a.d_weight[k] - b.d_weight[k]).squaredNorm();
        den += a.d_weight[k].squaredNorm() + b.d_weight[k].squaredNorm();
    }
    return den == 0.0 ? 0.0 : std::sqrt(num / den);
}

std::vector<Check> gradient_checks() {
    std::mt19937_64 rng(13);
    EncoderStack img = init_stack({5, 6, 4}, Activation::Gelu, 21);
    const EncoderStack txt = init_stack({3, 4}, Activation::Gelu, 22);
    const EncoderStack teacher = init_stack({5, 6, 4}, Activation::Gelu, 23);
    const Matrix x = gaussian(rng, 4, 5);
    const Matrix t = gaussian(rng, 4, 3);
    const Matrix classes = gaussian(rng, 3, 3);
    const std::vector<int> labels{0, 2, 1, 2};
    const double tau = 0.5;
    const Matrix text_emb = forward(txt, t, false).embeddings;
    const Matrix class_emb = forward(txt, classes, false).embeddings;
    const Matrix teacher_img = forward(teacher, x, false).embeddings;

    using LossFn = std::function<LossOutput(const Matrix&)>;
    const std::vector<std::pair<std::string, LossFn>> losses = {
        {"CE", [&](const Matrix& e) { return classification_loss(e, class_emb, labels, tau); }},
        {"CD", [&](const Matrix& e) { return cd_loss(teacher_img, text_emb, e, text_emb, tau); }},
        {"MAP", [&](const Matrix& e) { return map_loss(e, text_emb, tau); }},
        {"total", [&](const Matrix& e) {
             const auto ce = classification_loss(e, class_emb, labels, tau);
             const auto cd = cd_loss(teacher_img, text_emb, e, text_emb, tau);
             const auto mp = map_loss(e, text_emb, tau);
             const auto total = total_loss(ce, cd, mp, {});
             return LossOutput{total.value,
                               ce.d_image_embeddings + cd.d_image_embeddings + 0.75 * mp.d_image_embeddings,
                               Matrix()};
         }},
    };
    std::vector<Check> checks;
    for (const auto& [name, fn] : losses) {
        const auto fwd = forward(img, x, true);
        const auto analytic = backward(img, *fwd.trace, fn(fwd.embeddings).d_image_embeddings);
        const auto numeric =
            finite_diff_grad(img, [&](const EncoderStack& s) { return fn(forward(s, x, false).embeddings).value; }, 1e-5);
        checks.push_back({name + " relative error", relative_error(analytic, numeric), 1e-4});
    }
    return checks;
}

std::vector<Check> output_invariance() {
    const ModelSpec spec;
    const DualEncoder model = make_dual_encoder(spec);
    const Eigen::Index d_in = spec.image_dims.front();
    auto first = make_task(31, 3, 10, d_in, spec.text_dims.front(), 4.0);
    const auto second = make_task(32, 3, 10, d_in, spec.text_dims.front(), 4.0);
    const auto reference = make_reference_set(33, 64, d_in, spec.text_dims.front());
    TrainerConfig cfg;
    cfg.rho = 0.0;
    cfg.iterations_per_task = 60;
    cfg.batch_size = 16;
    cfg.capture_cap = 20;  // < every layer's input width, so the grams are rank deficient
    cfg.method = Method::GnspFull;
    ContinualState state = init_state(model, reference, cfg);
    state = train_task(std::move(state), first.train, reference, cfg);
    const Matrix probe = first.train.images.topRows(static_cast<Eigen::Index>(cfg.capture_cap));
    const auto before = forward(state.model.image_encoder, probe, true);
    state = train_task(std::move(state), second.train, reference, cfg);
    const auto after = forward(state.model.image_encoder, probe, true);
    double worst = 0.0;
    for (std::size_t l = 0; l < before.trace->preactivations.size(); ++l) {
        worst = std::max(worst, (before.trace->preactivations[l] - after.trace->preactivations[l]).cwiseAbs().maxCoeff());
    }
    return {{"max |dO_l| on captured rows", worst, 1e-8}};
}

std::vector<Check> adaptive_split_rule() {
    EigenSpectrum<double> s;
    s.values = Vector{{10.0, 1.0, 0.5, 0.5}};
    s.vectors = Matrix::Identity(4, 4);
    const double k = static_cast<double>(adaptive_split(s, 0.15));
    const double k0 = static_cast<double>(adaptive_split(s, 0.0));
    const double k1 = static_cast<double>(adaptive_split(s, 1.0));
    return {{"|k(0.15) - 2|", std::abs(k - 2.0), 0.0},
            {"|k(0) - 0|", std::abs(k0), 0.0},
            {"|k(1) - 4|", std::abs(k1 - 4.0), 0.0}};
}

std::vector<Check> distillation_identity() {
    std::mt19937_64 rng(14);
    const Matrix a = l2_normalize_rows(gaussian(rng, 8, 4));
    const Matrix b = l2_normalize_rows(gaussian(rng, 8, 4));
    const double same = cd_loss(a, b, a, b, 0.07).value;
    const double cd1 = std::abs(cd_loss(a.topRows(1), b.topRows(1), b.topRows(1), a.topRows(1), 0.07).value);
    const double map1 = std::abs(map_loss(a.topRows(1), b.topRows(1), 0.07).value);
    return {{"L_CD(student == teacher)", same, 1e-10}, {"|L_CD| at B = 1", cd1, 0.0}, {"|L_MAP| at B = 1", map1, 0.0}};
}

std::vector<Check> checkpoint_round_trip() {
    const DualEncoder model = make_dual_encoder(ModelSpec{});
    const auto task = make_task(41, 2, 10, 32, 16, 3.0);
    const auto reference = make_reference_set(42, 32, 32, 16);
    TrainerConfig cfg;
    cfg.iterations_per_task = 5;
    cfg.batch_size = 8;
    ContinualState state = train_task(init_state(model, reference, cfg), task.train, reference, cfg);
    auto bytes = serialize_state(state);
    const double lossless = bitwise_equal(state, deserialize_state(bytes)) ? 0.0 : 1.0;
    bytes[bytes.size() / 2] ^= 0x01;
    double detected = 1.0;
    try {
        deserialize_state(bytes);
    } catch (const CheckpointChecksumError&) {
        detected = 0.0;
    }
    return {{"round-trip mismatch", lossless, 0.0}, {"corruption undetected", detected, 0.0}};
}

}  // namespace

int cmd_selftest(const SelftestOptions& options, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    Report report(out);
    report.group("projector algebra", projector_algebra(options.perturb_projector));
    report.group("null-space exactness", null_space_exactness());
    report.group("gradient checks", gradient_checks());
    report.group("output invariance", output_invariance());
    report.group("adaptive split", adaptive_split_rule());
    report.group("distillation identity", distillation_identity());
    report.group("checkpoint", checkpoint_round_trip());
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char line[80];
    std::snprintf(line, sizeof line, "%s in %.2f s\n", report.ok() ? "all checks passed" : "selftest FAILED", seconds);
    out << line;
    return report.ok() ? kExitOk : kExitFailure;
}

}  // namespace gnsp::cli
