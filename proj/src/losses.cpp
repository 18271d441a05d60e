#include "gnsp/losses.hpp"

#include <cmath>
#include <string>
#include <tuple>

namespace gnsp {

namespace {

constexpr double kNormEps = 1e-12;

void check_temperature(double temperature) {
    if (!(temperature > 0.0)) throw ValueError("temperature must be positive");
}

// d(x/|x|) applied row-wise to the gradient w.r.t. the normalized rows.
Matrix normalize_backward(const Matrix& raw, const Matrix& d_unit) {
    Matrix out(raw.rows(), raw.cols());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        const double norm = raw.row(i).norm();
        if (norm < kNormEps) {
            out.row(i).setZero();
            continue;
        }
        const RowVector u = raw.row(i) / norm;
        out.row(i) = (d_unit.row(i) - d_unit.row(i).dot(u) * u) / norm;
    }
    return out;
}

}  // namespace

std::pair<Matrix, Matrix> cosine_sim_backward(const Matrix& a, const Matrix& b,
                                              const Matrix& d_sim) {
    const Matrix a_unit = l2_normalize_rows(a, kNormEps);
    const Matrix b_unit = l2_normalize_rows(b, kNormEps);
    return {normalize_backward(a, matmul(d_sim, b_unit)),
            normalize_backward(b, matmul(d_sim.transpose(), a_unit))};
}

LossOutput classification_loss(const Matrix& image_emb, const Matrix& class_text_emb,
                               const std::vector<int>& labels, double temperature) {
    check_temperature(temperature);
    const auto batch = image_emb.rows();
    if (batch == 0 || labels.empty()) throw ValueError("classification_loss: empty batch");
    if (static_cast<Eigen::Index>(labels.size()) != batch) {
        throw DimensionError("classification_loss: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(batch) + " images");
    }
    const auto classes = class_text_emb.rows();
    for (int label : labels) {
        if (label < 0 || label >= classes) {
            throw ValueError("classification_loss: label " + std::to_string(label) +
                             " outside [0, " + std::to_string(classes) + ")");
        }
    }
    const Matrix logits = cosine_sim_matrix(image_emb, class_text_emb) / temperature;
    const Matrix log_p = log_softmax_rows(logits);

    LossOutput out;
    Matrix d_logits = log_p.array().exp();
    for (Eigen::Index i = 0; i < batch; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        out.value -= log_p(i, y);
        d_logits(i, y) -= 1.0;
    }
    const double inv_batch = 1.0 / static_cast<double>(batch);
    out.value *= inv_batch;
    const Matrix d_sim = d_logits * (inv_batch / temperature);
    std::tie(out.d_image_embeddings, out.d_text_embeddings) =
        cosine_sim_backward(image_emb, class_text_emb, d_sim);
    return out;
}

LossOutput cd_loss(const Matrix& teacher_img, const Matrix& teacher_txt, const Matrix& student_img,
                   const Matrix& student_txt, double temperature) {
    check_temperature(temperature);
    const auto batch = student_img.rows();
    if (teacher_img.rows() != batch || teacher_txt.rows() != batch || student_txt.rows() != batch) {
        throw DimensionError("cd_loss: batch sizes differ (teacher " +
                             std::to_string(teacher_img.rows()) + "/" +
                             std::to_string(teacher_txt.rows()) + ", student " +
                             std::to_string(batch) + "/" + std::to_string(student_txt.rows()) + ")");
    }
    const Matrix teacher_logits = cosine_sim_matrix(teacher_img, teacher_txt) / temperature;
    const Matrix student_logits = cosine_sim_matrix(student_img, student_txt) / temperature;

    LossOutput out;
    out.value = kl_rows(teacher_logits, student_logits) +
                kl_rows(teacher_logits.transpose(), student_logits.transpose());

    // d KL(p || softmax(z)) / dz = softmax(z) - p, for rows and for columns.
    Matrix d_logits = softmax_rows(student_logits) - softmax_rows(teacher_logits);
    d_logits += (softmax_rows(student_logits.transpose()) -
                 softmax_rows(teacher_logits.transpose()))
                    .transpose();
    std::tie(out.d_image_embeddings, out.d_text_embeddings) =
        cosine_sim_backward(student_img, student_txt, d_logits / temperature);
    return out;
}

LossOutput map_loss(const Matrix& student_img, const Matrix& student_txt, double temperature) {
    check_temperature(temperature);
    const auto batch = student_img.rows();
    if (batch == 0) throw ValueError("map_loss: empty batch");
    if (student_txt.rows() != batch) {
        throw DimensionError("map_loss: " + std::to_string(batch) + " images vs " +
                             std::to_string(student_txt.rows()) + " texts");
    }
    const Matrix logits = cosine_sim_matrix(student_img, student_txt) / temperature;
    const Matrix log_rows = log_softmax_rows(logits);
    const Matrix log_cols = log_softmax_rows(logits.transpose());

    const double inv_batch = 1.0 / static_cast<double>(batch);
    LossOutput out;
    out.value = 0.0 - (log_rows.trace() + log_cols.trace()) * inv_batch;

    Matrix d_logits = Matrix(log_rows.array().exp()) + Matrix(log_cols.array().exp()).transpose();
    d_logits.diagonal().array() -= 2.0;
    d_logits *= inv_batch;
    std::tie(out.d_image_embeddings, out.d_text_embeddings) =
        cosine_sim_backward(student_img, student_txt, d_logits / temperature);
    return out;
}

TotalLoss total_loss(const LossOutput& ce, const LossOutput& cd, const LossOutput& map,
                     const LossWeights& weights) {
    if (weights.lambda_cd < 0.0 || weights.beta_map < 0.0) {
        throw ValueError("loss weights must be non-negative");
    }
    TotalLoss out;
    out.value = ce.value + weights.lambda_cd * cd.value + weights.beta_map * map.value;
    out.ce = ce;
    out.cd = {weights.lambda_cd * cd.value, weights.lambda_cd * cd.d_image_embeddings,
              weights.lambda_cd * cd.d_text_embeddings};
    out.map = {weights.beta_map * map.value, weights.beta_map * map.d_image_embeddings,
               weights.beta_map * map.d_text_embeddings};
    return out;
}

double modality_gap(const Matrix& image_emb, const Matrix& text_emb) {
    if (image_emb.rows() == 0) throw ValueError("modality_gap: no pairs");
    if (image_emb.rows() != text_emb.rows() || image_emb.cols() != text_emb.cols()) {
        throw DimensionError("modality_gap: unpaired inputs " + shape_of(image_emb) + " vs " +
                             shape_of(text_emb));
    }
    const Matrix a = l2_normalize_rows(image_emb, kNormEps);
    const Matrix b = l2_normalize_rows(text_emb, kNormEps);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) sum += a.row(i).dot(b.row(i));
    return sum / static_cast<double>(a.rows());
}

}  // namespace gnsp
