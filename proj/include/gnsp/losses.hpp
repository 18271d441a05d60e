#ifndef GNSP_LOSSES_HPP
#define GNSP_LOSSES_HPP

#include <cstddef>
#include <vector>

#include "gnsp/linalg.hpp"

namespace gnsp {

// A scalar objective and its exact gradient w.r.t. both embedding sets.
// Embeddings need not be unit length; every loss normalizes internally.
struct LossOutput {
    double value = 0.0;
    Matrix d_image_embeddings;
    Matrix d_text_embeddings;
};

struct LossWeights {
    double lambda_cd = 1.0;
    double beta_map = 0.75;
};

// Mean cross-entropy of the prompt-classification softmax over cos/temperature.
LossOutput classification_loss(const Matrix& image_emb, const Matrix& class_text_emb,
                               const std::vector<int>& labels, double temperature);

// Row-wise plus column-wise KL between teacher and student similarity
// distributions. Teacher inputs are constants.
LossOutput cd_loss(const Matrix& teacher_img, const Matrix& teacher_txt, const Matrix& student_img,
                   const Matrix& student_txt, double temperature);

// Symmetric in-batch InfoNCE, each direction averaged over the batch.
LossOutput map_loss(const Matrix& student_img, const Matrix& student_txt, double temperature);

// Combined objective. The three components live on different batches, so
// their gradients are scaled and carried separately.
struct TotalLoss {
    double value = 0.0;
    LossOutput ce;
    LossOutput cd;
    LossOutput map;
};

TotalLoss total_loss(const LossOutput& ce, const LossOutput& cd, const LossOutput& map,
                     const LossWeights& weights);

// Mean cosine similarity of index-paired embeddings.
double modality_gap(const Matrix& image_emb, const Matrix& text_emb);

// Chain rule through cosine_sim_matrix: given dL/dS for S = cos(a_i, b_j),
// returns (dL/da, dL/db).
std::pair<Matrix, Matrix> cosine_sim_backward(const Matrix& a, const Matrix& b,
                                              const Matrix& d_sim);

}  // namespace gnsp

#endif  // GNSP_LOSSES_HPP
