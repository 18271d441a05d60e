#ifndef GNSP_PROJECTION_HPP
#define GNSP_PROJECTION_HPP

// Null-space gradient projection: normalized gram matrices of layer inputs,
// accumulated over tasks, and the projector onto the (approximate) common
// null space of everything absorbed so far.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "gnsp/encoder.hpp"
#include "gnsp/linalg.hpp"

namespace gnsp {

// X^T X / ||X^T X||_F. Throws ValueError for an all-zero X.
Matrix gram_from_activations(const Matrix& x);

// Streams X^T X over batches without materializing X; normalize once at the end.
class GramBuilder {
public:
    explicit GramBuilder(Eigen::Index dim);
    void add(const Matrix& rows);
    Matrix normalized() const;
    std::size_t rows_seen() const { return rows_seen_; }

private:
    Matrix sum_;
    std::size_t rows_seen_ = 0;
};

struct GramAccumulator {
    std::vector<Matrix> per_layer;     // accumulated M-hat per tracked layer
    std::vector<std::size_t> layer_ids;  // encoder layer index of each entry
    std::size_t tasks_absorbed = 0;

    static GramAccumulator empty_for(const EncoderStack& stack);
    std::vector<Eigen::Index> layer_dims() const;
};

// Adds one task's unit-norm grams (one per tracked layer).
GramAccumulator accumulate(const GramAccumulator& acc, const std::vector<Matrix>& layer_grams);

// Number k of trailing eigenvalues forming the null block: the largest k with
// sum of the k smallest <= rho * total. k = d when the total is zero.
std::size_t adaptive_split(const EigenSpectrum<double>& spectrum, double rho);

struct Projector {
    std::vector<Matrix> per_layer;  // P_l = V2 V2^T
    std::vector<std::size_t> layer_ids;
    std::vector<std::size_t> null_dims;
    double rho_used = 0.0;
};

Projector build_projector(const GramAccumulator& acc, double rho);

// P_l G_l for every tracked layer; other layers pass through.
Gradients project_update(const Projector& p, const Gradients& grads);

// Per-layer eigenvalues of the accumulated gram and the split chosen at rho.
struct LayerSpectrum {
    std::size_t layer_id = 0;
    Vector eigenvalues;
    std::size_t null_dim = 0;
};

std::vector<LayerSpectrum> accumulator_spectra(const GramAccumulator& acc, double rho);

// CSV `layer,index,eigenvalue,selected`.
void write_spectra_csv(std::ostream& out, const std::vector<LayerSpectrum>& spectra);

// Residuals of the projector algebra for one layer.
struct ProjectorResiduals {
    double idempotence = 0.0;    // ||P^2 - P||_F
    double symmetry = 0.0;       // max |P - P^T|
    double trace_error = 0.0;    // |trace(P) - null_dim|
    double eigen_binary = 0.0;   // max distance of an eigenvalue from {0, 1}
};

ProjectorResiduals projector_residuals(const Matrix& p, std::size_t null_dim);

}  // namespace gnsp

#endif  // GNSP_PROJECTION_HPP
