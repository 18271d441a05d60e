#include "gnsp/projection.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "gnsp/csv.hpp"

namespace gnsp {

namespace {

constexpr double kUnitNormTolerance = 1e-9;

}  // namespace

Matrix gram_from_activations(const Matrix& x) {
    if (x.rows() == 0 || x.cols() == 0) throw ValueError("gram_from_activations: empty matrix");
    GramBuilder builder(x.cols());
    builder.add(x);
    return builder.normalized();
}

GramBuilder::GramBuilder(Eigen::Index dim) : sum_(Matrix::Zero(dim, dim)) {}

void GramBuilder::add(const Matrix& rows) {
    if (rows.cols() != sum_.cols()) {
        throw DimensionError("GramBuilder: rows are " + shape_of(rows) + ", expected width " +
                             std::to_string(sum_.cols()));
    }
    sum_.noalias() += rows.transpose() * rows;
    rows_seen_ += static_cast<std::size_t>(rows.rows());
}

Matrix GramBuilder::normalized() const {
    const double norm = frobenius_norm(sum_);
    if (!(norm > 0.0)) {
        throw ValueError("gram matrix is zero; the Frobenius normalization is undefined");
    }
    Matrix out = sum_ / norm;
    // Exact symmetry; the product above is symmetric only up to rounding.
    return (out + out.transpose()) / 2.0;
}

GramAccumulator GramAccumulator::empty_for(const EncoderStack& stack) {
    GramAccumulator acc;
    for (std::size_t k = 0; k < stack.layers.size(); ++k) {
        if (!stack.layers[k].trainable) continue;
        const auto d = stack.layers[k].d_in();
        acc.per_layer.push_back(Matrix::Zero(d, d));
        acc.layer_ids.push_back(k);
    }
    return acc;
}

std::vector<Eigen::Index> GramAccumulator::layer_dims() const {
    std::vector<Eigen::Index> dims;
    dims.reserve(per_layer.size());
    for (const auto& m : per_layer) dims.push_back(m.rows());
    return dims;
}

GramAccumulator accumulate(const GramAccumulator& acc, const std::vector<Matrix>& layer_grams) {
    if (layer_grams.size() != acc.per_layer.size()) {
        throw DimensionError("accumulate: got " + std::to_string(layer_grams.size()) +
                             " grams for " + std::to_string(acc.per_layer.size()) + " layers");
    }
    GramAccumulator out = acc;
    for (std::size_t l = 0; l < layer_grams.size(); ++l) {
        const Matrix& g = layer_grams[l];
        if (g.rows() != acc.per_layer[l].rows() || g.cols() != acc.per_layer[l].cols()) {
            throw DimensionError("accumulate: layer " + std::to_string(l) + " gram is " +
                                 shape_of(g) + ", expected " + shape_of(acc.per_layer[l]));
        }
        const double norm = frobenius_norm(g);
        if (std::abs(norm - 1.0) > kUnitNormTolerance) {
            throw ValueError("accumulate: layer " + std::to_string(l) +
                             " gram is not Frobenius-normalized (norm " + std::to_string(norm) +
                             ")");
        }
        out.per_layer[l] += g;
    }
    ++out.tasks_absorbed;
    return out;
}

std::size_t adaptive_split(const EigenSpectrum<double>& spectrum, double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw ValueError("adaptive_split: rho must lie in [0, 1], got " + std::to_string(rho));
    }
    const auto d = static_cast<std::size_t>(spectrum.values.size());
    // Summed smallest-first so the final running sum equals the total exactly.
    double total = 0.0;
    for (std::size_t i = d; i-- > 0;) total += spectrum.values(static_cast<Eigen::Index>(i));
    if (total == 0.0) return d;
    const double budget = rho * total;
    double running = 0.0;
    std::size_t k = 0;
    for (std::size_t i = d; i-- > 0;) {
        running += spectrum.values(static_cast<Eigen::Index>(i));
        if (running > budget) break;
        ++k;
    }
    return k;
}

Projector build_projector(const GramAccumulator& acc, double rho) {
    if (acc.tasks_absorbed == 0) {
        throw ValueError("build_projector: no task has been absorbed yet");
    }
    Projector p;
    p.rho_used = rho;
    p.layer_ids = acc.layer_ids;
    for (const auto& gram : acc.per_layer) {
        const auto spectrum = sym_eig(gram);
        const std::size_t k = adaptive_split(spectrum, rho);
        const Matrix v2 = spectrum.vectors.rightCols(static_cast<Eigen::Index>(k));
        Matrix proj = matmul(v2, v2.transpose());
        p.per_layer.push_back((proj + proj.transpose()) / 2.0);
        p.null_dims.push_back(k);
    }
    return p;
}

Gradients project_update(const Projector& p, const Gradients& grads) {
    Gradients out = grads;
    for (std::size_t l = 0; l < p.per_layer.size(); ++l) {
        const std::size_t layer = p.layer_ids[l];
        if (layer >= grads.d_weight.size()) {
            throw DimensionError("project_update: projector references layer " +
                                 std::to_string(layer) + " but gradients have " +
                                 std::to_string(grads.d_weight.size()) + " layers");
        }
        const Matrix& g = grads.d_weight[layer];
        if (p.per_layer[l].cols() != g.rows()) {
            throw DimensionError("project_update: projector " + shape_of(p.per_layer[l]) +
                                 " cannot act on gradient " + shape_of(g) + " at layer " +
                                 std::to_string(layer));
        }
        out.d_weight[layer] = matmul(p.per_layer[l], g);
    }
    return out;
}

std::vector<LayerSpectrum> accumulator_spectra(const GramAccumulator& acc, double rho) {
    std::vector<LayerSpectrum> out;
    for (std::size_t l = 0; l < acc.per_layer.size(); ++l) {
        const auto spectrum = sym_eig(acc.per_layer[l]);
        out.push_back({acc.layer_ids[l], spectrum.values, adaptive_split(spectrum, rho)});
    }
    return out;
}

void write_spectra_csv(std::ostream& out, const std::vector<LayerSpectrum>& spectra) {
    out << "layer,index,eigenvalue,selected\n";
    for (const auto& s : spectra) {
        const auto d = static_cast<std::size_t>(s.eigenvalues.size());
        for (std::size_t i = 0; i < d; ++i) {
            const bool selected = i >= d - s.null_dim;
            out << s.layer_id << ',' << i << ','
                << format_double(s.eigenvalues(static_cast<Eigen::Index>(i))) << ','
                << (selected ? 1 : 0) << '\n';
        }
    }
}

ProjectorResiduals projector_residuals(const Matrix& p, std::size_t null_dim) {
    ProjectorResiduals r;
    r.idempotence = frobenius_norm(Matrix(matmul(p, p) - p));
    r.symmetry = (p - p.transpose()).cwiseAbs().maxCoeff();
    r.trace_error = std::abs(p.trace() - static_cast<double>(null_dim));
    const auto spectrum = sym_eig(p);
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
        const double v = spectrum.values(i);
        r.eigen_binary = std::max(r.eigen_binary, std::min(std::abs(v), std::abs(v - 1.0)));
    }
    return r;
}

}  // namespace gnsp
