#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "gnsp/trainer.hpp"

namespace gnsp {

namespace {

constexpr char kMagic[4] = {'G', 'N', 'S', 'P'};
constexpr std::size_t kHeaderSize = 4 + 4 + 8;
constexpr std::size_t kCrcSize = 4;

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    void matrix(const Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }

    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f64();
        return m;
    }
    bool done() const { return pos_ == size_; }

private:
    void need(std::size_t n) const {
        if (size_ - pos_ < n) {
            throw CheckpointFormatError("checkpoint manifest overruns its payload at byte " +
                                        std::to_string(pos_));
        }
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

// Sanity bound on any single dimension read from a manifest.
constexpr std::uint32_t kMaxDim = 1u << 16;

std::uint32_t checked_dim(ByteReader& in, const char* what) {
    const std::uint32_t d = in.u32();
    if (d == 0 || d > kMaxDim) {
        throw CheckpointFormatError(std::string("checkpoint has invalid ") + what + " " +
                                    std::to_string(d));
    }
    return d;
}

void write_stack(ByteWriter& out, const EncoderStack& stack) {
    out.u32(static_cast<std::uint32_t>(stack.layers.size()));
    out.u8(stack.normalize_output ? 1 : 0);
    for (const auto& layer : stack.layers) {
        out.u32(static_cast<std::uint32_t>(layer.d_in()));
        out.u32(static_cast<std::uint32_t>(layer.d_out()));
        out.u8(layer.activation == Activation::Gelu ? 1 : 0);
        out.u8(layer.trainable ? 1 : 0);
        out.matrix(layer.weight);
        for (Eigen::Index j = 0; j < layer.bias.size(); ++j) out.f64(layer.bias(j));
    }
}

EncoderStack read_stack(ByteReader& in) {
    EncoderStack stack;
    const std::uint32_t depth = checked_dim(in, "layer count");
    stack.normalize_output = in.u8() != 0;
    for (std::uint32_t k = 0; k < depth; ++k) {
        EncoderLayer layer;
        const auto d_in = checked_dim(in, "layer input width");
        const auto d_out = checked_dim(in, "layer output width");
        layer.activation = in.u8() != 0 ? Activation::Gelu : Activation::Identity;
        layer.trainable = in.u8() != 0;
        layer.weight = in.matrix(d_in, d_out);
        layer.bias.resize(d_out);
        for (std::uint32_t j = 0; j < d_out; ++j) layer.bias(j) = in.f64();
        stack.layers.push_back(std::move(layer));
    }
    validate(stack);
    return stack;
}

void write_model(ByteWriter& out, const DualEncoder& model) {
    out.f64(model.temperature);
    write_stack(out, model.image_encoder);
    write_stack(out, model.text_encoder);
}

DualEncoder read_model(ByteReader& in) {
    DualEncoder model;
    model.temperature = in.f64();
    model.image_encoder = read_stack(in);
    model.text_encoder = read_stack(in);
    validate(model);
    return model;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t size) {
    return static_cast<std::uint32_t>(
        crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(size)));
}

bool same_bits(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_bits(const EncoderStack& a, const EncoderStack& b) {
    if (a.layers.size() != b.layers.size() || a.normalize_output != b.normalize_output) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        const auto& x = a.layers[k];
        const auto& y = b.layers[k];
        if (x.activation != y.activation || x.trainable != y.trainable) return false;
        if (!same_bits(x.weight, y.weight)) return false;
        if (!same_bits(Matrix(x.bias.transpose()), Matrix(y.bias.transpose()))) return false;
    }
    return true;
}

bool same_bits(const DualEncoder& a, const DualEncoder& b) {
    return std::bit_cast<std::uint64_t>(a.temperature) == std::bit_cast<std::uint64_t>(b.temperature) &&
           same_bits(a.image_encoder, b.image_encoder) && same_bits(a.text_encoder, b.text_encoder);
}

}  // namespace

std::vector<std::uint8_t> serialize_state(const ContinualState& state, std::uint32_t version) {
    ByteWriter payload;
    payload.u64(state.task_index);
    write_model(payload, state.model);
    write_model(payload, state.teacher);

    payload.u64(state.gram.tasks_absorbed);
    payload.u32(static_cast<std::uint32_t>(state.gram.per_layer.size()));
    for (std::size_t l = 0; l < state.gram.per_layer.size(); ++l) {
        payload.u32(static_cast<std::uint32_t>(state.gram.layer_ids[l]));
        payload.u32(static_cast<std::uint32_t>(state.gram.per_layer[l].rows()));
        payload.matrix(state.gram.per_layer[l]);
    }

    payload.u8(state.projector ? 1 : 0);
    if (state.projector) {
        const Projector& p = *state.projector;
        payload.f64(p.rho_used);
        payload.u32(static_cast<std::uint32_t>(p.per_layer.size()));
        for (std::size_t l = 0; l < p.per_layer.size(); ++l) {
            payload.u32(static_cast<std::uint32_t>(p.layer_ids[l]));
            payload.u32(static_cast<std::uint32_t>(p.per_layer[l].rows()));
            payload.u32(static_cast<std::uint32_t>(p.null_dims[l]));
            payload.matrix(p.per_layer[l]);
        }
    }

    std::ostringstream rng_text;
    rng_text << state.rng;
    payload.u32(static_cast<std::uint32_t>(rng_text.str().size()));
    payload.raw(rng_text.str());

    const auto& body = payload.bytes();
    ByteWriter file;
    file.raw(std::string(kMagic, 4));
    file.u32(version);
    file.u64(body.size());
    auto out = std::move(file.bytes());
    out.insert(out.end(), body.begin(), body.end());
    const std::uint32_t crc = crc_of(body.data(), body.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    return out;
}

ContinualState deserialize_state(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8) {
        throw CheckpointTruncatedError("checkpoint truncated: " + std::to_string(bytes.size()) +
                                       " bytes, header needs " + std::to_string(kHeaderSize));
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointFormatError("not a checkpoint file (bad magic bytes)");
    }
    ByteReader header(bytes.data(), bytes.size());
    header.raw(4);
    const std::uint32_t version = header.u32();
    if (version != kCheckpointVersion) throw CheckpointVersionError(version, kCheckpointVersion);
    if (bytes.size() < kHeaderSize) {
        throw CheckpointTruncatedError("checkpoint truncated inside its header");
    }
    const std::uint64_t length = header.u64();
    if (bytes.size() - kHeaderSize < kCrcSize || bytes.size() - kHeaderSize - kCrcSize < length) {
        throw CheckpointTruncatedError("checkpoint truncated: payload declares " +
                                       std::to_string(length) + " bytes, file holds " +
                                       std::to_string(bytes.size() - kHeaderSize));
    }
    if (bytes.size() != kHeaderSize + length + kCrcSize) {
        throw CheckpointFormatError("checkpoint has trailing bytes after the checksum");
    }
    const std::uint8_t* body = bytes.data() + kHeaderSize;
    ByteReader trailer(body + length, kCrcSize);
    const std::uint32_t stored_crc = trailer.u32();
    const std::uint32_t actual_crc = crc_of(body, static_cast<std::size_t>(length));
    if (stored_crc != actual_crc) {
        throw CheckpointChecksumError("checkpoint checksum mismatch (stored " +
                                      std::to_string(stored_crc) + ", computed " +
                                      std::to_string(actual_crc) + ")");
    }

    ByteReader in(body, static_cast<std::size_t>(length));
    ContinualState state;
    state.task_index = in.u64();
    state.model = read_model(in);
    state.teacher = read_model(in);

    state.gram.tasks_absorbed = in.u64();
    const std::uint32_t gram_layers = in.u32();
    for (std::uint32_t l = 0; l < gram_layers; ++l) {
        state.gram.layer_ids.push_back(in.u32());
        const auto d = checked_dim(in, "gram width");
        state.gram.per_layer.push_back(in.matrix(d, d));
    }

    if (in.u8() != 0) {
        Projector p;
        p.rho_used = in.f64();
        const std::uint32_t layers = in.u32();
        for (std::uint32_t l = 0; l < layers; ++l) {
            p.layer_ids.push_back(in.u32());
            const auto d = checked_dim(in, "projector width");
            p.null_dims.push_back(in.u32());
            p.per_layer.push_back(in.matrix(d, d));
        }
        state.projector = std::move(p);
    }

    const std::uint32_t rng_size = in.u32();
    std::istringstream rng_text(in.raw(rng_size));
    rng_text >> state.rng;
    if (rng_text.fail()) throw CheckpointFormatError("checkpoint RNG state is unreadable");
    if (!in.done()) throw CheckpointFormatError("checkpoint payload has unparsed bytes");
    return state;
}

void save_checkpoint(const ContinualState& state, const std::filesystem::path& path) {
    const auto bytes = serialize_state(state);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing '" + path.string() + "'");
}

ContinualState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_state(bytes);
}

bool bitwise_equal(const ContinualState& a, const ContinualState& b) {
    if (a.task_index != b.task_index || !(a.rng == b.rng)) return false;
    if (!same_bits(a.model, b.model) || !same_bits(a.teacher, b.teacher)) return false;
    if (a.gram.tasks_absorbed != b.gram.tasks_absorbed || a.gram.layer_ids != b.gram.layer_ids ||
        a.gram.per_layer.size() != b.gram.per_layer.size()) {
        return false;
    }
    for (std::size_t l = 0; l < a.gram.per_layer.size(); ++l) {
        if (!same_bits(a.gram.per_layer[l], b.gram.per_layer[l])) return false;
    }
    if (a.projector.has_value() != b.projector.has_value()) return false;
    if (a.projector) {
        const auto& p = *a.projector;
        const auto& q = *b.projector;
        if (std::bit_cast<std::uint64_t>(p.rho_used) != std::bit_cast<std::uint64_t>(q.rho_used) ||
            p.layer_ids != q.layer_ids || p.null_dims != q.null_dims ||
            p.per_layer.size() != q.per_layer.size()) {
            return false;
        }
        for (std::size_t l = 0; l < p.per_layer.size(); ++l) {
            if (!same_bits(p.per_layer[l], q.per_layer[l])) return false;
        }
    }
    return true;
}

}  // namespace gnsp
