#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "sckd/data.hpp"
#include "sckd/error.hpp"
#include "sckd/matrix.hpp"
#include "sckd/numerics.hpp"

namespace sckd {

enum class Activation { Tanh, Relu };

inline const char* activation_name(Activation a) {
    return a == Activation::Tanh ? "tanh" : "relu";
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw ConfigError("unknown activation '" + name + "' (expected tanh or relu)");
}

inline double activate(Activation a, double x) {
    return a == Activation::Tanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

inline double activate_grad(Activation a, double pre, double post) {
    return a == Activation::Tanh ? 1.0 - post * post : (pre > 0.0 ? 1.0 : 0.0);
}

struct ModelConfig {
    std::size_t input_dim = 8;        // d
    std::size_t hidden_dim = 64;      // encoder hidden width
    std::size_t feature_dim = 16;     // k, encoder output
    std::size_t novel_hidden_dim = 16;  // MLP width inside the novel head
    std::size_t num_known = 5;        // C^l
    std::size_t num_novel = 5;        // C^u
    double temperature = 0.1;         // tau for the concat softmax
    Activation activation = Activation::Tanh;

    void validate() const {
        if (input_dim < 1 || hidden_dim < 1 || feature_dim < 1 || novel_hidden_dim < 1 ||
            num_known < 1 || num_novel < 1) {
            throw ConfigError("all model dimensions must be >= 1");
        }
        if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
    }
};

struct ParamBlock {
    std::string name;
    Matrix* values;
    bool is_bias;  // weight decay skips biases
};

// Encoder (two affine layers with a nonlinearity between them), a linear
// known-class head, and a novel-class head made of an MLP plus a linear
// classifier. All blocks are plain dense matrices; biases are 1 x n rows.
struct ModelState {
    ModelConfig config;
    Matrix enc_w1, enc_b1;      // d -> hidden
    Matrix enc_w2, enc_b2;      // hidden -> k
    Matrix known_w, known_b;    // k -> C^l
    Matrix novel_w1, novel_b1;  // k -> k_mlp
    Matrix novel_w2, novel_b2;  // k_mlp -> C^u

    std::vector<ParamBlock> encoder_blocks() {
        return {{"enc_w1", &enc_w1, false}, {"enc_b1", &enc_b1, true},
                {"enc_w2", &enc_w2, false}, {"enc_b2", &enc_b2, true}};
    }
    std::vector<ParamBlock> known_head_blocks() {
        return {{"known_w", &known_w, false}, {"known_b", &known_b, true}};
    }
    std::vector<ParamBlock> novel_head_blocks() {
        return {{"novel_w1", &novel_w1, false}, {"novel_b1", &novel_b1, true},
                {"novel_w2", &novel_w2, false}, {"novel_b2", &novel_b2, true}};
    }
    std::vector<ParamBlock> parameter_blocks() {
        auto blocks = encoder_blocks();
        for (auto& b : known_head_blocks()) blocks.push_back(b);
        for (auto& b : novel_head_blocks()) blocks.push_back(b);
        return blocks;
    }

    void require_finite() const {
        for (const Matrix* m : {&enc_w1, &enc_b1, &enc_w2, &enc_b2, &known_w, &known_b,
                                &novel_w1, &novel_b1, &novel_w2, &novel_b2}) {
            m->require_finite("model parameters");
        }
    }
};

namespace detail {

inline Matrix fan_in_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng);
    return m;
}

}  // namespace detail

// Fan-in scaled uniform weights, zero biases, deterministic per seed.
inline ModelState init_model(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    ModelState m;
    m.config = cfg;
    m.enc_w1 = detail::fan_in_uniform(cfg.input_dim, cfg.hidden_dim, rng);
    m.enc_b1 = Matrix(1, cfg.hidden_dim, 0.0);
    m.enc_w2 = detail::fan_in_uniform(cfg.hidden_dim, cfg.feature_dim, rng);
    m.enc_b2 = Matrix(1, cfg.feature_dim, 0.0);
    m.known_w = detail::fan_in_uniform(cfg.feature_dim, cfg.num_known, rng);
    m.known_b = Matrix(1, cfg.num_known, 0.0);
    m.novel_w1 = detail::fan_in_uniform(cfg.feature_dim, cfg.novel_hidden_dim, rng);
    m.novel_b1 = Matrix(1, cfg.novel_hidden_dim, 0.0);
    m.novel_w2 = detail::fan_in_uniform(cfg.novel_hidden_dim, cfg.num_novel, rng);
    m.novel_b2 = Matrix(1, cfg.num_novel, 0.0);
    return m;
}

inline ModelState init_model(std::size_t input_dim, std::size_t hidden_dim, std::size_t feature_dim,
                             std::size_t novel_hidden_dim, std::size_t num_known,
                             std::size_t num_novel, double temperature, Rng& rng) {
    ModelConfig cfg;
    cfg.input_dim = input_dim;
    cfg.hidden_dim = hidden_dim;
    cfg.feature_dim = feature_dim;
    cfg.novel_hidden_dim = novel_hidden_dim;
    cfg.num_known = num_known;
    cfg.num_novel = num_novel;
    cfg.temperature = temperature;
    return init_model(cfg, rng);
}

namespace detail {

inline Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
    Matrix y = matmul(x, w);
    for (std::size_t i = 0; i < y.rows(); ++i) {
        double* row = y.row_ptr(i);
        for (std::size_t j = 0; j < y.cols(); ++j) row[j] += b(0, j);
    }
    return y;
}

inline Matrix apply_activation(Activation a, const Matrix& pre) {
    Matrix out(pre.rows(), pre.cols());
    for (std::size_t i = 0; i < pre.size(); ++i) out[i] = activate(a, pre[i]);
    return out;
}

}  // namespace detail

// Intermediate values of one forward pass, kept for the analytic backward.
struct EncoderTrace {
    Matrix pre1;      // X W1 + b1
    Matrix act1;      // nonlinearity(pre1)
    Matrix features;  // act1 W2 + b2, the v vectors
};

struct ForwardTrace {
    EncoderTrace encoder;
    Matrix known_logits;   // n x C^l
    Matrix novel_pre;      // features Wn1 + bn1
    Matrix novel_act;
    Matrix novel_logits;   // n x C^u
    Matrix concat_probs;   // softmax([known | novel] / tau), rows sum to 1
};

inline EncoderTrace encoder_forward(const ModelState& m, const Matrix& x) {
    if (x.cols() != m.config.input_dim) {
        throw ContractError("encoder input has " + std::to_string(x.cols()) +
                            " columns, expected " + std::to_string(m.config.input_dim));
    }
    x.require_finite("encoder input");
    EncoderTrace t;
    t.pre1 = detail::affine(x, m.enc_w1, m.enc_b1);
    t.act1 = detail::apply_activation(m.config.activation, t.pre1);
    t.features = detail::affine(t.act1, m.enc_w2, m.enc_b2);
    return t;
}

inline ForwardTrace forward(const ModelState& m, const Matrix& x) {
    ForwardTrace t;
    t.encoder = encoder_forward(m, x);
    t.known_logits = detail::affine(t.encoder.features, m.known_w, m.known_b);
    t.novel_pre = detail::affine(t.encoder.features, m.novel_w1, m.novel_b1);
    t.novel_act = detail::apply_activation(m.config.activation, t.novel_pre);
    t.novel_logits = detail::affine(t.novel_act, m.novel_w2, m.novel_b2);
    t.concat_probs = row_softmax(hconcat(t.known_logits, t.novel_logits), m.config.temperature);
    t.concat_probs.require_finite("concat probabilities");
    return t;
}

// Immutable deep copy of the encoder taken at the end of supervised training.
// It shares no storage with the live model, so later updates cannot leak in.
class ReplicaEncoder {
public:
    static ReplicaEncoder snapshot(const ModelState& m) {
        ReplicaEncoder r;
        r.input_dim_ = m.config.input_dim;
        r.activation_ = m.config.activation;
        r.w1_ = m.enc_w1;
        r.b1_ = m.enc_b1;
        r.w2_ = m.enc_w2;
        r.b2_ = m.enc_b2;
        return r;
    }

    Matrix features(const Matrix& x) const {
        if (x.cols() != input_dim_) {
            throw ContractError("replica input has " + std::to_string(x.cols()) +
                                " columns, expected " + std::to_string(input_dim_));
        }
        Matrix pre1 = detail::affine(x, w1_, b1_);
        Matrix act1 = detail::apply_activation(activation_, pre1);
        return detail::affine(act1, w2_, b2_);
    }

    const Matrix& w1() const { return w1_; }
    const Matrix& b1() const { return b1_; }
    const Matrix& w2() const { return w2_; }
    const Matrix& b2() const { return b2_; }

    bool operator==(const ReplicaEncoder& o) const {
        return w1_ == o.w1_ && b1_ == o.b1_ && w2_ == o.w2_ && b2_ == o.b2_;
    }

private:
    std::size_t input_dim_ = 0;
    Activation activation_ = Activation::Tanh;
    Matrix w1_, b1_, w2_, b2_;
};

inline ReplicaEncoder snapshot_replica(const ModelState& m) { return ReplicaEncoder::snapshot(m); }

inline Matrix forward_replica(const ReplicaEncoder& replica, const Matrix& x) {
    return replica.features(x);
}

// Accumulator with the same block structure as ModelState.
struct GradientSet {
    Matrix enc_w1, enc_b1, enc_w2, enc_b2;
    Matrix known_w, known_b;
    Matrix novel_w1, novel_b1, novel_w2, novel_b2;

    static GradientSet zeros_like(const ModelState& m) {
        GradientSet g;
        auto zero = [](const Matrix& p) { return Matrix(p.rows(), p.cols(), 0.0); };
        g.enc_w1 = zero(m.enc_w1);
        g.enc_b1 = zero(m.enc_b1);
        g.enc_w2 = zero(m.enc_w2);
        g.enc_b2 = zero(m.enc_b2);
        g.known_w = zero(m.known_w);
        g.known_b = zero(m.known_b);
        g.novel_w1 = zero(m.novel_w1);
        g.novel_b1 = zero(m.novel_b1);
        g.novel_w2 = zero(m.novel_w2);
        g.novel_b2 = zero(m.novel_b2);
        return g;
    }

    std::vector<ParamBlock> blocks() {
        return {{"enc_w1", &enc_w1, false},   {"enc_b1", &enc_b1, true},
                {"enc_w2", &enc_w2, false},   {"enc_b2", &enc_b2, true},
                {"known_w", &known_w, false}, {"known_b", &known_b, true},
                {"novel_w1", &novel_w1, false}, {"novel_b1", &novel_b1, true},
                {"novel_w2", &novel_w2, false}, {"novel_b2", &novel_b2, true}};
    }
};

// Backpropagate one forward pass. d_known / d_novel are dLoss/dlogits for the
// two heads (either may be null), d_features_extra is an additional
// dLoss/dfeatures term (the score-matrix path) added before the encoder
// backward. Gradients accumulate into `g`.
inline void backward(const ModelState& m, const Matrix& x, const ForwardTrace& t,
                     const Matrix* d_known, const Matrix* d_novel,
                     const Matrix* d_features_extra, GradientSet& g) {
    const std::size_t n = x.rows();
    Matrix d_features(n, m.config.feature_dim, 0.0);

    if (d_known != nullptr) {
        add_inplace(g.known_w, matmul_tn(t.encoder.features, *d_known));
        add_inplace(g.known_b, column_sums(*d_known));
        add_inplace(d_features, matmul_nt(*d_known, m.known_w));
    }

    if (d_novel != nullptr) {
        add_inplace(g.novel_w2, matmul_tn(t.novel_act, *d_novel));
        add_inplace(g.novel_b2, column_sums(*d_novel));
        Matrix d_act = matmul_nt(*d_novel, m.novel_w2);
        for (std::size_t i = 0; i < d_act.size(); ++i) {
            d_act[i] *= activate_grad(m.config.activation, t.novel_pre[i], t.novel_act[i]);
        }
        add_inplace(g.novel_w1, matmul_tn(t.encoder.features, d_act));
        add_inplace(g.novel_b1, column_sums(d_act));
        add_inplace(d_features, matmul_nt(d_act, m.novel_w1));
    }

    if (d_features_extra != nullptr) add_inplace(d_features, *d_features_extra);

    Matrix d_act1 = matmul_nt(d_features, m.enc_w2);
    for (std::size_t i = 0; i < d_act1.size(); ++i) {
        d_act1[i] *= activate_grad(m.config.activation, t.encoder.pre1[i], t.encoder.act1[i]);
    }
    add_inplace(g.enc_w2, matmul_tn(t.encoder.act1, d_features));
    add_inplace(g.enc_b2, column_sums(d_features));
    add_inplace(g.enc_w1, matmul_tn(x, d_act1));
    add_inplace(g.enc_b1, column_sums(d_act1));
}

// ---------------------------------------------------------------------------
// Checkpoint format: little-endian binary with shape headers. Round trips are
// bit-exact because doubles are written raw.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'S', 'C', 'K', 'D', 'M', 'D', 'L', '1'};

inline void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw ParseError("checkpoint truncated");
    return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw ParseError("checkpoint truncated");
    return s;
}

inline void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
    write_string(out, name);
    write_u64(out, m.rows());
    write_u64(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline Matrix read_matrix(std::istream& in, const std::string& expect_name) {
    const std::string name = read_string(in);
    if (name != expect_name) {
        throw ParseError("checkpoint block '" + name + "', expected '" + expect_name + "'");
    }
    const std::uint64_t rows = read_u64(in);
    const std::uint64_t cols = read_u64(in);
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw ParseError("checkpoint truncated");
    return m;
}

}  // namespace detail

// `provenance` is free-form text stored alongside the parameters (the runner
// puts the resolved experiment config JSON there).
inline void save_checkpoint(const ModelState& m, const std::string& path,
                            const std::string& provenance = "") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    detail::write_u64(out, m.config.input_dim);
    detail::write_u64(out, m.config.hidden_dim);
    detail::write_u64(out, m.config.feature_dim);
    detail::write_u64(out, m.config.novel_hidden_dim);
    detail::write_u64(out, m.config.num_known);
    detail::write_u64(out, m.config.num_novel);
    out.write(reinterpret_cast<const char*>(&m.config.temperature), sizeof(double));
    detail::write_string(out, activation_name(m.config.activation));
    detail::write_string(out, provenance);
    // block order must match load_checkpoint
    ModelState& mm = const_cast<ModelState&>(m);
    for (const auto& b : mm.parameter_blocks()) detail::write_matrix(out, b.name, *b.values);
    if (!out) throw IoError("write failed for '" + path + "'");
}

struct LoadedCheckpoint {
    ModelState model;
    std::string provenance;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0) {
        throw ParseError("'" + path + "' is not a model checkpoint");
    }
    LoadedCheckpoint lc;
    ModelConfig cfg;
    cfg.input_dim = detail::read_u64(in);
    cfg.hidden_dim = detail::read_u64(in);
    cfg.feature_dim = detail::read_u64(in);
    cfg.novel_hidden_dim = detail::read_u64(in);
    cfg.num_known = detail::read_u64(in);
    cfg.num_novel = detail::read_u64(in);
    in.read(reinterpret_cast<char*>(&cfg.temperature), sizeof(double));
    if (!in) throw ParseError("checkpoint truncated");
    cfg.activation = activation_from_name(detail::read_string(in));
    cfg.validate();
    lc.provenance = detail::read_string(in);
    lc.model.config = cfg;
    Rng throwaway(0);
    const ModelState shape_ref = init_model(cfg, throwaway);
    ModelState& ref = const_cast<ModelState&>(shape_ref);
    auto expected = ref.parameter_blocks();
    auto targets = lc.model.parameter_blocks();
    for (std::size_t i = 0; i < targets.size(); ++i) {
        Matrix m = detail::read_matrix(in, targets[i].name);
        if (m.rows() != expected[i].values->rows() || m.cols() != expected[i].values->cols()) {
            throw ParseError("checkpoint block '" + targets[i].name +
                             "' shape disagrees with its stored config");
        }
        *targets[i].values = std::move(m);
    }
    lc.model.require_finite();
    return lc;
}

}  // namespace sckd
