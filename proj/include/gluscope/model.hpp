#pragma once

#include <cstddef>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "gluscope/activation_math.hpp"
#include "gluscope/activations.hpp"
#include "gluscope/matrix.hpp"
#include "gluscope/tensor_archive.hpp"

namespace gluscope {

struct ModelConfig {
    std::size_t n_layers = 1;
    std::size_t d_model = 8;
    std::size_t d_mlp = 16;
    std::size_t n_heads = 1;
    std::size_t vocab_size = 16;
    ActivationKind activation = ActivationKind::SwiGLU;
    double norm_eps = 1e-5;

    // Throws ConfigError.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Weights of one decoder block. Rows of w_gate / w_in and columns of w_out
// are the per-neuron vectors.
struct LayerWeights {
    Matrix attn_q, attn_k, attn_v, attn_o; // d_model x d_model, applied as M * x
    Vector norm1_gain;                     // before attention
    Vector norm2_gain;                     // before the MLP
    Matrix w_gate;                         // d_mlp x d_model
    Matrix w_in;                           // d_mlp x d_model
    Matrix w_out;                          // d_model x d_mlp

    bool operator==(const LayerWeights&) const = default;
};

struct WeightSet {
    ModelConfig config;
    Matrix embed;   // vocab x d_model
    Matrix unembed; // vocab x d_model, logits = unembed * x
    Vector final_norm_gain;
    std::vector<LayerWeights> layers;

    bool operator==(const WeightSet&) const = default;
};

struct TokenizedDoc {
    DocId doc_id = 0;
    std::vector<TokenId> tokens;
};

// One layer's activations for a run of consecutive positions of a document.
struct ActivationBatch {
    DocId doc_id = 0;
    std::size_t first_position = 0;
    std::size_t n_positions = 0;
    std::size_t layer = 0;
    std::size_t d_mlp = 0;
    std::vector<float> pairs; // positions x d_mlp x (x_gate, x_in)
};

using ActivationSink = std::function<void(const ActivationBatch&)>;

struct MlpOutput {
    Vector out;
    Vector gate_pre;
    Vector in_pre;
};

// Tensor names used in weight archives.
namespace tensor_names {
inline const std::string kEmbed = "embed";
inline const std::string kUnembed = "unembed";
inline const std::string kFinalNorm = "final_norm.gain";
std::string block(std::size_t layer, const std::string& suffix);
} // namespace tensor_names

// Model config round-trips through archive metadata so a weights file is self-describing.
void write_model_config(TensorArchive& archive, const ModelConfig& config);
ModelConfig read_model_config(const TensorArchive& archive);

// Loads every required tensor into canonical orientation. Tensors listed in
// the "gluscope.transposed" metadata entry are stored transposed on disk.
WeightSet load_weights(const TensorArchive& archive, const ModelConfig& config);
TensorArchive to_archive(const WeightSet& ws, DType dtype = DType::F32,
                         const std::set<std::string>& store_transposed = {});

// Loads a self-describing archive from disk and folds norm gains.
WeightSet load_model(const std::string& path);

// Folds the pre-MLP norm gain into the columns of W_gate and W_in and resets
// the gain to ones.
WeightSet preprocess_weights(WeightSet ws);

// RMS norm with element-wise gain.
Vector rms_norm(std::span<const double> x, std::span<const double> gain, double eps);

MlpOutput mlp_forward(const LayerWeights& layer, std::span<const double> x, ActivationKind kind);

// Runs the decoder over `doc` and delivers one batch per layer covering all
// positions. Throws InputError on an empty doc or out-of-range token.
void forward_collect(const WeightSet& ws, const TokenizedDoc& doc, const ActivationSink& sink);

// forward_collect gathered into the dump layout.
DocActivations collect_doc(const WeightSet& ws, const TokenizedDoc& doc);

// Logits for every position (positions x vocab).
Matrix forward_logits(const WeightSet& ws, const TokenizedDoc& doc);

} // namespace gluscope
