#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sagc/features.hpp"
#include "sagc/tensor.hpp"

namespace sagc {

enum class HeadMerge { Concatenate, Average };

struct LayerConfig {
    std::size_t n_in = 0;
    std::size_t e_in = 0;
    std::size_t f_out = 0;  // per head
    std::size_t n_heads = 0;
    double leaky_slope = 0.2;
    HeadMerge head_merge = HeadMerge::Concatenate;

    std::size_t out_width() const { return head_merge == HeadMerge::Concatenate ? n_heads * f_out : f_out; }
    void check() const;
    bool operator==(const LayerConfig&) const = default;
};

// W: n_in x (H*F), a: H x F, W_e: e_in x (H*F)
struct LayerParams {
    ad::Tensor weight;
    ad::Tensor attention;
    ad::Tensor edge_weight;
};

inline constexpr std::size_t kNumLayers = 4;

struct ModelConfig {
    std::array<LayerConfig, kNumLayers> layers;

    // Heads 3, 2, 1, 28; concatenated hidden layers, averaged output layer.
    static ModelConfig standard(std::size_t hidden = 16);
    std::size_t penultimate_width() const { return layers[kNumLayers - 2].out_width(); }
    void check() const;
    bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
    std::vector<LayerParams> layers;
    std::uint64_t seed = 0;
    std::string init_scheme = "glorot_uniform";

    // Flat view in the fixed order W, a, W_e per layer.
    std::vector<ad::Tensor> tensors() const;
    std::vector<std::string> tensor_names() const;
    // Fresh parameter tensors with copied values; Tensor copies share storage.
    ModelParams clone() const;
};

// Glorot-uniform, deterministic per seed, no exact zeros.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Two directed edges per access edge (both orientations, shared features)
// followed by one zero-feature self-loop per node.
struct DirectedEdges {
    std::vector<int> source;
    ad::SegmentIndex destination{{}, 0};
    Matrix features;  // E x 5

    std::size_t size() const { return source.size(); }
};

DirectedEdges build_directed_edges(const FeaturizedGraph& graph);

struct AttentionArtifacts {
    ad::Tensor scores;        // E x H
    ad::Tensor coefficients;  // E x H
    ad::Tensor messages;      // E x H x F
};

// e_ij per directed edge and head, i = destination, j = source.
ad::Tensor attention_scores(const LayerParams& params, const LayerConfig& config, const ad::Tensor& h,
                            const DirectedEdges& edges);
// E x H x F
ad::Tensor embed_edges(const LayerParams& params, const LayerConfig& config, const ad::Tensor& k);

ad::Tensor layer_forward(const LayerParams& params, const LayerConfig& config, const ad::Tensor& h,
                         const ad::Tensor& k, const DirectedEdges& edges,
                         AttentionArtifacts* artifacts = nullptr);

struct ModelOutput {
    ad::Tensor logits;       // N x 28
    ad::Tensor penultimate;  // N x penultimate_width(), the input of the last layer
};

ModelOutput model_forward(const ModelParams& params, const ModelConfig& config, const ad::Tensor& h,
                          const ad::Tensor& k, const DirectedEdges& edges);
// Expects standardized features.
ModelOutput model_forward(const ModelParams& params, const ModelConfig& config,
                          const FeaturizedGraph& graph);

ad::Tensor node_tensor(const FeaturizedGraph& graph);
ad::Tensor edge_tensor(const DirectedEdges& edges);

}  // namespace sagc
