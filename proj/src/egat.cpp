#include "sagc/egat.hpp"

#include <cmath>

#include "sagc/error.hpp"
#include "sagc/rng.hpp"

namespace sagc {

void LayerConfig::check() const {
    if (n_in < 1 || e_in < 1 || f_out < 1 || n_heads < 1) {
        throw Error(ErrorKind::InvalidArgument, "layer dimensions must be >= 1");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "leaky slope must lie in (0, 1)");
    }
}

ModelConfig ModelConfig::standard(std::size_t hidden) {
    ModelConfig c;
    const std::array<std::size_t, kNumLayers> heads{3, 2, 1, static_cast<std::size_t>(kNumClasses)};
    std::size_t n_in = kNodeFeatureDim;
    for (std::size_t l = 0; l < kNumLayers; ++l) {
        LayerConfig& layer = c.layers[l];
        layer.n_in = n_in;
        layer.e_in = kEdgeFeatureDim;
        layer.n_heads = heads[l];
        const bool last = l + 1 == kNumLayers;
        layer.f_out = last ? static_cast<std::size_t>(kNumClasses) : hidden;
        layer.head_merge = last ? HeadMerge::Average : HeadMerge::Concatenate;
        n_in = layer.out_width();
    }
    return c;
}

void ModelConfig::check() const {
    std::size_t n_in = kNodeFeatureDim;
    for (std::size_t l = 0; l < kNumLayers; ++l) {
        layers[l].check();
        if (layers[l].n_in != n_in || layers[l].e_in != kEdgeFeatureDim) {
            throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(l + 1) + " input width");
        }
        n_in = layers[l].out_width();
    }
    const auto& last = layers[kNumLayers - 1];
    if (last.head_merge != HeadMerge::Average || last.out_width() != static_cast<std::size_t>(kNumClasses)) {
        throw Error(ErrorKind::InvalidArgument, "output layer must average heads into 28 logits");
    }
}

std::vector<ad::Tensor> ModelParams::tensors() const {
    std::vector<ad::Tensor> out;
    for (const auto& l : layers) {
        out.push_back(l.weight);
        out.push_back(l.attention);
        out.push_back(l.edge_weight);
    }
    return out;
}

std::vector<std::string> ModelParams::tensor_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l + 1) + ".";
        out.push_back(p + "weight");
        out.push_back(p + "attention");
        out.push_back(p + "edge_weight");
    }
    return out;
}

ModelParams ModelParams::clone() const {
    auto copy = [](const ad::Tensor& t) {
        return ad::Tensor::parameter(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
    };
    ModelParams p;
    p.seed = seed;
    p.init_scheme = init_scheme;
    for (const auto& l : layers) p.layers.push_back({copy(l.weight), copy(l.attention), copy(l.edge_weight)});
    return p;
}

namespace {

ad::Tensor glorot(Rng& rng, std::size_t rows, std::size_t cols, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(rows * cols);
    for (auto& x : v) {
        do {
            x = rng.uniform(-limit, limit);
        } while (x == 0.0);
    }
    return ad::Tensor::parameter({rows, cols}, std::move(v));
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.check();
    Rng rng(seed);
    ModelParams p;
    p.seed = seed;
    for (const auto& l : config.layers) {
        const std::size_t width = l.n_heads * l.f_out;
        LayerParams lp;
        lp.weight = glorot(rng, l.n_in, width, static_cast<double>(l.n_in), static_cast<double>(width));
        lp.attention = glorot(rng, l.n_heads, l.f_out, static_cast<double>(l.f_out), 1.0);
        lp.edge_weight = glorot(rng, l.e_in, width, static_cast<double>(l.e_in), static_cast<double>(width));
        p.layers.push_back(std::move(lp));
    }
    return p;
}

DirectedEdges build_directed_edges(const FeaturizedGraph& graph) {
    const std::size_t n = graph.node_count();
    const std::size_t e = graph.edge_count();
    DirectedEdges out;
    out.features = Matrix(2 * e + n, kEdgeFeatureDim);
    out.source.reserve(2 * e + n);
    std::vector<int> dst;
    dst.reserve(2 * e + n);
    std::size_t row = 0;
    auto push = [&](int from, int to, std::span<const double> feats) {
        out.source.push_back(from);
        dst.push_back(to);
        for (std::size_t c = 0; c < feats.size(); ++c) out.features(row, c) = feats[c];
        ++row;
    };
    for (std::size_t k = 0; k < e; ++k) {
        const auto [element, space] = graph.edge_index[k];
        const auto feats = graph.edge_features.row(k);
        push(element, space, feats);
        push(space, element, feats);
    }
    const std::array<double, kEdgeFeatureDim> zero{};
    for (std::size_t v = 0; v < n; ++v) push(static_cast<int>(v), static_cast<int>(v), zero);
    out.destination = ad::SegmentIndex(std::move(dst), n);
    return out;
}

ad::Tensor node_tensor(const FeaturizedGraph& graph) {
    return ad::Tensor::constant({graph.node_count(), graph.node_features.cols}, graph.node_features.data);
}

ad::Tensor edge_tensor(const DirectedEdges& edges) {
    return ad::Tensor::constant({edges.features.rows, edges.features.cols}, edges.features.data);
}

namespace {

ad::Tensor node_transform(const LayerParams& params, const LayerConfig& config, const ad::Tensor& h) {
    config.check();
    if (h.shape().size() != 2 || h.dim(1) != config.n_in) {
        throw Error(ErrorKind::ShapeMismatch,
                    "layer expects " + std::to_string(config.n_in) + " node features, got " +
                        ad::shape_string(h.shape()));
    }
    return ad::reshape(ad::matmul(h, params.weight), {h.dim(0), config.n_heads, config.f_out});
}

}  // namespace

ad::Tensor attention_scores(const LayerParams& params, const LayerConfig& config, const ad::Tensor& h,
                            const DirectedEdges& edges) {
    const auto z = node_transform(params, config, h);
    return ad::edge_attention_scores(z, params.attention, edges.source, edges.destination, config.leaky_slope);
}

ad::Tensor embed_edges(const LayerParams& params, const LayerConfig& config, const ad::Tensor& k) {
    if (k.shape().size() != 2 || k.dim(1) != config.e_in) {
        throw Error(ErrorKind::ShapeMismatch,
                    "layer expects " + std::to_string(config.e_in) + " edge features, got " +
                        ad::shape_string(k.shape()));
    }
    return ad::reshape(ad::matmul(k, params.edge_weight), {k.dim(0), config.n_heads, config.f_out});
}

ad::Tensor layer_forward(const LayerParams& params, const LayerConfig& config, const ad::Tensor& h,
                         const ad::Tensor& k, const DirectedEdges& edges, AttentionArtifacts* artifacts) {
    const auto z = node_transform(params, config, h);
    if (z.dim(0) != edges.destination.segment_count() || k.dim(0) != edges.size()) {
        throw Error(ErrorKind::ShapeMismatch, "edge list does not match node/edge feature rows");
    }
    const auto scores =
        ad::edge_attention_scores(z, params.attention, edges.source, edges.destination, config.leaky_slope);
    const auto alpha = ad::segment_softmax(scores, edges.destination);
    if (k.shape().size() != 2 || k.dim(1) != config.e_in) {
        throw Error(ErrorKind::ShapeMismatch, "layer expects " + std::to_string(config.e_in) +
                                                  " edge features, got " + ad::shape_string(k.shape()));
    }
    const auto out =
        ad::attention_aggregate_edges(alpha, z, k, params.edge_weight, edges.source, edges.destination);
    if (artifacts != nullptr) {
        artifacts->scores = scores;
        artifacts->coefficients = alpha;
        artifacts->messages = ad::add(ad::gather_rows(z, edges.source), embed_edges(params, config, k));
    }
    if (config.head_merge == HeadMerge::Average) return ad::mean_over_heads(out);
    return ad::reshape(out, {out.dim(0), config.n_heads * config.f_out});
}

ModelOutput model_forward(const ModelParams& params, const ModelConfig& config, const ad::Tensor& h,
                          const ad::Tensor& k, const DirectedEdges& edges) {
    if (params.layers.size() != kNumLayers) {
        throw Error(ErrorKind::ShapeMismatch, "model needs " + std::to_string(kNumLayers) + " layers");
    }
    ad::Tensor x = h;
    for (std::size_t l = 0; l + 1 < kNumLayers; ++l) {
        x = ad::elu(layer_forward(params.layers[l], config.layers[l], x, k, edges));
    }
    ModelOutput out;
    out.penultimate = x;
    out.logits = layer_forward(params.layers[kNumLayers - 1], config.layers[kNumLayers - 1], x, k, edges);
    return out;
}

ModelOutput model_forward(const ModelParams& params, const ModelConfig& config,
                          const FeaturizedGraph& graph) {
    const auto edges = build_directed_edges(graph);
    return model_forward(params, config, node_tensor(graph), edge_tensor(edges), edges);
}

}  // namespace sagc
