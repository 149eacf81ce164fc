#include "sagc/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "numfmt.hpp"
#include "sagc/error.hpp"
#include "sagc/rng.hpp"

namespace sagc {

void TrainConfig::check() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be > 0");
    if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
    if (!(gamma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma must be >= 0");
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "split ratio must lie in (0, 1)");
    }
    if (!class_weights.empty()) {
        if (class_weights.size() != static_cast<std::size_t>(kNumClasses)) {
            throw Error(ErrorKind::DimensionMismatch, "class weights need one entry per class");
        }
        for (double w : class_weights) {
            if (!(w >= 0.0)) throw Error(ErrorKind::InvalidArgument, "class weights must be >= 0");
        }
    }
}

// ---------------------------------------------------------------- split

SplitAssignment split_dataset(std::vector<std::string> graph_names, double ratio, std::uint64_t seed) {
    const std::size_t n = graph_names.size();
    if (n < 2) throw Error(ErrorKind::TooFewGraphs, "splitting needs at least two graphs");
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::InvalidArgument, "split ratio must lie in (0, 1)");
    std::sort(graph_names.begin(), graph_names.end());
    Rng rng(seed);
    rng.shuffle(graph_names);
    auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    SplitAssignment s;
    s.seed = seed;
    s.ratio = ratio;
    s.train.assign(graph_names.begin(), graph_names.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(graph_names.begin() + static_cast<std::ptrdiff_t>(n_train), graph_names.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

SplitAssignment split_dataset(const Dataset& dataset, double ratio, std::uint64_t seed) {
    std::vector<std::string> names;
    for (const auto& g : dataset.graphs) names.push_back(g.name);
    return split_dataset(std::move(names), ratio, seed);
}

json to_json(const SplitAssignment& split) {
    return json{{"seed", split.seed}, {"ratio", split.ratio}, {"train", split.train}, {"test", split.test}};
}

SplitAssignment split_from_json(const json& j) {
    try {
        SplitAssignment s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.ratio = j.at("ratio").get<double>();
        s.train = j.at("train").get<std::vector<std::string>>();
        s.test = j.at("test").get<std::vector<std::string>>();
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedDocument, std::string("split manifest: ") + e.what());
    }
}

// ---------------------------------------------------------------- loss

ad::Tensor focal_loss(const ad::Tensor& logits, std::span<const int> labels, double gamma,
                      std::span<const double> class_weights) {
    if (logits.shape().size() != 2) throw Error(ErrorKind::ShapeMismatch, "focal loss expects N x C logits");
    const std::size_t n = logits.dim(0);
    const std::size_t c = logits.dim(1);
    if (labels.size() != n) {
        throw Error(ErrorKind::ShapeMismatch, std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
    }
    if (n == 0) throw Error(ErrorKind::EmptyTrainingSet, "focal loss over zero nodes");
    if (!class_weights.empty() && class_weights.size() != c) {
        throw Error(ErrorKind::DimensionMismatch, "class weights need one entry per logit column");
    }
    std::vector<double> alpha(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
            throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(labels[i]) + " at row " + std::to_string(i));
        }
        alpha[i] = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(labels[i])];
    }
    const auto log_p = ad::pick_per_row(ad::log_softmax_rows(logits), labels);
    const auto p = ad::exp(log_p);
    const auto modulating = ad::pow(ad::add_scalar(ad::scale(p, -1.0), 1.0), gamma);
    const auto floored = ad::clamp_min(log_p, std::log(1e-12));
    const auto weighted = ad::mul(ad::mul(modulating, floored), ad::Tensor::constant({n}, std::move(alpha)));
    return ad::scale(ad::sum(weighted), -1.0 / static_cast<double>(n));
}

std::array<double, kNumClasses> default_class_weights(std::span<const int> train_labels) {
    std::array<long long, kNumClasses> counts{};
    for (int l : train_labels) {
        if (l < 0 || l >= kNumClasses) throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(l));
        ++counts[static_cast<std::size_t>(l)];
    }
    std::array<double, kNumClasses> w;
    w.fill(1.0);
    if (train_labels.empty()) return w;
    const double total = static_cast<double>(train_labels.size());
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        if (counts[c] == 0) continue;
        w[c] = std::clamp(total / (kNumClasses * static_cast<double>(counts[c])), 0.1, 10.0);
        sum += w[c];
        ++present;
    }
    const double mean_w = sum / present;
    for (int c = 0; c < kNumClasses; ++c) {
        if (counts[c] > 0) w[c] /= mean_w;
    }
    return w;
}

// ---------------------------------------------------------------- optimizer

void adam_step(std::span<ad::Tensor> params, std::span<const std::vector<double>> grads, AdamState& state,
               const TrainConfig& config) {
    if (grads.size() != params.size()) {
        throw Error(ErrorKind::ShapeMismatch, "one gradient per parameter tensor required");
    }
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.size(), 0.0);
            state.second_moment.emplace_back(p.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match parameters");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (grads[k].size() != params[k].size() || state.first_moment[k].size() != params[k].size()) {
            throw Error(ErrorKind::ShapeMismatch, "gradient/state size mismatch for parameter " + std::to_string(k));
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto values = params[k].mutable_data();
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        const auto& g = grads[k];
        for (std::size_t i = 0; i < values.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            values[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

// ---------------------------------------------------------------- training loop

TrainResult train(std::span<const FeaturizedGraph> training, const TrainConfig& config,
                  const ModelConfig& model_config, const std::function<void(const TrainProgress&)>& progress) {
    config.check();
    model_config.check();
    if (training.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no training graphs");

    TrainResult result;
    Checkpoint& ckpt = result.checkpoint;
    ckpt.model_config = model_config;
    ckpt.train_config = config;
    for (const auto& g : training) ckpt.train_graphs.push_back(g.name);
    ckpt.stats = fit_standardizer(training, "training split (" + std::to_string(training.size()) + " graphs)");

    std::vector<FeaturizedGraph> standardized;
    standardized.reserve(training.size());
    for (const auto& g : training) standardized.push_back(apply_standardizer(ckpt.stats, g));
    const FeaturizedGraph batch = disjoint_union(standardized);
    standardized.clear();

    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
        if (batch.labels[i] < 0 || batch.labels[i] >= kNumClasses) {
            throw Error(ErrorKind::LabelOutOfRange, "training node '" + batch.node_ids[i] + "' has no valid label");
        }
    }
    if (!config.class_weights.empty()) {
        ckpt.class_weights = config.class_weights;
    } else if (config.use_class_weights) {
        const auto w = default_class_weights(batch.labels);
        ckpt.class_weights.assign(w.begin(), w.end());
    } else {
        ckpt.class_weights.assign(kNumClasses, 1.0);
    }

    const auto edges = build_directed_edges(batch);
    const auto h = node_tensor(batch);
    const auto k = edge_tensor(edges);

    ModelParams params = init_params(model_config, config.seed);
    auto tensors = params.tensors();
    AdamState adam;
    double best = std::numeric_limits<double>::infinity();
    result.loss_trace.reserve(static_cast<std::size_t>(config.epochs));

    std::vector<std::vector<double>> grads(tensors.size());
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (auto& t : tensors) t.zero_grad();
        double loss_value = 0.0;
        try {
            ad::Tape tape;
            const auto out = model_forward(params, model_config, h, k, edges);
            const auto loss = focal_loss(out.logits, batch.labels, config.gamma, ckpt.class_weights);
            loss_value = loss.item();
            if (!std::isfinite(loss_value)) {
                throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch));
            }
            result.loss_trace.push_back(loss_value);
            if (loss_value < best) {
                best = loss_value;
                ckpt.best_loss = loss_value;
                ckpt.best_epoch = epoch;
                ckpt.params = params.clone();
            }
            tape.backward(loss);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::NumericalFault) {
                throw Error(ErrorKind::NumericalFault, "epoch " + std::to_string(epoch) + ": " + e.message());
            }
            throw;
        }
        for (std::size_t i = 0; i < tensors.size(); ++i) grads[i] = tensors[i].grad();
        adam_step(tensors, grads, adam, config);
        if (progress) progress({epoch, loss_value, best});
    }
    return result;
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'S', 'A', 'G', 'C', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
    return v;
}

void put_doubles(std::string& out, std::span<const double> values) {
    for (double d : values) put_u64(out, std::bit_cast<std::uint64_t>(d));
}

json layer_json(const LayerConfig& l) {
    return json{{"n_in", l.n_in},
                {"e_in", l.e_in},
                {"f_out", l.f_out},
                {"n_heads", l.n_heads},
                {"leaky_slope", l.leaky_slope},
                {"head_merge", l.head_merge == HeadMerge::Average ? "average" : "concatenate"}};
}

LayerConfig layer_from_json(const json& j) {
    LayerConfig l;
    l.n_in = j.at("n_in").get<std::size_t>();
    l.e_in = j.at("e_in").get<std::size_t>();
    l.f_out = j.at("f_out").get<std::size_t>();
    l.n_heads = j.at("n_heads").get<std::size_t>();
    l.leaky_slope = j.at("leaky_slope").get<double>();
    const auto merge = j.at("head_merge").get<std::string>();
    if (merge != "average" && merge != "concatenate") {
        throw Error(ErrorKind::CorruptPayload, "unknown head merge '" + merge + "'");
    }
    l.head_merge = merge == "average" ? HeadMerge::Average : HeadMerge::Concatenate;
    return l;
}

json train_config_json(const TrainConfig& c) {
    return json{{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
                {"gamma", c.gamma},                 {"class_weights", c.class_weights},
                {"use_class_weights", c.use_class_weights},
                {"split_ratio", c.split_ratio},     {"seed", c.seed},
                {"beta1", c.beta1},                 {"beta2", c.beta2},
                {"epsilon", c.epsilon}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.gamma = j.at("gamma").get<double>();
    c.class_weights = j.at("class_weights").get<std::vector<double>>();
    c.use_class_weights = j.at("use_class_weights").get<bool>();
    c.split_ratio = j.at("split_ratio").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::string payload;
    json tensors = json::array();
    std::size_t offset = 0;
    const auto names = ckpt.params.tensor_names();
    const auto values = ckpt.params.tensors();
    auto add_block = [&](const std::string& name, const ad::Shape& shape, std::span<const double> data) {
        tensors.push_back({{"name", name}, {"shape", shape}, {"offset", offset}, {"count", data.size()}});
        put_doubles(payload, data);
        offset += data.size();
    };
    for (std::size_t i = 0; i < values.size(); ++i) add_block(names[i], values[i].shape(), values[i].data());
    add_block("stats.node_mean", {kNodeFeatureDim}, ckpt.stats.node_mean);
    add_block("stats.node_std", {kNodeFeatureDim}, ckpt.stats.node_std);
    add_block("stats.edge_mean", {kEdgeFeatureDim}, ckpt.stats.edge_mean);
    add_block("stats.edge_std", {kEdgeFeatureDim}, ckpt.stats.edge_std);

    json layers = json::array();
    for (const auto& l : ckpt.model_config.layers) layers.push_back(layer_json(l));
    json manifest = {
        {"format_version", ckpt.format_version},
        {"model_config", {{"layers", layers}}},
        {"train_config", train_config_json(ckpt.train_config)},
        {"class_weights", ckpt.class_weights},
        {"train_graphs", ckpt.train_graphs},
        {"best_loss", ckpt.best_loss},
        {"best_epoch", ckpt.best_epoch},
        {"init", {{"seed", ckpt.params.seed}, {"scheme", ckpt.params.init_scheme}}},
        {"stats_fitted_on", ckpt.stats.fitted_on},
        {"tensors", tensors},
        {"payload_doubles", offset},
        {"checksum", "fnv1a64:" + hex64(fnv1a(payload))},
    };
    const std::string text = manifest.dump();
    std::string out(kMagic, sizeof kMagic);
    put_u64(out, text.size());
    out += text;
    out += payload;
    return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorKind::CorruptPayload, "not a checkpoint file");
    }
    const std::uint64_t manifest_len = get_u64(std::string_view(bytes).substr(8, 8));
    if (manifest_len > bytes.size() - 16) throw Error(ErrorKind::CorruptPayload, "truncated manifest");
    json manifest;
    try {
        manifest = json::parse(bytes.substr(16, manifest_len));
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::CorruptPayload, std::string("manifest: ") + e.what());
    }
    const std::string_view payload = std::string_view(bytes).substr(16 + manifest_len);

    try {
        Checkpoint ckpt;
        ckpt.format_version = manifest.at("format_version").get<int>();
        if (ckpt.format_version != kCheckpointFormatVersion) {
            throw Error(ErrorKind::VersionMismatch, "checkpoint format " + std::to_string(ckpt.format_version) +
                                                        ", this build reads " +
                                                        std::to_string(kCheckpointFormatVersion));
        }
        const auto doubles = manifest.at("payload_doubles").get<std::size_t>();
        if (payload.size() != doubles * 8) {
            throw Error(ErrorKind::CorruptPayload, "payload holds " + std::to_string(payload.size()) +
                                                       " bytes, manifest declares " + std::to_string(doubles * 8));
        }
        const auto expected_sum = manifest.at("checksum").get<std::string>();
        if (expected_sum != "fnv1a64:" + hex64(fnv1a(payload))) {
            throw Error(ErrorKind::CorruptPayload, "checksum mismatch");
        }

        const auto& layers = manifest.at("model_config").at("layers");
        if (layers.size() != kNumLayers) throw Error(ErrorKind::CorruptPayload, "layer count");
        for (std::size_t l = 0; l < kNumLayers; ++l) ckpt.model_config.layers[l] = layer_from_json(layers[l]);
        ckpt.model_config.check();
        ckpt.train_config = train_config_from_json(manifest.at("train_config"));
        ckpt.class_weights = manifest.at("class_weights").get<std::vector<double>>();
        ckpt.train_graphs = manifest.at("train_graphs").get<std::vector<std::string>>();
        ckpt.best_loss = manifest.at("best_loss").get<double>();
        ckpt.best_epoch = manifest.at("best_epoch").get<int>();
        ckpt.params.seed = manifest.at("init").at("seed").get<std::uint64_t>();
        ckpt.params.init_scheme = manifest.at("init").at("scheme").get<std::string>();
        ckpt.stats.fitted_on = manifest.at("stats_fitted_on").get<std::string>();

        std::map<std::string, std::pair<ad::Shape, std::vector<double>>> blocks;
        for (const auto& t : manifest.at("tensors")) {
            const auto off = t.at("offset").get<std::size_t>();
            const auto count = t.at("count").get<std::size_t>();
            auto shape = t.at("shape").get<ad::Shape>();
            if (off + count > doubles || ad::element_count(shape) != count) {
                throw Error(ErrorKind::CorruptPayload, "tensor block out of range");
            }
            std::vector<double> v(count);
            for (std::size_t i = 0; i < count; ++i) {
                v[i] = std::bit_cast<double>(get_u64(payload.substr((off + i) * 8, 8)));
            }
            blocks.emplace(t.at("name").get<std::string>(), std::make_pair(std::move(shape), std::move(v)));
        }
        auto take = [&blocks](const std::string& name) {
            auto it = blocks.find(name);
            if (it == blocks.end()) throw Error(ErrorKind::CorruptPayload, "missing tensor " + name);
            return it->second;
        };
        for (std::size_t l = 0; l < kNumLayers; ++l) {
            const std::string p = "layer" + std::to_string(l + 1) + ".";
            auto [ws, wv] = take(p + "weight");
            auto [as, av] = take(p + "attention");
            auto [es, ev] = take(p + "edge_weight");
            ckpt.params.layers.push_back({ad::Tensor::parameter(ws, std::move(wv)),
                                          ad::Tensor::parameter(as, std::move(av)),
                                          ad::Tensor::parameter(es, std::move(ev))});
        }
        auto fill = [&take](const std::string& name, auto& dst) {
            auto [shape, v] = take(name);
            if (v.size() != dst.size()) throw Error(ErrorKind::CorruptPayload, name + " size");
            std::copy(v.begin(), v.end(), dst.begin());
        };
        fill("stats.node_mean", ckpt.stats.node_mean);
        fill("stats.node_std", ckpt.stats.node_std);
        fill("stats.edge_mean", ckpt.stats.edge_mean);
        fill("stats.edge_std", ckpt.stats.edge_std);
        return ckpt;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptPayload, std::string("manifest: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return deserialize_checkpoint(buf.str());
}

std::string loss_trace_csv(std::span<const double> trace) {
    std::string out = "epoch,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out += std::to_string(i + 1) + "," + detail::fmt17(trace[i]) + "\n";
    }
    return out;
}

}  // namespace sagc
