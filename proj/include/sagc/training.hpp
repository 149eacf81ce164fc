#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sagc/egat.hpp"
#include "sagc/features.hpp"
#include "sagc/graph.hpp"

namespace sagc {

struct TrainConfig {
    double learning_rate = 0.001;
    int epochs = 5000;
    double gamma = 2.0;
    // Focal alpha per class. Empty: inverse-frequency weights from the
    // training labels, or all ones when use_class_weights is false.
    std::vector<double> class_weights;
    bool use_class_weights = true;
    double split_ratio = 0.9;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void check() const;
    bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    long long step = 0;
};

struct SplitAssignment {
    std::vector<std::string> train;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
    double ratio = 0.9;

    bool operator==(const SplitAssignment&) const = default;
};

// Seeded shuffle of the sorted graph names; floor(ratio * n) graphs (at
// least one, at most n - 1) go to training.
SplitAssignment split_dataset(std::vector<std::string> graph_names, double ratio, std::uint64_t seed);
SplitAssignment split_dataset(const Dataset& dataset, double ratio, std::uint64_t seed);

json to_json(const SplitAssignment& split);
SplitAssignment split_from_json(const json& j);

// mean_i[-alpha_{y_i} (1 - p_{i,y_i})^gamma log p_{i,y_i}], probability floor 1e-12.
ad::Tensor focal_loss(const ad::Tensor& logits, std::span<const int> labels, double gamma,
                      std::span<const double> class_weights);

std::array<double, kNumClasses> default_class_weights(std::span<const int> train_labels);

// Bias-corrected Adam over `params` using their accumulated gradients.
void adam_step(std::span<ad::Tensor> params, std::span<const std::vector<double>> grads, AdamState& state,
               const TrainConfig& config);

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
    ModelConfig model_config;
    ModelParams params;
    FeatureStats stats;
    TrainConfig train_config;
    std::vector<double> class_weights;  // as used by the loss
    std::vector<std::string> train_graphs;
    double best_loss = 0.0;
    int best_epoch = 0;  // 1-based
    int format_version = kCheckpointFormatVersion;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> loss_trace;  // one entry per epoch
};

struct TrainProgress {
    int epoch;
    double loss;
    double best_loss;
};

// Full-batch training over the disjoint union of `training` (raw features).
// The standardizer is fitted on `training` and embedded in the checkpoint.
TrainResult train(std::span<const FeaturizedGraph> training, const TrainConfig& config,
                  const ModelConfig& model_config = ModelConfig::standard(),
                  const std::function<void(const TrainProgress&)>& progress = {});

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string loss_trace_csv(std::span<const double> trace);

}  // namespace sagc
