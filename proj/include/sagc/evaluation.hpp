#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sagc/features.hpp"
#include "sagc/training.hpp"

namespace sagc {

// counts[actual][predicted]
using ConfusionMatrix = std::array<std::array<long long, kNumClasses>, kNumClasses>;
using ClassTally = std::array<long long, kNumClasses>;

// Entries with a negative label (unlabeled nodes) are skipped.
ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels);
ConfusionMatrix& operator+=(ConfusionMatrix& lhs, const ConfusionMatrix& rhs);

// Row percentages; rows without support stay empty.
std::array<std::optional<std::array<double, kNumClasses>>, kNumClasses> normalized_rows(const ConfusionMatrix& m);

struct ConfusionCounts {
    ClassTally tp{};
    ClassTally fp{};
    ClassTally fn{};
    ClassTally support{};

    long long total() const;
};

ConfusionCounts confusion_counts(const ConfusionMatrix& m);

double precision(const ConfusionCounts& counts, ClassId c);
double recall(const ConfusionCounts& counts, ClassId c);
double f1(double precision, double recall);

struct ClassMetrics {
    ClassId class_id = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long long support = 0;
    std::optional<long long> train_count;
};

struct EvaluationReport {
    std::string split;  // "test" or "train"
    std::vector<std::string> graphs;
    std::vector<ClassMetrics> classes;  // classes with test support, ascending id
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    long long total_support = 0;
    long long correct = 0;
    std::optional<ClassTally> train_counts;  // all classes, for the table
    ConfusionMatrix confusion{};

    std::optional<long long> total_train() const;
    double accuracy() const { return total_support == 0 ? 0.0 : static_cast<double>(correct) / total_support; }
};

EvaluationReport build_report(const ConfusionMatrix& confusion, const std::optional<ClassTally>& train_counts = {});

struct Prediction {
    std::vector<int> predicted;
    Matrix probabilities;  // N x 28
    Matrix penultimate;    // N x penultimate width
};

// `graph` carries raw features; the checkpoint's statistics are applied here.
Prediction predict(const Checkpoint& ckpt, const FeaturizedGraph& graph);

EvaluationReport evaluate(const Checkpoint& ckpt, std::span<const FeaturizedGraph> graphs,
                          const std::optional<ClassTally>& train_counts = {}, std::string split = "test");

ClassTally label_tally(std::span<const FeaturizedGraph> graphs);

json to_json(const EvaluationReport& report);
std::string report_table(const EvaluationReport& report);
std::string confusion_csv(const ConfusionMatrix& m);
std::string normalized_confusion_csv(const ConfusionMatrix& m);

// Columns graph, node_id, true_label, predicted_label, e_1..e_W.
std::string embeddings_csv(const Checkpoint& ckpt, std::span<const FeaturizedGraph> graphs);
// Returns the number of rows written.
std::size_t export_embeddings(const Checkpoint& ckpt, std::span<const FeaturizedGraph> graphs,
                              const std::filesystem::path& path);

}  // namespace sagc
