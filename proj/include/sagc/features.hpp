#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sagc/graph.hpp"

namespace sagc {

inline constexpr std::size_t kNodeFeatureDim = 20;
inline constexpr std::size_t kEdgeFeatureDim = 5;

// Node feature slots.
namespace node_slot {
inline constexpr std::size_t kIsSpace = 0;
inline constexpr std::size_t kPosX = 1;
inline constexpr std::size_t kPosY = 2;
inline constexpr std::size_t kPosZ = 3;
inline constexpr std::size_t kExtentX = 4;
inline constexpr std::size_t kExtentY = 5;
inline constexpr std::size_t kExtentZ = 6;
inline constexpr std::size_t kGrossFloorArea = 7;
inline constexpr std::size_t kVolume = 8;
inline constexpr std::size_t kDoorOpeningCount = 9;
inline constexpr std::size_t kWindowCount = 10;
inline constexpr std::size_t kWidth = 11;
inline constexpr std::size_t kHeight = 12;
inline constexpr std::size_t kFaceArea = 13;
inline constexpr std::size_t kDegree = 14;
inline constexpr std::size_t kDegreeCentrality = 15;
inline constexpr std::size_t kBetweenness = 16;
inline constexpr std::size_t kPageRank = 17;
inline constexpr std::size_t kCloseness = 18;
inline constexpr std::size_t kClustering = 19;
}  // namespace node_slot

namespace edge_slot {
inline constexpr std::size_t kLength = 0;
inline constexpr std::size_t kElevationDiff = 1;
inline constexpr std::size_t kAngleXy = 2;
inline constexpr std::size_t kEdgeBetweenness = 3;
inline constexpr std::size_t kAngleX = 4;
}  // namespace edge_slot

// Simple undirected graph over rows 0..n-1. For a space access graph the
// rows are the spaces in document order followed by the elements.
class Topology {
   public:
    Topology(std::size_t n, std::vector<std::pair<int, int>> edges);
    explicit Topology(const SpaceAccessGraph& graph);

    std::size_t node_count() const { return adjacency_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& neighbours(std::size_t v) const { return adjacency_[v]; }
    // Edge ids parallel to neighbours(v).
    const std::vector<int>& incident_edges(std::size_t v) const { return incident_[v]; }

   private:
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> adjacency_;
    std::vector<std::vector<int>> incident_;
};

std::vector<std::string> node_ids(const SpaceAccessGraph& graph);

std::vector<int> node_degree(const Topology& g);
// degree / (n - 1); 0 for a single-node graph.
std::vector<double> degree_centrality(const Topology& g);
std::vector<double> betweenness_centrality(const Topology& g);
std::vector<double> closeness_centrality(const Topology& g);
std::vector<double> clustering_coefficient(const Topology& g);
// One value per entry of g.edges().
std::vector<double> edge_betweenness(const Topology& g);

struct PageRankOptions {
    double damping = 0.85;
    double tol = 1e-9;
    int max_iter = 200;
};

std::vector<double> pagerank(const Topology& g, const PageRankOptions& options = {});

// Angle in [0, pi/2] between the xy projection of (to - from) and the x axis.
double edge_angle_x(const Point3& from, const Point3& to);

// Centers min-max scaled into the graph's center bounding box.
std::vector<Point3> normalize_positions(const SpaceAccessGraph& graph);

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

inline constexpr ClassId kUnlabeled = -1;

struct FeaturizedGraph {
    std::string name;
    std::vector<std::string> node_ids;
    Matrix node_features;  // N x 20
    Matrix edge_features;  // E x 5
    std::vector<ClassId> labels;  // kUnlabeled where the input had none
    std::vector<std::pair<int, int>> edge_index;  // (element_row, space_row)

    std::size_t node_count() const { return node_features.rows; }
    std::size_t edge_count() const { return edge_features.rows; }
    bool operator==(const FeaturizedGraph&) const = default;
};

FeaturizedGraph featurize(const SpaceAccessGraph& graph);

// Node/edge rows of all graphs stacked with edge indices offset.
FeaturizedGraph disjoint_union(std::span<const FeaturizedGraph> graphs);

struct FeatureStats {
    std::array<double, kNodeFeatureDim> node_mean{};
    std::array<double, kNodeFeatureDim> node_std{};
    std::array<double, kEdgeFeatureDim> edge_mean{};
    std::array<double, kEdgeFeatureDim> edge_std{};
    std::string fitted_on;

    bool operator==(const FeatureStats&) const = default;
};

// Population mean/std pooled over every node (edge) row of the inputs.
FeatureStats fit_standardizer(std::span<const FeaturizedGraph> training,
                              std::string fitted_on = {});
FeaturizedGraph apply_standardizer(const FeatureStats& stats, const FeaturizedGraph& graph);

// JSON with 17 significant digits per float.
std::string featurized_to_json(const FeaturizedGraph& graph);
FeaturizedGraph featurized_from_json(const std::string& text);
std::string stats_to_json(const FeatureStats& stats);
FeatureStats stats_from_json(const std::string& text);

}  // namespace sagc
