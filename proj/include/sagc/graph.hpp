#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sagc/taxonomy.hpp"

namespace sagc {

using json = nlohmann::json;

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool operator==(const Point3&) const = default;
};

struct Box3 {
    Point3 min;
    Point3 max;

    Point3 extents() const { return {max.x - min.x, max.y - min.y, max.z - min.z}; }
    bool operator==(const Box3&) const = default;
};

struct SpaceNode {
    std::string id;
    std::optional<ClassId> label;
    Point3 center;
    Box3 bbox;
    double gross_floor_area = 0.0;
    double volume = 0.0;
    int door_opening_count = 0;
    int window_count = 0;

    bool operator==(const SpaceNode&) const = default;
};

struct SpaceElementNode {
    std::string id;
    std::optional<ClassId> label;
    Point3 center;
    double width = 0.0;
    double height = 0.0;
    Box3 face_bbox;
    double face_area = 0.0;

    bool operator==(const SpaceElementNode&) const = default;
};

struct AccessEdge {
    std::string space_id;
    std::string element_id;
    double length = 0.0;
    double elevation_diff = 0.0;
    double angle_xy = 0.0;  // inclination against the horizontal plane, radians

    bool operator==(const AccessEdge&) const = default;
};

struct SpaceAccessGraph {
    std::string name;
    std::vector<SpaceNode> spaces;
    std::vector<SpaceElementNode> elements;
    std::vector<AccessEdge> edges;

    std::size_t node_count() const { return spaces.size() + elements.size(); }
    bool operator==(const SpaceAccessGraph&) const = default;
};

struct Dataset {
    std::vector<SpaceAccessGraph> graphs;
    std::string source;
};

enum class AngleUnit { Radians, Degrees };

struct ParseOptions {
    // When false, nodes may omit their class label (prediction input).
    bool require_labels = true;
    AngleUnit angle_unit = AngleUnit::Radians;
    // Used when the document carries no name of its own.
    std::string fallback_name;
};

// Parses a graph document. Structural invariants (unique ids, known
// classes, resolvable bipartite edges, at least one node) are enforced
// here; geometric consistency is left to validate_graph. Unknown fields
// are collected into `warnings` when given.
SpaceAccessGraph parse_graph(const json& doc, const ParseOptions& options = {},
                             std::vector<std::string>* warnings = nullptr);
SpaceAccessGraph parse_graph_text(const std::string& text, const ParseOptions& options = {},
                                  std::vector<std::string>* warnings = nullptr);
SpaceAccessGraph read_graph_file(const std::filesystem::path& path,
                                 const ParseOptions& options = {},
                                 std::vector<std::string>* warnings = nullptr);

json to_json(const SpaceAccessGraph& graph);
void write_graph_file(const SpaceAccessGraph& graph, const std::filesystem::path& path);

// Reads every *.json file in `directory`, sorted by graph name.
Dataset load_dataset(const std::filesystem::path& directory, const ParseOptions& options = {},
                     std::vector<std::string>* warnings = nullptr);

struct ClassCounts {
    std::array<long long, kNumClasses> per_class{};
    long long space_functions = 0;
    long long space_elements = 0;
    long long unlabeled = 0;
};

ClassCounts class_counts(const Dataset& dataset);
ClassCounts class_counts(const SpaceAccessGraph& graph);

enum class FindingKind {
    DuplicateId,
    DuplicateEdge,
    DanglingEdge,
    BipartiteViolation,
    GeometryInconsistency,
    NonFiniteValue,
    EmptyGraph,
    WrongLabelKind,
};

std::string_view to_string(FindingKind kind);

struct ValidationFinding {
    FindingKind kind;
    std::string subject;  // node id or "space_id--element_id"
    std::string message;
};

struct ValidationReport {
    std::string graph;
    std::vector<ValidationFinding> findings;

    bool ok() const { return findings.empty(); }
};

ValidationReport validate_graph(const SpaceAccessGraph& graph);
json to_json(const ValidationReport& report);

// Deterministic synthetic floor with `n_spaces` spaces, doors placed on
// shared walls of a grid layout. Always passes validate_graph.
SpaceAccessGraph synth_fixture(std::uint64_t seed, int n_spaces);

}  // namespace sagc
