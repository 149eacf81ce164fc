#include "sagc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sagc/error.hpp"
#include "sagc/rng.hpp"

namespace sagc {

namespace {

// Field-name adapter. The first alias of each entry is the canonical name
// written by to_json; the others are accepted on input.
using Aliases = std::initializer_list<std::string_view>;

const Aliases kGraphName = {"name", "graph_name", "floor"};
const Aliases kSpaces = {"spaces", "space_nodes", "Spaces"};
const Aliases kElements = {"elements", "space_elements", "spaceElements", "SpaceElements"};
const Aliases kEdges = {"edges", "access_edges", "space_access_edges", "links"};

const Aliases kId = {"id", "guid", "node_id"};
const Aliases kLabel = {"label", "class", "class_name", "space_function", "space_element_class",
                            "category"};
const Aliases kCenter = {"center", "center_point", "centroid"};
const Aliases kBbox = {"bbox", "bounding_box", "volume_bounding_box"};
const Aliases kGrossFloorArea = {"gross_floor_area", "floor_area", "gfa", "area"};
const Aliases kVolume = {"volume"};
const Aliases kDoorCount = {"door_opening_count", "door_count", "opening_count"};
const Aliases kWindowCount = {"window_count", "windows"};
const Aliases kWidth = {"width"};
const Aliases kHeight = {"height"};
const Aliases kFaceBbox = {"face_bbox", "face_bounding_box", "bbox"};
const Aliases kFaceArea = {"face_area", "area"};
const Aliases kSpaceId = {"space_id", "space", "source"};
const Aliases kElementId = {"element_id", "element", "target"};
const Aliases kLength = {"length"};
const Aliases kElevationDiff = {"elevation_diff", "elevation_difference", "dz"};
const Aliases kAngleXy = {"angle_xy", "angle", "inclination"};

class ObjectReader {
   public:
    ObjectReader(const json& obj, std::string context) : obj_(obj), context_(std::move(context)) {
        if (!obj_.is_object()) {
            throw Error(ErrorKind::MalformedDocument, context_ + " is not a JSON object");
        }
    }

    const json* find(Aliases names) {
        for (auto name : names) {
            auto it = obj_.find(std::string(name));
            if (it != obj_.end()) {
                used_.insert(std::string(name));
                return &*it;
            }
        }
        return nullptr;
    }

    const json& require(Aliases names) {
        const json* v = find(names);
        if (v == nullptr) {
            throw Error(ErrorKind::MissingField,
                        "'" + std::string(*names.begin()) + "' in " + context_);
        }
        return *v;
    }

    double number(Aliases names) {
        const json& v = require(names);
        return as_number(v, *names.begin());
    }

    int count(Aliases names) {
        const json& v = require(names);
        const double d = as_number(v, *names.begin());
        if (d != std::floor(d)) {
            throw Error(ErrorKind::MalformedDocument,
                        "'" + std::string(*names.begin()) + "' in " + context_ + " is not an integer");
        }
        return static_cast<int>(d);
    }

    Point3 point(Aliases names) { return as_point(require(names), *names.begin()); }

    Box3 box(Aliases names) {
        const json& v = require(names);
        const std::string field(*names.begin());
        if (v.is_object()) {
            ObjectReader r(v, context_ + "." + field);
            Box3 b{r.point({"min"}), r.point({"max"})};
            r.collect_unused();
            return b;
        }
        if (v.is_array() && v.size() == 2) {
            return {as_point(v[0], field + "[0]"), as_point(v[1], field + "[1]")};
        }
        if (v.is_array() && v.size() == 6) {
            return {{as_number(v[0], field), as_number(v[1], field), as_number(v[2], field)},
                    {as_number(v[3], field), as_number(v[4], field), as_number(v[5], field)}};
        }
        throw Error(ErrorKind::MalformedDocument, "'" + field + "' in " + context_ + " is not a box");
    }

    std::string identifier(Aliases names) {
        const json& v = require(names);
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        throw Error(ErrorKind::MalformedDocument,
                    "'" + std::string(*names.begin()) + "' in " + context_ + " is not an identifier");
    }

    // Keys never looked up, for the unknown-field warning.
    std::vector<std::string> collect_unused() const {
        std::vector<std::string> out;
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!used_.contains(it.key())) out.push_back(it.key());
        }
        return out;
    }

    const std::string& context() const { return context_; }

   private:
    double as_number(const json& v, std::string_view field) const {
        if (!v.is_number()) {
            throw Error(ErrorKind::MalformedDocument,
                        "'" + std::string(field) + "' in " + context_ + " is not a number");
        }
        return v.get<double>();
    }

    Point3 as_point(const json& v, std::string_view field) const {
        if (v.is_array() && v.size() == 3) {
            return {as_number(v[0], field), as_number(v[1], field), as_number(v[2], field)};
        }
        if (v.is_object()) {
            ObjectReader r(v, context_ + "." + std::string(field));
            return {r.number({"x"}), r.number({"y"}), r.number({"z"})};
        }
        throw Error(ErrorKind::MalformedDocument,
                    "'" + std::string(field) + "' in " + context_ + " is not a 3-vector");
    }

    const json& obj_;
    std::string context_;
    std::set<std::string> used_;
};

class UnknownFieldLog {
   public:
    void add(std::string_view where, const std::vector<std::string>& keys) {
        for (const auto& k : keys) ++counts_[std::string(where) + "." + k];
    }

    void flush(const std::string& graph, std::vector<std::string>* out) const {
        if (out == nullptr) return;
        for (const auto& [key, n] : counts_) {
            out->push_back(graph + ": ignored unknown field '" + key + "' (" + std::to_string(n) +
                           " occurrence" + (n == 1 ? "" : "s") + ")");
        }
    }

   private:
    std::map<std::string, int> counts_;
};

const json& require_array(ObjectReader& r, Aliases names) {
    const json& v = r.require(names);
    if (!v.is_array()) {
        throw Error(ErrorKind::MalformedDocument,
                    "'" + std::string(*names.begin()) + "' in " + r.context() + " is not an array");
    }
    return v;
}

std::optional<ClassId> read_label(ObjectReader& r, LabelKind expected, const ParseOptions& options) {
    const json* v = r.find(kLabel);
    if (v == nullptr || v->is_null()) {
        if (options.require_labels) {
            throw Error(ErrorKind::MissingField, "'label' in " + r.context());
        }
        return std::nullopt;
    }
    if (!v->is_string()) {
        throw Error(ErrorKind::MalformedDocument, "'label' in " + r.context() + " is not a string");
    }
    const auto name = v->get<std::string>();
    const auto id = find_label(name);
    if (!id) throw Error(ErrorKind::UnknownClass, "'" + name + "' in " + r.context());
    if (label(*id).kind != expected) {
        throw Error(ErrorKind::UnknownClass,
                    "'" + name + "' in " + r.context() + " is not a " +
                        (expected == LabelKind::SpaceFunction ? "space function" : "space element") +
                        " class");
    }
    return id;
}

json point_json(const Point3& p) { return json::array({p.x, p.y, p.z}); }

json box_json(const Box3& b) {
    json j = json::object();
    j["min"] = point_json(b.min);
    j["max"] = point_json(b.max);
    return j;
}

json label_json(const std::optional<ClassId>& l) {
    if (!l) return nullptr;
    return std::string(label(*l).name);
}

}  // namespace

SpaceAccessGraph parse_graph(const json& doc, const ParseOptions& options,
                             std::vector<std::string>* warnings) {
    ObjectReader root(doc, "document");
    UnknownFieldLog unknown;
    const double angle_scale =
        options.angle_unit == AngleUnit::Degrees ? std::numbers::pi / 180.0 : 1.0;

    SpaceAccessGraph g;
    if (const json* n = root.find(kGraphName); n != nullptr && n->is_string()) {
        g.name = n->get<std::string>();
    } else {
        g.name = options.fallback_name;
    }

    const json& spaces = require_array(root, kSpaces);
    const json& elements = require_array(root, kElements);
    const json& edges = require_array(root, kEdges);

    for (std::size_t i = 0; i < spaces.size(); ++i) {
        ObjectReader r(spaces[i], "spaces[" + std::to_string(i) + "]");
        SpaceNode s;
        s.id = r.identifier(kId);
        s.label = read_label(r, LabelKind::SpaceFunction, options);
        s.center = r.point(kCenter);
        s.bbox = r.box(kBbox);
        s.gross_floor_area = r.number(kGrossFloorArea);
        s.volume = r.number(kVolume);
        s.door_opening_count = r.count(kDoorCount);
        s.window_count = r.count(kWindowCount);
        unknown.add("spaces[]", r.collect_unused());
        g.spaces.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < elements.size(); ++i) {
        ObjectReader r(elements[i], "elements[" + std::to_string(i) + "]");
        SpaceElementNode e;
        e.id = r.identifier(kId);
        e.label = read_label(r, LabelKind::SpaceElement, options);
        e.center = r.point(kCenter);
        e.width = r.number(kWidth);
        e.height = r.number(kHeight);
        e.face_bbox = r.box(kFaceBbox);
        e.face_area = r.number(kFaceArea);
        unknown.add("elements[]", r.collect_unused());
        g.elements.push_back(std::move(e));
    }

    if (g.node_count() == 0) throw Error(ErrorKind::EmptyGraph, "graph '" + g.name + "' has no nodes");

    // true = space
    std::unordered_map<std::string, bool> kind_of;
    for (const auto& s : g.spaces) {
        if (!kind_of.emplace(s.id, true).second) {
            throw Error(ErrorKind::DuplicateId, "node id '" + s.id + "'");
        }
    }
    for (const auto& e : g.elements) {
        if (!kind_of.emplace(e.id, false).second) {
            throw Error(ErrorKind::DuplicateId, "node id '" + e.id + "'");
        }
    }

    for (std::size_t i = 0; i < edges.size(); ++i) {
        ObjectReader r(edges[i], "edges[" + std::to_string(i) + "]");
        AccessEdge a;
        std::string first = r.identifier(kSpaceId);
        std::string second = r.identifier(kElementId);
        auto f = kind_of.find(first);
        auto s = kind_of.find(second);
        if (f == kind_of.end() || s == kind_of.end()) {
            const auto& missing = f == kind_of.end() ? first : second;
            throw Error(ErrorKind::DanglingEdge,
                        r.context() + " references unknown node '" + missing + "'");
        }
        if (f->second == s->second) {
            throw Error(ErrorKind::BipartiteViolation,
                        r.context() + " joins two " + (f->second ? "space" : "element") +
                            " nodes '" + first + "' and '" + second + "'");
        }
        if (!f->second) std::swap(first, second);
        a.space_id = std::move(first);
        a.element_id = std::move(second);
        a.length = r.number(kLength);
        a.elevation_diff = r.number(kElevationDiff);
        a.angle_xy = r.number(kAngleXy) * angle_scale;
        unknown.add("edges[]", r.collect_unused());
        g.edges.push_back(std::move(a));
    }

    unknown.add("document", root.collect_unused());
    unknown.flush(g.name, warnings);
    return g;
}

SpaceAccessGraph parse_graph_text(const std::string& text, const ParseOptions& options,
                                  std::vector<std::string>* warnings) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::MalformedDocument, e.what());
    }
    return parse_graph(doc, options, warnings);
}

SpaceAccessGraph read_graph_file(const std::filesystem::path& path, const ParseOptions& options,
                                 std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    ParseOptions opts = options;
    if (opts.fallback_name.empty()) opts.fallback_name = path.stem().string();
    try {
        return parse_graph_text(buf.str(), opts, warnings);
    } catch (const Error& e) {
        throw Error(e.kind(), path.filename().string() + ": " + e.message());
    }
}

json to_json(const SpaceAccessGraph& graph) {
    json doc = json::object();
    doc["name"] = graph.name;
    json spaces = json::array();
    for (const auto& s : graph.spaces) {
        json j = json::object();
        j["id"] = s.id;
        j["label"] = label_json(s.label);
        j["center"] = point_json(s.center);
        j["bbox"] = box_json(s.bbox);
        j["gross_floor_area"] = s.gross_floor_area;
        j["volume"] = s.volume;
        j["door_opening_count"] = s.door_opening_count;
        j["window_count"] = s.window_count;
        spaces.push_back(std::move(j));
    }
    json elements = json::array();
    for (const auto& e : graph.elements) {
        json j = json::object();
        j["id"] = e.id;
        j["label"] = label_json(e.label);
        j["center"] = point_json(e.center);
        j["width"] = e.width;
        j["height"] = e.height;
        j["face_bbox"] = box_json(e.face_bbox);
        j["face_area"] = e.face_area;
        elements.push_back(std::move(j));
    }
    json edges = json::array();
    for (const auto& a : graph.edges) {
        json j = json::object();
        j["space_id"] = a.space_id;
        j["element_id"] = a.element_id;
        j["length"] = a.length;
        j["elevation_diff"] = a.elevation_diff;
        j["angle_xy"] = a.angle_xy;
        edges.push_back(std::move(j));
    }
    doc["spaces"] = std::move(spaces);
    doc["elements"] = std::move(elements);
    doc["edges"] = std::move(edges);
    return doc;
}

void write_graph_file(const SpaceAccessGraph& graph, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out << to_json(graph).dump(1) << '\n';
}

Dataset load_dataset(const std::filesystem::path& directory, const ParseOptions& options,
                     std::vector<std::string>* warnings) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(directory, ec)) {
        throw Error(ErrorKind::IoFailure, "not a directory: " + directory.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    if (files.empty()) {
        throw Error(ErrorKind::EmptyDirectory, "no graph documents in " + directory.string());
    }
    std::sort(files.begin(), files.end());

    Dataset ds;
    ds.source = directory.string();
    std::set<std::string> names;
    for (const auto& f : files) {
        auto g = read_graph_file(f, options, warnings);
        if (!names.insert(g.name).second) {
            throw Error(ErrorKind::DuplicateId, f.filename().string() + ": duplicate graph name '" +
                                                    g.name + "'");
        }
        ds.graphs.push_back(std::move(g));
    }
    std::sort(ds.graphs.begin(), ds.graphs.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    return ds;
}

ClassCounts class_counts(const SpaceAccessGraph& graph) {
    ClassCounts c;
    auto tally = [&c](const std::optional<ClassId>& l) {
        if (!l) {
            ++c.unlabeled;
            return;
        }
        ++c.per_class[static_cast<std::size_t>(*l)];
        if (is_space_function(*l)) {
            ++c.space_functions;
        } else {
            ++c.space_elements;
        }
    };
    for (const auto& s : graph.spaces) tally(s.label);
    for (const auto& e : graph.elements) tally(e.label);
    return c;
}

ClassCounts class_counts(const Dataset& dataset) {
    ClassCounts total;
    for (const auto& g : dataset.graphs) {
        const auto c = class_counts(g);
        for (int k = 0; k < kNumClasses; ++k) total.per_class[k] += c.per_class[k];
        total.space_functions += c.space_functions;
        total.space_elements += c.space_elements;
        total.unlabeled += c.unlabeled;
    }
    return total;
}

std::string_view to_string(FindingKind kind) {
    switch (kind) {
        case FindingKind::DuplicateId: return "DuplicateId";
        case FindingKind::DuplicateEdge: return "DuplicateEdge";
        case FindingKind::DanglingEdge: return "DanglingEdge";
        case FindingKind::BipartiteViolation: return "BipartiteViolation";
        case FindingKind::GeometryInconsistency: return "GeometryInconsistency";
        case FindingKind::NonFiniteValue: return "NonFiniteValue";
        case FindingKind::EmptyGraph: return "EmptyGraph";
        case FindingKind::WrongLabelKind: return "WrongLabelKind";
    }
    return "Unknown";
}

ValidationReport validate_graph(const SpaceAccessGraph& graph) {
    constexpr double kTol = 1e-6;
    ValidationReport report;
    report.graph = graph.name;
    auto add = [&report](FindingKind k, std::string subject, std::string msg) {
        report.findings.push_back({k, std::move(subject), std::move(msg)});
    };
    auto finite = [](const Point3& p) {
        return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
    };
    auto ordered = [](const Box3& b) {
        return b.min.x <= b.max.x && b.min.y <= b.max.y && b.min.z <= b.max.z;
    };
    auto inside = [](const Point3& p, const Box3& b) {
        return p.x >= b.min.x - kTol && p.x <= b.max.x + kTol && p.y >= b.min.y - kTol &&
               p.y <= b.max.y + kTol && p.z >= b.min.z - kTol && p.z <= b.max.z + kTol;
    };

    if (graph.node_count() == 0) add(FindingKind::EmptyGraph, graph.name, "graph has no nodes");

    std::unordered_map<std::string, bool> kind_of;
    for (const auto& s : graph.spaces) {
        if (!kind_of.emplace(s.id, true).second) {
            add(FindingKind::DuplicateId, s.id, "node id used more than once");
        }
        if (s.label && !is_space_function(*s.label)) {
            add(FindingKind::WrongLabelKind, s.id, "space carries a space element class");
        }
        if (!finite(s.center) || !finite(s.bbox.min) || !finite(s.bbox.max) ||
            !std::isfinite(s.gross_floor_area) || !std::isfinite(s.volume)) {
            add(FindingKind::NonFiniteValue, s.id, "non-finite geometry");
            continue;
        }
        if (!(s.gross_floor_area > 0.0)) {
            add(FindingKind::GeometryInconsistency, s.id, "gross floor area must be positive");
        }
        if (!(s.volume > 0.0)) add(FindingKind::GeometryInconsistency, s.id, "volume must be positive");
        if (!ordered(s.bbox)) {
            add(FindingKind::GeometryInconsistency, s.id, "bounding box min exceeds max");
        } else if (!inside(s.center, s.bbox)) {
            add(FindingKind::GeometryInconsistency, s.id, "center lies outside bounding box");
        }
        if (s.door_opening_count < 0 || s.window_count < 0) {
            add(FindingKind::GeometryInconsistency, s.id, "negative door/window count");
        }
    }
    for (const auto& e : graph.elements) {
        if (!kind_of.emplace(e.id, false).second) {
            add(FindingKind::DuplicateId, e.id, "node id used more than once");
        }
        if (e.label && is_space_function(*e.label)) {
            add(FindingKind::WrongLabelKind, e.id, "element carries a space function class");
        }
        if (!finite(e.center) || !finite(e.face_bbox.min) || !finite(e.face_bbox.max) ||
            !std::isfinite(e.width) || !std::isfinite(e.height) || !std::isfinite(e.face_area)) {
            add(FindingKind::NonFiniteValue, e.id, "non-finite geometry");
            continue;
        }
        if (!(e.width > 0.0) || !(e.height > 0.0) || !(e.face_area > 0.0)) {
            add(FindingKind::GeometryInconsistency, e.id, "width, height and face area must be positive");
        }
        if (!ordered(e.face_bbox)) {
            add(FindingKind::GeometryInconsistency, e.id, "face bounding box min exceeds max");
        }
    }

    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& a : graph.edges) {
        const std::string subject = a.space_id + "--" + a.element_id;
        auto s = kind_of.find(a.space_id);
        auto e = kind_of.find(a.element_id);
        if (s == kind_of.end() || e == kind_of.end()) {
            add(FindingKind::DanglingEdge, subject, "edge references an unknown node");
        } else if (!s->second || e->second) {
            add(FindingKind::BipartiteViolation, subject,
                "edge must join one space and one element node");
        }
        if (!seen.emplace(a.space_id, a.element_id).second) {
            add(FindingKind::DuplicateEdge, subject, "edge listed more than once");
        }
        if (!std::isfinite(a.length) || !std::isfinite(a.elevation_diff) || !std::isfinite(a.angle_xy)) {
            add(FindingKind::NonFiniteValue, subject, "non-finite edge attribute");
            continue;
        }
        if (a.length < 0.0) add(FindingKind::GeometryInconsistency, subject, "negative length");
        if (std::abs(a.elevation_diff) > a.length + kTol) {
            add(FindingKind::GeometryInconsistency, subject, "|elevation_diff| exceeds length");
        }
        if (a.angle_xy < -kTol || a.angle_xy > std::numbers::pi / 2 + kTol) {
            add(FindingKind::GeometryInconsistency, subject, "angle_xy outside [0, pi/2]");
        }
    }
    return report;
}

json to_json(const ValidationReport& report) {
    json j = json::object();
    j["graph"] = report.graph;
    j["ok"] = report.ok();
    json findings = json::array();
    for (const auto& f : report.findings) {
        findings.push_back({{"kind", std::string(to_string(f.kind))},
                            {"subject", f.subject},
                            {"message", f.message}});
    }
    j["findings"] = std::move(findings);
    return j;
}

SpaceAccessGraph synth_fixture(std::uint64_t seed, int n_spaces) {
    if (n_spaces < 1) throw Error(ErrorKind::InvalidArgument, "n_spaces must be >= 1");
    constexpr double kStorey = 2.8;
    constexpr double kDoorHeight = 2.1;
    constexpr double kDoorWidth = 0.9;

    Rng rng(seed);
    SpaceAccessGraph g;
    g.name = "synth-" + std::to_string(seed) + "-" + std::to_string(n_spaces);

    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_spaces))));
    const int rows = (n_spaces + cols - 1) / cols;
    std::vector<double> xs(cols + 1, 0.0);
    std::vector<double> ys(rows + 1, 0.0);
    for (int c = 0; c < cols; ++c) xs[c + 1] = xs[c] + rng.uniform(2.5, 6.0);
    for (int r = 0; r < rows; ++r) ys[r + 1] = ys[r] + rng.uniform(2.5, 6.0);

    // Labels loosely follow size so that the geometry carries signal.
    const std::array<std::string_view, 6> small{"Bathroom", "Toilet", "Shaft", "StorageRoom",
                                                "WalkInCloset", "LaundryRoom"};
    const std::array<std::string_view, 6> large{"LivingRoom", "Bedroom", "Kitchen", "MasterBedroom",
                                                "InternalHallway", "Loggia"};
    for (int i = 0; i < n_spaces; ++i) {
        const int c = i % cols;
        const int r = i / cols;
        SpaceNode s;
        s.id = "S" + std::to_string(i);
        s.bbox = {{xs[c], ys[r], 0.0}, {xs[c + 1], ys[r + 1], kStorey}};
        const auto ext = s.bbox.extents();
        s.center = {(xs[c] + xs[c + 1]) / 2, (ys[r] + ys[r + 1]) / 2, kStorey / 2};
        s.gross_floor_area = ext.x * ext.y;
        s.volume = s.gross_floor_area * ext.z;
        const auto& pool = s.gross_floor_area < 16.0 ? small : large;
        s.label = find_label(i == 0 ? "Entrance" : pool[rng.below(pool.size())]);
        s.window_count = static_cast<int>(rng.below(4));
        g.spaces.push_back(std::move(s));
    }

    auto add_door = [&](const std::string& id, ClassId cls, Point3 center, bool wall_along_y,
                        const std::vector<int>& spaces) {
        SpaceElementNode e;
        e.id = id;
        e.label = cls;
        e.center = center;
        e.width = kDoorWidth;
        e.height = kDoorHeight;
        e.face_area = kDoorWidth * kDoorHeight;
        const double hw = kDoorWidth / 2;
        if (wall_along_y) {
            e.face_bbox = {{center.x, center.y - hw, 0.0}, {center.x, center.y + hw, kDoorHeight}};
        } else {
            e.face_bbox = {{center.x - hw, center.y, 0.0}, {center.x + hw, center.y, kDoorHeight}};
        }
        for (int si : spaces) {
            auto& s = g.spaces[static_cast<std::size_t>(si)];
            const double dx = s.center.x - center.x;
            const double dy = s.center.y - center.y;
            const double dz = s.center.z - center.z;
            AccessEdge a;
            a.space_id = s.id;
            a.element_id = e.id;
            a.length = std::sqrt(dx * dx + dy * dy + dz * dz);
            a.elevation_diff = dz;
            a.angle_xy = a.length > 0.0 ? std::asin(std::min(1.0, std::abs(dz) / a.length)) : 0.0;
            g.edges.push_back(std::move(a));
            ++s.door_opening_count;
        }
        g.elements.push_back(std::move(e));
    };

    // Candidate walls between grid neighbours, then a random spanning tree
    // plus a few extra doors.
    struct Wall {
        int a, b;
        bool side_by_side;
    };
    std::vector<Wall> walls;
    for (int i = 0; i < n_spaces; ++i) {
        const int c = i % cols;
        if (c + 1 < cols && i + 1 < n_spaces) walls.push_back({i, i + 1, true});
        if (i + cols < n_spaces) walls.push_back({i, i + cols, false});
    }
    rng.shuffle(walls);
    std::vector<int> parent(static_cast<std::size_t>(n_spaces));
    for (int i = 0; i < n_spaces; ++i) parent[static_cast<std::size_t>(i)] = i;
    auto root = [&parent](int v) {
        while (parent[static_cast<std::size_t>(v)] != v) v = parent[static_cast<std::size_t>(v)];
        return v;
    };

    const ClassId internal_door = *find_label("InternalDoor");
    const ClassId opening = *find_label("Opening");
    const ClassId balcony_door = *find_label("BalconyDoor");
    int door_no = 0;
    for (const auto& w : walls) {
        const int ra = root(w.a);
        const int rb = root(w.b);
        const bool tree_edge = ra != rb;
        if (!tree_edge && rng.uniform() > 0.25) continue;
        if (tree_edge) parent[static_cast<std::size_t>(ra)] = rb;
        const auto& sa = g.spaces[static_cast<std::size_t>(w.a)];
        const auto& sb = g.spaces[static_cast<std::size_t>(w.b)];
        const bool horizontal_neighbour = w.side_by_side;
        Point3 c;
        if (horizontal_neighbour) {
            const double lo = std::max(sa.bbox.min.y, sb.bbox.min.y) + kDoorWidth;
            const double hi = std::min(sa.bbox.max.y, sb.bbox.max.y) - kDoorWidth;
            c = {sa.bbox.max.x, rng.uniform(lo, hi), kDoorHeight / 2};
        } else {
            const double lo = std::max(sa.bbox.min.x, sb.bbox.min.x) + kDoorWidth;
            const double hi = std::min(sa.bbox.max.x, sb.bbox.max.x) - kDoorWidth;
            c = {rng.uniform(lo, hi), sa.bbox.max.y, kDoorHeight / 2};
        }
        const bool loggia = sa.label == find_label("Loggia") || sb.label == find_label("Loggia");
        const ClassId cls = loggia ? balcony_door : (rng.uniform() < 0.15 ? opening : internal_door);
        add_door("D" + std::to_string(door_no++), cls, c, horizontal_neighbour, {w.a, w.b});
    }

    // Apartment entrance on the south wall of the first space.
    const auto& entry = g.spaces.front();
    add_door("D" + std::to_string(door_no++), *find_label("UnitDoor"),
             {entry.center.x, entry.bbox.min.y, kDoorHeight / 2}, false, {0});
    return g;
}

}  // namespace sagc
