#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "sagc/error.hpp"
#include "sagc/taxonomy.hpp"

using namespace sagc;

namespace {

ErrorKind parse_error_kind(const json& doc, const ParseOptions& opts = {}) {
    try {
        parse_graph(doc, opts);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("document parsed");
    return ErrorKind::InvalidArgument;
}

std::size_t count_kind(const ValidationReport& r, FindingKind k) {
    std::size_t n = 0;
    for (const auto& f : r.findings) n += f.kind == k;
    return n;
}

}  // namespace

TEST_CASE("taxonomy has 22 space functions and 6 elements with stable ids") {
    const auto labels = all_labels();
    REQUIRE(labels.size() == 28);
    int functions = 0;
    for (const auto& l : labels) {
        CHECK(label(l.id).name == l.name);
        CHECK(find_label(l.name) == l.id);
        functions += l.kind == LabelKind::SpaceFunction;
        CHECK(is_space_function(l.id) == (l.id < kNumSpaceFunctions));
    }
    CHECK(functions == 22);
    const std::set<std::string_view> expected_functions = {
        "DiningRoom", "FamilyRoom",   "LivingRoom", "Bedroom",  "MasterBedroom", "BoxRoom",
        "HomeOffice", "Shaft",        "StorageRoom", "WalkInCloset", "Bathroom", "Toilet",
        "Kitchen",    "LaundryRoom",  "Elevator",   "Stairway", "Entrance",      "Hallway",
        "MainHallway", "InternalHallway", "AccessBalcony", "Loggia"};
    const std::set<std::string_view> expected_elements = {"Opening",          "InternalDoor", "UnitDoor",
                                                          "SideEntranceDoor", "ElevatorDoor", "BalconyDoor"};
    for (int id = 0; id < kNumClasses; ++id) {
        const auto& l = label(id);
        if (id < kNumSpaceFunctions) {
            CHECK(expected_functions.count(l.name) == 1);
        } else {
            CHECK(expected_elements.count(l.name) == 1);
        }
        if (id > 0 && id != kNumSpaceFunctions) CHECK(label(id - 1).name < l.name);
    }
    CHECK_THROWS_AS(label(28), Error);
    CHECK_FALSE(find_label("Garage").has_value());
}

TEST_CASE("living room ancestry reaches Space through residential spaces") {
    const auto chain = ancestors(*find_label("LivingRoom"));
    REQUIRE(chain.size() == 3);
    CHECK(chain[0] == "CommunalSpace");
    CHECK(chain[1] == "ResidentialSpace");
    CHECK(chain[2] == "Space");
    CHECK(ancestors(*find_label("UnitDoor")).back() == "SpaceElement");
}

TEST_CASE("minimal document parses to two nodes and one edge") {
    const auto g = parse_graph(test::minimal_doc());
    CHECK(g.name == "minimal");
    CHECK(g.node_count() == 2);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.spaces[0].label == find_label("LivingRoom"));
    CHECK(g.elements[0].label == find_label("UnitDoor"));
    CHECK(g.edges[0].length == doctest::Approx(2.0));
    CHECK(validate_graph(g).ok());
}

TEST_CASE("parse errors carry the matching kind") {
    SUBCASE("space-space edge") {
        auto doc = test::minimal_doc();
        doc["spaces"].push_back(doc["spaces"][0]);
        doc["spaces"][1]["id"] = "s2";
        doc["edges"][0]["element_id"] = "s2";
        CHECK(parse_error_kind(doc) == ErrorKind::BipartiteViolation);
    }
    SUBCASE("dangling edge") {
        auto doc = test::minimal_doc();
        doc["edges"][0]["element_id"] = "ghost";
        CHECK(parse_error_kind(doc) == ErrorKind::DanglingEdge);
    }
    SUBCASE("unknown class") {
        auto doc = test::minimal_doc();
        doc["spaces"][0]["label"] = "Garage";
        CHECK(parse_error_kind(doc) == ErrorKind::UnknownClass);
    }
    SUBCASE("missing field names the field") {
        auto doc = test::minimal_doc();
        doc["elements"][0].erase("width");
        try {
            parse_graph(doc);
            FAIL("parsed");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MissingField);
            CHECK(std::string(e.what()).find("width") != std::string::npos);
        }
    }
    SUBCASE("syntax error") {
        CHECK_THROWS_AS(parse_graph_text("{\"spaces\": [", {}), Error);
        try {
            parse_graph_text("{\"spaces\": [");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::MalformedDocument);
        }
    }
    SUBCASE("missing label unless labels are optional") {
        auto doc = test::minimal_doc();
        doc["spaces"][0].erase("label");
        CHECK(parse_error_kind(doc) == ErrorKind::MissingField);
        ParseOptions opts;
        opts.require_labels = false;
        const auto g = parse_graph(doc, opts);
        CHECK_FALSE(g.spaces[0].label.has_value());
    }
    SUBCASE("duplicate node id") {
        auto doc = test::minimal_doc();
        doc["elements"][0]["id"] = "s1";
        doc["edges"][0]["element_id"] = "s1";
        CHECK(parse_error_kind(doc) == ErrorKind::DuplicateId);
    }
}

TEST_CASE("unknown fields are ignored with a warning") {
    auto doc = test::minimal_doc();
    doc["spaces"][0]["ifc_guid"] = "0xyz";
    doc["schema_rev"] = 3;
    std::vector<std::string> warnings;
    const auto g = parse_graph(doc, {}, &warnings);
    CHECK(g.node_count() == 2);
    REQUIRE_FALSE(warnings.empty());
    std::string all;
    for (const auto& w : warnings) all += w;
    CHECK(all.find("ifc_guid") != std::string::npos);
    CHECK(all.find("schema_rev") != std::string::npos);
}

TEST_CASE("adapter accepts alternative field names and degrees") {
    const auto doc = json::parse(R"({
      "Spaces": [{"guid": "s1", "class": "Kitchen", "centroid": [1, 1, 1],
                  "bounding_box": [0, 0, 0, 2, 2, 2], "floor_area": 4, "volume": 8,
                  "door_count": 1, "windows": 0}],
      "SpaceElements": [{"guid": "d1", "class": "Opening", "centroid": [2, 1, 1], "width": 1, "height": 2,
                         "face_bounding_box": [[2, 0.5, 0], [2, 1.5, 2]], "face_area": 2}],
      "links": [{"source": "d1", "target": "s1", "length": 1, "dz": 0, "inclination": 90}]
    })");
    ParseOptions opts;
    opts.angle_unit = AngleUnit::Degrees;
    opts.fallback_name = "alias";
    const auto g = parse_graph(doc, opts);
    CHECK(g.name == "alias");
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].space_id == "s1");
    CHECK(g.edges[0].element_id == "d1");
    CHECK(g.edges[0].angle_xy == doctest::Approx(std::acos(0.0)));
    CHECK(g.spaces[0].bbox.max.y == 2.0);
    CHECK(g.elements[0].face_bbox.min.y == 0.5);
}

TEST_CASE("serialize then parse is the identity") {
    for (std::uint64_t seed : {1u, 7u, 42u}) {
        const auto g = synth_fixture(seed, 9);
        const auto text = to_json(g).dump();
        const auto back = parse_graph_text(text);
        CHECK(back == g);
        CHECK(to_json(back).dump() == text);
    }
}

TEST_CASE("validate_graph reports each violation") {
    const auto base = synth_fixture(3, 6);
    CHECK(validate_graph(base).ok());

    SUBCASE("duplicate id") {
        auto g = base;
        g.elements[0].id = g.spaces[0].id;
        CHECK(count_kind(validate_graph(g), FindingKind::DuplicateId) == 1);
    }
    SUBCASE("edge shorter than its elevation difference") {
        auto g = base;
        g.edges[0].elevation_diff = g.edges[0].length + 0.5;
        const auto r = validate_graph(g);
        CHECK(count_kind(r, FindingKind::GeometryInconsistency) == 1);
        CHECK(r.findings.size() == 1);
    }
    SUBCASE("duplicate edge") {
        auto g = base;
        g.edges.push_back(g.edges[0]);
        CHECK(count_kind(validate_graph(g), FindingKind::DuplicateEdge) == 1);
    }
    SUBCASE("bipartite violation") {
        auto g = base;
        g.edges[0].element_id = g.spaces[1].id;
        CHECK(count_kind(validate_graph(g), FindingKind::BipartiteViolation) == 1);
    }
    SUBCASE("empty graph") {
        SpaceAccessGraph g;
        g.name = "empty";
        CHECK(count_kind(validate_graph(g), FindingKind::EmptyGraph) == 1);
    }
    SUBCASE("validation does not mutate") {
        auto g = base;
        g.edges[0].elevation_diff = 99;
        const auto copy = g;
        (void)validate_graph(g);
        CHECK(g == copy);
    }
}

TEST_CASE("synthetic fixtures are deterministic, valid and seed dependent") {
    const auto a = to_json(synth_fixture(7, 5)).dump();
    const auto b = to_json(synth_fixture(7, 5)).dump();
    const auto c = to_json(synth_fixture(8, 5)).dump();
    CHECK(a == b);
    CHECK(a != c);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        for (int n : {1, 2, 5, 13}) {
            const auto g = synth_fixture(seed, n);
            INFO("seed " << seed << " n " << n);
            CHECK(g.spaces.size() == static_cast<std::size_t>(n));
            CHECK(validate_graph(g).ok());
        }
    }
}

TEST_CASE("class counts partition by kind") {
    Dataset ds;
    for (std::uint64_t s = 0; s < 5; ++s) ds.graphs.push_back(synth_fixture(s, 7));
    const auto c = class_counts(ds);
    long long spaces = 0, elements = 0, functions = 0, element_labels = 0;
    for (const auto& g : ds.graphs) {
        spaces += static_cast<long long>(g.spaces.size());
        elements += static_cast<long long>(g.elements.size());
    }
    for (int id = 0; id < kNumClasses; ++id) {
        (is_space_function(id) ? functions : element_labels) += c.per_class[static_cast<std::size_t>(id)];
    }
    CHECK(c.space_functions == spaces);
    CHECK(c.space_elements == elements);
    CHECK(functions == spaces);
    CHECK(element_labels == elements);
    CHECK(c.unlabeled == 0);

    const auto empty = class_counts(Dataset{});
    for (long long v : empty.per_class) CHECK(v == 0);
    CHECK(empty.space_functions == 0);
}

TEST_CASE("load_dataset sorts by name and names corrupt files") {
    const auto dir = test::temp_dir("load");
    CHECK_THROWS_AS(load_dataset(dir), Error);
    try {
        load_dataset(dir);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyDirectory);
    }
    write_graph_file(synth_fixture(2, 4), dir / "b.json");
    write_graph_file(synth_fixture(1, 4), dir / "a.json");
    const auto ds = load_dataset(dir);
    REQUIRE(ds.graphs.size() == 2);
    CHECK(ds.graphs[0].name < ds.graphs[1].name);

    test::write_file(dir / "broken.json", "{\"spaces\": [}");
    try {
        load_dataset(dir);
        FAIL("loaded");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("validation report serializes to JSON") {
    auto g = synth_fixture(3, 4);
    g.edges.push_back(g.edges[0]);
    const auto j = to_json(validate_graph(g));
    CHECK(j["graph"] == g.name);
    REQUIRE(j["findings"].size() == 1);
    CHECK(j["findings"][0]["kind"] == "DuplicateEdge");
}
