#include "sagc/taxonomy.hpp"

#include <algorithm>
#include <map>

#include "sagc/error.hpp"

namespace sagc {

namespace {

struct Entry {
    std::string_view name;
    std::string_view parent;
};

// Predicted classes with their immediate parents.
constexpr std::array<Entry, kNumSpaceFunctions> kSpaceFunctions{{
    {"AccessBalcony", "External"},
    {"Bathroom", "SanitarySpace"},
    {"Bedroom", "PrivateSpace"},
    {"BoxRoom", "PrivateSpace"},
    {"DiningRoom", "CommunalSpace"},
    {"Elevator", "VerticalCirculationSpace"},
    {"Entrance", "HorizontalCirculationSpace"},
    {"FamilyRoom", "CommunalSpace"},
    {"Hallway", "HorizontalCirculationSpace"},
    {"HomeOffice", "PrivateSpace"},
    {"InternalHallway", "HorizontalCirculationSpace"},
    {"Kitchen", "ServiceSpace"},
    {"LaundryRoom", "ServiceSpace"},
    {"LivingRoom", "CommunalSpace"},
    {"Loggia", "External"},
    {"MainHallway", "HorizontalCirculationSpace"},
    {"MasterBedroom", "PrivateSpace"},
    {"Shaft", "ServiceSpace"},
    {"Stairway", "VerticalCirculationSpace"},
    {"StorageRoom", "ServiceSpace"},
    {"Toilet", "SanitarySpace"},
    {"WalkInCloset", "ServiceSpace"},
}};

constexpr std::array<Entry, kNumSpaceElements> kSpaceElements{{
    {"BalconyDoor", "Door"},
    {"ElevatorDoor", "Door"},
    {"InternalDoor", "Door"},
    {"Opening", "SpaceEnclosingElement"},
    {"SideEntranceDoor", "Door"},
    {"UnitDoor", "Door"},
}};

// Abstract (non-predicted) taxonomy nodes.
const std::map<std::string_view, std::string_view>& abstract_parents() {
    static const std::map<std::string_view, std::string_view> parents{
        {"ResidentialSpace", "Space"},
        {"CommunalSpace", "ResidentialSpace"},
        {"PrivateSpace", "ResidentialSpace"},
        {"ServiceSpace", "Space"},
        {"SanitarySpace", "ServiceSpace"},
        {"CirculationSpace", "Space"},
        {"VerticalCirculationSpace", "CirculationSpace"},
        {"HorizontalCirculationSpace", "CirculationSpace"},
        {"External", "Space"},
        {"SpaceEnclosingElement", "SpaceElement"},
        {"Door", "SpaceEnclosingElement"},
    };
    return parents;
}

std::array<ClassLabel, kNumClasses> build_labels() {
    std::array<ClassLabel, kNumClasses> out{};
    int id = 0;
    for (const auto& e : kSpaceFunctions) {
        out[id] = ClassLabel{id, e.name, LabelKind::SpaceFunction, e.parent};
        ++id;
    }
    for (const auto& e : kSpaceElements) {
        out[id] = ClassLabel{id, e.name, LabelKind::SpaceElement, e.parent};
        ++id;
    }
    return out;
}

const std::array<ClassLabel, kNumClasses>& labels() {
    static const auto table = build_labels();
    return table;
}

}  // namespace

std::span<const ClassLabel> all_labels() { return labels(); }

const ClassLabel& label(ClassId id) {
    if (id < 0 || id >= kNumClasses) {
        throw Error(ErrorKind::LabelOutOfRange, "class id " + std::to_string(id));
    }
    return labels()[static_cast<std::size_t>(id)];
}

std::optional<ClassId> find_label(std::string_view name) {
    for (const auto& l : labels()) {
        if (l.name == name) return l.id;
    }
    return std::nullopt;
}

bool is_space_function(ClassId id) { return label(id).kind == LabelKind::SpaceFunction; }

std::vector<std::string_view> ancestors(ClassId id) {
    std::vector<std::string_view> chain;
    std::string_view cur = label(id).parent;
    const auto& parents = abstract_parents();
    while (!cur.empty()) {
        chain.push_back(cur);
        auto it = parents.find(cur);
        if (it == parents.end()) break;
        cur = it->second;
    }
    return chain;
}

}  // namespace sagc
