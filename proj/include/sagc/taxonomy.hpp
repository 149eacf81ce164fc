#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sagc {

using ClassId = int;

enum class LabelKind { SpaceFunction, SpaceElement };

struct ClassLabel {
    ClassId id;
    std::string_view name;
    LabelKind kind;
    std::string_view parent;
};

inline constexpr int kNumSpaceFunctions = 22;
inline constexpr int kNumSpaceElements = 6;
inline constexpr int kNumClasses = kNumSpaceFunctions + kNumSpaceElements;

// Ids are alphabetical within kind, space functions occupying 0..21 and
// space elements 22..27.
std::span<const ClassLabel> all_labels();
const ClassLabel& label(ClassId id);
std::optional<ClassId> find_label(std::string_view name);
bool is_space_function(ClassId id);

// Taxonomy chain from the immediate parent up to the root ("Space" or
// "SpaceElement").
std::vector<std::string_view> ancestors(ClassId id);

}  // namespace sagc
