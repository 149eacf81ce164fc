#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "sagc/graph.hpp"

namespace sagc::test {

inline json minimal_doc() {
    return json::parse(R"({
      "name": "minimal",
      "spaces": [{"id": "s1", "label": "LivingRoom", "center": [2, 2, 1.25],
                  "bbox": {"min": [0, 0, 0], "max": [4, 4, 2.5]},
                  "gross_floor_area": 16, "volume": 40, "door_opening_count": 1, "window_count": 2}],
      "elements": [{"id": "d1", "label": "UnitDoor", "center": [4, 2, 1.05], "width": 1.0, "height": 2.1,
                    "face_bbox": {"min": [4, 1.5, 0], "max": [4, 2.5, 2.1]}, "face_area": 2.1}],
      "edges": [{"space_id": "s1", "element_id": "d1", "length": 2.0, "elevation_diff": 0.2, "angle_xy": 0.1}]
    })");
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::mt19937_64 gen(std::random_device{}());
    auto dir = std::filesystem::temp_directory_path() / ("sagc-" + tag + "-" + std::to_string(gen()));
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace sagc::test
