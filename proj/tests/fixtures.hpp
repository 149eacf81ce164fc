#pragma once

#include <random>

#include "gradcheck.hpp"
#include "sagc/features.hpp"

namespace sagc::test {

// 2 spaces (rows 0-1) and 3 elements (rows 2-4) with random standardized-looking features.
inline FeaturizedGraph five_node_fixture(std::uint64_t seed = 11) {
    std::mt19937_64 gen(seed);
    FeaturizedGraph g;
    g.name = "five";
    g.node_ids = {"s1", "s2", "d1", "d2", "w1"};
    g.labels = {0, 1, 22, 22, 27};
    g.edge_index = {{2, 0}, {3, 0}, {3, 1}, {4, 1}};
    g.node_features = Matrix(5, kNodeFeatureDim);
    g.node_features.data = random_values(gen, 5 * kNodeFeatureDim);
    g.edge_features = Matrix(4, kEdgeFeatureDim);
    g.edge_features.data = random_values(gen, 4 * kEdgeFeatureDim);
    return g;
}

}  // namespace sagc::test
