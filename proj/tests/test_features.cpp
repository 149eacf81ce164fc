#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sagc/error.hpp"

using namespace sagc;

namespace {

Topology path3() { return Topology(3, {{0, 1}, {1, 2}}); }
Topology triangle() { return Topology(3, {{0, 1}, {1, 2}, {0, 2}}); }
Topology star4() { return Topology(4, {{0, 1}, {0, 2}, {0, 3}}); }
Topology k4() { return Topology(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}); }

std::vector<double> column(const Matrix& m, std::size_t c) {
    std::vector<double> out;
    for (std::size_t r = 0; r < m.rows; ++r) out.push_back(m(r, c));
    return out;
}

FeaturizedGraph tiny(std::vector<double> first_column) {
    FeaturizedGraph g;
    g.name = "tiny";
    g.node_features = Matrix(first_column.size(), kNodeFeatureDim);
    for (std::size_t r = 0; r < first_column.size(); ++r) {
        g.node_features(r, 0) = first_column[r];
        g.node_features(r, 1) = 5.0;
        g.labels.push_back(0);
        g.node_ids.push_back("n" + std::to_string(r));
    }
    g.edge_features = Matrix(0, kEdgeFeatureDim);
    return g;
}

}  // namespace

TEST_CASE("degree") {
    CHECK(node_degree(path3())[1] == 2);
    CHECK(node_degree(Topology(1, {}))[0] == 0);
    const auto dc = degree_centrality(star4());
    CHECK(dc[0] == doctest::Approx(1.0));
    CHECK(dc[1] == doctest::Approx(1.0 / 3.0));
    CHECK(degree_centrality(Topology(1, {}))[0] == 0.0);
}

TEST_CASE("small-graph centralities") {
    CHECK(betweenness_centrality(path3())[1] == doctest::Approx(1.0));
    for (double b : betweenness_centrality(triangle())) CHECK(b == 0.0);
    for (double c : closeness_centrality(k4())) CHECK(c == doctest::Approx(1.0));
    CHECK(closeness_centrality(Topology(3, {{0, 1}}))[2] == 0.0);
    for (double c : clustering_coefficient(triangle())) CHECK(c == doctest::Approx(1.0));
    for (double e : edge_betweenness(path3())) CHECK(e == doctest::Approx(2.0 / 3.0));
    CHECK(edge_betweenness(Topology(2, {{0, 1}}))[0] == doctest::Approx(1.0));
    const auto pr = pagerank(Topology(2, {{0, 1}}));
    CHECK(pr[0] == doctest::Approx(0.5));
    CHECK(pr[1] == doctest::Approx(0.5));
    const auto iso = pagerank(Topology(3, {{0, 1}}));
    CHECK(std::accumulate(iso.begin(), iso.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pagerank reports non-convergence") {
    PageRankOptions opts;
    opts.max_iter = 1;
    opts.tol = 1e-300;
    try {
        pagerank(star4(), opts);
        FAIL("converged");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonConvergence);
    }
}

TEST_CASE("centralities agree with brute force on random graphs") {
    std::mt19937_64 gen(20240531);
    int disconnected = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const Topology g = oracle::random_graph(gen);
        const auto a = oracle::adjacency(g);
        const std::size_t n = g.node_count();
        CAPTURE(trial);
        CAPTURE(n);

        const auto deg = node_degree(g);
        const auto dc = degree_centrality(g);
        for (std::size_t v = 0; v < n; ++v) {
            const int rowsum = std::accumulate(a[v].begin(), a[v].end(), 0);
            CHECK(deg[v] == rowsum);
            CHECK(dc[v] == doctest::Approx(n > 1 ? rowsum / (n - 1.0) : 0.0).epsilon(1e-12));
        }
        CHECK(oracle::max_abs_diff(betweenness_centrality(g), oracle::betweenness(g)) <= 1e-9);
        CHECK(oracle::max_abs_diff(edge_betweenness(g), oracle::edge_betweenness(g)) <= 1e-9);
        CHECK(oracle::max_abs_diff(closeness_centrality(g), oracle::closeness(g)) <= 1e-9);
        CHECK(oracle::max_abs_diff(clustering_coefficient(g), oracle::clustering(g)) <= 1e-9);
        const auto pr = pagerank(g);
        CHECK(oracle::max_abs_diff(pr, oracle::pagerank(g, 0.85)) <= 1e-8);
        CHECK(std::abs(std::accumulate(pr.begin(), pr.end(), 0.0) - 1.0) <= 1e-9);

        const auto d = oracle::floyd_warshall(a);
        for (const auto& row : d) {
            for (double x : row) disconnected += std::isinf(x) ? 1 : 0;
        }
    }
    CHECK(disconnected > 0);
}

TEST_CASE("edge angle to the x axis") {
    CHECK(edge_angle_x({0, 0, 0}, {1, 0, 0}) == doctest::Approx(0.0));
    CHECK(edge_angle_x({0, 0, 0}, {0, 2, 0}) == doctest::Approx(std::numbers::pi / 2));
    CHECK(edge_angle_x({0, 0, 0}, {1, 1, 0}) == doctest::Approx(std::numbers::pi / 4));
    CHECK(edge_angle_x({0, 0, 0}, {-1, -1, 0}) == doctest::Approx(std::numbers::pi / 4));
    CHECK(edge_angle_x({0, 0, 0}, {0, 0, 3}) == 0.0);
}

TEST_CASE("position normalization") {
    SpaceAccessGraph g = parse_graph(test::minimal_doc());
    g.spaces[0].center = {0, 0, 0};
    g.elements[0].center = {10, 10, 0};
    auto pos = normalize_positions(g);
    CHECK(pos[0] == Point3{0, 0, 0.5});
    CHECK(pos[1] == Point3{1, 1, 0.5});

    SpaceAccessGraph single;
    single.spaces.push_back(g.spaces[0]);
    CHECK(normalize_positions(single)[0] == Point3{0.5, 0.5, 0.5});

    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> shift(-100, 100);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SpaceAccessGraph f = synth_fixture(seed, 6);
        const auto base = normalize_positions(f);
        const Point3 t{shift(gen), shift(gen), shift(gen)};
        for (auto& s : f.spaces) s.center = {s.center.x + t.x, s.center.y + t.y, s.center.z + t.z};
        for (auto& e : f.elements) e.center = {e.center.x + t.x, e.center.y + t.y, e.center.z + t.z};
        const auto moved = normalize_positions(f);
        REQUIRE(moved.size() == base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            for (double c : {base[i].x, base[i].y, base[i].z}) {
                CHECK(c >= 0.0);
                CHECK(c <= 1.0);
            }
            CHECK(moved[i].x == doctest::Approx(base[i].x).epsilon(1e-9));
            CHECK(moved[i].y == doctest::Approx(base[i].y).epsilon(1e-9));
            CHECK(moved[i].z == doctest::Approx(base[i].z).epsilon(1e-9));
        }
    }
}

TEST_CASE("featurize layout") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const SpaceAccessGraph g = synth_fixture(seed, 8);
        const FeaturizedGraph f = featurize(g);
        REQUIRE(f.node_features.cols == kNodeFeatureDim);
        REQUIRE(f.edge_features.cols == kEdgeFeatureDim);
        REQUIRE(f.node_count() == g.node_count());
        REQUIRE(f.edge_count() == g.edges.size());
        const std::size_t ns = g.spaces.size();
        for (std::size_t r = 0; r < f.node_count(); ++r) {
            for (double x : f.node_features.row(r)) CHECK(std::isfinite(x));
            if (r < ns) {
                CHECK(f.node_features(r, node_slot::kIsSpace) == 1.0);
                CHECK(f.node_features(r, node_slot::kWidth) == 0.0);
                CHECK(f.node_features(r, node_slot::kHeight) == 0.0);
                CHECK(f.node_features(r, node_slot::kFaceArea) == 0.0);
            } else {
                CHECK(f.node_features(r, node_slot::kIsSpace) == 0.0);
                for (std::size_t c = node_slot::kGrossFloorArea; c <= node_slot::kWindowCount; ++c) {
                    CHECK(f.node_features(r, c) == 0.0);
                }
            }
            CHECK(f.node_features(r, node_slot::kClustering) == 0.0);
        }
        for (std::size_t k = 0; k < f.edge_count(); ++k) {
            for (double x : f.edge_features.row(k)) CHECK(std::isfinite(x));
            const auto [er, sr] = f.edge_index[k];
            CHECK(static_cast<std::size_t>(er) >= ns);
            CHECK(static_cast<std::size_t>(sr) < ns);
            CHECK(f.edge_features(k, edge_slot::kLength) == g.edges[k].length);
        }

        const Topology t(g);
        const auto ideg = node_degree(t);
        const std::vector<double> deg(ideg.begin(), ideg.end());
        CHECK(column(f.node_features, node_slot::kDegree) == deg);
        CHECK(column(f.node_features, node_slot::kDegreeCentrality) == degree_centrality(t));
        CHECK(column(f.node_features, node_slot::kBetweenness) == betweenness_centrality(t));
        CHECK(column(f.node_features, node_slot::kPageRank) == pagerank(t));
        CHECK(column(f.node_features, node_slot::kCloseness) == closeness_centrality(t));
        CHECK(column(f.node_features, node_slot::kClustering) == clustering_coefficient(t));
        CHECK(column(f.edge_features, edge_slot::kEdgeBetweenness) == edge_betweenness(t));

        CHECK(featurize(g) == f);
    }
}

TEST_CASE("standardizer") {
    const std::vector<FeaturizedGraph> one{tiny({1.0, 3.0})};
    const FeatureStats s = fit_standardizer(one, "tiny");
    CHECK(s.node_mean[0] == doctest::Approx(2.0));
    CHECK(s.node_std[0] == doctest::Approx(1.0));
    CHECK(s.node_std[1] == 0.0);
    CHECK(s.fitted_on == "tiny");
    const auto applied = apply_standardizer(s, one[0]);
    CHECK(applied.node_features(0, 0) == doctest::Approx(-1.0));
    CHECK(applied.node_features(1, 0) == doctest::Approx(1.0));
    CHECK(applied.node_features(0, 1) == 0.0);
    CHECK(applied.node_features(1, 1) == 0.0);

    try {
        const std::vector<FeaturizedGraph> lone{tiny({1.0})};
        fit_standardizer(lone);
        FAIL("fitted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyTrainingSet);
    }

    FeaturizedGraph bad = one[0];
    bad.node_features = Matrix(2, 3);
    try {
        apply_standardizer(s, bad);
        FAIL("applied");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DimensionMismatch);
    }
}

TEST_CASE("standardizer on a pool of graphs") {
    std::vector<FeaturizedGraph> pool;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) pool.push_back(featurize(synth_fixture(seed, 7)));
    const FeatureStats pooled = fit_standardizer(pool);
    const FeaturizedGraph all = disjoint_union(pool);
    const std::vector<FeaturizedGraph> single{all};
    const FeatureStats concat = fit_standardizer(single);
    for (std::size_t c = 0; c < kNodeFeatureDim; ++c) {
        CHECK(pooled.node_mean[c] == doctest::Approx(concat.node_mean[c]).epsilon(1e-12));
        CHECK(pooled.node_std[c] == doctest::Approx(concat.node_std[c]).epsilon(1e-12));
    }
    for (std::size_t c = 0; c < kEdgeFeatureDim; ++c) {
        CHECK(pooled.edge_mean[c] == doctest::Approx(concat.edge_mean[c]).epsilon(1e-12));
        CHECK(pooled.edge_std[c] == doctest::Approx(concat.edge_std[c]).epsilon(1e-12));
    }

    const FeaturizedGraph z = apply_standardizer(pooled, all);
    for (std::size_t c = 0; c < kNodeFeatureDim; ++c) {
        const auto col = column(z.node_features, c);
        const double mean = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
        double var = 0;
        for (double x : col) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / col.size());
        CAPTURE(c);
        CHECK(std::abs(mean) <= 1e-9);
        if (pooled.node_std[c] >= 1e-12) {
            CHECK(std::abs(sd - 1.0) <= 1e-9);
        } else {
            CHECK(sd == 0.0);
        }
    }
    CHECK(apply_standardizer(pooled, z) != z);
}

TEST_CASE("disjoint union offsets edges") {
    const std::vector<FeaturizedGraph> parts{featurize(synth_fixture(1, 4)), featurize(synth_fixture(2, 5))};
    const FeaturizedGraph u = disjoint_union(parts);
    CHECK(u.node_count() == parts[0].node_count() + parts[1].node_count());
    CHECK(u.edge_count() == parts[0].edge_count() + parts[1].edge_count());
    const int off = static_cast<int>(parts[0].node_count());
    const auto& second = parts[1].edge_index;
    for (std::size_t k = 0; k < second.size(); ++k) {
        CHECK(u.edge_index[parts[0].edge_count() + k] == std::pair{second[k].first + off, second[k].second + off});
    }
    CHECK(u.labels.size() == u.node_count());
}

TEST_CASE("json round trips are exact") {
    const FeaturizedGraph f = featurize(synth_fixture(11, 9));
    CHECK(featurized_from_json(featurized_to_json(f)) == f);
    const std::vector<FeaturizedGraph> pool{f};
    const FeatureStats s = fit_standardizer(pool, "fixture");
    CHECK(stats_from_json(stats_to_json(s)) == s);
}
