#include "sagc/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <set>
#include <unordered_map>

#include "numfmt.hpp"
#include "sagc/error.hpp"

namespace sagc {

Topology::Topology(std::size_t n, std::vector<std::pair<int, int>> edges)
    : edges_(std::move(edges)), adjacency_(n), incident_(n) {
    std::set<std::pair<int, int>> seen;
    for (std::size_t id = 0; id < edges_.size(); ++id) {
        const auto [a, b] = edges_[id];
        if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
            throw Error(ErrorKind::IndexOutOfRange, "edge " + std::to_string(id) + " endpoint");
        }
        if (a == b) throw Error(ErrorKind::InvalidArgument, "self-loop at row " + std::to_string(a));
        if (!seen.emplace(std::min(a, b), std::max(a, b)).second) {
            throw Error(ErrorKind::InvalidArgument, "parallel edge " + std::to_string(a) + "--" +
                                                        std::to_string(b));
        }
        adjacency_[static_cast<std::size_t>(a)].push_back(b);
        adjacency_[static_cast<std::size_t>(b)].push_back(a);
        incident_[static_cast<std::size_t>(a)].push_back(static_cast<int>(id));
        incident_[static_cast<std::size_t>(b)].push_back(static_cast<int>(id));
    }
}

namespace {

std::vector<std::pair<int, int>> access_edge_rows(const SpaceAccessGraph& graph) {
    std::unordered_map<std::string, int> row;
    int r = 0;
    for (const auto& s : graph.spaces) row.emplace(s.id, r++);
    for (const auto& e : graph.elements) row.emplace(e.id, r++);
    std::vector<std::pair<int, int>> out;
    out.reserve(graph.edges.size());
    for (const auto& a : graph.edges) {
        auto e = row.find(a.element_id);
        auto s = row.find(a.space_id);
        if (e == row.end() || s == row.end()) {
            throw Error(ErrorKind::DanglingEdge, a.space_id + "--" + a.element_id);
        }
        out.emplace_back(e->second, s->second);
    }
    return out;
}

// Brandes accumulation over all sources. Returns ordered-pair sums for
// nodes and edges.
void brandes(const Topology& g, std::vector<double>* node_acc, std::vector<double>* edge_acc) {
    const std::size_t n = g.node_count();
    std::vector<double> sigma(n);
    std::vector<double> delta(n);
    std::vector<int> dist(n);
    std::vector<int> order;
    order.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(delta.begin(), delta.end(), 0.0);
        std::fill(dist.begin(), dist.end(), -1);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        std::queue<int> q;
        q.push(static_cast<int>(s));
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            order.push_back(v);
            for (int w : g.neighbours(static_cast<std::size_t>(v))) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    q.push(w);
                }
                if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
            }
        }
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int w = *it;
            const auto& nb = g.neighbours(static_cast<std::size_t>(w));
            const auto& ids = g.incident_edges(static_cast<std::size_t>(w));
            for (std::size_t k = 0; k < nb.size(); ++k) {
                const int v = nb[k];
                if (dist[v] != dist[w] - 1) continue;
                const double c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                if (edge_acc) (*edge_acc)[static_cast<std::size_t>(ids[k])] += c;
                delta[v] += c;
            }
            if (node_acc && static_cast<std::size_t>(w) != s) (*node_acc)[w] += delta[w];
        }
    }
}

std::vector<int> bfs_distances(const Topology& g, std::size_t source) {
    std::vector<int> dist(g.node_count(), -1);
    std::queue<int> q;
    dist[source] = 0;
    q.push(static_cast<int>(source));
    while (!q.empty()) {
        const int v = q.front();
        q.pop();
        for (int w : g.neighbours(static_cast<std::size_t>(v))) {
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
        }
    }
    return dist;
}

}  // namespace

Topology::Topology(const SpaceAccessGraph& graph)
    : Topology(graph.node_count(), access_edge_rows(graph)) {}

std::vector<std::string> node_ids(const SpaceAccessGraph& graph) {
    std::vector<std::string> ids;
    ids.reserve(graph.node_count());
    for (const auto& s : graph.spaces) ids.push_back(s.id);
    for (const auto& e : graph.elements) ids.push_back(e.id);
    return ids;
}

std::vector<int> node_degree(const Topology& g) {
    std::vector<int> deg(g.node_count());
    for (std::size_t v = 0; v < g.node_count(); ++v) deg[v] = static_cast<int>(g.neighbours(v).size());
    return deg;
}

std::vector<double> degree_centrality(const Topology& g) {
    const std::size_t n = g.node_count();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    for (std::size_t v = 0; v < n; ++v) {
        out[v] = static_cast<double>(g.neighbours(v).size()) / static_cast<double>(n - 1);
    }
    return out;
}

std::vector<double> betweenness_centrality(const Topology& g) {
    const std::size_t n = g.node_count();
    std::vector<double> acc(n, 0.0);
    if (n <= 2) return acc;
    brandes(g, &acc, nullptr);
    // acc counts each unordered pair twice; 2/((n-1)(n-2)) per unordered pair.
    const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
    for (auto& v : acc) v *= scale;
    return acc;
}

std::vector<double> edge_betweenness(const Topology& g) {
    const std::size_t n = g.node_count();
    std::vector<double> acc(g.edge_count(), 0.0);
    if (n < 2) return acc;
    brandes(g, nullptr, &acc);
    const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
    for (auto& v : acc) v *= scale;
    return acc;
}

std::vector<double> closeness_centrality(const Topology& g) {
    const std::size_t n = g.node_count();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    for (std::size_t v = 0; v < n; ++v) {
        const auto dist = bfs_distances(g, v);
        double total = 0.0;
        double reached = 0.0;
        for (int d : dist) {
            if (d > 0) {
                total += d;
                reached += 1.0;
            }
        }
        if (total > 0.0) out[v] = (reached / total) * (reached / static_cast<double>(n - 1));
    }
    return out;
}

std::vector<double> clustering_coefficient(const Topology& g) {
    const std::size_t n = g.node_count();
    std::vector<double> out(n, 0.0);
    std::vector<char> mark(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
        const auto& nb = g.neighbours(v);
        const std::size_t d = nb.size();
        if (d < 2) continue;
        for (int u : nb) mark[u] = 1;
        std::size_t links = 0;
        for (int u : nb) {
            for (int w : g.neighbours(static_cast<std::size_t>(u))) links += mark[w];
        }
        for (int u : nb) mark[u] = 0;
        // each neighbour-neighbour edge is seen from both ends
        out[v] = static_cast<double>(links) / static_cast<double>(d * (d - 1));
    }
    return out;
}

std::vector<double> pagerank(const Topology& g, const PageRankOptions& options) {
    const std::size_t n = g.node_count();
    if (n == 0) throw Error(ErrorKind::EmptyGraph, "pagerank of an empty graph");
    const double nd = static_cast<double>(n);
    const double d = options.damping;
    std::vector<double> x(n, 1.0 / nd);
    std::vector<double> next(n);
    double residual = 0.0;
    for (int iter = 0; iter < options.max_iter; ++iter) {
        double dangling = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            if (g.neighbours(v).empty()) dangling += x[v];
        }
        const double base = (1.0 - d) / nd + d * dangling / nd;
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (int u : g.neighbours(v)) {
                s += x[u] / static_cast<double>(g.neighbours(static_cast<std::size_t>(u)).size());
            }
            next[v] = base + d * s;
        }
        residual = 0.0;
        for (std::size_t v = 0; v < n; ++v) residual += std::abs(next[v] - x[v]);
        x.swap(next);
        if (residual < options.tol) {
            double total = 0.0;
            for (double v : x) total += v;
            for (double& v : x) v /= total;
            return x;
        }
    }
    throw Error(ErrorKind::NonConvergence, "pagerank residual " + detail::fmt17(residual) +
                                               " after " + std::to_string(options.max_iter) +
                                               " iterations");
}

double edge_angle_x(const Point3& from, const Point3& to) {
    const double dx = std::abs(to.x - from.x);
    const double dy = std::abs(to.y - from.y);
    if (dx < 1e-12 && dy < 1e-12) return 0.0;
    return std::atan2(dy, dx);
}

std::vector<Point3> normalize_positions(const SpaceAccessGraph& graph) {
    std::vector<Point3> centers;
    centers.reserve(graph.node_count());
    for (const auto& s : graph.spaces) centers.push_back(s.center);
    for (const auto& e : graph.elements) centers.push_back(e.center);
    if (centers.empty()) return centers;

    Point3 lo = centers.front();
    Point3 hi = centers.front();
    for (const auto& c : centers) {
        lo = {std::min(lo.x, c.x), std::min(lo.y, c.y), std::min(lo.z, c.z)};
        hi = {std::max(hi.x, c.x), std::max(hi.y, c.y), std::max(hi.z, c.z)};
    }
    auto scale = [](double v, double a, double b) {
        const double extent = b - a;
        return extent < 1e-12 ? 0.5 : (v - a) / extent;
    };
    for (auto& c : centers) {
        c = {scale(c.x, lo.x, hi.x), scale(c.y, lo.y, hi.y), scale(c.z, lo.z, hi.z)};
    }
    return centers;
}

FeaturizedGraph featurize(const SpaceAccessGraph& graph) {
    const Topology topo(graph);
    const std::size_t n = graph.node_count();
    const auto degree = node_degree(topo);
    const auto degree_c = degree_centrality(topo);
    const auto between = betweenness_centrality(topo);
    const auto rank = pagerank(topo);
    const auto close = closeness_centrality(topo);
    const auto cluster = clustering_coefficient(topo);
    const auto edge_between = edge_betweenness(topo);
    const auto pos = normalize_positions(graph);

    FeaturizedGraph out;
    out.name = graph.name;
    out.node_ids = node_ids(graph);
    out.node_features = Matrix(n, kNodeFeatureDim);
    out.labels.reserve(n);
    std::vector<Point3> centers;
    centers.reserve(n);

    Matrix& nf = out.node_features;
    std::size_t r = 0;
    for (const auto& s : graph.spaces) {
        const auto ext = s.bbox.extents();
        nf(r, node_slot::kIsSpace) = 1.0;
        nf(r, node_slot::kExtentX) = ext.x;
        nf(r, node_slot::kExtentY) = ext.y;
        nf(r, node_slot::kExtentZ) = ext.z;
        nf(r, node_slot::kGrossFloorArea) = s.gross_floor_area;
        nf(r, node_slot::kVolume) = s.volume;
        nf(r, node_slot::kDoorOpeningCount) = s.door_opening_count;
        nf(r, node_slot::kWindowCount) = s.window_count;
        out.labels.push_back(s.label.value_or(kUnlabeled));
        centers.push_back(s.center);
        ++r;
    }
    for (const auto& e : graph.elements) {
        const auto ext = e.face_bbox.extents();
        nf(r, node_slot::kExtentX) = ext.x;
        nf(r, node_slot::kExtentY) = ext.y;
        nf(r, node_slot::kExtentZ) = ext.z;
        nf(r, node_slot::kWidth) = e.width;
        nf(r, node_slot::kHeight) = e.height;
        nf(r, node_slot::kFaceArea) = e.face_area;
        out.labels.push_back(e.label.value_or(kUnlabeled));
        centers.push_back(e.center);
        ++r;
    }
    for (std::size_t v = 0; v < n; ++v) {
        nf(v, node_slot::kPosX) = pos[v].x;
        nf(v, node_slot::kPosY) = pos[v].y;
        nf(v, node_slot::kPosZ) = pos[v].z;
        nf(v, node_slot::kDegree) = degree[v];
        nf(v, node_slot::kDegreeCentrality) = degree_c[v];
        nf(v, node_slot::kBetweenness) = between[v];
        nf(v, node_slot::kPageRank) = rank[v];
        nf(v, node_slot::kCloseness) = close[v];
        nf(v, node_slot::kClustering) = cluster[v];
    }

    out.edge_index = topo.edges();
    out.edge_features = Matrix(graph.edges.size(), kEdgeFeatureDim);
    Matrix& ef = out.edge_features;
    for (std::size_t k = 0; k < graph.edges.size(); ++k) {
        const auto& a = graph.edges[k];
        const auto [er, sr] = out.edge_index[k];
        ef(k, edge_slot::kLength) = a.length;
        ef(k, edge_slot::kElevationDiff) = a.elevation_diff;
        ef(k, edge_slot::kAngleXy) = a.angle_xy;
        ef(k, edge_slot::kEdgeBetweenness) = edge_between[k];
        ef(k, edge_slot::kAngleX) = edge_angle_x(centers[static_cast<std::size_t>(er)],
                                                 centers[static_cast<std::size_t>(sr)]);
    }
    return out;
}

FeaturizedGraph disjoint_union(std::span<const FeaturizedGraph> graphs) {
    FeaturizedGraph out;
    std::size_t nodes = 0;
    std::size_t edges = 0;
    for (const auto& g : graphs) {
        nodes += g.node_count();
        edges += g.edge_count();
    }
    out.node_features = Matrix(0, kNodeFeatureDim);
    out.edge_features = Matrix(0, kEdgeFeatureDim);
    out.node_features.data.reserve(nodes * kNodeFeatureDim);
    out.edge_features.data.reserve(edges * kEdgeFeatureDim);
    int offset = 0;
    for (const auto& g : graphs) {
        if (!out.name.empty()) out.name += "+";
        out.name += g.name;
        out.node_ids.insert(out.node_ids.end(), g.node_ids.begin(), g.node_ids.end());
        out.labels.insert(out.labels.end(), g.labels.begin(), g.labels.end());
        out.node_features.data.insert(out.node_features.data.end(), g.node_features.data.begin(),
                                      g.node_features.data.end());
        out.edge_features.data.insert(out.edge_features.data.end(), g.edge_features.data.begin(),
                                      g.edge_features.data.end());
        for (const auto& [a, b] : g.edge_index) out.edge_index.emplace_back(a + offset, b + offset);
        offset += static_cast<int>(g.node_count());
    }
    out.node_features.rows = nodes;
    out.edge_features.rows = edges;
    return out;
}

namespace {

template <std::size_t D>
void column_stats(std::span<const FeaturizedGraph> graphs, const Matrix FeaturizedGraph::*member,
                  std::array<double, D>& mean, std::array<double, D>& stddev) {
    mean.fill(0.0);
    stddev.fill(0.0);
    std::size_t rows = 0;
    for (const auto& g : graphs) {
        const Matrix& m = g.*member;
        if (m.rows > 0 && m.cols != D) {
            throw Error(ErrorKind::DimensionMismatch, g.name + ": expected " + std::to_string(D) +
                                                          " columns, got " + std::to_string(m.cols));
        }
        for (std::size_t r = 0; r < m.rows; ++r) {
            for (std::size_t c = 0; c < D; ++c) mean[c] += m(r, c);
        }
        rows += m.rows;
    }
    if (rows == 0) return;
    for (auto& v : mean) v /= static_cast<double>(rows);
    for (const auto& g : graphs) {
        const Matrix& m = g.*member;
        for (std::size_t r = 0; r < m.rows; ++r) {
            for (std::size_t c = 0; c < D; ++c) {
                const double dev = m(r, c) - mean[c];
                stddev[c] += dev * dev;
            }
        }
    }
    for (auto& v : stddev) v = std::sqrt(v / static_cast<double>(rows));
}

template <std::size_t D>
void standardize(Matrix& m, const std::array<double, D>& mean, const std::array<double, D>& stddev,
                 const std::string& name) {
    if (m.rows > 0 && m.cols != D) {
        throw Error(ErrorKind::DimensionMismatch, name + ": expected " + std::to_string(D) +
                                                      " columns, got " + std::to_string(m.cols));
    }
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < D; ++c) {
            m(r, c) = stddev[c] < 1e-12 ? 0.0 : (m(r, c) - mean[c]) / stddev[c];
        }
    }
}

}  // namespace

FeatureStats fit_standardizer(std::span<const FeaturizedGraph> training, std::string fitted_on) {
    std::size_t nodes = 0;
    for (const auto& g : training) nodes += g.node_count();
    if (training.empty() || nodes < 2) {
        throw Error(ErrorKind::EmptyTrainingSet, "standardizer needs at least two training nodes");
    }
    FeatureStats stats;
    stats.fitted_on = std::move(fitted_on);
    column_stats(training, &FeaturizedGraph::node_features, stats.node_mean, stats.node_std);
    column_stats(training, &FeaturizedGraph::edge_features, stats.edge_mean, stats.edge_std);
    return stats;
}

FeaturizedGraph apply_standardizer(const FeatureStats& stats, const FeaturizedGraph& graph) {
    FeaturizedGraph out = graph;
    standardize(out.node_features, stats.node_mean, stats.node_std, graph.name);
    standardize(out.edge_features, stats.edge_mean, stats.edge_std, graph.name);
    return out;
}

namespace {

void append_matrix(std::string& out, const Matrix& m) {
    out += '[';
    for (std::size_t r = 0; r < m.rows; ++r) {
        if (r) out += ',';
        detail::append_array(out, m.row(r));
    }
    out += ']';
}

Matrix read_matrix(const json& j, std::size_t cols, const char* field) {
    if (!j.is_array()) throw Error(ErrorKind::MalformedDocument, std::string(field) + " is not an array");
    Matrix m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) {
            throw Error(ErrorKind::DimensionMismatch,
                        std::string(field) + " row " + std::to_string(r) + " must have " +
                            std::to_string(cols) + " entries");
        }
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

template <std::size_t D>
std::array<double, D> read_fixed(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_array() || j[field].size() != D) {
        throw Error(ErrorKind::DimensionMismatch, std::string(field) + " must have " +
                                                      std::to_string(D) + " entries");
    }
    std::array<double, D> out{};
    for (std::size_t i = 0; i < D; ++i) out[i] = j[field][i].get<double>();
    return out;
}

json parse_or_throw(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::MalformedDocument, e.what());
    }
}

}  // namespace

std::string featurized_to_json(const FeaturizedGraph& graph) {
    std::string out = "{\"name\":" + detail::json_quote(graph.name) + ",\n\"node_ids\":[";
    for (std::size_t i = 0; i < graph.node_ids.size(); ++i) {
        if (i) out += ',';
        out += detail::json_quote(graph.node_ids[i]);
    }
    out += "],\n\"labels\":[";
    for (std::size_t i = 0; i < graph.labels.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(graph.labels[i]);
    }
    out += "],\n\"edge_index\":[";
    for (std::size_t i = 0; i < graph.edge_index.size(); ++i) {
        if (i) out += ',';
        out += '[' + std::to_string(graph.edge_index[i].first) + ',' +
               std::to_string(graph.edge_index[i].second) + ']';
    }
    out += "],\n\"node_features\":";
    append_matrix(out, graph.node_features);
    out += ",\n\"edge_features\":";
    append_matrix(out, graph.edge_features);
    out += "}\n";
    return out;
}

FeaturizedGraph featurized_from_json(const std::string& text) {
    const json j = parse_or_throw(text);
    try {
        FeaturizedGraph g;
        g.name = j.at("name").get<std::string>();
        g.node_ids = j.at("node_ids").get<std::vector<std::string>>();
        g.labels = j.at("labels").get<std::vector<ClassId>>();
        for (const auto& e : j.at("edge_index")) g.edge_index.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        g.node_features = read_matrix(j.at("node_features"), kNodeFeatureDim, "node_features");
        g.edge_features = read_matrix(j.at("edge_features"), kEdgeFeatureDim, "edge_features");
        if (g.node_ids.size() != g.node_count() || g.labels.size() != g.node_count() ||
            g.edge_index.size() != g.edge_count()) {
            throw Error(ErrorKind::DimensionMismatch, g.name + ": row counts disagree");
        }
        return g;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::MalformedDocument, e.what());
    }
}

std::string stats_to_json(const FeatureStats& stats) {
    std::string out = "{\"fitted_on\":" + detail::json_quote(stats.fitted_on);
    out += ",\n\"node_mean\":";
    detail::append_array(out, stats.node_mean);
    out += ",\n\"node_std\":";
    detail::append_array(out, stats.node_std);
    out += ",\n\"edge_mean\":";
    detail::append_array(out, stats.edge_mean);
    out += ",\n\"edge_std\":";
    detail::append_array(out, stats.edge_std);
    out += "}\n";
    return out;
}

FeatureStats stats_from_json(const std::string& text) {
    const json j = parse_or_throw(text);
    FeatureStats s;
    s.fitted_on = j.value("fitted_on", std::string{});
    s.node_mean = read_fixed<kNodeFeatureDim>(j, "node_mean");
    s.node_std = read_fixed<kNodeFeatureDim>(j, "node_std");
    s.edge_mean = read_fixed<kEdgeFeatureDim>(j, "edge_mean");
    s.edge_std = read_fixed<kEdgeFeatureDim>(j, "edge_std");
    return s;
}

}  // namespace sagc
