#pragma once

// Brute-force reference implementations used to cross-check the centrality
// code. Deliberately naive: exhaustive path enumeration, Floyd-Warshall,
// triple enumeration and a dense Gaussian-elimination PageRank.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "sagc/features.hpp"

namespace sagc::oracle {

using Adjacency = std::vector<std::vector<int>>;  // 0/1 matrix

inline Adjacency adjacency(const Topology& g) {
    Adjacency a(g.node_count(), std::vector<int>(g.node_count(), 0));
    for (const auto& [u, v] : g.edges()) a[u][v] = a[v][u] = 1;
    return a;
}

// Every shortest path between s and t as a vertex sequence.
inline std::vector<std::vector<int>> shortest_paths(const Adjacency& a, int s, int t) {
    const int n = static_cast<int>(a.size());
    std::vector<std::vector<int>> all;
    std::vector<int> path{s};
    std::vector<bool> used(n, false);
    used[s] = true;
    std::function<void(int)> dfs = [&](int v) {
        if (v == t) {
            all.push_back(path);
            return;
        }
        for (int w = 0; w < n; ++w) {
            if (a[v][w] && !used[w]) {
                used[w] = true;
                path.push_back(w);
                dfs(w);
                path.pop_back();
                used[w] = false;
            }
        }
    };
    dfs(s);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& p : all) best = std::min(best, p.size());
    std::vector<std::vector<int>> out;
    for (auto& p : all) {
        if (p.size() == best) out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<double> betweenness(const Topology& g) {
    const auto a = adjacency(g);
    const int n = static_cast<int>(a.size());
    std::vector<double> b(n, 0.0);
    if (n <= 2) return b;
    for (int s = 0; s < n; ++s) {
        for (int t = s + 1; t < n; ++t) {
            const auto paths = shortest_paths(a, s, t);
            if (paths.empty()) continue;
            for (const auto& p : paths) {
                for (std::size_t k = 1; k + 1 < p.size(); ++k) b[p[k]] += 1.0 / static_cast<double>(paths.size());
            }
        }
    }
    for (auto& x : b) x *= 2.0 / ((n - 1.0) * (n - 2.0));
    return b;
}

inline std::vector<double> edge_betweenness(const Topology& g) {
    const auto a = adjacency(g);
    const int n = static_cast<int>(a.size());
    std::vector<double> b(g.edge_count(), 0.0);
    if (n < 2) return b;
    auto edge_id = [&](int u, int v) {
        for (std::size_t e = 0; e < g.edges().size(); ++e) {
            const auto [x, y] = g.edges()[e];
            if ((x == u && y == v) || (x == v && y == u)) return e;
        }
        return std::size_t(-1);
    };
    for (int s = 0; s < n; ++s) {
        for (int t = s + 1; t < n; ++t) {
            const auto paths = shortest_paths(a, s, t);
            for (const auto& p : paths) {
                for (std::size_t k = 0; k + 1 < p.size(); ++k) {
                    b[edge_id(p[k], p[k + 1])] += 1.0 / static_cast<double>(paths.size());
                }
            }
        }
    }
    for (auto& x : b) x *= 2.0 / (n * (n - 1.0));
    return b;
}

inline std::vector<std::vector<double>> floyd_warshall(const Adjacency& a) {
    const std::size_t n = a.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        d[i][i] = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (a[i][j]) d[i][j] = 1;
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
        }
    }
    return d;
}

inline std::vector<double> closeness(const Topology& g) {
    const auto d = floyd_warshall(adjacency(g));
    const std::size_t n = d.size();
    std::vector<double> c(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        double total = 0;
        double reach = 0;
        for (std::size_t u = 0; u < n; ++u) {
            if (u != v && std::isfinite(d[v][u])) {
                total += d[v][u];
                reach += 1;
            }
        }
        if (reach > 0 && n > 1) c[v] = (reach / total) * (reach / (n - 1.0));
    }
    return c;
}

inline std::vector<double> clustering(const Topology& g) {
    const auto a = adjacency(g);
    const std::size_t n = a.size();
    std::vector<double> c(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        double deg = 0, tri = 0;
        for (std::size_t u = 0; u < n; ++u) deg += a[v][u];
        for (std::size_t u = 0; u < n; ++u) {
            for (std::size_t w = u + 1; w < n; ++w) {
                if (a[v][u] && a[v][w] && a[u][w]) tri += 1;
            }
        }
        if (deg >= 2) c[v] = 2 * tri / (deg * (deg - 1));
    }
    return c;
}

// Solves (I - d M) x = (1 - d)/n with M column stochastic; dangling columns are uniform.
inline std::vector<double> pagerank(const Topology& g, double damping) {
    const auto a = adjacency(g);
    const std::size_t n = a.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        double deg = 0;
        for (std::size_t i = 0; i < n; ++i) deg += a[i][j];
        for (std::size_t i = 0; i < n; ++i) {
            const double mij = deg > 0 ? a[i][j] / deg : 1.0 / n;
            m[i][j] = (i == j ? 1.0 : 0.0) - damping * mij;
        }
    }
    for (std::size_t i = 0; i < n; ++i) m[i][n] = (1.0 - damping) / n;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        }
        std::swap(m[col], m[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (std::size_t c = col; c <= n; ++c) m[r][c] -= f * m[col][c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = m[i][n] / m[i][i];
    return x;
}

inline Topology random_graph(std::mt19937_64& gen, int max_n = 8) {
    std::uniform_int_distribution<int> size(1, max_n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = size(gen);
    const double p = unit(gen);
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (unit(gen) < p) edges.emplace_back(u, v);
        }
    }
    std::shuffle(edges.begin(), edges.end(), gen);
    return Topology(static_cast<std::size_t>(n), std::move(edges));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace sagc::oracle
