#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "tw/dataset.hpp"
#include "tw/graph_build.hpp"
#include "tw/pca.hpp"
#include "tw/rng.hpp"

using tw::BuiltGraph;
using tw::HsiDataset;
using tw::Rng;
using tw::Tensor;

namespace {

Tensor random_points(int n, int d, std::uint64_t seed) {
    Tensor points = Tensor::zeros({n, d});
    Rng rng(seed);
    for (auto& x : points.data) x = rng.gaussian();
    return points;
}

// Total MST weight, summed in ascending order so it is comparable
// bit-for-bit across different spanning trees of the same point set.
double mst_total(const Tensor& points, const std::vector<std::pair<int, int>>& tree) {
    std::vector<double> weights;
    weights.reserve(tree.size());
    for (const auto& [u, v] : tree) {
        double sq = 0.0;
        for (std::int64_t k = 0; k < points.dim(1); ++k) {
            const double diff = points.row(u)[k] - points.row(v)[k];
            sq += diff * diff;
        }
        weights.push_back(std::sqrt(sq));
    }
    std::sort(weights.begin(), weights.end());
    double total = 0.0;
    for (const double w : weights) total += w;
    return total;
}

BuiltGraph build_from(const HsiDataset& ds, int emst_dims) {
    const tw::PcaBasis basis = tw::fit_pca(ds, emst_dims);
    const tw::ProjectedCube projected = tw::project_cube(ds, basis);
    return tw::build_edge_set(ds, projected, emst_dims);
}

}  // namespace

TEST_CASE("a fully labeled 1x3 strip gets both adjacency edges and a 2-edge mst") {
    HsiDataset ds;
    ds.height = 1;
    ds.width = 3;
    ds.bands = 2;
    ds.n_classes = 1;
    ds.cube = {0.0f, 1.0f, 2.0f, -1.0f, 5.0f, 0.5f};
    ds.labels = {1, 1, 1};

    const BuiltGraph built = build_from(ds, 2);
    CHECK(built.graph.n_vertices == 3);
    CHECK(built.edges.adjacency_edges ==
          std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
    CHECK(built.edges.emst_edges.size() == 2);
    CHECK(built.vertex_pixel == std::vector<int>{0, 1, 2});
    CHECK(built.pixel_vertex == std::vector<int>{0, 1, 2});
}

TEST_CASE("a single labeled pixel yields one vertex and no edges") {
    HsiDataset ds;
    ds.height = 2;
    ds.width = 2;
    ds.bands = 2;
    ds.n_classes = 1;
    ds.cube = {0.0f, 1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f, 7.0f};
    ds.labels = {0, 1, 0, 0};

    const BuiltGraph built = build_from(ds, 2);
    CHECK(built.graph.n_vertices == 1);
    CHECK(built.graph.n_edges() == 0);
    CHECK(built.edges.adjacency_edges.empty());
    CHECK(built.edges.emst_edges.empty());
    CHECK(built.vertex_pixel == std::vector<int>{1});
}

TEST_CASE("vertices skip unlabeled pixels and adjacency respects the holes") {
    // 2x3 image, middle of the top row unlabeled: pixel indices 0,2,3,4,5
    // become vertices 0..4. No adjacency edge crosses the hole.
    HsiDataset ds;
    ds.height = 2;
    ds.width = 3;
    ds.bands = 2;
    ds.n_classes = 2;
    ds.cube.resize(12);
    Rng rng(4);
    for (auto& x : ds.cube) x = static_cast<float>(rng.gaussian());
    ds.labels = {1, 0, 2, 1, 2, 2};

    const BuiltGraph built = build_from(ds, 2);
    CHECK(built.graph.n_vertices == 5);
    CHECK(built.edges.adjacency_edges ==
          std::vector<std::pair<int, int>>{{0, 2}, {1, 4}, {2, 3}, {3, 4}});
}

TEST_CASE("euclidean mst matches the complete-graph kruskal oracle") {
    const Tensor points = random_points(20, 3, 10);
    const auto tree = tw::euclidean_mst(points);
    REQUIRE(tree.size() == 19);
    CHECK(mst_total(points, tree) == oracle::complete_graph_mst_weight(points));
}

TEST_CASE("euclidean mst stays exact at larger sizes and with duplicate points") {
    for (const int n : {2, 7, 60, 120}) {
        Tensor points = random_points(n, 4, 100 + static_cast<std::uint64_t>(n));
        // Force distance ties: clone a few rows.
        for (int i = 0; i + 1 < n && i < 6; i += 2) {
            std::copy(points.row(i), points.row(i) + 4, points.row(i + 1));
        }
        const auto tree = tw::euclidean_mst(points);
        CHECK(static_cast<int>(tree.size()) == n - 1);
        CHECK(mst_total(points, tree) == oracle::complete_graph_mst_weight(points));
    }
}

TEST_CASE("euclidean mst output does not depend on the thread count") {
    const Tensor points = random_points(80, 5, 12);
    const auto serial = tw::euclidean_mst(points, 1);
    const auto parallel = tw::euclidean_mst(points, 4);
    CHECK(serial == parallel);
}

TEST_CASE("combined graph is connected whenever there are labeled pixels") {
    tw::SyntheticParams p;
    p.height = 15;
    p.width = 17;
    p.bands = 4;
    p.classes = 3;
    p.unlabeled_frac = 0.3;
    p.seed = 21;
    const HsiDataset ds = tw::make_synthetic(p);
    const BuiltGraph built = build_from(ds, 3);

    tw::UnionFind uf(built.graph.n_vertices);
    for (const auto& e : built.graph.edges) uf.unite(e.u, e.v);
    const int root = uf.find(0);
    for (int v = 1; v < built.graph.n_vertices; ++v) CHECK(uf.find(v) == root);

    // Combined list is deduplicated and sorted, with provenance per edge.
    CHECK(built.edges.combined.size() == built.edges.provenance.size());
    CHECK(std::is_sorted(built.edges.combined.begin(), built.edges.combined.end()));
    CHECK(std::adjacent_find(built.edges.combined.begin(), built.edges.combined.end()) ==
          built.edges.combined.end());
}

TEST_CASE("reweight computes euclidean distances with a positive floor") {
    tw::Graph g = tw::Graph::build(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    Tensor emb = Tensor::zeros({3, 2});
    emb.at(0, 0) = 0.0;
    emb.at(0, 1) = 0.0;
    emb.at(1, 0) = 3.0;
    emb.at(1, 1) = 4.0;
    emb.at(2, 0) = 3.0;
    emb.at(2, 1) = 4.0;

    tw::reweight(g, emb);
    CHECK(g.weights()[0] == 5.0);            // 3-4-5 triangle
    CHECK(g.weights()[1] == tw::kWeightClamp);  // identical embeddings

    // Doubling the embeddings doubles every weight above the clamp.
    for (auto& x : emb.data) x *= 2.0;
    tw::reweight(g, emb);
    CHECK(g.weights()[0] == 10.0);
}

TEST_CASE("reweight leaves the edge set untouched") {
    const Tensor points = random_points(12, 3, 30);
    const auto tree = tw::euclidean_mst(points);
    std::vector<tw::Edge> edges;
    for (const auto& [u, v] : tree) edges.push_back({u, v, 1.0});
    tw::Graph g = tw::Graph::build(12, std::move(edges));

    std::vector<std::pair<int, int>> before;
    for (const auto& e : g.edges) before.emplace_back(e.u, e.v);
    tw::reweight(g, random_points(12, 6, 31));
    std::vector<std::pair<int, int>> after;
    for (const auto& e : g.edges) after.emplace_back(e.u, e.v);
    CHECK(before == after);
}

TEST_CASE("edge weights can be restricted to a dimension subset") {
    tw::Graph g = tw::Graph::build(2, {{0, 1, 1.0}});
    Tensor emb = Tensor::zeros({2, 3});
    emb.at(1, 0) = 3.0;  // dim 0 differs by 3
    emb.at(1, 1) = 4.0;  // dim 1 differs by 4
    emb.at(1, 2) = 9.0;  // dim 2 ignored below

    CHECK(tw::edge_weights_from_embeddings(g, emb, {0, 1}) == std::vector<double>{5.0});
    CHECK(tw::edge_weights_from_embeddings(g, emb, {0}) == std::vector<double>{3.0});
    CHECK_THROWS_AS(tw::edge_weights_from_embeddings(g, emb, {}), std::runtime_error);
    CHECK_THROWS_AS(tw::edge_weights_from_embeddings(g, emb, {3}), std::runtime_error);

    Tensor bad = emb;
    bad.at(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(tw::edge_weights_from_embeddings(g, bad, {0}), std::runtime_error);
}
