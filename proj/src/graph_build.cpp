#include "tw/graph_build.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tw/parallel.hpp"
#include "tw/util.hpp"

namespace tw {

namespace {

double squared_distance(const double* a, const double* b, std::int64_t d) {
    double s = 0.0;
    for (std::int64_t i = 0; i < d; ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

std::pair<int, int> canonical(int u, int v) { return {std::min(u, v), std::max(u, v)}; }

}  // namespace

std::vector<std::pair<int, int>> euclidean_mst(const Tensor& points, int threads) {
    require(points.rank() == 2, "euclidean_mst: expected [n, d] points, got ",
            points.shape_str());
    const int n = static_cast<int>(points.dim(0));
    const std::int64_t d = points.dim(1);
    require(n >= 1, "euclidean_mst: no points");
    std::vector<std::pair<int, int>> tree;
    if (n == 1) return tree;

    // Prim from vertex 0. key[v] holds the squared distance from v to the
    // tree, par[v] the tree endpoint realizing it; the tie rule prefers the
    // lexicographically smaller (min,max) vertex pair.
    constexpr double kInf = std::numeric_limits<double>::max();
    std::vector<double> key(static_cast<std::size_t>(n), kInf);
    std::vector<int> par(static_cast<std::size_t>(n), -1);
    std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
    in_tree[0] = 1;
    int last_added = 0;
    tree.reserve(static_cast<std::size_t>(n - 1));

    for (int step = 1; step < n; ++step) {
        const double* row_last = points.row(last_added);
        parallel_for(n, threads, [&](std::int64_t begin, std::int64_t end) {
            for (std::int64_t v = begin; v < end; ++v) {
                if (in_tree[static_cast<std::size_t>(v)]) continue;
                const double dist = squared_distance(row_last, points.row(v), d);
                double& k = key[static_cast<std::size_t>(v)];
                int& p = par[static_cast<std::size_t>(v)];
                if (dist < k ||
                    (dist == k && canonical(last_added, static_cast<int>(v)) <
                                      canonical(p, static_cast<int>(v)))) {
                    k = dist;
                    p = last_added;
                }
            }
        });

        int pick = -1;
        for (int v = 0; v < n; ++v) {
            if (in_tree[static_cast<std::size_t>(v)]) continue;
            if (pick < 0 || key[static_cast<std::size_t>(v)] < key[static_cast<std::size_t>(pick)] ||
                (key[static_cast<std::size_t>(v)] == key[static_cast<std::size_t>(pick)] &&
                 canonical(par[static_cast<std::size_t>(v)], v) <
                     canonical(par[static_cast<std::size_t>(pick)], pick))) {
                pick = v;
            }
        }
        in_tree[static_cast<std::size_t>(pick)] = 1;
        tree.push_back(canonical(par[static_cast<std::size_t>(pick)], pick));
        last_added = pick;
    }
    return tree;
}

BuiltGraph build_edge_set(const HsiDataset& ds, const ProjectedCube& projected, int emst_dims,
                          int threads) {
    require(projected.height == ds.height && projected.width == ds.width,
            "build_edge_set: projected cube dims do not match the dataset");
    require(emst_dims >= 1 && emst_dims <= projected.k, "build_edge_set: emst_dims = ",
            emst_dims, " outside [1, ", projected.k, "]");

    BuiltGraph built;
    built.pixel_vertex.assign(static_cast<std::size_t>(ds.n_pixels()), -1);
    for (std::int64_t pix = 0; pix < ds.n_pixels(); ++pix) {
        if (ds.labels[static_cast<std::size_t>(pix)] != 0) {
            built.pixel_vertex[static_cast<std::size_t>(pix)] =
                static_cast<int>(built.vertex_pixel.size());
            built.vertex_pixel.push_back(static_cast<int>(pix));
        }
    }
    const int n = static_cast<int>(built.vertex_pixel.size());
    require(n >= 1, "build_edge_set: no labeled pixels");

    built.features = Tensor::zeros({n, emst_dims});
    for (int v = 0; v < n; ++v) {
        const int pix = built.vertex_pixel[static_cast<std::size_t>(v)];
        const double* src = projected.at(pix / ds.width, pix % ds.width);
        std::copy(src, src + emst_dims, built.features.row(v));
    }

    for (int v = 0; v < n; ++v) {
        const int pix = built.vertex_pixel[static_cast<std::size_t>(v)];
        const int r = pix / ds.width, c = pix % ds.width;
        if (c + 1 < ds.width) {
            const int nb = built.pixel_vertex[static_cast<std::size_t>(pix) + 1];
            if (nb >= 0) built.edges.adjacency_edges.push_back(canonical(v, nb));
        }
        if (r + 1 < ds.height) {
            const int nb = built.pixel_vertex[static_cast<std::size_t>(pix + ds.width)];
            if (nb >= 0) built.edges.adjacency_edges.push_back(canonical(v, nb));
        }
    }

    built.edges.emst_edges = euclidean_mst(built.features, threads);

    std::map<std::pair<int, int>, std::uint8_t> merged;
    for (const auto& e : built.edges.adjacency_edges) merged[e] |= kFromAdjacency;
    for (const auto& e : built.edges.emst_edges) merged[e] |= kFromEmst;

    std::vector<Edge> edges;
    edges.reserve(merged.size());
    for (const auto& [pair, prov] : merged) {
        built.edges.combined.push_back(pair);
        built.edges.provenance.push_back(prov);
        const double dist = std::sqrt(squared_distance(built.features.row(pair.first),
                                                       built.features.row(pair.second),
                                                       emst_dims));
        edges.push_back({pair.first, pair.second, std::max(dist, kWeightClamp)});
    }
    built.graph = Graph::build(n, std::move(edges));
    return built;
}

std::vector<double> edge_weights_from_embeddings(const Graph& g, const Tensor& embeddings,
                                                 const std::vector<int>& dims, double clamp) {
    require(embeddings.rank() == 2, "edge weights: expected [n, d] embeddings, got ",
            embeddings.shape_str());
    require(embeddings.dim(0) == g.n_vertices, "edge weights: ", embeddings.dim(0),
            " embedding rows for ", g.n_vertices, " vertices");
    require(!dims.empty(), "edge weights: no embedding dimensions selected");
    for (int dim : dims) {
        require(dim >= 0 && dim < embeddings.dim(1), "edge weights: dimension ", dim,
                " outside [0, ", embeddings.dim(1), ")");
    }
    std::vector<double> w(static_cast<std::size_t>(g.n_edges()));
    for (int ei = 0; ei < g.n_edges(); ++ei) {
        const Edge& e = g.edges[static_cast<std::size_t>(ei)];
        const double* a = embeddings.row(e.u);
        const double* b = embeddings.row(e.v);
        double s = 0.0;
        for (int dim : dims) {
            const double diff = a[dim] - b[dim];
            s += diff * diff;
        }
        const double dist = std::sqrt(s);
        require(std::isfinite(dist), "edge weights: non-finite distance on edge (", e.u, ",",
                e.v, ")");
        w[static_cast<std::size_t>(ei)] = std::max(dist, clamp);
    }
    return w;
}

void reweight(Graph& g, const Tensor& embeddings, double clamp) {
    std::vector<int> all_dims(static_cast<std::size_t>(embeddings.dim(1)));
    for (std::size_t i = 0; i < all_dims.size(); ++i) all_dims[i] = static_cast<int>(i);
    g.set_weights(edge_weights_from_embeddings(g, embeddings, all_dims, clamp));
}

}  // namespace tw
