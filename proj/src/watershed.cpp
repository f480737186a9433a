#include "tw/watershed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>

#include "tw/util.hpp"

namespace tw {

namespace {

constexpr double kInf = std::numeric_limits<double>::max();

// Edge indices ordered by (weight, index). The index tiebreak keeps the
// sweep deterministic when weights collide.
std::vector<int> edges_by_weight(const Graph& g) {
    std::vector<int> order(static_cast<std::size_t>(g.n_edges()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double wa = g.edges[static_cast<std::size_t>(a)].w;
        const double wb = g.edges[static_cast<std::size_t>(b)].w;
        if (wa != wb) return wa < wb;
        return a < b;
    });
    return order;
}

void check_seeds(const Graph& g, const SeedSet& seeds) {
    require(!seeds.empty(), "watershed: empty seed set");
    for (const auto& [v, label] : seeds.label_by_vertex) {
        require(v >= 0 && v < g.n_vertices, "watershed: seed vertex ", v, " out of range");
        require(label >= 0, "watershed: negative class id ", label, " at vertex ", v);
    }
}

}  // namespace

void SeedSet::add(int vertex, int label) {
    auto [it, inserted] = label_by_vertex.emplace(vertex, label);
    require(inserted || it->second == label, "SeedSet: vertex ", vertex,
            " seeded with classes ", it->second, " and ", label);
}

int SeedSet::max_class() const {
    int m = -1;
    for (const auto& [v, label] : label_by_vertex) m = std::max(m, label);
    return m;
}

std::map<int, std::vector<int>> SeedSet::by_class() const {
    std::map<int, std::vector<int>> out;
    for (const auto& [v, label] : label_by_vertex) out[label].push_back(v);
    return out;  // map iteration already gives sorted vertex ids
}

WatershedResult watershed_label(const Graph& g, const SeedSet& seeds) {
    check_seeds(g, seeds);
    UnionFind uf(g.n_vertices);
    for (const auto& [v, label] : seeds.label_by_vertex) uf.set_label(v, label);

    for (int ei : edges_by_weight(g)) {
        const Edge& e = g.edges[static_cast<std::size_t>(ei)];
        const int ru = uf.find(e.u);
        const int rv = uf.find(e.v);
        if (ru == rv) continue;
        const int lu = uf.label_of(e.u);
        const int lv = uf.label_of(e.v);
        if (lu != kUnlabeled && lv != kUnlabeled) continue;  // both sides claimed
        uf.unite(e.u, e.v);
    }

    WatershedResult res;
    res.labels.resize(static_cast<std::size_t>(g.n_vertices));
    res.component.resize(static_cast<std::size_t>(g.n_vertices));
    std::vector<int> root_component(static_cast<std::size_t>(g.n_vertices), -1);
    int next_component = 0;
    for (int v = 0; v < g.n_vertices; ++v) {
        const int r = uf.find(v);
        res.labels[static_cast<std::size_t>(v)] = uf.label_of(v);
        int& comp = root_component[static_cast<std::size_t>(r)];
        if (comp < 0) comp = next_component++;
        res.component[static_cast<std::size_t>(v)] = comp;
    }
    return res;
}

PassValue pass_value(const Graph& g, int u, int v) {
    require(u >= 0 && u < g.n_vertices, "pass_value: vertex ", u, " out of range");
    require(v >= 0 && v < g.n_vertices, "pass_value: vertex ", v, " out of range");
    if (u == v) return {0.0, false};
    // Kruskal sweep: the pass value is the weight of the edge that first
    // places u and v in one component.
    UnionFind uf(g.n_vertices);
    for (int ei : edges_by_weight(g)) {
        const Edge& e = g.edges[static_cast<std::size_t>(ei)];
        if (uf.find(e.u) == uf.find(e.v)) continue;
        uf.unite(e.u, e.v);
        if (uf.find(u) == uf.find(v)) return {e.w, false};
    }
    return {kInf, true};
}

PassValue set_dissimilarity(const Graph& g, const std::vector<int>& xs,
                            const std::vector<int>& ys) {
    require(!xs.empty() && !ys.empty(), "set_dissimilarity: empty input set");
    std::vector<char> in_x(static_cast<std::size_t>(g.n_vertices), 0);
    std::vector<char> in_y(static_cast<std::size_t>(g.n_vertices), 0);
    for (int v : xs) {
        require(v >= 0 && v < g.n_vertices, "set_dissimilarity: vertex ", v, " out of range");
        in_x[static_cast<std::size_t>(v)] = 1;
    }
    for (int v : ys) {
        require(v >= 0 && v < g.n_vertices, "set_dissimilarity: vertex ", v, " out of range");
        in_y[static_cast<std::size_t>(v)] = 1;
        if (in_x[static_cast<std::size_t>(v)]) return {0.0, false};
    }

    // Kruskal sweep again: track per-root whether the component touches X or
    // Y; the first merge that joins both gives the minimum cross pass value.
    UnionFind uf(g.n_vertices);
    std::vector<char> touches_x(in_x.begin(), in_x.end());
    std::vector<char> touches_y(in_y.begin(), in_y.end());
    for (int ei : edges_by_weight(g)) {
        const Edge& e = g.edges[static_cast<std::size_t>(ei)];
        const int ru = uf.find(e.u);
        const int rv = uf.find(e.v);
        if (ru == rv) continue;
        const char tx = touches_x[static_cast<std::size_t>(ru)] | touches_x[static_cast<std::size_t>(rv)];
        const char ty = touches_y[static_cast<std::size_t>(ru)] | touches_y[static_cast<std::size_t>(rv)];
        const int r = uf.unite(e.u, e.v);
        touches_x[static_cast<std::size_t>(r)] = tx;
        touches_y[static_cast<std::size_t>(r)] = ty;
        if (tx && ty) return {e.w, false};
    }
    return {kInf, true};
}

double labeling_margin(const Graph& g, const SeedSet& seeds, const std::vector<int>& labels) {
    check_seeds(g, seeds);
    require(static_cast<int>(labels.size()) == g.n_vertices, "labeling_margin: expected ",
            g.n_vertices, " labels, got ", labels.size());
    const auto classes = seeds.by_class();
    for (const auto& [v, label] : seeds.label_by_vertex) {
        if (labels[static_cast<std::size_t>(v)] != label) {
            return -std::numeric_limits<double>::infinity();
        }
    }
    double margin = kInf;
    for (const auto& [c, seed_vertices] : classes) {
        std::vector<int> outside;
        for (int v = 0; v < g.n_vertices; ++v) {
            if (labels[static_cast<std::size_t>(v)] != c) outside.push_back(v);
        }
        if (outside.empty()) continue;  // single-class seeding: margin unconstrained
        const PassValue d = set_dissimilarity(g, seed_vertices, outside);
        margin = std::min(margin, d.value);
    }
    return margin;
}

MarginResult brute_force_max_margin(const Graph& g, const SeedSet& seeds) {
    check_seeds(g, seeds);
    require(g.n_vertices <= 16, "brute_force_max_margin: ", g.n_vertices,
            " vertices exceeds the exhaustive-search guard (16)");
    const auto classes = seeds.by_class();
    const int n_classes = static_cast<int>(classes.size());
    require(n_classes >= 2, "brute_force_max_margin: need at least two seed classes");
    std::vector<int> class_ids;
    for (const auto& [c, sv] : classes) class_ids.push_back(c);

    std::vector<int> free_vertices;
    for (int v = 0; v < g.n_vertices; ++v) {
        if (!seeds.label_by_vertex.count(v)) free_vertices.push_back(v);
    }
    double assignments = std::pow(static_cast<double>(n_classes),
                                  static_cast<double>(free_vertices.size()));
    require(assignments <= static_cast<double>(1 << 20),
            "brute_force_max_margin: ", assignments, " assignments exceeds the search guard");

    std::vector<int> labels(static_cast<std::size_t>(g.n_vertices), kUnlabeled);
    for (const auto& [v, label] : seeds.label_by_vertex) labels[static_cast<std::size_t>(v)] = label;

    MarginResult best;
    best.margin = -std::numeric_limits<double>::infinity();

    const std::uint64_t total = static_cast<std::uint64_t>(assignments);
    for (std::uint64_t code = 0; code < total; ++code) {
        std::uint64_t rem = code;
        for (int fv : free_vertices) {
            labels[static_cast<std::size_t>(fv)] =
                class_ids[static_cast<std::size_t>(rem % static_cast<std::uint64_t>(n_classes))];
            rem /= static_cast<std::uint64_t>(n_classes);
        }
        const double m = labeling_margin(g, seeds, labels);
        if (m > best.margin) {
            best.margin = m;
            best.labels = labels;
        }
    }
    best.disconnected = best.margin == kInf;
    return best;
}

OrphanReport label_orphans(const Graph& g, std::vector<int>& labels, const SeedSet& seeds) {
    check_seeds(g, seeds);
    require(static_cast<int>(labels.size()) == g.n_vertices, "label_orphans: expected ",
            g.n_vertices, " labels, got ", labels.size());

    // Multi-source Dijkstra on the minimax metric, one run per seed class.
    // For each vertex we keep the best (pass value, class id, seed id) triple;
    // lexicographic comparison implements the tie policy.
    struct Best {
        double value = kInf;
        int class_id = std::numeric_limits<int>::max();
        int seed_id = std::numeric_limits<int>::max();
    };
    std::vector<Best> best(static_cast<std::size_t>(g.n_vertices));

    const auto classes = seeds.by_class();
    for (const auto& [c, seed_vertices] : classes) {
        std::vector<double> dist(static_cast<std::size_t>(g.n_vertices), kInf);
        std::vector<int> via_seed(static_cast<std::size_t>(g.n_vertices),
                                  std::numeric_limits<int>::max());
        using Item = std::pair<double, int>;  // (pass value so far, vertex)
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
        for (int s : seed_vertices) {
            dist[static_cast<std::size_t>(s)] = 0.0;
            via_seed[static_cast<std::size_t>(s)] = s;
            heap.emplace(0.0, s);
        }
        while (!heap.empty()) {
            const auto [d, v] = heap.top();
            heap.pop();
            if (d > dist[static_cast<std::size_t>(v)]) continue;
            for (int ai = g.adj_offsets[static_cast<std::size_t>(v)];
                 ai < g.adj_offsets[static_cast<std::size_t>(v) + 1]; ++ai) {
                const auto [nbr, ei] = g.adj[static_cast<std::size_t>(ai)];
                const double cand = std::max(d, g.edges[static_cast<std::size_t>(ei)].w);
                const int cand_seed = via_seed[static_cast<std::size_t>(v)];
                if (cand < dist[static_cast<std::size_t>(nbr)] ||
                    (cand == dist[static_cast<std::size_t>(nbr)] &&
                     cand_seed < via_seed[static_cast<std::size_t>(nbr)])) {
                    dist[static_cast<std::size_t>(nbr)] = cand;
                    via_seed[static_cast<std::size_t>(nbr)] = cand_seed;
                    heap.emplace(cand, nbr);
                }
            }
        }
        for (int v = 0; v < g.n_vertices; ++v) {
            Best& b = best[static_cast<std::size_t>(v)];
            const double d = dist[static_cast<std::size_t>(v)];
            if (d < b.value || (d == b.value && (c < b.class_id ||
                                                 (c == b.class_id &&
                                                  via_seed[static_cast<std::size_t>(v)] < b.seed_id)))) {
                b.value = d;
                b.class_id = c;
                b.seed_id = via_seed[static_cast<std::size_t>(v)];
            }
        }
    }

    OrphanReport report;
    for (int v = 0; v < g.n_vertices; ++v) {
        if (labels[static_cast<std::size_t>(v)] != kUnlabeled) continue;
        const Best& b = best[static_cast<std::size_t>(v)];
        if (b.value == kInf) {
            ++report.still_unlabeled;
        } else {
            labels[static_cast<std::size_t>(v)] = b.class_id;
            ++report.relabeled;
        }
    }
    return report;
}

}  // namespace tw
