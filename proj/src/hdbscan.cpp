#include "obsmerge/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <tuple>

#include "obsmerge/error.hpp"

namespace obsmerge {

namespace {

constexpr double kLambdaCap = 1e12;

double lambda_of(double distance) {
  return distance > 0.0 ? std::min(1.0 / distance, kLambdaCap) : kLambdaCap;
}

double distance(const Point2& a, const Point2& b) {
  return std::hypot(a.u - b.u, a.v - b.v);
}

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void link(std::size_t child_root, std::size_t parent_root) { parent_[child_root] = parent_root; }

 private:
  std::vector<std::size_t> parent_;
};

// Binary single-linkage dendrogram: leaves 0..n-1, merges n..2n-2.
struct Dendrogram {
  struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    double distance = 0.0;
    std::size_t size = 0;
  };
  std::size_t num_points = 0;
  std::vector<Merge> merges;

  bool is_leaf(std::size_t node) const { return node < num_points; }
  std::size_t size(std::size_t node) const {
    return is_leaf(node) ? 1 : merges[node - num_points].size;
  }
  const Merge& merge(std::size_t node) const { return merges[node - num_points]; }
  std::size_t root() const { return num_points + merges.size() - 1; }

  void leaves(std::size_t node, std::vector<std::size_t>& out) const {
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      if (is_leaf(x)) {
        out.push_back(x);
      } else {
        stack.push_back(merge(x).right);
        stack.push_back(merge(x).left);
      }
    }
  }
};

Dendrogram build_dendrogram(std::span<const WeightedEdge> mst, std::size_t n) {
  std::vector<WeightedEdge> edges(mst.begin(), mst.end());
  std::stable_sort(edges.begin(), edges.end(), [](const WeightedEdge& x, const WeightedEdge& y) {
    return std::make_tuple(x.weight, std::min(x.a, x.b), std::max(x.a, x.b)) <
           std::make_tuple(y.weight, std::min(y.a, y.b), std::max(y.a, y.b));
  });

  Dendrogram tree;
  tree.num_points = n;
  DisjointSet sets(2 * n);
  std::vector<std::size_t> node_of(2 * n);
  std::iota(node_of.begin(), node_of.end(), 0);
  for (const auto& e : edges) {
    const std::size_t ra = sets.find(e.a);
    const std::size_t rb = sets.find(e.b);
    if (ra == rb) {
      throw Error(ErrorCode::MalformedInput, "MST edges contain a cycle");
    }
    const std::size_t node = n + tree.merges.size();
    tree.merges.push_back(
        {node_of[ra], node_of[rb], e.weight, tree.size(node_of[ra]) + tree.size(node_of[rb])});
    sets.link(ra, node);
    sets.link(rb, node);
    node_of[node] = node;
  }
  return tree;
}

struct CondensedCluster {
  std::optional<std::size_t> parent;
  double birth = 0.0;
  double stability = 0.0;
  std::vector<std::size_t> children;
};

struct PointExit {
  std::size_t cluster = 0;
  bool top_level_noise = false;
};

}  // namespace

std::string_view to_string(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::Centroid: return "centroid";
    case EmbeddingKind::Corner: return "corner";
    case EmbeddingKind::Euclidean: return "euclidean";
  }
  return "centroid";
}

EmbeddingKind parse_embedding_kind(std::string_view text) {
  if (text == "centroid") return EmbeddingKind::Centroid;
  if (text == "corner") return EmbeddingKind::Corner;
  if (text == "euclidean") return EmbeddingKind::Euclidean;
  throw Error(ErrorCode::MalformedInput, "unknown HDBSCAN input '" + std::string(text) + "'");
}

HdbscanConfig HdbscanConfig::defaults_for(std::size_t num_samples) {
  return {std::max(2, static_cast<int>(num_samples / 4)), 1};
}

Point2 embed_box(const BoundingBox& box, EmbeddingKind kind, double image_width,
                 double image_height) {
  switch (kind) {
    case EmbeddingKind::Centroid:
      return {box.center_x(), box.center_y()};
    case EmbeddingKind::Corner:
      return {box.x1, box.y1};
    case EmbeddingKind::Euclidean:
      return {std::hypot(box.x1, box.y1),
              std::hypot(image_width - box.x2, image_height - box.y2)};
  }
  return {};
}

PointEmbedding embed(const SampleSet& sample_set, EmbeddingKind kind) {
  PointEmbedding out;
  out.kind = kind;
  for (const auto& det : canonical_order(sample_set.flatten())) {
    out.points.push_back(embed_box(det.box, kind, sample_set.image_width, sample_set.image_height));
  }
  return out;
}

std::vector<double> core_distances(std::span<const Point2> points, int min_samples) {
  if (min_samples < 1) {
    throw Error(ErrorCode::MalformedInput, "min_samples must be at least 1");
  }
  const std::size_t k = static_cast<std::size_t>(min_samples);
  if (points.size() < k + 1) {
    throw Error(ErrorCode::InsufficientPoints,
                std::to_string(points.size()) + " points cannot define a " +
                    std::to_string(k) + "-th neighbour");
  }
  std::vector<double> core(points.size());
  std::vector<double> dists;
  dists.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    dists.clear();
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j != i) dists.push_back(distance(points[i], points[j]));
    }
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k - 1), dists.end());
    core[i] = dists[k - 1];
  }
  return core;
}

std::vector<WeightedEdge> mutual_reachability_mst(std::span<const Point2> points,
                                                  std::span<const double> core) {
  const std::size_t n = points.size();
  if (core.size() != n) {
    throw Error(ErrorCode::MalformedInput, "core distance count does not match point count");
  }
  std::vector<WeightedEdge> edges;
  if (n < 2) return edges;

  auto key = [](double w, std::size_t a, std::size_t b) {
    return std::make_tuple(w, std::min(a, b), std::max(a, b));
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<char> in_tree(n, 0);
  std::vector<double> best_weight(n, kInf);
  std::vector<std::size_t> best_from(n, 0);

  std::size_t current = 0;
  in_tree[0] = 1;
  for (std::size_t step = 1; step < n; ++step) {
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double w = std::max({core[current], core[v], distance(points[current], points[v])});
      if (key(w, current, v) < key(best_weight[v], best_from[v], v)) {
        best_weight[v] = w;
        best_from[v] = current;
      }
    }
    std::optional<std::size_t> next;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      if (!next || key(best_weight[v], best_from[v], v) <
                       key(best_weight[*next], best_from[*next], *next)) {
        next = v;
      }
    }
    in_tree[*next] = 1;
    edges.push_back({best_from[*next], *next, best_weight[*next]});
    current = *next;
  }
  return edges;
}

std::vector<int> extract_clusters(std::span<const WeightedEdge> mst, std::size_t num_points,
                                  const HdbscanConfig& config) {
  if (config.min_cluster_size < 2) {
    throw Error(ErrorCode::MalformedInput, "min_cluster_size must be at least 2");
  }
  if (num_points == 0) return {};
  if (mst.size() + 1 != num_points) {
    throw Error(ErrorCode::MalformedInput, "MST must have exactly num_points - 1 edges");
  }
  const std::size_t min_size = static_cast<std::size_t>(config.min_cluster_size);
  std::vector<int> labels(num_points, -1);
  if (num_points < min_size) return labels;

  const Dendrogram tree = build_dendrogram(mst, num_points);
  std::vector<CondensedCluster> clusters;
  std::vector<PointExit> exits(num_points);

  auto fall_out = [&](std::size_t node, std::size_t cluster, double lambda, bool top_level) {
    std::vector<std::size_t> pts;
    tree.leaves(node, pts);
    clusters[cluster].stability += (lambda - clusters[cluster].birth) * static_cast<double>(pts.size());
    for (std::size_t p : pts) exits[p] = {cluster, top_level};
  };

  const std::size_t root = tree.root();
  clusters.push_back({std::nullopt, tree.is_leaf(root) ? kLambdaCap : lambda_of(tree.merge(root).distance), 0.0, {}});

  // (dendrogram node, condensed cluster it currently belongs to)
  std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    const auto [node, cluster] = stack.back();
    stack.pop_back();
    if (tree.is_leaf(node)) {
      fall_out(node, cluster, kLambdaCap, false);
      continue;
    }
    const auto& m = tree.merge(node);
    const double lambda = lambda_of(m.distance);
    const bool left_big = tree.size(m.left) >= min_size;
    const bool right_big = tree.size(m.right) >= min_size;
    // Splits at zero distance are not real splits.
    const bool top_level = node == root && lambda < kLambdaCap;

    if (left_big && right_big) {
      clusters[cluster].stability +=
          (lambda - clusters[cluster].birth) * static_cast<double>(m.size);
      for (std::size_t child : {m.left, m.right}) {
        const std::size_t id = clusters.size();
        clusters.push_back({cluster, lambda, 0.0, {}});
        clusters[cluster].children.push_back(id);
        stack.emplace_back(child, id);
      }
    } else if (left_big) {
      fall_out(m.right, cluster, lambda, top_level);
      stack.emplace_back(m.left, cluster);
    } else if (right_big) {
      fall_out(m.left, cluster, lambda, top_level);
      stack.emplace_back(m.right, cluster);
    } else {
      fall_out(m.left, cluster, lambda, false);
      fall_out(m.right, cluster, lambda, false);
    }
  }

  // Excess of mass, bottom-up: children always have larger ids than parents.
  std::vector<char> selected(clusters.size(), 0);
  std::vector<double> best(clusters.size(), 0.0);
  for (std::size_t id = clusters.size(); id-- > 0;) {
    const auto& c = clusters[id];
    if (c.children.empty()) {
      selected[id] = 1;
      best[id] = c.stability;
      continue;
    }
    double children_total = 0.0;
    for (std::size_t child : c.children) children_total += best[child];
    if (c.stability > children_total) {
      selected[id] = 1;
      best[id] = c.stability;
    } else {
      best[id] = children_total;
    }
  }
  // A selected ancestor overrides its descendants.
  std::vector<std::optional<std::size_t>> owner(clusters.size());
  for (std::size_t id = 0; id < clusters.size(); ++id) {
    const auto& parent = clusters[id].parent;
    if (parent && owner[*parent]) {
      owner[id] = owner[*parent];
    } else if (selected[id]) {
      owner[id] = id;
    }
  }

  std::vector<int> dense(clusters.size(), -1);
  int next_label = 0;
  for (std::size_t p = 0; p < num_points; ++p) {
    if (exits[p].top_level_noise) continue;
    const auto& o = owner[exits[p].cluster];
    if (!o) continue;
    if (dense[*o] < 0) dense[*o] = next_label++;
    labels[p] = dense[*o];
  }
  return labels;
}

std::vector<Cluster> hdbscan_cluster(const SampleSet& sample_set, EmbeddingKind kind,
                                     const HdbscanConfig& config) {
  const std::vector<Detection> dets = canonical_order(sample_set.flatten());
  std::vector<Cluster> clusters;
  if (dets.size() < static_cast<std::size_t>(config.min_samples) + 1) {
    for (const auto& d : dets) clusters.emplace_back(d);
    return clusters;
  }

  std::vector<Point2> points;
  points.reserve(dets.size());
  for (const auto& d : dets) {
    points.push_back(embed_box(d.box, kind, sample_set.image_width, sample_set.image_height));
  }
  const auto core = core_distances(points, config.min_samples);
  const auto mst = mutual_reachability_mst(points, core);
  const auto labels = extract_clusters(mst, points.size(), config);

  const int num_labels = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  clusters.resize(static_cast<std::size_t>(std::max(0, num_labels)));
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (labels[i] >= 0) clusters[static_cast<std::size_t>(labels[i])].add(dets[i]);
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (labels[i] < 0) clusters.emplace_back(dets[i]);
  }
  return clusters;
}

}  // namespace obsmerge
