#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "obsmerge/clustering.hpp"
#include "obsmerge/types.hpp"

namespace obsmerge {

/// How a box is mapped to a 2-D point.
///  Centroid:  box center.
///  Corner:    top-left corner.
///  Euclidean: (distance of the top-left corner to the image origin,
///              distance of the bottom-right corner to the far image corner).
enum class EmbeddingKind { Centroid, Corner, Euclidean };

std::string_view to_string(EmbeddingKind kind);
/// "centroid", "corner", "euclidean". Throws Error(MalformedInput).
EmbeddingKind parse_embedding_kind(std::string_view text);

struct Point2 {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct PointEmbedding {
  EmbeddingKind kind = EmbeddingKind::Centroid;
  /// One point per detection, in canonical detection order.
  std::vector<Point2> points;
};

struct HdbscanConfig {
  int min_cluster_size = 5;
  int min_samples = 1;

  /// min_cluster_size = max(2, n / 4), min_samples = 1.
  static HdbscanConfig defaults_for(std::size_t num_samples);
};

struct WeightedEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

Point2 embed_box(const BoundingBox& box, EmbeddingKind kind, double image_width,
                 double image_height);
PointEmbedding embed(const SampleSet& sample_set, EmbeddingKind kind);

/// Distance from each point to its min_samples-th nearest other point.
/// Throws Error(InsufficientPoints) when fewer than min_samples + 1 points.
std::vector<double> core_distances(std::span<const Point2> points, int min_samples);

/// Minimum spanning tree (Prim) under the mutual reachability distance
/// max(core(a), core(b), |a - b|). Ties resolve to the lowest index pair.
std::vector<WeightedEdge> mutual_reachability_mst(std::span<const Point2> points,
                                                  std::span<const double> core);

/// Flat labels from an MST: single-linkage hierarchy, condensed by
/// min_cluster_size, clusters selected by excess of mass. Noise is -1, other
/// labels are dense from 0 in order of first appearance.
///
/// The root cluster is born at the largest MST weight, so components that
/// split off at that top level without reaching min_cluster_size are noise
/// even when the root itself ends up selected.
std::vector<int> extract_clusters(std::span<const WeightedEdge> mst, std::size_t num_points,
                                  const HdbscanConfig& config);

/// embed -> core_distances -> mutual_reachability_mst -> extract_clusters.
/// Clusters come out in label order; each noise detection follows as its
/// own singleton cluster.
std::vector<Cluster> hdbscan_cluster(const SampleSet& sample_set, EmbeddingKind kind,
                                     const HdbscanConfig& config);

}  // namespace obsmerge
