#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "obsmerge/affinity.hpp"
#include "obsmerge/types.hpp"

namespace obsmerge {

/// A group of detections with a running-mean representative. The
/// representative box and scores are always the exact mean of the members,
/// accumulated in insertion order.
class Cluster {
 public:
  Cluster() = default;
  explicit Cluster(const Detection& first) { add(first); }

  void add(const Detection& det);

  const std::vector<Detection>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  const BoundingBox& representative_box() const { return rep_box_; }
  const ScoreDistribution& representative_scores() const { return rep_scores_; }
  const std::set<int>& sample_mask() const { return sample_mask_; }
  bool contains_sample(int sample_index) const { return sample_mask_.contains(sample_index); }

 private:
  std::vector<Detection> members_;
  std::set<int> sample_mask_;
  BoundingBox box_sum_;
  std::vector<double> score_sum_;
  BoundingBox rep_box_;
  ScoreDistribution rep_scores_;
};

enum class SequentialMethod { BSAS, BSASExclusive, Hungarian };

std::string_view to_string(SequentialMethod method);

struct ClusterConfig {
  SequentialMethod method = SequentialMethod::BSAS;
  AffinityKind affinity;
  /// Affinity threshold in (0, 1]. Also the Hungarian gate when no explicit
  /// gate is given.
  double theta = 0.95;
  std::optional<double> hungarian_gate;

  /// Threshold applied to the composite affinity: theta, or theta - 0.1 when
  /// the composite is spatial - KL.
  double effective_threshold() const;
  double gate() const { return hungarian_gate.value_or(theta); }
};

/// Basic sequential scheme: each detection, in canonical order, joins the
/// cluster whose representative has the highest composite affinity if that
/// affinity reaches the effective threshold, else it opens a new cluster.
std::vector<Cluster> bsas(const SampleSet& sample_set, const ClusterConfig& config);

/// BSAS restricted to clusters holding no detection from the same sample.
/// With the KL modifier, the detection joins the minimum-KL cluster among
/// those whose spatial affinity reaches theta.
std::vector<Cluster> bsas_exclusive(const SampleSet& sample_set, const ClusterConfig& config);

/// Clusters seeded from the first sample; every later sample is matched to
/// the current clusters by optimal assignment on -spatial (+inf across
/// labels for SameLabel, +KL for the KL modifier). Matches whose spatial
/// affinity falls below the gate, and unmatched detections, open new
/// clusters.
std::vector<Cluster> hungarian_cluster(const SampleSet& sample_set, const ClusterConfig& config);

/// Dispatches on config.method.
std::vector<Cluster> cluster_sample_set(const SampleSet& sample_set, const ClusterConfig& config);

}  // namespace obsmerge
