#pragma once

#include <limits>
#include <string>
#include <string_view>

#include "obsmerge/types.hpp"

namespace obsmerge {

enum class SpatialAffinity { IoU, PAC, EAC };
enum class SemanticModifier { None, SameLabel, KL };

/// Spatial measure, optional semantic modifier and the PAC/EAC weights.
struct AffinityKind {
  SpatialAffinity spatial = SpatialAffinity::IoU;
  SemanticModifier semantic = SemanticModifier::None;
  double lambda_motion = 0.5;
  double lambda_shape = 1.5;

  /// "iou", "iou+sl", "pac+kl", ...
  std::string name() const;
  /// Inverse of name(). Throws Error(MalformedInput).
  static AffinityKind parse(std::string_view text);

  friend bool operator==(const AffinityKind&, const AffinityKind&) = default;
};

inline constexpr double kProbabilityFloor = 1e-10;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double iou(const BoundingBox& a, const BoundingBox& b);

/// Center offset normalised by the mean extent, squared and summed over
/// both axes.
double motion_term(const BoundingBox& a, const BoundingBox& b);
/// |w_a - w_b| / (w_a + w_b) + |h_a - h_b| / (h_a + h_b).
double shape_term(const BoundingBox& a, const BoundingBox& b);

/// exp(-(lambda_m * motion + lambda_s * shape)).
double eac(const BoundingBox& a, const BoundingBox& b, double lambda_motion,
           double lambda_shape);
/// 1 / (1 + motion) * exp(-lambda_s * shape).
double pac(const BoundingBox& a, const BoundingBox& b, double lambda_shape);

double spatial_affinity(const AffinityKind& kind, const BoundingBox& a, const BoundingBox& b);

bool same_label(const Detection& a, const Detection& b);

/// KL(p || q) after renormalising both inputs and flooring entries at
/// kProbabilityFloor. Throws Error(DegenerateDistribution) on a zero sum.
double kl_divergence(const ScoreDistribution& p, const ScoreDistribution& q);
/// Symmetrised divergence 0.5 * (KL(p||q) + KL(q||p)).
double kl_semantic(const ScoreDistribution& a, const ScoreDistribution& b);

/// Spatial value, -inf when SameLabel is requested and winning labels differ,
/// spatial - kl_semantic for the KL modifier. Used both for detection pairs
/// and for detection / cluster-representative pairs.
double composite_affinity(const AffinityKind& kind, const BoundingBox& box_a,
                          const ScoreDistribution& scores_a, const BoundingBox& box_b,
                          const ScoreDistribution& scores_b);
double composite_affinity(const AffinityKind& kind, const Detection& a, const Detection& b);

}  // namespace obsmerge
