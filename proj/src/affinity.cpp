#include "obsmerge/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "obsmerge/error.hpp"

namespace obsmerge {

namespace {

std::string_view spatial_name(SpatialAffinity s) {
  switch (s) {
    case SpatialAffinity::IoU: return "iou";
    case SpatialAffinity::PAC: return "pac";
    case SpatialAffinity::EAC: return "eac";
  }
  return "iou";
}

std::vector<double> normalized_with_floor(const ScoreDistribution& s) {
  const double total = s.sum();
  if (!(total > 0.0)) {
    throw Error(ErrorCode::DegenerateDistribution, "score distribution sums to zero");
  }
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = std::max(s[i] / total, kProbabilityFloor);
  }
  return out;
}

double kl_of(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) d += p[i] * std::log(p[i] / q[i]);
  return d;
}

}  // namespace

std::string AffinityKind::name() const {
  std::string out(spatial_name(spatial));
  if (semantic == SemanticModifier::SameLabel) out += "+sl";
  if (semantic == SemanticModifier::KL) out += "+kl";
  return out;
}

AffinityKind AffinityKind::parse(std::string_view text) {
  AffinityKind kind;
  std::string_view head = text;
  const auto plus = text.find('+');
  if (plus != std::string_view::npos) {
    head = text.substr(0, plus);
    const auto tail = text.substr(plus + 1);
    if (tail == "sl") {
      kind.semantic = SemanticModifier::SameLabel;
    } else if (tail == "kl") {
      kind.semantic = SemanticModifier::KL;
    } else {
      throw Error(ErrorCode::MalformedInput, "unknown semantic modifier in '" + std::string(text) + "'");
    }
  }
  if (head == "iou") {
    kind.spatial = SpatialAffinity::IoU;
  } else if (head == "pac") {
    kind.spatial = SpatialAffinity::PAC;
  } else if (head == "eac") {
    kind.spatial = SpatialAffinity::EAC;
  } else {
    throw Error(ErrorCode::MalformedInput, "unknown spatial affinity in '" + std::string(text) + "'");
  }
  return kind;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double motion_term(const BoundingBox& a, const BoundingBox& b) {
  const double mean_w = 0.5 * (a.width() + b.width());
  const double mean_h = 0.5 * (a.height() + b.height());
  const double dx = (a.center_x() - b.center_x()) / mean_w;
  const double dy = (a.center_y() - b.center_y()) / mean_h;
  return dx * dx + dy * dy;
}

double shape_term(const BoundingBox& a, const BoundingBox& b) {
  return std::abs(a.width() - b.width()) / (a.width() + b.width()) +
         std::abs(a.height() - b.height()) / (a.height() + b.height());
}

double eac(const BoundingBox& a, const BoundingBox& b, double lambda_motion,
           double lambda_shape) {
  return std::exp(-(lambda_motion * motion_term(a, b) + lambda_shape * shape_term(a, b)));
}

double pac(const BoundingBox& a, const BoundingBox& b, double lambda_shape) {
  return (1.0 / (1.0 + motion_term(a, b))) * std::exp(-lambda_shape * shape_term(a, b));
}

double spatial_affinity(const AffinityKind& kind, const BoundingBox& a, const BoundingBox& b) {
  switch (kind.spatial) {
    case SpatialAffinity::IoU: return iou(a, b);
    case SpatialAffinity::PAC: return pac(a, b, kind.lambda_shape);
    case SpatialAffinity::EAC: return eac(a, b, kind.lambda_motion, kind.lambda_shape);
  }
  return 0.0;
}

bool same_label(const Detection& a, const Detection& b) {
  return a.winning_label() == b.winning_label();
}

double kl_divergence(const ScoreDistribution& p, const ScoreDistribution& q) {
  return kl_of(normalized_with_floor(p), normalized_with_floor(q));
}

double kl_semantic(const ScoreDistribution& a, const ScoreDistribution& b) {
  const auto p = normalized_with_floor(a);
  const auto q = normalized_with_floor(b);
  return 0.5 * (kl_of(p, q) + kl_of(q, p));
}

double composite_affinity(const AffinityKind& kind, const BoundingBox& box_a,
                          const ScoreDistribution& scores_a, const BoundingBox& box_b,
                          const ScoreDistribution& scores_b) {
  switch (kind.semantic) {
    case SemanticModifier::None:
      return spatial_affinity(kind, box_a, box_b);
    case SemanticModifier::SameLabel:
      if (scores_a.argmax() != scores_b.argmax()) return kNegInf;
      return spatial_affinity(kind, box_a, box_b);
    case SemanticModifier::KL:
      return spatial_affinity(kind, box_a, box_b) - kl_semantic(scores_a, scores_b);
  }
  return kNegInf;
}

double composite_affinity(const AffinityKind& kind, const Detection& a, const Detection& b) {
  return composite_affinity(kind, a.box, a.scores, b.box, b.scores);
}

}  // namespace obsmerge
