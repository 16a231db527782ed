#include "obsmerge/observation.hpp"

#include <algorithm>
#include <cmath>

#include "obsmerge/affinity.hpp"
#include "obsmerge/error.hpp"

namespace obsmerge {

namespace {

double population_variance(const std::vector<Detection>& members, double BoundingBox::*coord) {
  const double n = static_cast<double>(members.size());
  double mean = 0.0;
  for (const auto& d : members) mean += d.box.*coord;
  mean /= n;
  double acc = 0.0;
  for (const auto& d : members) {
    const double diff = d.box.*coord - mean;
    acc += diff * diff;
  }
  return acc / n;
}

Observation observation_from(const BoundingBox& box, const ScoreDistribution& scores,
                             int members) {
  Observation obs;
  obs.box = box;
  obs.scores = scores;
  obs.member_count = members;
  obs.entropy = entropy(scores);
  obs.winning_label = scores.argmax();
  obs.winning_score = scores.max();
  return obs;
}

}  // namespace

std::string_view to_string(UncertaintyKind kind) {
  return kind == UncertaintyKind::Entropy ? "entropy" : "spatial";
}

UncertaintyKind parse_uncertainty_kind(std::string_view text) {
  if (text == "entropy") return UncertaintyKind::Entropy;
  if (text == "spatial") return UncertaintyKind::SpatialVariance;
  throw Error(ErrorCode::MalformedInput, "unknown uncertainty kind '" + std::string(text) + "'");
}

double entropy(const ScoreDistribution& scores) {
  const double total = scores.sum();
  if (!(total > 0.0)) {
    throw Error(ErrorCode::DegenerateDistribution, "cannot take entropy of a zero-sum distribution");
  }
  double h = 0.0;
  for (double s : scores.values()) {
    const double p = std::max(s / total, kProbabilityFloor);
    h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

SpatialVariance spatial_variance(const Cluster& cluster) {
  const auto& m = cluster.members();
  if (m.size() < 2) {
    throw Error(ErrorCode::InsufficientMembers, "spatial variance needs at least two members");
  }
  SpatialVariance v;
  v.x = population_variance(m, &BoundingBox::x1) + population_variance(m, &BoundingBox::x2);
  v.y = population_variance(m, &BoundingBox::y1) + population_variance(m, &BoundingBox::y2);
  v.total = v.x + v.y;
  return v;
}

std::vector<Observation> form_observations(std::span<const Cluster> clusters) {
  std::vector<Observation> out;
  for (const auto& c : clusters) {
    if (c.size() < 2) continue;
    Observation obs = observation_from(c.representative_box(), c.representative_scores(),
                                       static_cast<int>(c.size()));
    const SpatialVariance v = spatial_variance(c);
    obs.variance_x = v.x;
    obs.variance_y = v.y;
    obs.spatial_variance = v.total;
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<Observation> passthrough_observations(const SampleSet& sample_set) {
  if (sample_set.num_samples() > 1) {
    throw Error(ErrorCode::NotSingleSample,
                "pass-through expects one sample, got " + std::to_string(sample_set.num_samples()));
  }
  std::vector<Observation> out;
  for (const auto& det : canonical_order(sample_set.flatten())) {
    out.push_back(observation_from(det.box, det.scores, 1));
  }
  return out;
}

std::optional<double> uncertainty_of(const Observation& obs, UncertaintyKind kind) {
  if (kind == UncertaintyKind::Entropy) return obs.entropy;
  return obs.spatial_variance;
}

AcceptRejectPartition accept_reject(std::span<const Observation> observations,
                                    UncertaintyKind kind, double delta) {
  AcceptRejectPartition part;
  for (const auto& obs : observations) {
    const auto u = uncertainty_of(obs, kind);
    if (u && *u <= delta) {
      part.accepted.push_back(obs);
    } else {
      part.rejected.push_back(obs);
    }
  }
  return part;
}

}  // namespace obsmerge
