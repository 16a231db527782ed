#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "obsmerge/clustering.hpp"
#include "obsmerge/types.hpp"

namespace obsmerge {

enum class UncertaintyKind { Entropy, SpatialVariance };

std::string_view to_string(UncertaintyKind kind);
/// "entropy" or "spatial". Throws Error(MalformedInput).
UncertaintyKind parse_uncertainty_kind(std::string_view text);

struct SpatialVariance {
  double x = 0.0;
  double y = 0.0;
  double total = 0.0;
};

/// Shannon entropy in nats of the renormalised foreground distribution, with
/// entries floored at 1e-10. Throws Error(DegenerateDistribution) on zero sum.
double entropy(const ScoreDistribution& scores);

/// Population variance of member coordinates: x = Var(x1) + Var(x2),
/// y = Var(y1) + Var(y2). Throws Error(InsufficientMembers) below 2 members.
SpatialVariance spatial_variance(const Cluster& cluster);

/// Every cluster with at least two members becomes an observation with the
/// mean box, mean scores, entropy and spatial variance.
std::vector<Observation> form_observations(std::span<const Cluster> clusters);

/// Single-pass baseline: each detection becomes its own observation without
/// spatial variance. Throws Error(NotSingleSample) when n > 1.
std::vector<Observation> passthrough_observations(const SampleSet& sample_set);

/// U(O) for the given kind; nullopt when the observation has no spatial
/// variance.
std::optional<double> uncertainty_of(const Observation& obs, UncertaintyKind kind);

struct AcceptRejectPartition {
  std::vector<Observation> accepted;
  std::vector<Observation> rejected;
};

/// Accepts U(O) <= delta, rejects the rest. Observations without the
/// requested uncertainty are rejected.
AcceptRejectPartition accept_reject(std::span<const Observation> observations,
                                    UncertaintyKind kind, double delta);

}  // namespace obsmerge
