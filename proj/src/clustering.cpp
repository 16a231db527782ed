#include "obsmerge/clustering.hpp"

#include <cmath>
#include <limits>

#include "obsmerge/error.hpp"
#include "obsmerge/hungarian.hpp"

namespace obsmerge {

namespace {

constexpr double kKlThresholdOffset = 0.1;

void check_config(const ClusterConfig& config, SequentialMethod expected) {
  if (config.method != expected) {
    throw Error(ErrorCode::MalformedInput,
                "cluster config method is " + std::string(to_string(config.method)) +
                    ", expected " + std::string(to_string(expected)));
  }
  if (!(config.theta > 0.0 && config.theta <= 1.0)) {
    throw Error(ErrorCode::MalformedInput, "theta must lie in (0, 1]");
  }
}

double affinity_to(const AffinityKind& kind, const Detection& det, const Cluster& c) {
  return composite_affinity(kind, det.box, det.scores, c.representative_box(),
                            c.representative_scores());
}

std::vector<Cluster> sequential_scheme(const SampleSet& sample_set, const ClusterConfig& config,
                                       bool exclusive) {
  const double threshold = config.effective_threshold();
  const bool min_kl_rule = exclusive && config.affinity.semantic == SemanticModifier::KL;
  std::vector<Cluster> clusters;

  for (const Detection& det : canonical_order(sample_set.flatten())) {
    std::optional<std::size_t> best;
    double best_value = 0.0;
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      const Cluster& c = clusters[k];
      if (exclusive && c.contains_sample(det.sample_index)) continue;
      if (min_kl_rule) {
        if (spatial_affinity(config.affinity, det.box, c.representative_box()) < config.theta) continue;
        const double kl = kl_semantic(det.scores, c.representative_scores());
        if (!best || kl < best_value) {
          best = k;
          best_value = kl;
        }
      } else {
        const double a = affinity_to(config.affinity, det, c);
        if (a >= threshold && (!best || a > best_value)) {
          best = k;
          best_value = a;
        }
      }
    }
    if (best) {
      clusters[*best].add(det);
    } else {
      clusters.emplace_back(det);
    }
  }
  return clusters;
}

}  // namespace

void Cluster::add(const Detection& det) {
  if (members_.empty()) {
    score_sum_.assign(det.scores.size(), 0.0);
  } else if (det.scores.size() != score_sum_.size()) {
    throw Error(ErrorCode::MalformedInput, "cluster members disagree on class count");
  }
  members_.push_back(det);
  sample_mask_.insert(det.sample_index);

  box_sum_.x1 += det.box.x1;
  box_sum_.y1 += det.box.y1;
  box_sum_.x2 += det.box.x2;
  box_sum_.y2 += det.box.y2;
  for (std::size_t i = 0; i < score_sum_.size(); ++i) score_sum_[i] += det.scores[i];

  const double n = static_cast<double>(members_.size());
  rep_box_ = {box_sum_.x1 / n, box_sum_.y1 / n, box_sum_.x2 / n, box_sum_.y2 / n};
  std::vector<double> mean(score_sum_.size());
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = score_sum_[i] / n;
  rep_scores_ = ScoreDistribution(std::move(mean));
}

std::string_view to_string(SequentialMethod method) {
  switch (method) {
    case SequentialMethod::BSAS: return "bsas";
    case SequentialMethod::BSASExclusive: return "bsas_excl";
    case SequentialMethod::Hungarian: return "hungarian";
  }
  return "bsas";
}

double ClusterConfig::effective_threshold() const {
  return affinity.semantic == SemanticModifier::KL ? theta - kKlThresholdOffset : theta;
}

std::vector<Cluster> bsas(const SampleSet& sample_set, const ClusterConfig& config) {
  check_config(config, SequentialMethod::BSAS);
  return sequential_scheme(sample_set, config, false);
}

std::vector<Cluster> bsas_exclusive(const SampleSet& sample_set, const ClusterConfig& config) {
  check_config(config, SequentialMethod::BSASExclusive);
  return sequential_scheme(sample_set, config, true);
}

std::vector<Cluster> hungarian_cluster(const SampleSet& sample_set, const ClusterConfig& config) {
  check_config(config, SequentialMethod::Hungarian);
  const AffinityKind& kind = config.affinity;
  const double gate = config.gate();
  std::vector<Cluster> clusters;

  for (const auto& sample : sample_set.samples) {
    std::vector<Detection> dets(sample.begin(), sample.end());
    dets = canonical_order(std::move(dets));
    if (dets.empty()) continue;
    if (clusters.empty()) {
      for (const auto& d : dets) clusters.emplace_back(d);
      continue;
    }

    CostMatrix cost(dets.size(), clusters.size());
    CostMatrix spatial(dets.size(), clusters.size());
    for (std::size_t r = 0; r < dets.size(); ++r) {
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        const Cluster& cl = clusters[c];
        const double s = spatial_affinity(kind, dets[r].box, cl.representative_box());
        spatial(r, c) = s;
        double value = -s;
        if (kind.semantic == SemanticModifier::SameLabel &&
            dets[r].scores.argmax() != cl.representative_scores().argmax()) {
          value = std::numeric_limits<double>::infinity();
        } else if (kind.semantic == SemanticModifier::KL) {
          value += kl_semantic(dets[r].scores, cl.representative_scores());
        }
        cost(r, c) = value;
      }
    }

    std::vector<std::optional<std::size_t>> target(dets.size());
    for (const auto& p : hungarian_solve(cost)) {
      if (spatial(p.row, p.col) >= gate) target[p.row] = p.col;
    }
    const std::size_t existing = clusters.size();
    for (std::size_t r = 0; r < dets.size(); ++r) {
      if (target[r] && *target[r] < existing) {
        clusters[*target[r]].add(dets[r]);
      } else {
        clusters.emplace_back(dets[r]);
      }
    }
  }
  return clusters;
}

std::vector<Cluster> cluster_sample_set(const SampleSet& sample_set, const ClusterConfig& config) {
  switch (config.method) {
    case SequentialMethod::BSAS: return bsas(sample_set, config);
    case SequentialMethod::BSASExclusive: return bsas_exclusive(sample_set, config);
    case SequentialMethod::Hungarian: return hungarian_cluster(sample_set, config);
  }
  return {};
}

}  // namespace obsmerge
