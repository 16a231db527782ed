#pragma once

// Shared helpers for the unit and acceptance tests: hand-rolled random
// generators, a property-case counter and a few brute-force oracles.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "obsmerge/hungarian.hpp"
#include "obsmerge/metrics.hpp"
#include "obsmerge/synthgen.hpp"
#include "obsmerge/types.hpp"

namespace obsmerge::testing {

inline std::atomic<long>& property_case_counter() {
  static std::atomic<long> counter{0};
  return counter;
}

/// Runs body(rng, case_index) `cases` times with independent generators and
/// counts the cases towards the property total.
template <typename Body>
void for_all(std::uint64_t seed, int cases, Body&& body) {
  for (int i = 0; i < cases; ++i) {
    Rng rng(scene_seed(seed, static_cast<std::uint64_t>(i)));
    body(rng, i);
    ++property_case_counter();
  }
}

inline BoundingBox random_box(Rng& rng, double w = 500.0, double h = 375.0, double min_side = 1.0) {
  const double bw = rng.uniform(min_side, std::max(min_side + 1e-3, 0.6 * w));
  const double bh = rng.uniform(min_side, std::max(min_side + 1e-3, 0.6 * h));
  const double x = rng.uniform(0.0, w - bw);
  const double y = rng.uniform(0.0, h - bh);
  return {x, y, x + bw, y + bh};
}

/// Softmax-like scores over m classes with some background mass.
inline ScoreDistribution random_scores(Rng& rng, std::size_t m) {
  std::vector<double> alpha(m + 1, 0.0);
  for (double& a : alpha) a = rng.uniform(0.1, 3.0);
  auto draw = rng.dirichlet(alpha);
  draw.pop_back();
  if (*std::max_element(draw.begin(), draw.end()) <= 0.0) draw[0] = 0.5;
  return ScoreDistribution(std::move(draw));
}

inline ScoreDistribution one_hot(std::size_t m, std::size_t k, double p = 1.0) {
  std::vector<double> v(m, 0.0);
  v[k] = p;
  return ScoreDistribution(std::move(v));
}

/// Valid SampleSet whose detections jitter around a few objects.
inline SampleSet random_sample_set(Rng& rng, std::size_t m = 4, int max_samples = 6, int max_objects = 4,
                                   double jitter = 3.0) {
  SampleSet s;
  s.image_id = "img";
  s.image_width = 300.0;
  s.image_height = 200.0;
  const int n = rng.uniform_int(1, max_samples);
  const int k = rng.uniform_int(0, max_objects);
  std::vector<BoundingBox> objects;
  std::vector<std::size_t> labels;
  for (int i = 0; i < k; ++i) {
    objects.push_back(random_box(rng, s.image_width, s.image_height, 10.0));
    labels.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(m) - 1)));
  }
  s.samples.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < k; ++i) {
      if (!rng.bernoulli(0.85)) continue;
      BoundingBox b = objects[static_cast<std::size_t>(i)];
      b.x1 += rng.normal(0.0, jitter);
      b.y1 += rng.normal(0.0, jitter);
      b.x2 += rng.normal(0.0, jitter);
      b.y2 += rng.normal(0.0, jitter);
      std::vector<double> alpha(m + 1, 0.2);
      alpha[labels[static_cast<std::size_t>(i)]] += rng.uniform(1.0, 30.0);
      auto scores = rng.dirichlet(alpha);
      scores.pop_back();
      s.samples[static_cast<std::size_t>(j)].push_back({b, ScoreDistribution(std::move(scores)), j});
    }
  }
  return validate_sample_set(std::move(s));
}

/// Brute-force minimum of the assignment objective (fewest forbidden pairs,
/// then smallest finite sum) over every injective row -> column map.
struct BruteAssignment {
  long forbidden = 0;
  double cost = 0.0;
};

inline BruteAssignment brute_force_assignment(const CostMatrix& c) {
  const bool transpose = c.rows() > c.cols();
  const std::size_t r = transpose ? c.cols() : c.rows();
  const std::size_t k = transpose ? c.rows() : c.cols();
  auto at = [&](std::size_t i, std::size_t j) { return transpose ? c(j, i) : c(i, j); };
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  BruteAssignment best{std::numeric_limits<long>::max(), 0.0};
  do {
    // Only the first r entries matter; skip permutations that differ in the tail.
    bool canonical = true;
    for (std::size_t i = r; i + 1 < k; ++i) {
      if (perm[i] > perm[i + 1]) {
        canonical = false;
        break;
      }
    }
    if (!canonical) continue;
    // Accumulate in original row order, as assignment_cost does.
    std::vector<std::pair<std::size_t, double>> picked;
    for (std::size_t i = 0; i < r; ++i) picked.emplace_back(transpose ? perm[i] : i, at(i, perm[i]));
    std::sort(picked.begin(), picked.end());
    long forbidden = 0;
    double cost = 0.0;
    for (const auto& [_, v] : picked) {
      if (std::isinf(v)) {
        ++forbidden;
      } else {
        cost += v;
      }
    }
    if (forbidden < best.forbidden || (forbidden == best.forbidden && cost < best.cost)) best = {forbidden, cost};
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Adjusted Rand index of two labelings; every noise point (-1) counts as a
/// cluster of its own.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  auto relabel = [](const std::vector<int>& l) {
    std::vector<long> out(l.size());
    long next_noise = 1'000'000;
    for (std::size_t i = 0; i < l.size(); ++i) out[i] = l[i] < 0 ? next_noise++ : l[i];
    return out;
  };
  const auto ra = relabel(a);
  const auto rb = relabel(b);
  std::map<std::pair<long, long>, double> joint;
  std::map<long, double> ca;
  std::map<long, double> cb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{ra[i], rb[i]}] += 1;
    ca[ra[i]] += 1;
    cb[rb[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : joint) index += c2(v);
  for (const auto& [_, v] : ca) sa += c2(v);
  for (const auto& [_, v] : cb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(n));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

// Brute-force metric oracles: enumerate thresholds and pairs directly.

inline double oracle_ue(const std::vector<EvalRecord>& records, double delta) {
  double c = 0, i = 0, rc = 0, ai = 0;
  for (const auto& r : records) {
    if (r.correct()) {
      ++c;
      if (r.uncertainty > delta) ++rc;
    } else {
      ++i;
      if (r.uncertainty <= delta) ++ai;
    }
  }
  return 0.5 * rc / c + 0.5 * ai / i;
}

inline double oracle_min_ue(const std::vector<EvalRecord>& records) {
  double best = 2.0;
  best = std::min(best, oracle_ue(records, -std::numeric_limits<double>::infinity()));
  for (const auto& r : records) best = std::min(best, oracle_ue(records, r.uncertainty));
  return best;
}

inline double oracle_auroc(const std::vector<EvalRecord>& records) {
  double pairs = 0, wins = 0;
  for (const auto& c : records) {
    if (!c.correct()) continue;
    for (const auto& i : records) {
      if (i.correct()) continue;
      pairs += 1;
      if (i.uncertainty > c.uncertainty) wins += 1;
      if (i.uncertainty == c.uncertainty) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Step-wise area under precision/recall. Thresholds sweep every distinct
/// uncertainty; positives are correct records ranked by ascending
/// uncertainty (in) or incorrect records ranked by descending uncertainty
/// (out).
inline double oracle_aupr(const std::vector<EvalRecord>& records, bool in) {
  std::vector<double> keys;
  double total_pos = 0;
  for (const auto& r : records) {
    keys.push_back(in ? r.uncertainty : -r.uncertainty);
    if (r.correct() == in) total_pos += 1;
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  double area = 0, prev_recall = 0;
  for (double t : keys) {
    double tp = 0, fp = 0;
    for (const auto& r : records) {
      const double key = in ? r.uncertainty : -r.uncertainty;
      if (key > t) continue;
      if (r.correct() == in) {
        tp += 1;
      } else {
        fp += 1;
      }
    }
    const double recall = tp / total_pos;
    if (recall > prev_recall) {
      area += (recall - prev_recall) * tp / (tp + fp);
      prev_recall = recall;
    }
  }
  return area;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace obsmerge::testing
