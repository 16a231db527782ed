#include "obsmerge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>

#include "obsmerge/affinity.hpp"
#include "obsmerge/error.hpp"

namespace obsmerge {

namespace {

struct Split {
  std::vector<double> correct;
  std::vector<double> incorrect;
};

Split split_records(std::span<const EvalRecord> records) {
  Split s;
  for (const auto& r : records) {
    if (std::isnan(r.uncertainty)) {
      throw Error(ErrorCode::MalformedInput, "record without an uncertainty value");
    }
    (r.correct() ? s.correct : s.incorrect).push_back(r.uncertainty);
  }
  return s;
}

void require_both(const Split& s) {
  if (s.correct.empty()) throw Error(ErrorCode::EmptyClass, "no correct records");
  if (s.incorrect.empty()) throw Error(ErrorCode::EmptyClass, "no incorrect records");
}

double ue_from_counts(std::size_t rejected_correct, std::size_t n_correct,
                      std::size_t accepted_incorrect, std::size_t n_incorrect) {
  return 0.5 * (static_cast<double>(rejected_correct) / static_cast<double>(n_correct)) +
         0.5 * (static_cast<double>(accepted_incorrect) / static_cast<double>(n_incorrect));
}

}  // namespace

std::string_view to_string(Correctness c) {
  switch (c) {
    case Correctness::Correct: return "correct";
    case Correctness::ClosedSetError: return "closed_set_error";
    case Correctness::OpenSetError: return "open_set_error";
  }
  return "correct";
}

double gt_iou(const Observation& obs, std::span<const GroundTruthObject> gts) {
  double best = 0.0;
  for (const auto& gt : gts) {
    if (gt.class_label == obs.winning_label) best = std::max(best, iou(obs.box, gt.box));
  }
  return best;
}

std::vector<EvalRecord> label_correctness(std::span<const Observation> observations,
                                          std::span<const GroundTruthObject> gts, Regime regime,
                                          UncertaintyKind kind) {
  std::vector<EvalRecord> out;
  out.reserve(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    EvalRecord r;
    r.observation_index = i;
    r.regime = regime;
    r.gt_iou = gt_iou(observations[i], gts);
    if (r.gt_iou >= kMatchIou) {
      r.correctness = Correctness::Correct;
    } else {
      r.correctness = is_open_set(regime) ? Correctness::OpenSetError : Correctness::ClosedSetError;
    }
    r.uncertainty = uncertainty_of(observations[i], kind).value_or(std::nan(""));
    out.push_back(r);
  }
  return out;
}

double uncertainty_error(std::span<const EvalRecord> records, double delta) {
  const Split s = split_records(records);
  require_both(s);
  const auto rejected = static_cast<std::size_t>(
      std::count_if(s.correct.begin(), s.correct.end(), [&](double u) { return u > delta; }));
  const auto accepted = static_cast<std::size_t>(
      std::count_if(s.incorrect.begin(), s.incorrect.end(), [&](double u) { return u <= delta; }));
  return ue_from_counts(rejected, s.correct.size(), accepted, s.incorrect.size());
}

MinUncertaintyError min_uncertainty_error(std::span<const EvalRecord> records) {
  Split s = split_records(records);
  require_both(s);
  std::sort(s.correct.begin(), s.correct.end());
  std::sort(s.incorrect.begin(), s.incorrect.end());

  std::vector<double> candidates;
  candidates.reserve(s.correct.size() + s.incorrect.size() + 1);
  candidates.insert(candidates.end(), s.correct.begin(), s.correct.end());
  candidates.insert(candidates.end(), s.incorrect.begin(), s.incorrect.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  candidates.insert(candidates.begin(), candidates.front() - 1.0);

  MinUncertaintyError best{2.0, 0.0};
  std::size_t correct_at_or_below = 0;
  std::size_t incorrect_at_or_below = 0;
  for (double delta : candidates) {
    while (correct_at_or_below < s.correct.size() && s.correct[correct_at_or_below] <= delta) {
      ++correct_at_or_below;
    }
    while (incorrect_at_or_below < s.incorrect.size() &&
           s.incorrect[incorrect_at_or_below] <= delta) {
      ++incorrect_at_or_below;
    }
    const double ue = ue_from_counts(s.correct.size() - correct_at_or_below, s.correct.size(),
                                     incorrect_at_or_below, s.incorrect.size());
    if (ue < best.ue) best = {ue, delta};
  }
  return best;
}

double auroc(std::span<const EvalRecord> records) {
  Split s = split_records(records);
  require_both(s);
  std::sort(s.correct.begin(), s.correct.end());
  std::sort(s.incorrect.begin(), s.incorrect.end());

  // Twice the Mann-Whitney count, kept integral so ties cost nothing in
  // precision.
  std::uint64_t twice = 0;
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (double u : s.correct) {
    while (lo < s.incorrect.size() && s.incorrect[lo] <= u) ++lo;  // first incorrect > u
    while (hi < s.incorrect.size() && s.incorrect[hi] < u) ++hi;   // first incorrect >= u
    const std::size_t greater = s.incorrect.size() - lo;
    const std::size_t ties = lo - hi;
    twice += 2 * greater + ties;
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(s.correct.size()) * static_cast<double>(s.incorrect.size()));
}

double aupr(std::span<const EvalRecord> records, PrPositive positive) {
  const Split s = split_records(records);
  const bool in = positive == PrPositive::In;
  const std::vector<double>& pos = in ? s.correct : s.incorrect;
  const std::vector<double>& neg = in ? s.incorrect : s.correct;
  if (pos.empty()) {
    throw Error(ErrorCode::EmptyClass, in ? "no correct records" : "no incorrect records");
  }

  // Rank key: ascending uncertainty for In, descending for Out.
  std::vector<std::pair<double, bool>> ranked;
  ranked.reserve(pos.size() + neg.size());
  for (double u : pos) ranked.emplace_back(in ? u : -u, true);
  for (double u : neg) ranked.emplace_back(in ? u : -u, false);
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const double total_pos = static_cast<double>(pos.size());
  std::size_t tp = 0;
  std::size_t fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < ranked.size();) {
    std::size_t group_tp = 0;
    std::size_t j = i;
    for (; j < ranked.size() && ranked[j].first == ranked[i].first; ++j) {
      if (ranked[j].second) {
        ++group_tp;
      } else {
        ++fp;
      }
    }
    tp += group_tp;
    if (group_tp > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      area += (static_cast<double>(group_tp) / total_pos) * precision;
    }
    i = j;
  }
  return area;
}

double average_precision(std::span<const ImageDetections> images, std::size_t class_id) {
  struct Candidate {
    double score;
    std::size_t image;
    std::size_t obs;
  };
  std::vector<Candidate> candidates;
  std::size_t num_gt = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t k = 0; k < images[i].observations.size(); ++k) {
      const auto& o = images[i].observations[k];
      if (o.winning_label == class_id) candidates.push_back({o.winning_score, i, k});
    }
    for (const auto& gt : images[i].ground_truth) {
      if (gt.class_label == class_id) ++num_gt;
    }
  }
  if (num_gt == 0) return 0.0;
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

  std::vector<std::vector<char>> matched(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) matched[i].assign(images[i].ground_truth.size(), 0);

  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& c : candidates) {
    const auto& img = images[c.image];
    const auto& box = img.observations[c.obs].box;
    double best = -1.0;
    std::optional<std::size_t> best_gt;
    for (std::size_t g = 0; g < img.ground_truth.size(); ++g) {
      if (img.ground_truth[g].class_label != class_id || matched[c.image][g]) continue;
      const double v = iou(box, img.ground_truth[g].box);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt && best >= kMatchIou) {
      matched[c.image][*best_gt] = 1;
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  // Precision envelope, then area over recall steps.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

double mean_average_precision(std::span<const ImageDetections> images) {
  std::set<std::size_t> classes;
  for (const auto& img : images) {
    for (const auto& gt : img.ground_truth) classes.insert(gt.class_label);
  }
  if (classes.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t c : classes) total += average_precision(images, c);
  return total / static_cast<double>(classes.size());
}

}  // namespace obsmerge
