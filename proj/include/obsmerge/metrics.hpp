#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obsmerge/observation.hpp"
#include "obsmerge/types.hpp"

namespace obsmerge {

struct GroundTruthObject {
  std::string image_id;
  BoundingBox box;
  std::size_t class_label = 0;

  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

enum class Correctness { Correct, ClosedSetError, OpenSetError };

std::string_view to_string(Correctness c);

/// One observation judged against ground truth.
struct EvalRecord {
  std::size_t observation_index = 0;
  Correctness correctness = Correctness::Correct;
  /// NaN when the observation does not carry the requested uncertainty.
  double uncertainty = 0.0;
  double gt_iou = 0.0;
  Regime regime = Regime::ClosedSet;

  bool correct() const { return correctness == Correctness::Correct; }
};

inline constexpr double kMatchIou = 0.5;

/// Maximum IoU with a ground-truth object of the observation's winning
/// class; 0 when there is none.
double gt_iou(const Observation& obs, std::span<const GroundTruthObject> gts);

/// Correct iff gt_iou >= 0.5. Errors are closed-set errors on closed-set
/// images and open-set errors otherwise. `gts` must belong to the same image.
std::vector<EvalRecord> label_correctness(std::span<const Observation> observations,
                                          std::span<const GroundTruthObject> gts, Regime regime,
                                          UncertaintyKind kind);

/// 0.5 * |correct with U > delta| / |correct| + 0.5 * |incorrect with U <= delta| / |incorrect|.
/// Throws Error(EmptyClass) if either group is empty.
double uncertainty_error(std::span<const EvalRecord> records, double delta);

struct MinUncertaintyError {
  double ue = 0.0;
  double delta = 0.0;
};

/// Minimum of uncertainty_error over every distinct uncertainty value plus
/// one threshold below the smallest (min - 1). Ties keep the smallest delta.
MinUncertaintyError min_uncertainty_error(std::span<const EvalRecord> records);

/// Probability that a correct record has lower uncertainty than an incorrect
/// one, ties counted as one half.
double auroc(std::span<const EvalRecord> records);

enum class PrPositive { In, Out };

/// Step-wise area under the precision-recall curve. In: correct records are
/// positive, accepted in ascending uncertainty. Out: incorrect records are
/// positive, rejected in descending uncertainty. Tied uncertainties enter
/// together. Throws Error(EmptyClass) when there are no positives.
double aupr(std::span<const EvalRecord> records, PrPositive positive);

/// Observations and ground truth of one image.
struct ImageDetections {
  std::string image_id;
  std::vector<Observation> observations;
  std::vector<GroundTruthObject> ground_truth;
};

/// VOC-style AP for one class with all-points interpolation. Observations are
/// ranked by winning score; each greedily takes the highest-IoU unmatched
/// same-class ground truth in its image when that IoU reaches 0.5. Returns 0
/// when the class has no ground truth.
double average_precision(std::span<const ImageDetections> images, std::size_t class_id);

/// Mean AP over the classes with at least one ground-truth object; 0 when no
/// image has ground truth.
double mean_average_precision(std::span<const ImageDetections> images);

}  // namespace obsmerge
