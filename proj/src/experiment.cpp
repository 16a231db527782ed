#include "obsmerge/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "obsmerge/error.hpp"

namespace obsmerge {

namespace {

const double kNaN = std::nan("");

bool is_nan(double v) { return std::isnan(v); }

std::string theta_label(double theta) { return fmt::format("{}", theta); }

std::map<std::string, std::vector<GroundTruthObject>, std::less<>> index_ground_truth(
    std::span<const GroundTruthObject> gts) {
  std::map<std::string, std::vector<GroundTruthObject>, std::less<>> out;
  for (const auto& gt : gts) out[gt.image_id].push_back(gt);
  return out;
}

GridCell parse_cell(const nlohmann::json& j) {
  const std::string method = j.at("method").get<std::string>();
  if (method == "ssd") return standard_detector_cell();
  if (method == "bsas_baseline") return bsas_baseline_cell();
  if (method == "hdbscan") {
    GridCell cell = hdbscan_cell(parse_embedding_kind(j.value("embedding", std::string("centroid"))));
    if (j.contains("min_cluster_size") || j.contains("min_samples")) {
      HdbscanConfig h;
      h.min_cluster_size = j.value("min_cluster_size", h.min_cluster_size);
      h.min_samples = j.value("min_samples", h.min_samples);
      cell.hdbscan = h;
    }
    return cell;
  }
  SequentialMethod m;
  if (method == "bsas") {
    m = SequentialMethod::BSAS;
  } else if (method == "bsas_excl") {
    m = SequentialMethod::BSASExclusive;
  } else if (method == "hungarian") {
    m = SequentialMethod::Hungarian;
  } else {
    throw Error(ErrorCode::MalformedInput, "unknown grid method '" + method + "'");
  }
  const AffinityKind affinity = AffinityKind::parse(j.value("affinity", std::string("iou")));
  if (m == SequentialMethod::Hungarian) {
    const double gate = j.value("gate", j.value("theta", kHungarianDefaultGate));
    return sequential_cell(m, affinity, gate);
  }
  if (!j.contains("theta")) throw Error(ErrorCode::MalformedInput, method + " cell needs a theta");
  return sequential_cell(m, affinity, j.at("theta").get<double>());
}

// Parameter ranges are checked when the cell runs, so one bad cell in a grid
// file fails on its own instead of rejecting the whole grid.
void check_cell(const GridCell& cell) {
  if (cell.kind == CellKind::Hdbscan && cell.hdbscan &&
      (cell.hdbscan->min_cluster_size < 2 || cell.hdbscan->min_samples < 1)) {
    throw Error(ErrorCode::MalformedInput, "hdbscan needs min_cluster_size >= 2 and min_samples >= 1");
  }
  if (cell.kind == CellKind::Sequential && !(cell.cluster.theta > 0.0 && cell.cluster.theta <= 1.0)) {
    throw Error(ErrorCode::MalformedInput, fmt::format("theta {} outside (0, 1]", cell.cluster.theta));
  }
}

}  // namespace

std::string GridCell::label() const {
  std::string out = method;
  if (!affinity.empty()) out += " " + affinity;
  if (theta) out += " " + theta_label(*theta);
  return out;
}

GridCell sequential_cell(SequentialMethod method, AffinityKind affinity, double theta) {
  GridCell cell;
  cell.method = std::string(to_string(method));
  cell.affinity = affinity.name();
  cell.theta = theta;
  cell.kind = CellKind::Sequential;
  cell.cluster.method = method;
  cell.cluster.affinity = affinity;
  cell.cluster.theta = theta;
  return cell;
}

GridCell hdbscan_cell(EmbeddingKind embedding) {
  GridCell cell;
  cell.method = "hdbscan";
  cell.affinity = std::string(to_string(embedding));
  cell.kind = CellKind::Hdbscan;
  cell.embedding = embedding;
  return cell;
}

GridCell standard_detector_cell() {
  GridCell cell;
  cell.method = "ssd";
  cell.kind = CellKind::Passthrough;
  return cell;
}

GridCell bsas_baseline_cell() {
  GridCell cell = sequential_cell(SequentialMethod::BSAS, AffinityKind{}, 0.95);
  cell.method = "bsas_baseline";
  return cell;
}

std::vector<GridCell> paper_default_grid() {
  std::vector<GridCell> grid;
  const double thetas[] = {0.7, 0.8, 0.9, 0.95};
  const SemanticModifier semantics[] = {SemanticModifier::None, SemanticModifier::SameLabel,
                                        SemanticModifier::KL};
  for (SequentialMethod m : {SequentialMethod::BSAS, SequentialMethod::BSASExclusive}) {
    for (double theta : thetas) {
      for (SemanticModifier s : semantics) {
        grid.push_back(sequential_cell(m, AffinityKind{SpatialAffinity::IoU, s}, theta));
      }
    }
  }
  for (SpatialAffinity sp : {SpatialAffinity::IoU, SpatialAffinity::PAC, SpatialAffinity::EAC}) {
    for (SemanticModifier s : semantics) {
      grid.push_back(sequential_cell(SequentialMethod::Hungarian, AffinityKind{sp, s}, kHungarianDefaultGate));
    }
  }
  for (EmbeddingKind e : {EmbeddingKind::Centroid, EmbeddingKind::Corner, EmbeddingKind::Euclidean}) {
    grid.push_back(hdbscan_cell(e));
  }
  grid.push_back(standard_detector_cell());
  grid.push_back(bsas_baseline_cell());
  return grid;
}

std::vector<GridCell> parse_grid(std::string_view text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("cells") || !j.at("cells").is_array()) {
    throw Error(ErrorCode::MalformedInput, "grid file must be an object with a \"cells\" array");
  }
  std::vector<GridCell> grid;
  try {
    for (const auto& cj : j.at("cells")) {
      grid.push_back(parse_cell(cj));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("grid file: ") + e.what());
  }
  if (grid.empty()) throw Error(ErrorCode::MalformedInput, "grid file has no cells");
  return grid;
}

std::vector<GridCell> load_grid(std::string_view spec) {
  if (spec == "paper-default") return paper_default_grid();
  const std::filesystem::path path{std::string(spec)};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open grid file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str());
}

bool RegimeUnion::contains(Regime r) const {
  return std::find(regimes.begin(), regimes.end(), r) != regimes.end();
}

const std::vector<RegimeUnion>& regime_unions() {
  static const std::vector<RegimeUnion> unions = {
      {"closed", {Regime::ClosedSet}},
      {"closed+distant", {Regime::ClosedSet, Regime::DistantOpenSet}},
      {"closed+near", {Regime::ClosedSet, Regime::NearOpenSet}},
      {"all", {Regime::ClosedSet, Regime::NearOpenSet, Regime::DistantOpenSet}},
  };
  return unions;
}

std::vector<Observation> observe_image(const SampleSet& sample_set, const GridCell& cell) {
  switch (cell.kind) {
    case CellKind::Sequential: {
      const auto clusters = cluster_sample_set(sample_set, cell.cluster);
      return form_observations(clusters);
    }
    case CellKind::Hdbscan: {
      const HdbscanConfig h = cell.hdbscan.value_or(HdbscanConfig::defaults_for(sample_set.num_samples()));
      const auto clusters = hdbscan_cluster(sample_set, cell.embedding, h);
      return form_observations(clusters);
    }
    case CellKind::Passthrough: {
      SampleSet single = sample_set;
      single.samples.resize(std::min<std::size_t>(1, single.samples.size()));
      return passthrough_observations(single);
    }
  }
  return {};
}

std::vector<ImageObservations> run_cell(const Corpus& corpus, const GridCell& cell) {
  std::vector<ImageObservations> out;
  out.reserve(corpus.sample_sets.size());
  for (const auto& set : corpus.sample_sets) {
    try {
      out.push_back({set.image_id, set.regime, observe_image(set, cell)});
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("image {}: {}", set.image_id, e.what()));
    }
  }
  return out;
}

ReportRow evaluate_union(const GridCell& cell, std::span<const ImageObservations> images,
                         std::span<const GroundTruthObject> ground_truth, const RegimeUnion& regimes,
                         UncertaintyKind kind) {
  const auto gt_index = index_ground_truth(ground_truth);
  static const std::vector<GroundTruthObject> kNoGt;
  auto gts_of = [&](const std::string& id) -> const std::vector<GroundTruthObject>& {
    const auto it = gt_index.find(id);
    return it == gt_index.end() ? kNoGt : it->second;
  };

  ReportRow row;
  row.method = cell.method;
  row.affinity = cell.affinity;
  row.theta = cell.theta;
  row.dataset_regimes = regimes.name;
  row.uncertainty_kind = std::string(to_string(kind));

  std::vector<EvalRecord> usable;
  for (const auto& img : images) {
    if (!regimes.contains(img.regime)) continue;
    for (const auto& r : label_correctness(img.observations, gts_of(img.image_id), img.regime, kind)) {
      switch (r.correctness) {
        case Correctness::Correct: ++row.n_correct; break;
        case Correctness::ClosedSetError: ++row.n_closed_err; break;
        case Correctness::OpenSetError: ++row.n_open_err; break;
      }
      if (!is_nan(r.uncertainty)) usable.push_back(r);
    }
  }

  const bool has_correct = std::any_of(usable.begin(), usable.end(), [](const auto& r) { return r.correct(); });
  const bool has_incorrect =
      std::any_of(usable.begin(), usable.end(), [](const auto& r) { return !r.correct(); });
  std::optional<double> delta;
  if (has_correct && has_incorrect) {
    const auto best = min_uncertainty_error(usable);
    row.ue_min = best.ue;
    row.delta_star = best.delta;
    row.auroc = auroc(usable);
    row.aupr_in = aupr(usable, PrPositive::In);
    row.aupr_out = aupr(usable, PrPositive::Out);
    delta = best.delta;
  } else {
    row.ue_min = row.delta_star = row.auroc = row.aupr_in = row.aupr_out = kNaN;
  }

  std::vector<ImageDetections> detections;
  for (const auto& img : images) {
    if (!regimes.contains(img.regime)) continue;
    ImageDetections d;
    d.image_id = img.image_id;
    d.ground_truth = gts_of(img.image_id);
    if (delta) {
      d.observations = accept_reject(img.observations, kind, *delta).accepted;
    } else {
      d.observations = img.observations;
    }
    detections.push_back(std::move(d));
  }
  row.map = mean_average_precision(detections);
  return row;
}

GridResult run_grid(const Corpus& corpus, std::span<const GroundTruthObject> ground_truth,
                    std::span<const GridCell> cells, const GridOptions& options) {
  if (corpus.sample_sets.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no images");

  struct CellOutput {
    std::vector<ReportRow> rows;
    std::vector<SpatialPoint> spatial;
    std::optional<std::string> failure;
  };
  std::vector<CellOutput> outputs(cells.size());
  const auto gt_index = index_ground_truth(ground_truth);

  auto work = [&](std::size_t i) {
    const GridCell& cell = cells[i];
    CellOutput& out = outputs[i];
    try {
      check_cell(cell);
      const auto images = run_cell(corpus, cell);
      for (const auto& u : regime_unions()) {
        for (UncertaintyKind kind : options.kinds) {
          out.rows.push_back(evaluate_union(cell, images, ground_truth, u, kind));
        }
      }
      for (const auto& img : images) {
        const auto it = gt_index.find(img.image_id);
        const std::span<const GroundTruthObject> gts =
            it == gt_index.end() ? std::span<const GroundTruthObject>{} : it->second;
        for (const auto& o : img.observations) {
          if (!o.spatial_variance) continue;
          out.spatial.push_back({cell.label(), img.image_id, gt_iou(o, gts), *o.spatial_variance});
        }
      }
    } catch (const std::exception& e) {
      out.rows.clear();
      out.spatial.clear();
      out.failure = e.what();
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.jobs, 1)), 1,
                                                   std::max<std::size_t>(cells.size(), 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) work(i);
      });
    }
  }

  GridResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& out = outputs[i];
    if (out.failure) {
      result.failures.push_back({cells[i].label(), *out.failure});
      continue;
    }
    std::move(out.rows.begin(), out.rows.end(), std::back_inserter(result.rows));
    std::move(out.spatial.begin(), out.spatial.end(), std::back_inserter(result.spatial));
  }
  return result;
}

std::string format_spatial_points(std::span<const SpatialPoint> points) {
  std::string out = "cell,image_id,gt_iou,total_variance\n";
  for (const auto& p : points) {
    out += fmt::format("{},{},{:.6f},{:.6f}\n", p.cell, p.image_id, p.gt_iou, p.total_variance);
  }
  return out;
}

std::vector<SpatialPoint> parse_spatial_points(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "cell,image_id,gt_iou,total_variance") {
    throw Error(ErrorCode::MalformedInput, "spatial CSV header mismatch");
  }
  std::vector<SpatialPoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c3 = line.rfind(',');
    const auto c2 = c3 == std::string::npos ? c3 : line.rfind(',', c3 - 1);
    const auto c1 = c2 == std::string::npos || c2 == 0 ? std::string::npos : line.rfind(',', c2 - 1);
    if (c1 == std::string::npos) throw Error(ErrorCode::MalformedInput, "bad spatial row: " + line);
    try {
      points.push_back({line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1),
                        std::stod(line.substr(c2 + 1, c3 - c2 - 1)), std::stod(line.substr(c3 + 1))});
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::MalformedInput, "bad spatial row: " + line);
    }
  }
  return points;
}

}  // namespace obsmerge
