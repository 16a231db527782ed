// Acceptance gate: one PASS/FAIL line per criterion. Exits non-zero when any
// criterion fails. Set OBSMERGE_ACCEPTANCE_VERBOSE=1 for per-seed details.

#include <fmt/format.h>
#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "obsmerge/error.hpp"
#include "obsmerge/experiment.hpp"
#include "obsmerge/hdbscan.hpp"
#include "obsmerge/hungarian.hpp"
#include "obsmerge/metrics.hpp"
#include "obsmerge/synthgen.hpp"
#include "test_support.hpp"

using namespace obsmerge;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool verbose() {
  const char* v = std::getenv("OBSMERGE_ACCEPTANCE_VERBOSE");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, ReportRow> rows_by_key(const std::vector<ReportRow>& rows) {
  std::map<std::string, ReportRow> out;
  for (const auto& r : rows) {
    std::string label = r.method;
    if (!r.affinity.empty()) label += " " + r.affinity;
    if (r.theta) label += fmt::format(" {}", *r.theta);
    out[label + "|" + r.dataset_regimes + "|" + r.uncertainty_kind] = r;
  }
  return out;
}

std::string key(const GridCell& cell, std::string_view regimes, std::string_view kind) {
  std::string label = cell.method;
  if (!cell.affinity.empty()) label += " " + cell.affinity;
  if (cell.theta) label += fmt::format(" {}", *cell.theta);
  return fmt::format("{}|{}|{}", label, regimes, kind);
}

// Closed-set scenes that meet the cluster-count preconditions: every object
// well separated, detected with probability >= 0.9 and jittered by <= 2 px.
GenConfig recovery_config(std::uint64_t seed) {
  GenConfig c;
  c.seed = seed;
  c.num_samples = 20;
  c.closed_scenes = 200;
  SceneProfile& p = c.closed;
  p.well_separated = true;
  p.jitter_easy = 0.5;
  p.jitter_hard = 2.0;
  p.p_detect_easy = 1.0;
  p.p_detect_hard = 0.9;
  p.concentration_easy = 60.0;
  p.concentration_hard = 20.0;
  p.confusion_probability = 0.0;
  p.clutter_rate = 0.0;
  return c;
}

GenConfig overlap_config(std::uint64_t seed) {
  GenConfig c;
  c.seed = seed;
  c.closed_scenes = 100;
  c.closed.overlap_pairs = 1;
  return c;
}

GenConfig crowd_config(std::uint64_t seed) {
  GenConfig c;
  c.seed = seed;
  c.closed_scenes = 100;
  c.closed.crowd_size = 4;
  return c;
}

GenConfig mixed_config(std::uint64_t seed) {
  GenConfig c;
  c.seed = seed;
  c.closed_scenes = 100;
  c.near_scenes = 50;
  c.distant_scenes = 50;
  return c;
}

GeneratedCorpus generate(const GenConfig& c) { return generate_corpus(random_scenes(c), c); }

Outcome hungarian_optimality() {
  const auto start = Clock::now();
  Rng rng(0xC1);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int matched = 0;
  constexpr int kCases = 2000;
  for (int t = 0; t < kCases; ++t) {
    const auto r = static_cast<std::size_t>(rng.uniform_int(1, 7));
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 7));
    const double p_inf = rng.bernoulli(0.5) ? rng.uniform(0.0, 0.5) : 0.0;
    const bool integral = rng.bernoulli(0.3);
    CostMatrix c(r, k);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        c(i, j) = rng.bernoulli(p_inf) ? kInf : integral ? rng.uniform_int(0, 5) : rng.uniform(0.0, 10.0);
      }
    }
    const auto pairs = hungarian_solve(c);
    const auto oracle = testing::brute_force_assignment(c);
    const long forbidden = static_cast<long>(std::min(r, k) - pairs.size());
    if (forbidden == oracle.forbidden && assignment_cost(c, pairs) == oracle.cost) ++matched;
  }
  const double secs = seconds_since(start);
  return {matched == kCases && secs < 10.0, fmt::format("{}/{} exact, {:.2f} s", matched, kCases, secs)};
}

Outcome hdbscan_fidelity() {
  const auto start = Clock::now();
  const auto doc = nlohmann::json::parse(testing::read_text(OBSMERGE_TEST_DATA_DIR "/hdbscan_reference.json"));
  int good = 0, total = 0;
  double worst = 1.0;
  for (const auto& d : doc.at("blobs")) {
    std::vector<Point2> pts;
    for (const auto& p : d.at("points")) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    const HdbscanConfig config{d.at("min_cluster_size").get<int>(), d.at("min_samples").get<int>()};
    const auto labels = extract_clusters(mutual_reachability_mst(pts, core_distances(pts, config.min_samples)),
                                         pts.size(), config);
    const double ari = testing::adjusted_rand_index(labels, d.at("labels").get<std::vector<int>>());
    worst = std::min(worst, ari);
    ++total;
    if (ari >= 0.95) ++good;
  }
  const double secs = seconds_since(start);
  return {total == 50 && good == total && secs < 30.0,
          fmt::format("{}/{} datasets with ARI >= 0.95 (worst {:.4f}), {:.2f} s", good, total, worst, secs)};
}

Outcome metric_oracles() {
  Rng rng(0xC3);
  double worst = 0.0;
  int sets = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<EvalRecord> records;
    const int n = rng.uniform_int(2, 500);
    const bool coarse = rng.bernoulli(0.5);
    for (int i = 0; i < n; ++i) {
      EvalRecord r;
      r.correctness = rng.bernoulli(0.5) ? Correctness::Correct
                      : rng.bernoulli(0.5) ? Correctness::ClosedSetError
                                           : Correctness::OpenSetError;
      r.uncertainty = coarse ? rng.uniform_int(0, 20) * 0.05 : rng.uniform(0.0, 3.0);
      records.push_back(r);
    }
    // Both groups must be present.
    records[0].correctness = Correctness::Correct;
    records[1].correctness = Correctness::ClosedSetError;
    const double delta = rng.uniform(-0.1, 3.1);
    worst = std::max(worst, std::abs(uncertainty_error(records, delta) - testing::oracle_ue(records, delta)));
    worst = std::max(worst, std::abs(min_uncertainty_error(records).ue - testing::oracle_min_ue(records)));
    worst = std::max(worst, std::abs(auroc(records) - testing::oracle_auroc(records)));
    worst = std::max(worst, std::abs(aupr(records, PrPositive::In) - testing::oracle_aupr(records, true)));
    worst = std::max(worst, std::abs(aupr(records, PrPositive::Out) - testing::oracle_aupr(records, false)));
    ++sets;
  }
  return {worst <= 1e-9, fmt::format("{} record sets, max deviation {:.3g}", sets, worst)};
}

Outcome uncertainty_error_spot_check() {
  auto rec = [](bool correct, double u) {
    EvalRecord r;
    r.correctness = correct ? Correctness::Correct : Correctness::ClosedSetError;
    r.uncertainty = u;
    return r;
  };
  const std::vector<EvalRecord> records{rec(true, 0.1), rec(true, 0.2), rec(false, 0.8), rec(false, 0.9)};
  const double ue = uncertainty_error(records, 0.15);
  const double min_ue = min_uncertainty_error(records).ue;
  const double roc = auroc(records);
  const double in = aupr(records, PrPositive::In);
  const double out = aupr(records, PrPositive::Out);
  return {ue == 0.25 && min_ue == 0.0 && roc == 1.0 && in == 1.0 && out == 1.0,
          fmt::format("UE(0.15) = {}, min-UE = {}, AUROC = {}, AUPR-In = {}, AUPR-Out = {}", ue, min_ue, roc, in,
                      out)};
}

Outcome cluster_count_recovery() {
  const GenConfig config = recovery_config(0xC5);
  const auto scenes = random_scenes(config);
  const auto g = generate_corpus(scenes, config);
  std::vector<int> expected;
  for (const auto& s : scenes) expected.push_back(expected_cluster_count(s, config));

  // The grid runs HDBSCAN at per-image defaults only, so its candidate
  // configs are widened with explicit (min_cluster_size, min_samples) pairs.
  std::vector<GridCell> candidates = paper_default_grid();
  for (auto embedding : {EmbeddingKind::Centroid, EmbeddingKind::Corner, EmbeddingKind::Euclidean}) {
    for (int mcs : {2, 5, 10}) {
      for (int ms : {1, 3, 5}) {
        GridCell cell = hdbscan_cell(embedding);
        cell.hdbscan = HdbscanConfig{mcs, ms};
        candidates.push_back(cell);
      }
    }
  }
  auto name = [](const GridCell& cell) {
    return cell.hdbscan ? fmt::format("{} mcs={} ms={}", cell.label(), cell.hdbscan->min_cluster_size,
                                      cell.hdbscan->min_samples)
                        : cell.label();
  };

  std::map<std::string, std::pair<std::string, double>> best;  // method -> (cell, rate)
  for (const auto& cell : candidates) {
    if (cell.kind == CellKind::Passthrough || cell.method == "bsas_baseline") continue;
    int hits = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      if (static_cast<int>(observe_image(g.corpus.sample_sets[i], cell).size()) == expected[i]) ++hits;
    }
    const double rate = static_cast<double>(hits) / static_cast<double>(scenes.size());
    if (verbose()) std::cout << fmt::format("    {:<36} {:.3f}\n", name(cell), rate);
    auto& b = best[cell.method];
    if (b.first.empty() || rate > b.second) b = {name(cell), rate};
  }
  bool pass = true;
  std::string detail;
  for (const auto& [method, b] : best) {
    pass = pass && b.second >= 0.95;
    detail += fmt::format("{}{} {:.1f}%", detail.empty() ? "" : "; ", b.first, 100.0 * b.second);
  }
  return {pass, detail};
}

// Runs `cells` on corpora from `make(seed)` for seeds 1..10 and counts the
// seeds where `holds` accepts the report.
Outcome over_seeds(const std::function<GenConfig(std::uint64_t)>& make, const std::vector<GridCell>& cells,
                   const std::vector<UncertaintyKind>& kinds, int needed,
                   const std::function<bool(const GridResult&, std::string&)>& holds) {
  int ok = 0;
  std::string worst;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = generate(make(seed));
    GridOptions options;
    options.kinds = kinds;
    const auto result = run_grid(g.corpus, g.ground_truth, cells, options);
    std::string note;
    const bool good = !result.partial() && holds(result, note);
    if (good) ++ok;
    if (!good && worst.empty()) worst = fmt::format(" (seed {}: {})", seed, note);
    if (verbose()) std::cout << fmt::format("    seed {:>2}: {} {}\n", seed, good ? "ok  " : "FAIL", note);
  }
  return {ok >= needed, fmt::format("{}/10 seeds{}", ok, worst)};
}

Outcome same_label_beats_spatial_only() {
  const GridCell sl = sequential_cell(SequentialMethod::BSAS, AffinityKind::parse("iou+sl"), 0.95);
  const GridCell plain = sequential_cell(SequentialMethod::BSAS, AffinityKind::parse("iou"), 0.95);
  return over_seeds(overlap_config, {sl, plain}, {UncertaintyKind::Entropy}, 10,
                    [&](const GridResult& r, std::string& note) {
                      const auto rows = rows_by_key(r.rows);
                      const double a = rows.at(key(sl, "closed", "entropy")).ue_min;
                      const double b = rows.at(key(plain, "closed", "entropy")).ue_min;
                      note = fmt::format("IoU+SL {:.4f} vs IoU {:.4f}", a, b);
                      return a < b;
                    });
}

Outcome exclusive_beats_bsas_on_crowds() {
  std::vector<GridCell> cells;
  for (const auto& c : paper_default_grid()) {
    if (c.method == "bsas" || c.method == "bsas_excl") cells.push_back(c);
  }
  return over_seeds(crowd_config, cells, {UncertaintyKind::Entropy}, 8,
                    [&](const GridResult& r, std::string& note) {
                      double best_bsas = 1.0, best_excl = 1.0;
                      for (const auto& row : r.rows) {
                        if (row.dataset_regimes != "closed" || std::isnan(row.ue_min)) continue;
                        double& b = row.method == "bsas" ? best_bsas : best_excl;
                        b = std::min(b, row.ue_min);
                      }
                      note = fmt::format("best BSAS-excl {:.4f} vs best BSAS {:.4f}", best_excl, best_bsas);
                      return best_excl <= best_bsas;
                    });
}

Outcome spatial_variance_separation() {
  std::vector<GridCell> cells;
  for (const auto& c : paper_default_grid()) {
    if (c.method == "bsas" || c.method == "bsas_excl" || c.method == "bsas_baseline") cells.push_back(c);
  }
  return over_seeds(mixed_config, cells, {UncertaintyKind::SpatialVariance}, 10,
                    [&](const GridResult& r, std::string& note) {
                      std::map<std::string, std::array<double, 4>> acc;  // high sum, n, low sum, n
                      for (const auto& p : r.spatial) {
                        auto& a = acc[p.cell];
                        if (p.gt_iou >= 0.7) {
                          a[0] += p.total_variance;
                          a[1] += 1;
                        } else if (p.gt_iou <= 0.3) {
                          a[2] += p.total_variance;
                          a[3] += 1;
                        }
                      }
                      int separated = 0;
                      double min_ratio = std::numeric_limits<double>::infinity();
                      for (const auto& [cell, a] : acc) {
                        const double high = a[0] / a[1];
                        const double low = a[2] / a[3];
                        if (a[1] > 0 && a[3] > 0 && low > high) ++separated;
                        min_ratio = std::min(min_ratio, low / high);
                      }
                      note = fmt::format("{}/{} cells separated, smallest low/high ratio {:.2f}", separated,
                                         cells.size(), min_ratio);
                      return separated == static_cast<int>(cells.size()) && acc.size() == cells.size();
                    });
}

Outcome open_set_monotonicity() {
  const auto cells = paper_default_grid();
  return over_seeds(mixed_config, cells, {UncertaintyKind::Entropy}, 10,
                    [&](const GridResult& r, std::string& note) {
                      const auto rows = rows_by_key(r.rows);
                      int count_ok = 0, ue_ok = 0;
                      std::string first_bad;
                      for (const auto& c : cells) {
                        const auto& closed = rows.at(key(c, "closed", "entropy"));
                        const auto& distant = rows.at(key(c, "closed+distant", "entropy"));
                        const auto& near = rows.at(key(c, "closed+near", "entropy"));
                        if (distant.n_closed_err + distant.n_open_err >= closed.n_closed_err + closed.n_open_err) {
                          ++count_ok;
                        }
                        if (distant.ue_min <= near.ue_min) {
                          ++ue_ok;
                        } else if (first_bad.empty()) {
                          first_bad = fmt::format(", e.g. {} {:.4f} > {:.4f}", c.label(), distant.ue_min, near.ue_min);
                        }
                      }
                      const int n = static_cast<int>(cells.size());
                      note = fmt::format("error counts {}/{}, min-UE distant <= near {}/{}{}", count_ok, n, ue_ok, n,
                                         first_bad);
                      return count_ok == n && ue_ok == n;
                    });
}

Outcome invariant_suites() {
  const fs::path count_file = fs::temp_directory_path() / "obsmerge_property_count.txt";
  fs::remove(count_file);
  const std::string cmd = fmt::format(
      "OBSMERGE_PROPERTY_COUNT_FILE={} {} --gtest_filter='*Property*:*RoundTrip*:*Fuzz*' >/dev/null 2>&1",
      count_file.string(), OBSMERGE_UNIT_TESTS_PATH);
  const int status = shell(cmd);
  long cases = 0;
  const std::string text = testing::read_text(count_file.string());
  if (!text.empty()) cases = std::stol(text);
  return {status == 0 && cases >= 10000,
          fmt::format("property/round-trip/fuzz suites {}, {} generated cases", status == 0 ? "passed" : "FAILED",
                      cases)};
}

Outcome end_to_end_determinism() {
  const fs::path dir = fs::temp_directory_path() / "obsmerge_acceptance_e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = OBSMERGE_CLI_PATH;
  if (shell(fmt::format("{} generate --seed 11 --closed 100 --near 50 --distant 50 --out {} >/dev/null", cli,
                        dir.string())) != 0) {
    return {false, "generate failed"};
  }
  const std::string base = fmt::format("{} run --grid paper-default --corpus {} --gt {}", cli,
                                       (dir / "corpus.jsonl").string(), (dir / "gt.jsonl").string());
  const auto start = Clock::now();
  const int a = shell(fmt::format("{} --jobs 1 --out {} >/dev/null", base, (dir / "a").string()));
  const double secs = seconds_since(start);
  const int b = shell(fmt::format("{} --jobs 1 --out {} >/dev/null", base, (dir / "b").string()));
  const int c = shell(fmt::format("{} --jobs 8 --out {} >/dev/null", base, (dir / "c").string()));
  if (a != 0 || b != 0 || c != 0) return {false, "run failed"};
  const std::string ra = testing::read_text((dir / "a" / "report.csv").string());
  const bool same_runs = ra == testing::read_text((dir / "b" / "report.csv").string());
  const bool same_jobs = ra == testing::read_text((dir / "c" / "report.csv").string());
  fs::remove_all(dir);
  return {same_runs && same_jobs && secs < 300.0,
          fmt::format("repeat run {}, jobs 1 vs 8 {}, 200-image default grid {:.1f} s",
                      same_runs ? "identical" : "DIFFERENT", same_jobs ? "identical" : "DIFFERENT", secs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"Hungarian optimality", hungarian_optimality},
      {"HDBSCAN fidelity", hdbscan_fidelity},
      {"metric oracles", metric_oracles},
      {"uncertainty error spot check", uncertainty_error_spot_check},
      {"cluster-count recovery", cluster_count_recovery},
      {"same-label affinity beats spatial-only", same_label_beats_spatial_only},
      {"exclusive BSAS on crowded closed-set scenes", exclusive_beats_bsas_on_crowds},
      {"spatial-uncertainty separation", spatial_variance_separation},
      {"open-set monotonicity", open_set_monotonicity},
      {"invariant suites", invariant_suites},
      {"end-to-end determinism", end_to_end_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << fmt::format("criterion {:>2} {} {}: {}\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                             o.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
