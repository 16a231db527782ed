#include "obsmerge/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "obsmerge/error.hpp"

namespace obsmerge {

namespace {

using nlohmann::json;

constexpr long kMaxSamplesPerImage = 1'000'000;
constexpr std::size_t kMaxClasses = 100'000;

[[noreturn]] void malformed(std::string_view source, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedInput, fmt::format("{}:{}: {}", source, line, what));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double number_field(const json& j, std::string_view source, std::size_t line, std::string_view field) {
  if (!j.is_number()) malformed(source, line, fmt::format("field '{}' must be a number", field));
  return j.get<double>();
}

long integer_field(const json& j, std::string_view source, std::size_t line, std::string_view field) {
  if (!j.is_number_integer()) malformed(source, line, fmt::format("field '{}' must be an integer", field));
  if (j.is_number_unsigned()) {
    const auto u = j.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<long>::max())) {
      malformed(source, line, fmt::format("field '{}' is out of range", field));
    }
    return static_cast<long>(u);
  }
  return static_cast<long>(j.get<std::int64_t>());
}

std::string string_field(const json& j, std::string_view source, std::size_t line, std::string_view field) {
  if (!j.is_string()) malformed(source, line, fmt::format("field '{}' must be a string", field));
  return j.get<std::string>();
}

const json& member(const json& obj, const char* key, std::string_view source, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) malformed(source, line, fmt::format("missing field '{}'", key));
  return *it;
}

json parse_line(const std::string& text, std::string_view source, std::size_t line) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) malformed(source, line, "not a valid JSON value");
  return j;
}

CorpusManifest parse_manifest(const json& j, std::string_view source) {
  constexpr std::size_t line = 1;
  if (!j.is_object()) malformed(source, line, "manifest must be a JSON object");
  if (string_field(member(j, "format", source, line), source, line, "format") != kCorpusFormat) {
    malformed(source, line, "not an obsmerge corpus");
  }
  if (integer_field(member(j, "version", source, line), source, line, "version") != kCorpusVersion) {
    malformed(source, line, "unsupported corpus version");
  }
  CorpusManifest m;
  m.name = string_field(member(j, "name", source, line), source, line, "name");
  const long num_classes = integer_field(member(j, "num_classes", source, line), source, line, "num_classes");
  const json& names = member(j, "class_names", source, line);
  if (!names.is_array()) malformed(source, line, "field 'class_names' must be an array");
  if (num_classes < 1 || static_cast<std::size_t>(num_classes) > kMaxClasses ||
      names.size() != static_cast<std::size_t>(num_classes)) {
    malformed(source, line, "num_classes must be positive and match class_names");
  }
  for (const auto& n : names) m.class_names.push_back(string_field(n, source, line, "class_names[]"));

  const json& images = member(j, "images", source, line);
  if (!images.is_array()) malformed(source, line, "field 'images' must be an array");
  std::set<std::string> seen;
  for (const auto& img : images) {
    if (!img.is_object()) malformed(source, line, "image entries must be objects");
    ImageEntry e;
    e.image_id = string_field(member(img, "image_id", source, line), source, line, "image_id");
    e.width = number_field(member(img, "width", source, line), source, line, "width");
    e.height = number_field(member(img, "height", source, line), source, line, "height");
    e.regime = parse_regime(string_field(member(img, "regime", source, line), source, line, "regime"));
    const long n = integer_field(member(img, "num_samples", source, line), source, line, "num_samples");
    if (n < 1 || n > kMaxSamplesPerImage) malformed(source, line, "num_samples out of range for " + e.image_id);
    e.num_samples = static_cast<int>(n);
    if (!(e.width > 0.0) || !(e.height > 0.0) || !std::isfinite(e.width) || !std::isfinite(e.height)) {
      malformed(source, line, "image '" + e.image_id + "' has non-positive dimensions");
    }
    if (!seen.insert(e.image_id).second) malformed(source, line, "duplicate image_id " + e.image_id);
    m.images.push_back(std::move(e));
  }
  return m;
}

json manifest_json(const CorpusManifest& m) {
  json images = json::array();
  for (const auto& e : m.images) {
    images.push_back({{"image_id", e.image_id},
                      {"width", e.width},
                      {"height", e.height},
                      {"regime", std::string(to_string(e.regime))},
                      {"num_samples", e.num_samples}});
  }
  return {{"format", std::string(kCorpusFormat)},
          {"version", kCorpusVersion},
          {"name", m.name},
          {"num_classes", m.class_names.size()},
          {"class_names", m.class_names},
          {"images", images}};
}

std::string format_theta(const std::optional<double>& theta) {
  return theta ? fmt::format("{:.6f}", *theta) : std::string();
}

std::string format_metric(double v) {
  return std::isnan(v) ? std::string("nan") : fmt::format("{:.6f}", v);
}

double parse_metric(const std::string& s) {
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw Error(ErrorCode::MalformedInput, "bad numeric field '" + s + "'");
  return v;
}

}  // namespace

const ImageEntry* CorpusManifest::find(std::string_view image_id) const {
  for (const auto& e : images) {
    if (e.image_id == image_id) return &e;
  }
  return nullptr;
}

Corpus parse_corpus(std::istream& in, std::string_view source) {
  std::string text;
  std::size_t line_no = 0;
  std::optional<CorpusManifest> manifest;
  std::map<std::string, std::size_t> index;
  std::vector<SampleSet> sets;

  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    const json j = parse_line(text, source, line_no);
    if (!manifest) {
      if (line_no != 1) malformed(source, line_no, "manifest must be the first record");
      manifest = parse_manifest(j, source);
      for (const auto& e : manifest->images) {
        index.emplace(e.image_id, sets.size());
        SampleSet s;
        s.image_id = e.image_id;
        s.image_width = e.width;
        s.image_height = e.height;
        s.regime = e.regime;
        s.samples.resize(static_cast<std::size_t>(e.num_samples));
        sets.push_back(std::move(s));
      }
      continue;
    }

    const std::size_t m = manifest->num_classes();
    if (!j.is_array()) malformed(source, line_no, "detection record must be a JSON array");
    if (j.size() != 6 + m) {
      malformed(source, line_no,
                fmt::format("detection record has {} fields, expected {} for {} classes", j.size(), 6 + m, m));
    }
    const std::string id = string_field(j[0], source, line_no, "image_id");
    const auto it = index.find(id);
    if (it == index.end()) malformed(source, line_no, "image '" + id + "' is not in the manifest");
    SampleSet& set = sets[it->second];
    const long sample = integer_field(j[1], source, line_no, "sample_index");
    if (sample < 0 || static_cast<std::size_t>(sample) >= set.samples.size()) {
      malformed(source, line_no, fmt::format("sample_index {} out of range", sample));
    }
    Detection det;
    det.sample_index = static_cast<int>(sample);
    det.box = {number_field(j[2], source, line_no, "x1"), number_field(j[3], source, line_no, "y1"),
               number_field(j[4], source, line_no, "x2"), number_field(j[5], source, line_no, "y2")};
    std::vector<double> scores(m);
    for (std::size_t c = 0; c < m; ++c) scores[c] = number_field(j[6 + c], source, line_no, "score");
    det.scores = ScoreDistribution(std::move(scores));
    set.samples[static_cast<std::size_t>(sample)].push_back(std::move(det));
  }
  if (!manifest) malformed(source, line_no, "empty corpus file (no manifest)");

  Corpus corpus;
  corpus.manifest = std::move(*manifest);
  corpus.sample_sets.reserve(sets.size());
  for (auto& s : sets) corpus.sample_sets.push_back(validate_sample_set(std::move(s)));
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return parse_corpus(in, path.string());
}

std::string format_corpus(const Corpus& corpus) {
  std::string out = manifest_json(corpus.manifest).dump();
  out += '\n';
  for (const auto& set : corpus.sample_sets) {
    const json id = set.image_id;
    const std::string quoted = id.dump();
    for (std::size_t j = 0; j < set.samples.size(); ++j) {
      for (const auto& d : set.samples[j]) {
        out += fmt::format("[{},{},{:.4f},{:.4f},{:.4f},{:.4f}", quoted, j, d.box.x1, d.box.y1,
                           d.box.x2, d.box.y2);
        for (double s : d.scores.values()) out += fmt::format(",{}", json(s).dump());
        out += "]\n";
      }
    }
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_text_file(path, format_corpus(corpus));
}

std::vector<GroundTruthObject> parse_ground_truth(std::istream& in, const CorpusManifest& manifest,
                                                  std::string_view source) {
  std::vector<GroundTruthObject> out;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    const json j = parse_line(text, source, line_no);
    if (!j.is_array() || j.size() != 6) {
      malformed(source, line_no, "ground-truth record must be [image_id, class, x1, y1, x2, y2]");
    }
    GroundTruthObject gt;
    gt.image_id = string_field(j[0], source, line_no, "image_id");
    const ImageEntry* entry = manifest.find(gt.image_id);
    if (!entry) malformed(source, line_no, "image '" + gt.image_id + "' is not in the manifest");
    if (is_open_set(entry->regime)) {
      malformed(source, line_no, "open-set image '" + gt.image_id + "' cannot have known-class objects");
    }
    const long label = integer_field(j[1], source, line_no, "class_index");
    if (label < 0 || static_cast<std::size_t>(label) >= manifest.num_classes()) {
      malformed(source, line_no, fmt::format("class_index {} outside [0, {})", label, manifest.num_classes()));
    }
    gt.class_label = static_cast<std::size_t>(label);
    gt.box = {number_field(j[2], source, line_no, "x1"), number_field(j[3], source, line_no, "y1"),
              number_field(j[4], source, line_no, "x2"), number_field(j[5], source, line_no, "y2")};
    if (!gt.box.valid()) malformed(source, line_no, "ground-truth box is degenerate");
    out.push_back(std::move(gt));
  }
  return out;
}

std::vector<GroundTruthObject> load_ground_truth(const std::filesystem::path& path,
                                                 const CorpusManifest& manifest) {
  std::istringstream in(read_file(path));
  return parse_ground_truth(in, manifest, path.string());
}

std::string format_ground_truth(const std::vector<GroundTruthObject>& gts) {
  std::string out;
  for (const auto& gt : gts) {
    out += fmt::format("[{},{},{:.4f},{:.4f},{:.4f},{:.4f}]\n", json(gt.image_id).dump(),
                       gt.class_label, gt.box.x1, gt.box.y1, gt.box.x2, gt.box.y2);
  }
  return out;
}

void write_ground_truth(const std::vector<GroundTruthObject>& gts, const std::filesystem::path& path) {
  write_text_file(path, format_ground_truth(gts));
}

std::string format_report(std::vector<ReportRow> rows) {
  auto key = [](const ReportRow& r) {
    return std::make_tuple(r.method, r.affinity, format_theta(r.theta), r.dataset_regimes,
                           r.uncertainty_kind);
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const ReportRow& a, const ReportRow& b) { return key(a) < key(b); });
  std::string out(kReportHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.method, r.affinity,
                       format_theta(r.theta), r.dataset_regimes, r.uncertainty_kind,
                       format_metric(r.map), format_metric(r.ue_min), format_metric(r.delta_star),
                       format_metric(r.auroc), format_metric(r.aupr_in), format_metric(r.aupr_out),
                       r.n_correct, r.n_closed_err, r.n_open_err);
  }
  return out;
}

void write_report(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
  write_text_file(path, format_report(rows));
}

std::vector<ReportRow> parse_report(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) {
    throw Error(ErrorCode::MalformedInput, "report CSV header mismatch");
  }
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 14) throw Error(ErrorCode::MalformedInput, "report row has wrong field count");
    try {
      ReportRow r;
      r.method = f[0];
      r.affinity = f[1];
      if (!f[2].empty()) r.theta = parse_metric(f[2]);
      r.dataset_regimes = f[3];
      r.uncertainty_kind = f[4];
      r.map = parse_metric(f[5]);
      r.ue_min = parse_metric(f[6]);
      r.delta_star = parse_metric(f[7]);
      r.auroc = parse_metric(f[8]);
      r.aupr_in = parse_metric(f[9]);
      r.aupr_out = parse_metric(f[10]);
      r.n_correct = std::stol(f[11]);
      r.n_closed_err = std::stol(f[12]);
      r.n_open_err = std::stol(f[13]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::MalformedInput, "unparseable report row: " + line);
    }
  }
  return rows;
}

std::vector<ReportRow> load_report(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return parse_report(in);
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace obsmerge
