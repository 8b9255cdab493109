#include "qcs/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "qcs/error.hpp"

namespace qcs {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Minimal RFC 4180 field splitter: commas, double-quoted fields, doubled quotes.
std::optional<std::vector<std::string>> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(trim(field));
  return fields;
}

std::optional<bool> parse_flag(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  if (text == "1" || text == "true" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "no") return false;
  return std::nullopt;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
  return quoted + "\"";
}

const std::vector<std::string> kManifestHeader{"subject_id", "label", "symptomatic", "cough_path", "breath_path"};

}  // namespace

std::string to_string(Stratum s) {
  return std::string(to_string(s.label)) + (s.symptomatic ? "-symptomatic" : "-asymptomatic");
}

const SubjectRecord& Dataset::find(const std::string& subject_id) const {
  for (const auto& r : records)
    if (r.subject_id == subject_id) return r;
  fail(ErrorKind::NotFound, "subject " + subject_id);
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.subject_id);
  return out;
}

std::map<Stratum, std::vector<std::string>> Dataset::strata() const {
  std::map<Stratum, std::vector<std::string>> out;
  for (const auto& s : kStrata) out[s];
  for (const auto& r : records) out[Stratum{r.label, r.symptomatic}].push_back(r.subject_id);
  return out;
}

Dataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "manifest " + path.string());
  const auto base = path.parent_path();

  Dataset dataset;
  dataset.provenance = Provenance::Manifest;
  std::set<std::string> seen;
  std::string line;
  bool header_seen = false;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (!header_seen) {
      if (!fields || *fields != kManifestHeader)
        fail(ErrorKind::MalformedRow, "header must be subject_id,label,symptomatic,cough_path,breath_path");
      header_seen = true;
      continue;
    }
    ++row;
    const std::string where = "row " + std::to_string(row);
    if (!fields || fields->size() != kManifestHeader.size())
      fail(ErrorKind::MalformedRow, where + ": expected 5 fields");
    const auto& f = *fields;
    if (f[0].empty()) fail(ErrorKind::MalformedRow, where + ": empty subject_id");
    const auto label = parse_label(f[1]);
    if (!label) fail(ErrorKind::MalformedRow, where + ": unknown label '" + f[1] + "'");
    const auto symptomatic = parse_flag(f[2]);
    if (!symptomatic) fail(ErrorKind::MalformedRow, where + ": bad symptomatic flag '" + f[2] + "'");
    if (!seen.insert(f[0]).second) fail(ErrorKind::DuplicateId, where + ": " + f[0]);

    SubjectRecord rec{f[0], *label, *symptomatic, f[3], f[4]};
    for (auto* p : {&rec.cough_path, &rec.breath_path}) {
      if (p->empty()) fail(ErrorKind::MalformedRow, where + ": empty audio path");
      if (p->is_relative()) *p = base / *p;
      if (!std::filesystem::is_regular_file(*p)) fail(ErrorKind::MissingFile, where + ": " + p->string());
    }
    dataset.records.push_back(std::move(rec));
  }
  if (dataset.records.empty()) fail(ErrorKind::MalformedRow, "empty manifest");
  return dataset;
}

void write_manifest(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string());
  const auto base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    const auto r = p.lexically_relative(base);
    return (r.empty() || *r.begin() == "..") ? p.string() : r.generic_string();
  };
  out << "subject_id,label,symptomatic,cough_path,breath_path\n";
  for (const auto& r : dataset.records)
    out << csv_field(r.subject_id) << ',' << to_string(r.label) << ',' << (r.symptomatic ? 1 : 0) << ','
        << csv_field(rel(r.cough_path)) << ',' << csv_field(rel(r.breath_path)) << '\n';
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

std::vector<FoldSplit> stratified_kfold(const Dataset& dataset, int k, double validation_fraction,
                                        std::uint64_t seed) {
  require(k >= 2, "k must be at least 2");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, "validation_fraction must lie in [0, 1)");

  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) folds[static_cast<std::size_t>(i)].fold_index = i;

  std::mt19937_64 rng(seed);
  for (auto& [stratum, members] : dataset.strata()) {
    if (static_cast<int>(members.size()) < k)
      fail(ErrorKind::StratumTooSmall, to_string(stratum) + " has " + std::to_string(members.size()) +
                                           " subjects, need at least " + std::to_string(k));
    std::vector<std::string> order = members;
    std::sort(order.begin(), order.end());
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = static_cast<int>(order.size());

    for (int i = 0; i < k; ++i) {
      auto& fold = folds[static_cast<std::size_t>(i)];
      // Remainder walked share by share starting after the test share, so validation rotates.
      std::vector<std::string> remainder;
      for (int step = 1; step < k; ++step) {
        const int share = (i + step) % k;
        for (int p = share; p < n; p += k) remainder.push_back(order[static_cast<std::size_t>(p)]);
      }
      for (int p = i; p < n; p += k) fold.test_ids.push_back(order[static_cast<std::size_t>(p)]);
      const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * remainder.size()));
      fold.validation_ids.insert(fold.validation_ids.end(), remainder.begin(), remainder.begin() + n_val);
      fold.train_ids.insert(fold.train_ids.end(), remainder.begin() + n_val, remainder.end());
    }
  }
  for (auto& fold : folds) {
    std::sort(fold.train_ids.begin(), fold.train_ids.end());
    std::sort(fold.validation_ids.begin(), fold.validation_ids.end());
    std::sort(fold.test_ids.begin(), fold.test_ids.end());
  }
  return folds;
}

}  // namespace qcs
