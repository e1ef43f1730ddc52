// Copyright 2026 The msmcr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "msmcr/selection.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace msmcr {

namespace {

double Norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

void Normalize(std::vector<double>& v, const std::string& what) {
  const double n = Norm(v);
  if (n <= 0.0 || !std::isfinite(n)) throw Error("zero-norm " + what);
  for (double& x : v) x /= n;
}

}  // namespace

std::vector<EmbeddingRecord> ReadEmbeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file: " + path);
  std::vector<EmbeddingRecord> records;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    EmbeddingRecord rec;
    size_t start = 0;
    std::vector<std::string> fields;
    for (int i = 0; i < 3; ++i) {
      const size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        throw Error("embedding line " + std::to_string(lineno) +
                    ": expected 4 tab-separated fields");
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    rec.utterance_id = fields[0];
    rec.speaker_id = fields[1];
    rec.language = fields[2];
    if (!seen.insert(rec.utterance_id).second) {
      throw Error("duplicate utterance id in embedding file: " +
                  rec.utterance_id);
    }

    std::stringstream values(line.substr(start));
    std::string tok;
    while (std::getline(values, tok, ',')) {
      size_t used = 0;
      double v;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw Error("embedding line " + std::to_string(lineno) +
                    ": bad float value '" + tok + "'");
      }
      if (used != tok.size() || !std::isfinite(v)) {
        throw Error("embedding line " + std::to_string(lineno) +
                    ": bad float value '" + tok + "'");
      }
      rec.embedding.push_back(v);
    }
    if (rec.embedding.empty()) {
      throw Error("embedding line " + std::to_string(lineno) + ": empty vector");
    }
    if (dim < 0) {
      dim = static_cast<int>(rec.embedding.size());
    } else if (static_cast<int>(rec.embedding.size()) != dim) {
      throw Error("ragged embedding dimensions at line " +
                  std::to_string(lineno));
    }
    Normalize(rec.embedding, "embedding for " + rec.utterance_id);
    records.push_back(std::move(rec));
  }
  return records;
}

void WriteEmbeddings(const std::vector<EmbeddingRecord>& records,
                     const std::string& path) {
  std::ostringstream out;
  out.precision(17);
  for (const EmbeddingRecord& r : records) {
    out << r.utterance_id << '\t' << r.speaker_id << '\t' << r.language << '\t';
    for (size_t i = 0; i < r.embedding.size(); ++i) {
      if (i) out << ',';
      out << r.embedding[i];
    }
    out << '\n';
  }
  AtomicWriteFile(path, out.str());
}

std::vector<double> TargetCentroid(
    const std::vector<EmbeddingRecord>& records) {
  if (records.empty()) throw Error("no target embeddings");
  std::vector<double> mean(records[0].embedding.size(), 0.0);
  for (const EmbeddingRecord& r : records) {
    if (r.embedding.size() != mean.size()) {
      throw Error("embedding dimension mismatch");
    }
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += r.embedding[i];
  }
  for (double& x : mean) x /= static_cast<double>(records.size());
  Normalize(mean, "mean");
  return mean;
}

SelectionReport RankCandidates(const std::vector<EmbeddingRecord>& candidates,
                               std::span<const double> centroid) {
  SelectionReport report;
  report.ranked.reserve(candidates.size());
  for (const EmbeddingRecord& r : candidates) {
    if (r.embedding.size() != centroid.size()) {
      throw Error("embedding dimension mismatch for " + r.utterance_id);
    }
    double dot = 0.0;
    for (size_t i = 0; i < centroid.size(); ++i) {
      dot += r.embedding[i] * centroid[i];
    }
    report.ranked.push_back({r.utterance_id, dot});
  }
  std::sort(report.ranked.begin(), report.ranked.end(),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.cosine_similarity != b.cosine_similarity) {
                return a.cosine_similarity > b.cosine_similarity;
              }
              return a.utterance_id < b.utterance_id;
            });
  return report;
}

TopKSelection SelectTopK(const SelectionReport& report, int k) {
  if (k < 0 || k > static_cast<int>(report.ranked.size())) {
    throw Error("k out of range: " + std::to_string(k));
  }
  TopKSelection out;
  if (k == 0) return out;
  double acc = 0.0;
  out.ids.reserve(k);
  for (int i = 0; i < k; ++i) {
    out.ids.push_back(report.ranked[i].utterance_id);
    acc += 1.0 - report.ranked[i].cosine_similarity;
  }
  out.acd = acc / k;
  return out;
}

Manifest EmitAugmentedManifest(const Manifest& target,
                               const Manifest& candidates,
                               const std::vector<std::string>& selected_ids) {
  std::unordered_set<std::string> wanted(selected_ids.begin(),
                                         selected_ids.end());
  if (wanted.size() != selected_ids.size()) {
    throw Error("duplicate id in selection");
  }
  std::unordered_map<std::string, const ManifestRow*> candidate_by_id;
  for (const ManifestRow& r : candidates.rows) {
    candidate_by_id[r.utterance_id] = &r;
  }
  for (const std::string& id : selected_ids) {
    if (candidate_by_id.find(id) == candidate_by_id.end()) {
      throw Error("selected id not in candidate manifest: " + id);
    }
  }

  Manifest out;
  out.base_dir = target.base_dir;
  std::set<std::string> seen;
  for (const ManifestRow& r : target.rows) {
    if (!seen.insert(r.utterance_id).second) {
      throw Error("duplicate utterance id: " + r.utterance_id);
    }
    ManifestRow copy = r;
    copy.path = target.ResolvePath(r);
    out.rows.push_back(std::move(copy));
  }
  // Selected candidates keep candidate-manifest order.
  for (const ManifestRow& r : candidates.rows) {
    if (wanted.find(r.utterance_id) == wanted.end()) continue;
    if (!seen.insert(r.utterance_id).second) {
      throw Error("duplicate utterance id: " + r.utterance_id);
    }
    ManifestRow copy = r;
    copy.path = candidates.ResolvePath(r);
    out.rows.push_back(std::move(copy));
  }
  return out;
}

}  // namespace msmcr
