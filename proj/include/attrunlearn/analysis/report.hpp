// Copyright 2026 The attrunlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Writing analysis artifacts: CSV tables plus a JSON manifest listing every
// file with its size and FNV-1a content hash.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "attrunlearn/analysis/histogram.hpp"
#include "attrunlearn/analysis/pca.hpp"
#include "attrunlearn/analysis/sweep.hpp"
#include "attrunlearn/common.hpp"
#include "attrunlearn/data.hpp"
#include "json.hpp"

namespace attrunlearn::analysis {

struct CsvTable {
  std::string file;  // relative to the output directory
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render() const {
    std::ostringstream out;
    auto line = [&out](const std::vector<std::string>& fields) {
      for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) {
      if (r.size() != header.size()) {
        throw ShapeError(str_cat(file, ": row has ", r.size(), " fields, header has ",
                                 header.size()));
      }
      line(r);
    }
    return out.str();
  }
};

// Replaces `path` with `content` via a temporary sibling and a rename, so
// readers never see a half-written file.
inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(str_cat("cannot create directory ", path.parent_path().string(), ": ", ec.message()));
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(str_cat("cannot open ", tmp.string(), " for writing"));
    out << content;
    out.flush();
    if (!out) throw Error(str_cat("write failed: ", tmp.string()));
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(str_cat("cannot rename ", tmp.string(), " to ", path.string(), ": ", ec.message()));
}

inline CsvTable histogram_table(const HistogramSet& hist, std::string file = "histograms.csv") {
  CsvTable t{std::move(file), {"dim", "bin_lo", "bin_hi", "count_g0", "count_g1"}, {}};
  for (std::size_t k = 0; k < hist.dims.size(); ++k) {
    const auto& h = hist.dims[k];
    for (std::size_t b = 0; b < h.bins(); ++b) {
      t.rows.push_back({std::to_string(k), format_real(h.edges[b]), format_real(h.edges[b + 1]),
                        std::to_string(h.counts[0][b]), std::to_string(h.counts[1][b])});
    }
  }
  return t;
}

inline CsvTable projection_table(const Projection& proj, const AttributeTable& labels,
                                 std::string file = "projection.csv") {
  if (static_cast<std::size_t>(proj.coords.rows()) != labels.size() || proj.coords.cols() < 2) {
    throw ShapeError("projection_table: need N x 2 coordinates matching the labels");
  }
  CsvTable t{std::move(file), {"user", "x", "y", "label"}, {}};
  for (Eigen::Index u = 0; u < proj.coords.rows(); ++u) {
    t.rows.push_back({std::to_string(u), format_real(proj.coords(u, 0)),
                      format_real(proj.coords(u, 1)),
                      std::to_string(labels.label(static_cast<Index>(u)))});
  }
  return t;
}

inline CsvTable sweep_table(const std::vector<SweepRow>& rows, std::string file = "alpha_sweep.csv") {
  CsvTable t{std::move(file), {"alpha", "auc_mlp", "auc_gbt", "ndcg10", "hr10", "frob_dist"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({format_real(r.alpha), format_real(r.auc_mlp), format_real(r.auc_gbt),
                      format_real(r.ndcg10), format_real(r.hr10), format_real(r.frob_dist)});
  }
  return t;
}

struct ReportMeta {
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, double> wall_seconds;
};

struct FileEntry {
  std::string path;
  std::uint64_t bytes = 0;
  std::string fnv1a64;
};

struct ReportManifest {
  std::vector<FileEntry> files;
  std::filesystem::path manifest_path;
};

// Writes every table and then manifest.json. Rewriting the same tables
// produces byte-identical CSVs; the manifest also carries wall times and
// therefore may differ between runs.
inline ReportManifest write_report(const std::vector<CsvTable>& tables,
                                   const std::filesystem::path& out_dir,
                                   const ReportMeta& meta = {}) {
  std::set<std::string> seen;
  ReportManifest manifest;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& t : tables) {
    if (t.file.empty() || t.file == "manifest.json") {
      throw Error(str_cat("write_report: invalid artifact name '", t.file, "'"));
    }
    if (!seen.insert(t.file).second) throw Error(str_cat("write_report: duplicate artifact ", t.file));
    const std::string content = t.render();
    write_text_file(out_dir / t.file, content);
    FileEntry e{t.file, content.size(), hex64(fnv1a64(content))};
    files.push_back({{"path", e.path}, {"bytes", e.bytes}, {"fnv1a64", e.fnv1a64}});
    manifest.files.push_back(std::move(e));
  }
  nlohmann::ordered_json doc;
  doc["config_hash"] = meta.config_hash;
  doc["seeds"] = meta.seeds;
  doc["wall_seconds"] = meta.wall_seconds;
  doc["files"] = std::move(files);
  manifest.manifest_path = out_dir / "manifest.json";
  write_text_file(manifest.manifest_path, doc.dump(2) + "\n");
  return manifest;
}

}  // namespace attrunlearn::analysis
