// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cosal/core/error.hpp"

namespace cosal::data {

enum class Split { kTrain, kTest };

inline const char* split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

inline Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw ConfigError(msg("unknown split '", name, "', expected train or test"));
}

/// One sample's file triple. depth is empty when the dataset ships no depth
/// map for this id (allowed at test time).
struct ManifestRecord {
  std::string id;
  std::filesystem::path rgb;
  std::filesystem::path depth;
  std::filesystem::path gt;

  bool has_depth() const { return !depth.empty(); }
};

struct DatasetManifest {
  std::filesystem::path root;
  Split split = Split::kTrain;
  bool invert_depth = false;
  std::vector<ManifestRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

namespace detail {

inline bool has_extension(const std::filesystem::path& p,
                          std::initializer_list<const char*> exts) {
  const std::string e = p.extension().string();
  return std::any_of(exts.begin(), exts.end(), [&](const char* x) { return e == x; });
}

/// stem -> path for every regular file in dir with one of the extensions.
inline std::map<std::string, std::filesystem::path> index_by_stem(
    const std::filesystem::path& dir, std::initializer_list<const char*> exts) {
  std::map<std::string, std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !has_extension(entry.path(), exts)) continue;
    const std::string stem = entry.path().stem().string();
    auto [it, inserted] = out.emplace(stem, entry.path());
    check<IngestionError>(inserted, "duplicate stem '", stem, "' in ", dir.string());
  }
  return out;
}

}  // namespace detail

/// Scans `<root>/<split>/{RGB,depth,GT}` and pairs files by stem. Every RGB
/// file must have a GT mask; depth maps are optional per record. Records are
/// sorted lexicographically by id so loading order is deterministic.
inline DatasetManifest scan_dataset(const std::filesystem::path& root, Split split,
                                    bool invert_depth = false) {
  const std::filesystem::path base = root / split_name(split);
  check<IngestionError>(std::filesystem::is_directory(base),
                        "dataset split directory not found: ", base.string());
  auto rgbs = detail::index_by_stem(base / "RGB", {".jpg", ".png"});
  auto depths = detail::index_by_stem(base / "depth", {".png"});
  auto gts = detail::index_by_stem(base / "GT", {".png"});
  check<IngestionError>(!rgbs.empty(), "no RGB images under ", (base / "RGB").string());

  DatasetManifest m;
  m.root = root;
  m.split = split;
  m.invert_depth = invert_depth;
  for (const auto& [stem, rgb_path] : rgbs) {
    auto gt_it = gts.find(stem);
    check<IngestionError>(gt_it != gts.end(),
                          "RGB image '", rgb_path.string(), "' has no matching GT mask");
    ManifestRecord rec;
    rec.id = stem;
    rec.rgb = rgb_path;
    rec.gt = gt_it->second;
    if (auto d_it = depths.find(stem); d_it != depths.end()) rec.depth = d_it->second;
    m.records.push_back(std::move(rec));
  }
  // std::map iteration already yields lexicographic stems; keep the sort as
  // the documented contract rather than a container detail.
  std::sort(m.records.begin(), m.records.end(),
            [](const ManifestRecord& a, const ManifestRecord& b) { return a.id < b.id; });
  return m;
}

/// Line-oriented cache: a header carrying split/invert_depth, then one
/// tab-separated `id rgb depth gt` line per record ("-" for missing depth).
inline void write_manifest_cache(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream os(path);
  check<IngestionError>(os.good(), "cannot open manifest cache for writing: ", path.string());
  os << "cosal-manifest v1 split=" << split_name(m.split)
     << " invert_depth=" << (m.invert_depth ? 1 : 0) << "\n";
  for (const auto& rec : m.records) {
    os << rec.id << '\t' << rec.rgb.string() << '\t'
       << (rec.has_depth() ? rec.depth.string() : "-") << '\t' << rec.gt.string() << '\n';
  }
  check<IngestionError>(os.good(), "failed writing manifest cache: ", path.string());
}

inline DatasetManifest read_manifest_cache(const std::filesystem::path& path) {
  std::ifstream is(path);
  check<IngestionError>(is.good(), "cannot open manifest cache: ", path.string());
  std::string header;
  std::getline(is, header);
  std::string tag, version, split_kv, invert_kv;
  {
    std::istringstream hs(header);
    hs >> tag >> version >> split_kv >> invert_kv;
  }
  check<IngestionError>(tag == "cosal-manifest" && version == "v1" &&
                            split_kv.rfind("split=", 0) == 0 &&
                            invert_kv.rfind("invert_depth=", 0) == 0,
                        "malformed manifest cache header in ", path.string());
  DatasetManifest m;
  m.split = split_from_name(split_kv.substr(6));
  m.invert_depth = invert_kv.substr(13) == "1";
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<std::string, 4> field;
    std::size_t start = 0;
    for (int i = 0; i < 4; ++i) {
      const std::size_t tab = line.find('\t', start);
      check<IngestionError>(i == 3 ? tab == std::string::npos : tab != std::string::npos,
                            "malformed manifest cache line: ", line);
      field[static_cast<std::size_t>(i)] = line.substr(start, tab - start);
      start = tab + 1;
    }
    ManifestRecord rec;
    rec.id = field[0];
    rec.rgb = field[1];
    if (field[2] != "-") rec.depth = field[2];
    rec.gt = field[3];
    m.records.push_back(std::move(rec));
  }
  return m;
}

}  // namespace cosal::data
