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

// Interaction and attribute loading for MovieLens-style exports.
//
// Ratings are treated as implicit feedback: every record is a positive
// interaction regardless of its rating value. The binary attribute is the
// user's gender, encoded as kMale = 0 and kFemale = 1.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "attrunlearn/common.hpp"

namespace attrunlearn {

using Index = std::int32_t;
using Label = std::uint8_t;

inline constexpr Label kMale = 0;
inline constexpr Label kFemale = 1;

enum class RatingsFormat { kMl100k, kMl1m, kGeneric };
enum class AttributesFormat { kMl100k, kMl1m };

// Column layout for the generic loader. A negative column index means the
// field is absent: rating defaults to 1, timestamp to 0.
struct DelimitedLayout {
  std::string delimiter = ",";
  int user_column = 0;
  int item_column = 1;
  int rating_column = 2;
  int timestamp_column = 3;
  int header_lines = 0;
};

struct RawInteraction {
  std::string user;
  std::string item;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  bool operator==(const RawInteraction&) const = default;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(str_cat("line ", line, ": ", what)), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  std::string_view delim) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(delim, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + delim.size();
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(str_cat("cannot open ", path.string()));
  return in;
}

}  // namespace detail

inline std::vector<RawInteraction> parse_ratings(
    std::istream& in, RatingsFormat format, const DelimitedLayout& layout = {}) {
  std::string_view delim;
  DelimitedLayout cols;
  switch (format) {
    case RatingsFormat::kMl100k:
      delim = "\t";
      break;
    case RatingsFormat::kMl1m:
      delim = "::";
      break;
    case RatingsFormat::kGeneric:
      cols = layout;
      delim = cols.delimiter;
      if (delim.empty()) throw Error("generic layout: empty delimiter");
      break;
  }
  const int needed = std::max({cols.user_column, cols.item_column,
                               cols.rating_column, cols.timestamp_column}) + 1;

  std::vector<RawInteraction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (static_cast<int>(line_no) <= cols.header_lines) continue;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    auto fields = detail::split_fields(view, delim);
    if (format != RatingsFormat::kGeneric && fields.size() != 4) {
      throw ParseError(str_cat("expected 4 fields, got ", fields.size()), line_no);
    }
    if (static_cast<int>(fields.size()) < needed) {
      throw ParseError(str_cat("expected at least ", needed, " fields"), line_no);
    }
    RawInteraction rec;
    rec.user = std::string(detail::trim(fields[cols.user_column]));
    rec.item = std::string(detail::trim(fields[cols.item_column]));
    if (rec.user.empty() || rec.item.empty()) {
      throw ParseError("empty user or item id", line_no);
    }
    rec.rating = 1.0;
    if (cols.rating_column >= 0 &&
        (!detail::parse_number(fields[cols.rating_column], rec.rating) ||
         !std::isfinite(rec.rating))) {
      throw ParseError(str_cat("bad rating '", fields[cols.rating_column], "'"),
                       line_no);
    }
    if (cols.timestamp_column >= 0) {
      std::string_view ts = fields[cols.timestamp_column];
      double as_real = 0.0;
      if (!detail::parse_number(ts, rec.timestamp)) {
        // Some exports write timestamps as reals ("881250949.0").
        if (!detail::parse_number(ts, as_real) || !std::isfinite(as_real)) {
          throw ParseError(str_cat("bad timestamp '", ts, "'"), line_no);
        }
        rec.timestamp = static_cast<std::int64_t>(as_real);
      }
      if (rec.timestamp < 0) throw ParseError("negative timestamp", line_no);
    }
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw Error("ratings input contains no records");
  return out;
}

inline std::vector<RawInteraction> parse_ratings(
    const std::filesystem::path& path, RatingsFormat format,
    const DelimitedLayout& layout = {}) {
  auto in = detail::open_for_read(path);
  try {
    return parse_ratings(in, format, layout);
  } catch (const ParseError& e) {
    throw ParseError(str_cat(path.string(), ": ", e.what()), e.line());
  }
}

using LabelMap = std::map<std::string, Label>;

inline LabelMap parse_attributes(std::istream& in, AttributesFormat format) {
  const std::string_view delim = format == AttributesFormat::kMl100k ? "|" : "::";
  const std::size_t gender_field = format == AttributesFormat::kMl100k ? 2 : 1;
  LabelMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    auto fields = detail::split_fields(view, delim);
    if (fields.size() <= gender_field) {
      throw ParseError("missing gender field", line_no);
    }
    std::string_view token = detail::trim(fields[gender_field]);
    Label label;
    if (token == "M") {
      label = kMale;
    } else if (token == "F") {
      label = kFemale;
    } else {
      throw ParseError(str_cat("unknown gender token '", token, "'"), line_no);
    }
    std::string id(detail::trim(fields[0]));
    if (!out.emplace(id, label).second) {
      throw ParseError(str_cat("duplicate user id '", id, "'"), line_no);
    }
  }
  if (out.empty()) throw Error("attribute input contains no records");
  return out;
}

inline LabelMap parse_attributes(const std::filesystem::path& path,
                                 AttributesFormat format) {
  auto in = detail::open_for_read(path);
  return parse_attributes(in, format);
}

enum class FilterMode { kFixpoint, kSinglePass };

// Drops users and items with fewer than `min_count` interactions. In
// kFixpoint mode the pass repeats until nothing changes, so the result
// satisfies the threshold for every remaining user and item.
inline std::vector<RawInteraction> filter_min_interactions(
    std::vector<RawInteraction> interactions, int min_count = 5,
    FilterMode mode = FilterMode::kFixpoint) {
  if (min_count < 1) throw Error("min_count must be >= 1");
  while (true) {
    std::unordered_map<std::string, int> user_count, item_count;
    for (const auto& r : interactions) {
      ++user_count[r.user];
      ++item_count[r.item];
    }
    std::vector<RawInteraction> kept;
    kept.reserve(interactions.size());
    for (auto& r : interactions) {
      if (user_count[r.user] >= min_count && item_count[r.item] >= min_count) {
        kept.push_back(std::move(r));
      }
    }
    const bool changed = kept.size() != interactions.size();
    interactions = std::move(kept);
    if (interactions.empty()) {
      throw Error(str_cat("no interactions left after filtering with min_count=",
                          min_count));
    }
    if (!changed || mode == FilterMode::kSinglePass) return interactions;
  }
}

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;
};

// Per-user split sizes: train takes ceil(train * n), validation takes
// floor(val * n) of what is left, test gets the remainder.
inline SplitCounts split_counts(int n, const SplitRatios& ratios) {
  constexpr double kEps = 1e-9;
  SplitCounts c;
  c.train = std::min(n, static_cast<int>(std::ceil(ratios.train * n - kEps)));
  c.val = std::min(n - c.train, static_cast<int>(std::floor(ratios.val * n + kEps)));
  c.test = n - c.train - c.val;
  return c;
}

struct Interaction {
  Index user = 0;
  Index item = 0;
  double rating = 0.0;
  Split split = Split::kTrain;

  bool operator==(const Interaction&) const = default;
};

struct InteractionDataset {
  Index n_users = 0;
  Index n_items = 0;
  std::vector<Interaction> interactions;
  std::vector<std::string> user_ids;  // internal index -> external id
  std::vector<std::string> item_ids;
  SplitRatios ratios;
  std::uint64_t seed = 0;

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(std::count_if(
        interactions.begin(), interactions.end(),
        [s](const Interaction& r) { return r.split == s; }));
  }
};

inline constexpr int kMinInteractionsForSplit = 3;

inline InteractionDataset split_dataset(const std::vector<RawInteraction>& raw,
                                        const SplitRatios& ratios,
                                        std::uint64_t seed) {
  if (ratios.train <= 0.0 || ratios.val < 0.0 || ratios.test < 0.0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw Error("split ratios must be non-negative, train > 0, and sum to 1");
  }
  InteractionDataset ds;
  ds.ratios = ratios;
  ds.seed = seed;

  std::unordered_map<std::string, Index> user_index, item_index;
  auto intern = [](std::unordered_map<std::string, Index>& map,
                   std::vector<std::string>& ids, const std::string& key) {
    auto [it, inserted] = map.emplace(key, static_cast<Index>(ids.size()));
    if (inserted) ids.push_back(key);
    return it->second;
  };
  ds.interactions.reserve(raw.size());
  for (const auto& r : raw) {
    Interaction rec;
    rec.user = intern(user_index, ds.user_ids, r.user);
    rec.item = intern(item_index, ds.item_ids, r.item);
    rec.rating = r.rating;
    ds.interactions.push_back(rec);
  }
  ds.n_users = static_cast<Index>(ds.user_ids.size());
  ds.n_items = static_cast<Index>(ds.item_ids.size());

  std::vector<std::vector<std::size_t>> by_user(static_cast<std::size_t>(ds.n_users));
  for (std::size_t i = 0; i < ds.interactions.size(); ++i) {
    by_user[static_cast<std::size_t>(ds.interactions[i].user)].push_back(i);
  }
  Rng rng(seed);
  for (Index u = 0; u < ds.n_users; ++u) {
    auto& rows = by_user[static_cast<std::size_t>(u)];
    const int n = static_cast<int>(rows.size());
    if (n < kMinInteractionsForSplit) {
      throw Error(str_cat("user '", ds.user_ids[static_cast<std::size_t>(u)],
                          "' has ", n, " interactions; the split needs at least ",
                          kMinInteractionsForSplit));
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    const SplitCounts c = split_counts(n, ratios);
    for (int k = 0; k < n; ++k) {
      Split s = k < c.train ? Split::kTrain
                            : (k < c.train + c.val ? Split::kVal : Split::kTest);
      ds.interactions[rows[static_cast<std::size_t>(k)]].split = s;
    }
  }
  return ds;
}

// Sorted, de-duplicated item lists for every user restricted to one split.
inline std::vector<std::vector<Index>> items_by_user(const InteractionDataset& ds,
                                                     Split split) {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(ds.n_users));
  for (const auto& r : ds.interactions) {
    if (r.split == split) out[static_cast<std::size_t>(r.user)].push_back(r.item);
  }
  for (auto& items : out) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  return out;
}

class AttributeTable {
 public:
  AttributeTable() = default;

  static AttributeTable from_labels(std::vector<Label> labels) {
    AttributeTable t;
    for (std::size_t u = 0; u < labels.size(); ++u) {
      if (labels[u] > 1) throw Error(str_cat("label of user ", u, " is not binary"));
      t.groups_[labels[u]].push_back(static_cast<Index>(u));
    }
    t.labels_ = std::move(labels);
    return t;
  }

  std::size_t size() const { return labels_.size(); }
  Label label(Index user) const { return labels_[static_cast<std::size_t>(user)]; }
  const std::vector<Label>& labels() const { return labels_; }
  const std::vector<Index>& group(Label g) const { return groups_[g]; }

  bool has_both_groups() const { return !groups_[0].empty() && !groups_[1].empty(); }

  void require_both_groups(std::string_view context) const {
    if (!has_both_groups()) {
      throw Error(str_cat(context, ": both attribute groups must be non-empty (sizes ",
                          groups_[0].size(), ", ", groups_[1].size(), ")"));
    }
  }

 private:
  std::vector<Label> labels_;
  std::vector<Index> groups_[2];
};

// Labels for users that were filtered out are ignored.
inline AttributeTable build_attribute_table(const InteractionDataset& ds,
                                            const LabelMap& raw_labels) {
  std::vector<Label> labels(static_cast<std::size_t>(ds.n_users));
  for (Index u = 0; u < ds.n_users; ++u) {
    const auto& ext = ds.user_ids[static_cast<std::size_t>(u)];
    auto it = raw_labels.find(ext);
    if (it == raw_labels.end()) throw Error(str_cat("no attribute label for user '", ext, "'"));
    labels[static_cast<std::size_t>(u)] = it->second;
  }
  return AttributeTable::from_labels(std::move(labels));
}

// ---------------------------------------------------------------------------
// Text serialization. Tab separated, one record per line:
//
//   #attrunlearn-dataset<TAB>1
//   n_users<TAB>N / n_items<TAB>M / n_interactions<TAB>R / seed<TAB>S
//   ratios<TAB>train<TAB>val<TAB>test
//   U<TAB>internal<TAB>external        (N lines, internal order)
//   I<TAB>internal<TAB>external        (M lines)
//   R<TAB>user<TAB>item<TAB>rating<TAB>split   (split is t, v or s)
//
// Reals are written with 17 significant digits so reading restores them
// exactly.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDatasetMagic = "#attrunlearn-dataset";
inline constexpr std::string_view kAttributesMagic = "#attrunlearn-attributes";

inline char split_code(Split s) {
  switch (s) {
    case Split::kTrain: return 't';
    case Split::kVal: return 'v';
    case Split::kTest: return 's';
  }
  return '?';
}

inline void write_dataset(std::ostream& out, const InteractionDataset& ds) {
  out.precision(17);
  out << kDatasetMagic << "\t1\n"
      << "n_users\t" << ds.n_users << "\n"
      << "n_items\t" << ds.n_items << "\n"
      << "n_interactions\t" << ds.interactions.size() << "\n"
      << "seed\t" << ds.seed << "\n"
      << "ratios\t" << ds.ratios.train << "\t" << ds.ratios.val << "\t"
      << ds.ratios.test << "\n";
  for (std::size_t u = 0; u < ds.user_ids.size(); ++u) out << "U\t" << u << "\t" << ds.user_ids[u] << "\n";
  for (std::size_t i = 0; i < ds.item_ids.size(); ++i) out << "I\t" << i << "\t" << ds.item_ids[i] << "\n";
  for (const auto& r : ds.interactions) {
    out << "R\t" << r.user << "\t" << r.item << "\t" << r.rating << "\t"
        << split_code(r.split) << "\n";
  }
}

namespace detail {

inline std::vector<std::string_view> expect_record(const std::string& line,
                                                   std::size_t line_no,
                                                   std::string_view key,
                                                   std::size_t fields) {
  auto f = split_fields(line, "\t");
  if (f.empty() || f[0] != key || f.size() != fields) {
    throw ParseError(str_cat("expected '", key, "' record with ", fields, " fields"),
                     line_no);
  }
  return f;
}

template <typename T>
T field_number(std::string_view s, std::size_t line_no) {
  T v{};
  if (!parse_number(s, v)) throw ParseError(str_cat("bad number '", s, "'"), line_no);
  return v;
}

}  // namespace detail

inline InteractionDataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> const std::string& {
    if (!std::getline(in, line)) throw ParseError("unexpected end of dataset file", line_no + 1);
    ++line_no;
    return line;
  };
  using detail::expect_record;
  using detail::field_number;
  auto head = expect_record(next(), line_no, kDatasetMagic, 2);
  if (head[1] != "1") throw ParseError(str_cat("unsupported version ", head[1]), line_no);

  InteractionDataset ds;
  ds.n_users = field_number<Index>(expect_record(next(), line_no, "n_users", 2)[1], line_no);
  ds.n_items = field_number<Index>(expect_record(next(), line_no, "n_items", 2)[1], line_no);
  const auto n_rec = field_number<std::size_t>(
      expect_record(next(), line_no, "n_interactions", 2)[1], line_no);
  ds.seed = field_number<std::uint64_t>(expect_record(next(), line_no, "seed", 2)[1], line_no);
  auto rf = expect_record(next(), line_no, "ratios", 4);
  ds.ratios = {field_number<double>(rf[1], line_no), field_number<double>(rf[2], line_no),
               field_number<double>(rf[3], line_no)};

  auto read_ids = [&](std::string_view key, Index n, std::vector<std::string>& ids) {
    ids.resize(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
      auto f = expect_record(next(), line_no, key, 3);
      if (field_number<Index>(f[1], line_no) != k) throw ParseError("ids out of order", line_no);
      ids[static_cast<std::size_t>(k)] = std::string(f[2]);
    }
  };
  read_ids("U", ds.n_users, ds.user_ids);
  read_ids("I", ds.n_items, ds.item_ids);
  ds.interactions.reserve(n_rec);
  for (std::size_t k = 0; k < n_rec; ++k) {
    auto f = expect_record(next(), line_no, "R", 5);
    Interaction r;
    r.user = field_number<Index>(f[1], line_no);
    r.item = field_number<Index>(f[2], line_no);
    r.rating = field_number<double>(f[3], line_no);
    if (r.user < 0 || r.user >= ds.n_users || r.item < 0 || r.item >= ds.n_items) {
      throw ParseError("index out of range", line_no);
    }
    if (f[4] == "t") {
      r.split = Split::kTrain;
    } else if (f[4] == "v") {
      r.split = Split::kVal;
    } else if (f[4] == "s") {
      r.split = Split::kTest;
    } else {
      throw ParseError(str_cat("bad split code '", f[4], "'"), line_no);
    }
    ds.interactions.push_back(r);
  }
  return ds;
}

inline void write_attributes(std::ostream& out, const AttributeTable& table) {
  out << kAttributesMagic << "\t1\n" << "n_users\t" << table.size() << "\n";
  for (std::size_t u = 0; u < table.size(); ++u) {
    out << u << "\t" << static_cast<int>(table.labels()[u]) << "\n";
  }
}

inline AttributeTable read_attributes(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> const std::string& {
    if (!std::getline(in, line)) throw ParseError("unexpected end of attribute file", line_no + 1);
    ++line_no;
    return line;
  };
  auto head = detail::expect_record(next(), line_no, kAttributesMagic, 2);
  if (head[1] != "1") throw ParseError(str_cat("unsupported version ", head[1]), line_no);
  const auto n = detail::field_number<std::size_t>(
      detail::expect_record(next(), line_no, "n_users", 2)[1], line_no);
  std::vector<Label> labels(n);
  for (std::size_t u = 0; u < n; ++u) {
    auto f = detail::split_fields(next(), "\t");
    if (f.size() != 2 || detail::field_number<std::size_t>(f[0], line_no) != u) {
      throw ParseError("malformed attribute record", line_no);
    }
    const int v = detail::field_number<int>(f[1], line_no);
    if (v != 0 && v != 1) throw ParseError("label must be 0 or 1", line_no);
    labels[u] = static_cast<Label>(v);
  }
  return AttributeTable::from_labels(std::move(labels));
}

}  // namespace attrunlearn
