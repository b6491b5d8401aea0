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

#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "attrunlearn/data.hpp"
#include "support.hpp"

namespace au = attrunlearn;
using au::testing::synthetic_ratings;

namespace {

std::vector<au::RawInteraction> parse(const std::string& text, au::RatingsFormat fmt,
                                      const au::DelimitedLayout& layout = {}) {
  std::istringstream in(text);
  return au::parse_ratings(in, fmt, layout);
}

au::LabelMap parse_users(const std::string& text, au::AttributesFormat fmt) {
  std::istringstream in(text);
  return au::parse_attributes(in, fmt);
}

au::RawInteraction rec(std::string u, std::string i) { return {std::move(u), std::move(i), 1.0, 0}; }

// Reference filter: drop everything under the threshold, repeat until
// nothing changes.
std::vector<au::RawInteraction> filter_oracle(std::vector<au::RawInteraction> v, int min_count,
                                              int* passes = nullptr) {
  int n = 0;
  while (true) {
    ++n;
    std::map<std::string, int> uc, ic;
    for (const auto& r : v) {
      ++uc[r.user];
      ++ic[r.item];
    }
    std::vector<au::RawInteraction> kept;
    for (const auto& r : v) {
      if (uc[r.user] >= min_count && ic[r.item] >= min_count) kept.push_back(r);
    }
    if (kept.size() == v.size()) break;
    v = kept;
  }
  if (passes) *passes = n;
  return v;
}

std::string serialize(const au::InteractionDataset& ds) {
  std::ostringstream out;
  au::write_dataset(out, ds);
  return out.str();
}

}  // namespace

TEST(ParseRatings, Ml100kLine) {
  auto v = parse("196\t242\t3\t881250949\n", au::RatingsFormat::kMl100k);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (au::RawInteraction{"196", "242", 3.0, 881250949}));
}

TEST(ParseRatings, Ml1mLine) {
  auto v = parse("1::1193::5::978300760\r\n", au::RatingsFormat::kMl1m);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (au::RawInteraction{"1", "1193", 5.0, 978300760}));
}

TEST(ParseRatings, NonNumericRatingReportsLine) {
  try {
    parse("1::1::4::0\n1::1193::x::0\n", au::RatingsFormat::kMl1m);
    FAIL() << "expected a parse error";
  } catch (const au::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ParseRatings, WrongFieldCount) {
  EXPECT_THROW(parse("1\t2\t3\n", au::RatingsFormat::kMl100k), au::ParseError);
}

TEST(ParseRatings, EmptyInputIsAnError) {
  EXPECT_THROW(parse("", au::RatingsFormat::kMl100k), au::Error);
  EXPECT_THROW(parse("\n\n", au::RatingsFormat::kMl1m), au::Error);
}

TEST(ParseRatings, GenericLayoutWithHeader) {
  au::DelimitedLayout layout;
  layout.delimiter = ";";
  layout.user_column = 2;
  layout.item_column = 0;
  layout.rating_column = -1;
  layout.timestamp_column = -1;
  layout.header_lines = 1;
  auto v = parse("item;junk;user\nsong9;x;alice\n", au::RatingsFormat::kGeneric, layout);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (au::RawInteraction{"alice", "song9", 1.0, 0}));
}

TEST(ParseRatings, MissingFileNamesPath) {
  try {
    au::parse_ratings(std::filesystem::path("/nonexistent/u.data"), au::RatingsFormat::kMl100k);
    FAIL();
  } catch (const au::Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/u.data"), std::string::npos);
  }
}

TEST(ParseAttributes, Ml100kMaleIsZero) {
  auto m = parse_users("1|24|M|technician|85711\n", au::AttributesFormat::kMl100k);
  EXPECT_EQ(m, (au::LabelMap{{"1", 0}}));
}

TEST(ParseAttributes, Ml1mFemaleIsOne) {
  auto m = parse_users("1::F::1::10::48067\n", au::AttributesFormat::kMl1m);
  EXPECT_EQ(m, (au::LabelMap{{"1", 1}}));
}

TEST(ParseAttributes, UnknownTokenRejected) {
  EXPECT_THROW(parse_users("1|24|X|technician|85711\n", au::AttributesFormat::kMl100k),
               au::ParseError);
}

TEST(ParseAttributes, DuplicateIdRejected) {
  EXPECT_THROW(parse_users("1|24|M|a|1\n1|30|F|b|2\n", au::AttributesFormat::kMl100k),
               au::ParseError);
}

TEST(Filter, AlreadySatisfiedIsUnchanged) {
  std::vector<au::RawInteraction> v;
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 5; ++i) v.push_back(rec("u" + std::to_string(u), "i" + std::to_string(i)));
  }
  EXPECT_EQ(au::filter_min_interactions(v, 5), v);
}

TEST(Filter, CascadeNeedsTwoPasses) {
  // A 5x5 block of users u0..u4 and items i0..i4. Item x has four raters
  // (u0, u1, u2, w), so it goes first; that leaves w with four ratings and
  // w goes on the second pass.
  std::vector<au::RawInteraction> v;
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 5; ++i) v.push_back(rec("u" + std::to_string(u), "i" + std::to_string(i)));
  }
  for (int u = 0; u < 3; ++u) v.push_back(rec("u" + std::to_string(u), "x"));
  v.push_back(rec("w", "x"));
  for (int i = 0; i < 4; ++i) v.push_back(rec("w", "i" + std::to_string(i)));

  int passes = 0;
  auto expected = filter_oracle(v, 5, &passes);
  EXPECT_EQ(passes, 3);  // two removing passes plus the confirming one
  auto got = au::filter_min_interactions(v, 5);
  EXPECT_EQ(got, expected);
  for (const auto& r : got) {
    EXPECT_NE(r.user, "w");
    EXPECT_NE(r.item, "x");
  }
  auto single = au::filter_min_interactions(v, 5, au::FilterMode::kSinglePass);
  EXPECT_GT(single.size(), got.size());
}

TEST(Filter, MinCountOneIsIdentity) {
  auto s = synthetic_ratings(30, 20, 4, 7);
  EXPECT_EQ(au::filter_min_interactions(s.raw, 1), s.raw);
}

TEST(Filter, FixpointIsIdempotentOnRandomData) {
  // Skewed draws: low-index users and items are dense, the tail is sparse,
  // so the filter has real work to do.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    au::Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<au::RawInteraction> raw;
    for (int k = 0; k < 600; ++k) {
      const int u = static_cast<int>(60 * unit(rng) * unit(rng));
      const int i = static_cast<int>(40 * unit(rng) * unit(rng));
      raw.push_back(rec("u" + std::to_string(u), "i" + std::to_string(i)));
    }
    auto once = au::filter_min_interactions(raw, 5);
    EXPECT_LT(once.size(), raw.size());
    EXPECT_EQ(au::filter_min_interactions(once, 5), once);
    EXPECT_EQ(once, filter_oracle(raw, 5));
  }
}

TEST(Filter, EmptyResultIsAnError) {
  std::vector<au::RawInteraction> v = {rec("a", "x"), rec("b", "y")};
  EXPECT_THROW(au::filter_min_interactions(v, 5), au::Error);
  EXPECT_THROW(au::filter_min_interactions(v, 0), au::Error);
}

TEST(Split, RoundingGoldenTable) {
  // train = ceil(0.8 n); val = floor(0.1 n) from the rest; test = remainder.
  const std::map<int, std::tuple<int, int, int>> golden = {
      {3, {3, 0, 0}}, {4, {4, 0, 0}}, {5, {4, 0, 1}}, {6, {5, 0, 1}},
      {7, {6, 0, 1}}, {8, {7, 0, 1}}, {9, {8, 0, 1}}, {10, {8, 1, 1}},
  };
  for (const auto& [n, want] : golden) {
    const auto c = au::split_counts(n, {});
    EXPECT_EQ(std::make_tuple(c.train, c.val, c.test), want) << "n=" << n;
  }
}

TEST(Split, TenInteractionsGiveEightOneOne) {
  std::vector<au::RawInteraction> v;
  for (int i = 0; i < 10; ++i) v.push_back(rec("u", "i" + std::to_string(i)));
  auto ds = au::split_dataset(v, {}, 3);
  EXPECT_EQ(ds.count(au::Split::kTrain), 8u);
  EXPECT_EQ(ds.count(au::Split::kVal), 1u);
  EXPECT_EQ(ds.count(au::Split::kTest), 1u);
}

TEST(Split, SameSeedIsByteIdentical) {
  auto s = synthetic_ratings(50, 40, 8, 11);
  EXPECT_EQ(serialize(au::split_dataset(s.raw, {}, 42)), serialize(au::split_dataset(s.raw, {}, 42)));
  EXPECT_NE(serialize(au::split_dataset(s.raw, {}, 42)), serialize(au::split_dataset(s.raw, {}, 43)));
}

TEST(Split, PartitionAndIdDensity) {
  auto s = synthetic_ratings(50, 40, 8, 5);
  auto raw = au::filter_min_interactions(s.raw, 3);
  auto ds = au::split_dataset(raw, {}, 42);
  ASSERT_EQ(ds.interactions.size(), raw.size());
  EXPECT_EQ(ds.count(au::Split::kTrain) + ds.count(au::Split::kVal) + ds.count(au::Split::kTest),
            raw.size());

  std::multiset<std::pair<std::string, std::string>> in, out;
  for (const auto& r : raw) in.emplace(r.user, r.item);
  au::Index max_user = -1, max_item = -1;
  for (const auto& r : ds.interactions) {
    out.emplace(ds.user_ids[static_cast<std::size_t>(r.user)],
                ds.item_ids[static_cast<std::size_t>(r.item)]);
    max_user = std::max(max_user, r.user);
    max_item = std::max(max_item, r.item);
  }
  EXPECT_EQ(in, out);
  EXPECT_EQ(max_user, ds.n_users - 1);
  EXPECT_EQ(max_item, ds.n_items - 1);

  std::map<au::Index, std::array<int, 3>> per_user;
  for (const auto& r : ds.interactions) ++per_user[r.user][static_cast<int>(r.split)];
  for (const auto& [u, c] : per_user) {
    const auto want = au::split_counts(c[0] + c[1] + c[2], {});
    EXPECT_EQ(c[0], want.train);
    EXPECT_EQ(c[1], want.val);
    EXPECT_EQ(c[2], want.test);
  }
}

TEST(Split, TooFewInteractionsNamesUser) {
  std::vector<au::RawInteraction> v = {rec("sparse-user", "a"), rec("sparse-user", "b")};
  for (int i = 0; i < 5; ++i) v.push_back(rec("fine", "i" + std::to_string(i)));
  try {
    au::split_dataset(v, {}, 0);
    FAIL();
  } catch (const au::Error& e) {
    EXPECT_NE(std::string(e.what()).find("sparse-user"), std::string::npos);
  }
}

TEST(Split, BadRatiosRejected) {
  auto s = synthetic_ratings(5, 10, 4, 1);
  EXPECT_THROW(au::split_dataset(s.raw, {0.5, 0.1, 0.1}, 0), au::Error);
  EXPECT_THROW(au::split_dataset(s.raw, {0.0, 0.5, 0.5}, 0), au::Error);
}

TEST(AttributeTable, BothRetained) {
  std::vector<au::RawInteraction> v;
  for (int i = 0; i < 3; ++i) {
    v.push_back(rec("u1", "i" + std::to_string(i)));
    v.push_back(rec("u2", "i" + std::to_string(i)));
  }
  auto ds = au::split_dataset(v, {}, 0);
  auto t = au::build_attribute_table(ds, {{"u1", 0}, {"u2", 1}});
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.group(0), (std::vector<au::Index>{0}));
  EXPECT_EQ(t.group(1), (std::vector<au::Index>{1}));
}

TEST(AttributeTable, SingleGroupAllowedAtLoad) {
  std::vector<au::RawInteraction> v;
  for (int i = 0; i < 3; ++i) {
    v.push_back(rec("a", "i" + std::to_string(i)));
    v.push_back(rec("b", "i" + std::to_string(i)));
  }
  auto ds = au::split_dataset(v, {}, 0);
  auto t = au::build_attribute_table(ds, {{"a", 1}, {"b", 1}});
  EXPECT_FALSE(t.has_both_groups());
  EXPECT_THROW(t.require_both_groups("unlearn"), au::Error);
}

TEST(AttributeTable, FilteredUserLabelIgnoredMissingLabelRejected) {
  std::vector<au::RawInteraction> v;
  for (int i = 0; i < 3; ++i) v.push_back(rec("kept", "i" + std::to_string(i)));
  auto ds = au::split_dataset(v, {}, 0);
  auto t = au::build_attribute_table(ds, {{"kept", 1}, {"filtered-away", 0}});
  EXPECT_EQ(t.size(), 1u);
  EXPECT_THROW(au::build_attribute_table(ds, {{"other", 0}}), au::Error);
}

TEST(Serialization, DatasetRoundTrip) {
  auto s = synthetic_ratings(40, 30, 6, 2);
  auto ds = au::split_dataset(s.raw, {}, 9);
  std::istringstream in(serialize(ds));
  auto back = au::read_dataset(in);
  EXPECT_EQ(back.n_users, ds.n_users);
  EXPECT_EQ(back.n_items, ds.n_items);
  EXPECT_EQ(back.interactions, ds.interactions);
  EXPECT_EQ(back.user_ids, ds.user_ids);
  EXPECT_EQ(back.item_ids, ds.item_ids);
  EXPECT_EQ(back.seed, ds.seed);
  EXPECT_EQ(serialize(back), serialize(ds));
}

TEST(Serialization, AttributesRoundTrip) {
  auto t = au::AttributeTable::from_labels({0, 1, 1, 0, 1});
  std::ostringstream out;
  au::write_attributes(out, t);
  std::istringstream in(out.str());
  EXPECT_EQ(au::read_attributes(in).labels(), t.labels());
}

TEST(Serialization, TruncatedDatasetRejected) {
  auto s = synthetic_ratings(10, 12, 4, 2);
  std::string text = serialize(au::split_dataset(s.raw, {}, 1));
  text.resize(text.size() / 2);
  std::istringstream in(text);
  EXPECT_THROW(au::read_dataset(in), au::Error);
}
