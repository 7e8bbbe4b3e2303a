#include <gtest/gtest.h>

#include "capeval/dataset.hpp"
#include "test_util.hpp"

using namespace capeval;

namespace {

json thumb_row(const std::string& id, const std::string& origin, double total = 3.0) {
  return json{{"schema_version", 1},
              {"dataset", "thumb"},
              {"item_id", id},
              {"image", {{"id", "img" + id.substr(0, 1)}, {"path", "images/img01.png"}}},
              {"candidate", {{"id", id}, {"text", "caption " + id}, {"origin", origin}}},
              {"precision", 4},
              {"recall", 3.5},
              {"total", total}};
}

std::string write_rows(const testutil::TempDir& dir, const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  const auto path = dir.path() / "data.jsonl";
  testutil::spit(path, text);
  return path.string();
}

}  // namespace

TEST(Load, FlickrFixture) {
  const auto ds = load(DatasetKind::kFlickr8kExpert, testutil::fixture("flickr8k_small.jsonl"));
  ASSERT_EQ(ds.items.size(), 3u);
  EXPECT_EQ(ds.manifest.item_count, 3u);
  for (const auto& item : ds.items) {
    const auto& p = std::get<LikertJudged>(item.payload);
    EXPECT_EQ(p.scores.size(), 3u);
    ASSERT_TRUE(item.references.has_value());
    EXPECT_EQ(p.candidate.image_id, item.image.id);
  }
  EXPECT_EQ(std::get<LikertJudged>(ds.items[2].payload).scores, (std::vector<double>{3, 2, 4}));
  EXPECT_EQ(ds.items[1].image.media_type, MediaType::kJpeg);
}

TEST(Load, AllFixturesWithImageCheck) {
  const LoadOptions opts{CAPEVAL_FIXTURES, true};
  EXPECT_EQ(load(DatasetKind::kThumb, testutil::fixture("thumb_e2e.jsonl"), opts).items.size(), 8u);
  EXPECT_EQ(load(DatasetKind::kThumb, testutil::fixture("thumb_live.jsonl"), opts).items.size(), 10u);
  EXPECT_EQ(load(DatasetKind::kComposite, testutil::fixture("composite_small.jsonl"), opts).items.size(), 4u);
  const auto pascal = load(DatasetKind::kPascal50S, testutil::fixture("pascal_small.jsonl"), opts);
  ASSERT_EQ(pascal.items.size(), 16u);
  EXPECT_EQ(pascal.items[0].candidates().size(), 2u);
}

TEST(Load, MissingImageWhenChecked) {
  testutil::TempDir dir;
  auto row = thumb_row("a1", "human");
  row["image"]["path"] = "images/missing.png";
  const auto path = write_rows(dir, {row});
  EXPECT_NO_THROW(load(DatasetKind::kThumb, path));
  EXPECT_ERROR_KIND(load(DatasetKind::kThumb, path, LoadOptions{CAPEVAL_FIXTURES, true}), ErrorKind::kValidation);
}

TEST(Load, CompositeScoreOutOfRange) {
  testutil::TempDir dir;
  const json row = {{"schema_version", 1},
                    {"item_id", "c1"},
                    {"image", {{"id", "i"}, {"path", "i.jpg"}}},
                    {"candidate", {{"id", "c1"}, {"text", "a cat"}}},
                    {"scores", {6}}};
  EXPECT_ERROR_KIND(load(DatasetKind::kComposite, write_rows(dir, {row})), ErrorKind::kValidation);
}

TEST(Load, FlickrNeedsThreeScoresInRange) {
  json row = {{"schema_version", 1},
              {"item_id", "f1"},
              {"image", {{"id", "i"}, {"path", "i.jpg"}}},
              {"candidate", {{"id", "f1"}, {"text", "a cat"}}},
              {"scores", {1, 2}}};
  EXPECT_ERROR_KIND(parse_item(DatasetKind::kFlickr8kExpert, row), ErrorKind::kValidation);
  row["scores"] = {1, 2, 5};
  EXPECT_ERROR_KIND(parse_item(DatasetKind::kFlickr8kExpert, row), ErrorKind::kValidation);
  row["scores"] = {1, 2, 4};
  EXPECT_NO_THROW(parse_item(DatasetKind::kFlickr8kExpert, row));
}

TEST(Load, PascalUnknownCategory) {
  testutil::TempDir dir;
  const json row = {{"schema_version", 1},
                    {"item_id", "p1"},
                    {"image", {{"id", "i"}, {"path", "i.jpg"}}},
                    {"candidate_a", {{"id", "a"}, {"text", "a cat"}}},
                    {"candidate_b", {{"id", "b"}, {"text", "a dog"}}},
                    {"category", "XX"},
                    {"preferred", "A"}};
  EXPECT_ERROR_KIND(load(DatasetKind::kPascal50S, write_rows(dir, {row})), ErrorKind::kValidation);
}

TEST(Load, SchemaErrorsCarryLineNumber) {
  testutil::TempDir dir;
  auto bad = thumb_row("b2", "human");
  bad.erase("recall");
  const auto path = write_rows(dir, {thumb_row("a1", "human"), bad});
  try {
    load(DatasetKind::kThumb, path);
    FAIL() << "expected load error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLoad);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Load, RejectsWrongSchemaVersionAndJunk) {
  testutil::TempDir dir;
  auto row = thumb_row("a1", "human");
  row["schema_version"] = 2;
  EXPECT_ERROR_KIND(load(DatasetKind::kThumb, write_rows(dir, {row})), ErrorKind::kLoad);
  testutil::spit(dir.path() / "junk.jsonl", "{not json\n");
  EXPECT_ERROR_KIND(load(DatasetKind::kThumb, (dir.path() / "junk.jsonl").string()), ErrorKind::kLoad);
  EXPECT_ERROR_KIND(load(DatasetKind::kThumb, (dir.path() / "absent.jsonl").string()), ErrorKind::kLoad);
}

TEST(Load, DuplicateIdsRejected) {
  testutil::TempDir dir;
  EXPECT_ERROR_KIND(load(DatasetKind::kThumb, write_rows(dir, {thumb_row("a1", "human"), thumb_row("a1", "machine")})),
                    ErrorKind::kValidation);
}

TEST(Load, ThumbRanges) {
  EXPECT_ERROR_KIND(parse_item(DatasetKind::kThumb, thumb_row("a1", "human", 5.5)), ErrorKind::kValidation);
  EXPECT_NO_THROW(parse_item(DatasetKind::kThumb, thumb_row("a1", "human", 0.0)));
  auto row = thumb_row("a1", "human");
  row["precision"] = 0.5;
  EXPECT_ERROR_KIND(parse_item(DatasetKind::kThumb, row), ErrorKind::kValidation);
}

TEST(SplitThumb, FiveCandidatesOneHuman) {
  std::vector<JudgedItem> items;
  for (char img : {'1', '2'}) {
    for (int k = 0; k < 5; ++k) {
      items.push_back(
          parse_item(DatasetKind::kThumb, thumb_row(std::string(1, img) + std::to_string(k), k == 0 ? "human" : "machine")));
    }
  }
  const auto [with_h, without_h] = split_thumb_human(items);
  EXPECT_EQ(with_h.size(), 10u);
  EXPECT_EQ(without_h.size(), 8u);
  std::map<std::string, int> per_image;
  for (const auto& it : without_h) ++per_image[it.image.id];
  EXPECT_EQ(per_image, (std::map<std::string, int>{{"img1", 4}, {"img2", 4}}));
}

TEST(SplitThumb, AllMachineAndEmpty) {
  std::vector<JudgedItem> items{parse_item(DatasetKind::kThumb, thumb_row("1a", "machine")),
                                parse_item(DatasetKind::kThumb, thumb_row("1b", "machine"))};
  const auto [with_h, without_h] = split_thumb_human(items);
  EXPECT_EQ(with_h, items);
  EXPECT_EQ(without_h, items);
  const auto [e1, e2] = split_thumb_human({});
  EXPECT_TRUE(e1.empty());
  EXPECT_TRUE(e2.empty());
}

TEST(SplitThumb, UnknownOriginStrict) {
  std::vector<JudgedItem> items{parse_item(DatasetKind::kThumb, thumb_row("1a", "unknown"))};
  EXPECT_ERROR_KIND(split_thumb_human(items, true), ErrorKind::kValidation);
  EXPECT_EQ(split_thumb_human(items, false).second.size(), 1u);
}

TEST(SplitThumb, PartitionProperty) {
  const auto ds = load(DatasetKind::kThumb, testutil::fixture("thumb_e2e.jsonl"));
  const auto [with_h, without_h] = split_thumb_human(ds.items);
  std::size_t human = 0;
  for (const auto& it : ds.items) human += std::get<ThumbJudged>(it.payload).candidate.origin == Origin::kHuman;
  EXPECT_EQ(human + without_h.size(), ds.items.size());
  EXPECT_EQ(with_h.size(), ds.items.size());
}

TEST(WithoutHuman, DropsSingleHumanCandidates) {
  const auto ds = load(DatasetKind::kComposite, testutil::fixture("composite_small.jsonl"));
  const auto kept = without_human(ds.items);
  EXPECT_EQ(kept.size(), 3u);
  for (const auto& it : kept) EXPECT_NE(it.id, "c0");
  const auto pascal = load(DatasetKind::kPascal50S, testutil::fixture("pascal_small.jsonl"));
  EXPECT_EQ(without_human(pascal.items).size(), pascal.items.size());
}

TEST(RoundTrip, EveryFixtureItemSurvives) {
  const std::vector<std::pair<DatasetKind, std::string>> files{{DatasetKind::kThumb, "thumb_e2e.jsonl"},
                                                               {DatasetKind::kFlickr8kExpert, "flickr8k_small.jsonl"},
                                                               {DatasetKind::kComposite, "composite_small.jsonl"},
                                                               {DatasetKind::kPascal50S, "pascal_small.jsonl"}};
  for (const auto& [kind, file] : files) {
    const auto ds = load(kind, testutil::fixture(file));
    testutil::TempDir dir;
    std::vector<json> rows;
    for (const auto& it : ds.items) rows.push_back(json(it));
    const auto again = load(kind, write_rows(dir, rows));
    EXPECT_EQ(again.items, ds.items) << file;
  }
}

TEST(RoundTrip, PairVotes) {
  const json row = {{"schema_version", 1},
                    {"item_id", "p1"},
                    {"image", {{"id", "i"}, {"path", "i.jpg"}}},
                    {"candidate_a", {{"id", "a"}, {"text", "a cat"}, {"origin", "human"}}},
                    {"candidate_b", {{"id", "b"}, {"text", "a dog"}, {"origin", "machine"}, {"system", "s"}}},
                    {"category", "HM"},
                    {"preferred", "B"},
                    {"votes", {{"A", 2}, {"B", 3}}}};
  const auto item = parse_item(DatasetKind::kPascal50S, row);
  EXPECT_EQ(parse_item(DatasetKind::kPascal50S, json(item)), item);
  EXPECT_EQ(std::get<PairJudged>(item.payload).votes, (std::pair<int, int>{2, 3}));
}
