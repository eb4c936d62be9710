#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "cmdtriage/embed.hpp"
#include "test_support.hpp"

namespace cmdtriage::embed {
namespace {

using cmdtriage::testing::TempDir;

const std::string kPick = "robot.pick_and_place(<obj>, <place>)";

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

TEST(LoadTable, SmallFixture) {
  TempDir dir;
  write(dir / "t.vec", "2 3\nred 1 0 0\nbowl 0 1 0.5\n");
  const auto t = load_table(dir / "t.vec");
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dimension(), 3u);
  ASSERT_NE(t.find("bowl"), nullptr);
  EXPECT_DOUBLE_EQ((*t.find("bowl"))[2], 0.5);
  EXPECT_EQ(t.find("cup"), nullptr);
}

TEST(LoadTable, ShortfallNamed) {
  TempDir dir;
  write(dir / "t.vec", "5 1\na 1\nb 1\nc 1\nd 1\n");
  try {
    load_table(dir / "t.vec");
    FAIL();
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('5'), std::string::npos);
    EXPECT_NE(msg.find('4'), std::string::npos);
  }
}

TEST(LoadTable, ArityErrorAtLine) {
  TempDir dir;
  write(dir / "t.vec", "2 3\nred 1 0 0\nblue 1 0\n");
  try {
    load_table(dir / "t.vec");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadTable, OtherMalformedInputs) {
  TempDir dir;
  write(dir / "empty.vec", "");
  write(dir / "header.vec", "two three\n");
  write(dir / "num.vec", "1 2\nred 1 x\n");
  write(dir / "extra.vec", "1 1\na 1\nb 2\n");
  EXPECT_THROW(load_table(dir / "empty.vec"), ParseError);
  EXPECT_THROW(load_table(dir / "header.vec"), ParseError);
  EXPECT_THROW(load_table(dir / "num.vec"), ParseError);
  EXPECT_THROW(load_table(dir / "extra.vec"), ParseError);
  EXPECT_THROW(load_table(dir / "absent.vec"), Error);
}

TEST(LoadTable, DuplicateWordWarnsAndReplaces) {
  TempDir dir;
  write(dir / "t.vec", "2 1\na 1\na 2\n");
  const auto t = load_table(dir / "t.vec");
  EXPECT_EQ(t.size(), 1u);
  EXPECT_DOUBLE_EQ((*t.find("a"))[0], 2.0);
  EXPECT_EQ(t.warnings().size(), 1u);
}

TEST(SaveTable, RoundTripsExactly) {
  TempDir dir;
  EmbeddingTable t(3);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (const char* w : {"x", "y", "z"}) t.insert(w, {g(rng), g(rng), g(rng)});
  save_table(t, dir / "t.vec");
  const auto back = load_table(dir / "t.vec");
  ASSERT_EQ(back.size(), 3u);
  for (const auto& w : t.words()) EXPECT_EQ(*back.find(w), *t.find(w));
}

TEST(Keywords, PickAndPlaceSubtractsTemplate) {
  const auto k = extract_keywords("robot.pick_and_place(red block, blue bowl)", kPick);
  EXPECT_EQ(k.words, (std::vector<std::string>{"red", "block", "blue", "bowl"}));
}

TEST(Keywords, BareTemplateIsEmptyError) {
  EXPECT_THROW(extract_keywords("robot.pick_and_place(, )", kPick), EmptyKeywordsError);
}

TEST(Keywords, FreeTextFallsBackToContentWords) {
  const auto k = extract_keywords("I will grab the apple", kPick);
  EXPECT_EQ(k.words, (std::vector<std::string>{"grab", "apple"}));
}

TEST(Keywords, OnlyFirstLineAndStopwordsInSlots) {
  const auto k = extract_keywords("robot.pick_and_place(the red block, the bowl)\nrobot.done()", kPick);
  EXPECT_EQ(k.words, (std::vector<std::string>{"red", "block", "bowl"}));
}

TEST(Keywords, StopwordListHasFiftyEntries) {
  EXPECT_EQ(stopwords().size(), 50u);
  EXPECT_TRUE(is_stopword("the"));
  EXPECT_FALSE(is_stopword("block"));
}

TEST(SkillCalls, ParsesMultipleCallsInOrder) {
  const std::vector<std::string> tmpls{kPick, "robot.give(<object>, <person>)"};
  const auto calls = parse_skill_calls("robot.give(apple, Bob) robot.pick_and_place(cup,bowl)", tmpls);
  ASSERT_EQ(calls.size(), 2u);
  EXPECT_EQ(calls[0], (SkillCall{"robot.give", {"apple", "Bob"}}));
  EXPECT_EQ(calls[1], (SkillCall{"robot.pick_and_place", {"cup", "bowl"}}));
  EXPECT_EQ(render_skill_call(calls[1]), "robot.pick_and_place(cup, bowl)");
}

EmbeddingTable table2() {
  EmbeddingTable t(2);
  t.insert("u", {1.0, 2.0});
  t.insert("v", {3.0, -4.0});
  return t;
}

TEST(Embed, SingletonIsWordVector) {
  const auto t = table2();
  EXPECT_EQ(embed({{"u"}}, t).components, (std::vector<double>{1.0, 2.0}));
}

TEST(Embed, MeanOfTwo) {
  const auto t = table2();
  EXPECT_EQ(embed({{"u", "v"}}, t).components, (std::vector<double>{2.0, -1.0}));
}

TEST(Embed, OovZeroHalvesVector) {
  const auto t = table2();
  bool all_oov = true;
  EXPECT_EQ(embed({{"u", "zzz"}}, t, &all_oov).components, (std::vector<double>{0.5, 1.0}));
  EXPECT_FALSE(all_oov);
  EXPECT_EQ(embed({{"zzz"}}, t, &all_oov).components, (std::vector<double>{0.0, 0.0}));
  EXPECT_TRUE(all_oov);
}

TEST(Embed, OovHashIsDeterministicAndNonZero) {
  auto t = table2();
  t.set_oov_policy(OovPolicy::kHash);
  bool all_oov = true;
  const auto a = embed({{"zzz"}}, t, &all_oov);
  EXPECT_FALSE(all_oov);
  EXPECT_EQ(a, embed({{"zzz"}}, t));
  EXPECT_GT(std::abs(a.components[0]) + std::abs(a.components[1]), 0.0);
  EXPECT_NE(a, embed({{"yyy"}}, t));
}

TEST(Table, InsertRejectsWrongDimension) {
  EmbeddingTable t(2);
  EXPECT_THROW(t.insert("a", {1.0}), PreconditionError);
  EXPECT_THROW(EmbeddingTable(0), PreconditionError);
  EXPECT_TRUE(t.insert("a", {3.0, 4.0}));
  EXPECT_FALSE(t.insert("a", {0.0, 1.0}));
  EXPECT_DOUBLE_EQ(t.max_norm(), 5.0);
}

TEST(Distance, Basics) {
  const Vector a{{0, 0}}, b{{3, 4}};
  EXPECT_DOUBLE_EQ(distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(distance(a, b), 5.0);
  EXPECT_THROW(distance(a, Vector{{1, 2, 3}}), PreconditionError);
}

TEST(Distance, SymmetricOnRandomVectors) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    Vector a{std::vector<double>(7)}, b{std::vector<double>(7)};
    for (auto& x : a.components) x = g(rng);
    for (auto& x : b.components) x = g(rng);
    EXPECT_DOUBLE_EQ(distance(a, b), distance(b, a));
  }
}

TEST(Cosine, OrthogonalParallelAndZero) {
  EXPECT_DOUBLE_EQ(cosine_similarity({{1, 0}}, {{0, 2}}), 0.0);
  EXPECT_NEAR(cosine_similarity({{1, 1}}, {{2, 2}}), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(cosine_similarity({{0, 0}}, {{2, 2}}), 0.0);
}

TEST(Fixture, EmbeddingFileLoads) {
  const auto t = load_table(testing::data_path("embeddings/fixture.vec"));
  EXPECT_GT(t.size(), 10u);
  EXPECT_NE(t.find("block"), nullptr);
}

}  // namespace
}  // namespace cmdtriage::embed
