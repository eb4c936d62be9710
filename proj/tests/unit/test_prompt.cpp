#include <algorithm>

#include <gtest/gtest.h>

#include "cmdtriage/error.hpp"
#include "cmdtriage/prompt.hpp"
#include "test_support.hpp"

namespace cmdtriage::prompt {
namespace {

std::size_t count_occurrences(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<ContextExemplar> four_contexts() {
  return {{"objects = [cup]", "bring the cup", "robot.pick_and_place(cup, user)"},
          {"objects = [pan]", "heat the pan", "robot.heat(pan)"},
          {"objects = [mop]", "mop the floor", "robot.mop(floor)"},
          {"objects = [egg]", "crack the egg", "robot.crack(egg)"}};
}

SceneDescription kitchen() {
  SceneDescription s;
  s.robot_type = "cooking";
  s.objects = {{"pan", {{"color", "black"}}}, {"egg", {}}, {"cup", {{"color", "red"}}}};
  s.people = {{"Alice", {}}};
  s.action_set = {"robot.heat(<object>)", "robot.pick_and_place(<object>, <place>)"};
  return s;
}

TEST(SampleContexts, FullDrawIsPermutation) {
  const auto c = four_contexts();
  auto idx = sample_context_indices(c.size(), c.size(), 5);
  std::sort(idx.begin(), idx.end());
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(sample_contexts(c, 4, 5).size(), 4u);
}

TEST(SampleContexts, SeedDeterminism) {
  EXPECT_EQ(sample_context_indices(4, 2, 7), sample_context_indices(4, 2, 7));
}

TEST(SampleContexts, KOutOfRangeIsPrecondition) {
  EXPECT_THROW(sample_context_indices(4, 0, 1), PreconditionError);
  EXPECT_THROW(sample_context_indices(4, 5, 1), PreconditionError);
}

TEST(SampleContexts, UniformSelectionFrequency) {
  constexpr int kSeeds = 10000;
  std::array<int, 4> hits{};
  for (int s = 0; s < kSeeds; ++s) {
    const auto idx = sample_context_indices(4, 2, static_cast<std::uint64_t>(s));
    ASSERT_EQ(idx.size(), 2u);
    ASSERT_NE(idx[0], idx[1]);
    for (auto i : idx) ++hits[i];
  }
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / kSeeds, 0.5, 0.02);
}

TEST(ShuffleScene, SingletonUnchanged) {
  SceneDescription s;
  s.robot_type = "x";
  s.objects = {{"a", {}}};
  s.action_set = {"robot.do()"};
  for (std::uint64_t seed : {0, 1, 99}) EXPECT_EQ(shuffle_scene(s, seed), s);
}

TEST(ShuffleScene, PreservesMultisetAndIsDeterministic) {
  SceneDescription s;
  s.robot_type = "x";
  s.objects = {{"a", {}}, {"b", {}}, {"c", {}}};
  s.action_set = {"robot.do()"};
  for (std::uint64_t seed : {1, 2}) {
    auto names = shuffle_scene(s, seed).objects;
    std::vector<std::string> got;
    for (const auto& e : names) got.push_back(e.name);
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, (std::vector<std::string>{"a", "b", "c"}));
  }
  EXPECT_EQ(shuffle_scene(s, 3), shuffle_scene(s, 3));
  EXPECT_EQ(shuffle_scene(s, 3).action_set, s.action_set);
}

TEST(ShuffleScene, PermutationMatchesShuffle) {
  const auto s = kitchen();
  const auto perm = scene_permutation(s, 17);
  const auto out = shuffle_scene(s, 17);
  ASSERT_EQ(perm.size(), s.objects.size() + s.people.size());
  for (std::size_t i = 0; i < s.objects.size(); ++i) EXPECT_EQ(out.objects[i], s.objects[perm[i]]);
}

TEST(Wrap, PrefixOnly) {
  EXPECT_EQ(wrap_uncertainty_aware({"make coffee", {}}), "Considering ambiguity of a goal, make coffee");
}

TEST(Wrap, AugmentedFact) {
  EXPECT_EQ(wrap_uncertainty_aware({"make coffee", {"the cup is red"}}),
            "Considering ambiguity of a goal, make coffee, given that: the cup is red");
  EXPECT_EQ(goal_line({"make coffee", {"a", "b"}}), "make coffee, given that: a; b");
}

TEST(Wrap, NoTrailingSeparatorWithoutFacts) {
  const auto w = wrap_uncertainty_aware({"make coffee.", {}});
  EXPECT_EQ(w.find("given that"), std::string::npos);
  EXPECT_NE(w.back(), ',');
  EXPECT_NE(w.back(), '.');
}

TEST(NormalizeGoal, TrimsAndStripsTerminalPunctuation) {
  EXPECT_EQ(normalize_goal("  go for a walk?  "), "go for a walk");
  EXPECT_EQ(normalize_goal("make coffee."), "make coffee");
  EXPECT_EQ(normalize_goal("plain"), "plain");
}

TEST(ActionPrompt, PureAndStructured) {
  const auto c = four_contexts();
  const std::vector<ContextExemplar> ctx{c[0], c[1]};
  const GoalCommand g{"fry the egg", {}};
  const auto a = assemble_action_prompt(g, kitchen(), ctx, true);
  const auto b = assemble_action_prompt(g, kitchen(), ctx, true);
  EXPECT_EQ(a.text, b.text);
  EXPECT_NE(a.text.find("goal: Considering ambiguity of a goal, fry the egg\n"), std::string::npos);
  EXPECT_TRUE(a.text.ends_with("robot:"));
  EXPECT_EQ(a.provenance.kind, PromptKind::kAction);
  EXPECT_TRUE(a.provenance.uncertainty_aware);
  EXPECT_LT(a.text.find(c[0].goal_text), a.text.find(c[1].goal_text));
  EXPECT_LT(a.text.find(c[1].goal_text), a.text.find("fry the egg\nrobot:"));
}

TEST(ActionPrompt, FlagOffLacksPrefix) {
  const auto c = four_contexts();
  const auto p = assemble_action_prompt({"heat the pan", {}}, kitchen(), std::span(c).first(1), false);
  EXPECT_EQ(p.text.find(kUncertaintyPrefix), std::string::npos);
  EXPECT_NE(p.text.find("goal: heat the pan\n"), std::string::npos);
}

TEST(ActionPrompt, ContextOrderMatters) {
  const auto c = four_contexts();
  const std::vector<ContextExemplar> x{c[2], c[0]}, y{c[0], c[2]};
  const auto px = assemble_action_prompt({"g", {}}, kitchen(), x, true);
  const auto py = assemble_action_prompt({"g", {}}, kitchen(), y, true);
  EXPECT_NE(px.text, py.text);
  EXPECT_EQ(count_occurrences(px.text, "\nrobot: "), count_occurrences(py.text, "\nrobot: "));
  EXPECT_EQ(count_occurrences(px.text, "scene: "), 3u);
}

TEST(ActionPrompt, NoContextsIsPrecondition) {
  EXPECT_THROW(assemble_action_prompt({"g", {}}, kitchen(), {}, true), PreconditionError);
}

TEST(FeasibilityPrompt, CookingRobotSuffix) {
  const auto p = assemble_feasibility_prompt({"go for a walk", {}}, kitchen());
  EXPECT_TRUE(p.text.ends_with("I am a cooking robot. Considering the action set, can I go for a walk?"));
  EXPECT_EQ(p.provenance.kind, PromptKind::kFeasibility);
}

TEST(FeasibilityPrompt, ActionSetBeforeQuestion) {
  const auto p = assemble_feasibility_prompt({"go for a walk", {}}, kitchen());
  EXPECT_LT(p.text.find("robot.heat(<object>)"), p.text.find("I am a cooking robot"));
}

TEST(FeasibilityPrompt, NoDoubledQuestionMark) {
  const auto p = assemble_feasibility_prompt({"can you go for a walk?", {}}, kitchen());
  EXPECT_EQ(p.text.find("??"), std::string::npos);
  EXPECT_TRUE(p.text.ends_with("can you go for a walk?"));
}

TEST(ReasonPrompt, CueSuffixExactlyOnce) {
  const auto p = assemble_reason_prompt("goal: x\nrobot: y");
  EXPECT_TRUE(p.text.ends_with(kReasonCue));
  EXPECT_EQ(count_occurrences(p.text, kReasonCue), 1u);
  EXPECT_THROW(assemble_reason_prompt(""), PreconditionError);
}

TEST(QuestionPrompt, CueSuffixAndPurity) {
  const auto p = assemble_question_prompt("t");
  EXPECT_TRUE(p.text.ends_with("What can I ask the user? Please "));
  EXPECT_EQ(p.text, assemble_question_prompt("t").text);
  EXPECT_THROW(assemble_question_prompt(""), PreconditionError);
}

TEST(Scene, ValidateRejectsEmptyActionsAndDuplicates) {
  auto s = kitchen();
  EXPECT_NO_THROW(s.validate());
  s.objects.push_back({"egg", {}});
  EXPECT_THROW(s.validate(), PreconditionError);
  s = kitchen();
  s.action_set.clear();
  EXPECT_THROW(s.validate(), PreconditionError);
}

TEST(Scene, JsonRoundTripAndBareNames) {
  const auto s = kitchen();
  const nlohmann::json j = s;
  EXPECT_EQ(j.get<SceneDescription>(), s);
  const auto bare = nlohmann::json::parse(
      R"j({"robot_type": "r", "objects": ["apple", {"name": "cup", "color": "red"}], "action_set": ["robot.x()"]})j")
                        .get<SceneDescription>();
  ASSERT_EQ(bare.objects.size(), 2u);
  EXPECT_EQ(bare.objects[0].name, "apple");
  EXPECT_EQ(bare.objects[1].attributes.at("color"), "red");
}

TEST(Scene, FixtureFilesLoad) {
  for (const char* name : {"kitchen", "livingroom", "spa", "service", "tabletop"}) {
    const auto s = load_scene(testing::data_path(std::string("scenes/") + name + ".json"));
    EXPECT_NO_THROW(s.validate()) << name;
  }
  EXPECT_THROW(load_scene(testing::data_path("scenes/nope.json")), Error);
  EXPECT_GE(load_context_set(testing::data_path("contexts/contexts.json")).size(), 3u);
}

}  // namespace
}  // namespace cmdtriage::prompt
