#include <algorithm>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "cmdtriage/error.hpp"
#include "cmdtriage/evalkit.hpp"
#include "test_support.hpp"

namespace cmdtriage::evalkit {
namespace {

using cmdtriage::testing::TempDir;

std::string row(const std::string& goal, const std::string& label, const std::string& robot = "cook",
                const std::string& scene_id = "kitchen") {
  return R"({"goal_text": ")" + goal + R"(", "robot_type": ")" + robot +
         R"j(", "scene": {"objects": ["pan"], "action_set": ["robot.heat(<object>)"]}, "label": ")j" + label +
         R"(", "scene_id": ")" + scene_id + "\"}\n";
}

std::filesystem::path six_rows(const TempDir& dir) {
  const auto p = dir / "six.ndjson";
  std::ofstream out(p);
  out << row("a", "certain", "cook", "s1") << row("b", "certain", "clean", "s2") << "\n"
      << row("c", "ambiguous", "cook", "s1") << row("d", "ambiguous", "massage", "s3")
      << row("e", "infeasible", "other", "s2") << row("f", "infeasible", "cook", "s1");
  return p;
}

// (wins + 0.5 ties) / (n+ n-)
double pair_oracle(const std::vector<double>& s, const std::vector<bool>& pos) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!pos[i] || pos[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return wins / pairs;
}

TEST(LoadSagc, CountsPerClass) {
  TempDir dir;
  const auto d = load_sagc(six_rows(dir));
  EXPECT_EQ(d.records.size(), 6u);
  EXPECT_EQ(d.counts, (std::array<std::size_t, 3>{2, 2, 2}));
  EXPECT_EQ(d.records[0].scene.robot_type, "cook");
}

TEST(LoadSagc, BadLabelNamesRow) {
  TempDir dir;
  const auto p = dir / "bad.ndjson";
  std::ofstream(p) << row("a", "certain") << row("b", "maybe");
  try {
    load_sagc(p);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("maybe"), std::string::npos);
  }
}

TEST(LoadSagc, EmptyFile) {
  TempDir dir;
  std::ofstream(dir / "e.ndjson").close();
  const auto d = load_sagc(dir / "e.ndjson");
  EXPECT_TRUE(d.records.empty());
  EXPECT_EQ(d.counts, (std::array<std::size_t, 3>{0, 0, 0}));
}

TEST(LoadSagc, SchemaViolations) {
  TempDir dir;
  std::ofstream(dir / "r.ndjson") << row("a", "certain", "pilot");
  std::ofstream(dir / "j.ndjson") << "{oops\n";
  std::ofstream(dir / "g.ndjson") << row("", "certain");
  EXPECT_THROW(load_sagc(dir / "r.ndjson"), ParseError);
  EXPECT_THROW(load_sagc(dir / "j.ndjson"), ParseError);
  EXPECT_THROW(load_sagc(dir / "g.ndjson"), ParseError);
  EXPECT_THROW(load_sagc(dir / "none.ndjson"), Error);
}

TEST(LoadSagc, FixtureDatasets) {
  const auto full = load_sagc(testing::data_path("sagc/sagc_fixture.ndjson"));
  EXPECT_EQ(full.counts, (std::array<std::size_t, 3>{20, 20, 20}));
  const auto sep = load_sagc(testing::data_path("sagc/separation20.ndjson"));
  EXPECT_EQ(sep.records.size(), 20u);
  EXPECT_EQ(load_sagc(testing::data_path("sagc/three_way18.ndjson")).counts,
            (std::array<std::size_t, 3>{6, 6, 6}));
}

TEST(Auroc, PerfectSeparation) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  EXPECT_DOUBLE_EQ(auroc(s, {false, false, true, true}), 1.0);
}

TEST(Auroc, AllEqualIsHalf) {
  const std::vector<double> s(6, 0.3);
  EXPECT_DOUBLE_EQ(auroc(s, {true, false, true, false, false, true}), 0.5);
}

TEST(Auroc, MatchesPairCountingOracle) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> level(0, 5);  // coarse levels force ties
  std::bernoulli_distribution coin(0.4);
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t n = 2 + static_cast<std::size_t>(draw % 40);
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) * 0.1;
      pos[i] = coin(rng);
    }
    pos[0] = true;
    pos[1] = false;
    EXPECT_NEAR(auroc(s, pos), pair_oracle(s, pos), 1e-12);
    std::vector<double> neg(s);
    for (auto& x : neg) x = -x;
    EXPECT_NEAR(auroc(neg, pos), 1.0 - auroc(s, pos), 1e-12);
  }
}

TEST(Auroc, NeedsBothClasses) {
  const std::vector<double> s{0.1, 0.2};
  EXPECT_THROW(auroc(s, {true, true}), PreconditionError);
  EXPECT_THROW(auroc(s, {true}), PreconditionError);
}

TEST(Accuracy3, AllCorrectIsDiagonal) {
  const std::vector<GoldLabel> g{GoldLabel::kCertain, GoldLabel::kAmbiguous, GoldLabel::kInfeasible,
                                 GoldLabel::kAmbiguous};
  const auto a = accuracy3(g, g);
  EXPECT_DOUBLE_EQ(a.accuracy, 1.0);
  EXPECT_EQ(a.confusion[1][1], 2u);
  EXPECT_EQ(a.confusion[0][1], 0u);
}

TEST(Accuracy3, ConstantPredictionOnBalancedGold) {
  const std::vector<GoldLabel> g{GoldLabel::kCertain, GoldLabel::kAmbiguous, GoldLabel::kInfeasible,
                                 GoldLabel::kCertain, GoldLabel::kAmbiguous, GoldLabel::kInfeasible};
  const std::vector<GoldLabel> p(6, GoldLabel::kAmbiguous);
  const auto a = accuracy3(p, g);
  EXPECT_DOUBLE_EQ(a.accuracy, 1.0 / 3.0);
  EXPECT_EQ(a.confusion[0][1], 2u);
  EXPECT_EQ(a.confusion[2][1], 2u);
}

TEST(Accuracy3, EmptyIsError) {
  const std::vector<GoldLabel> none;
  EXPECT_THROW(accuracy3(none, none), PreconditionError);
}

TEST(Timing, Arithmetic) {
  std::vector<bool> amb(12, false), q(12, false);
  for (int i = 0; i < 6; ++i) amb[i] = true;
  for (int i = 0; i < 4; ++i) q[i] = true;
  q[6] = true;
  EXPECT_NEAR(timing_metric(q, amb), 4.0 / 6.0 - 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(timing_metric(q, amb), 0.5, 1e-12);
  EXPECT_NEAR(timing_metric(q, amb, TimingVariant::kQuestionShare), (4.0 - 1.0) / 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(timing_metric(std::vector<bool>(12, true), amb), 0.0);
  EXPECT_DOUBLE_EQ(timing_metric(amb, amb), 1.0);
  EXPECT_THROW(timing_metric({true}, {true}), PreconditionError);
}

TEST(SuccessGap, Points) {
  const std::vector<bool> before{true, false, false, false, false}, after{true, true, true, false, false};
  EXPECT_NEAR(success_gap(before, after), 40.0, 1e-12);
  EXPECT_DOUBLE_EQ(success_gap(after, after), 0.0);
  EXPECT_DOUBLE_EQ(success_gap(std::vector<bool>(4, false), std::vector<bool>(4, true)), 100.0);
  EXPECT_THROW(success_gap({}, {}), PreconditionError);
  EXPECT_THROW(success_gap({true}, {true, false}), PreconditionError);
}

TEST(Stratify, ByLabelPartitions) {
  TempDir dir;
  const auto d = load_sagc(six_rows(dir));
  const auto groups = stratify(d.records, StratifyKey::kLabel);
  ASSERT_EQ(groups.size(), 3u);
  for (const auto& [k, v] : groups) EXPECT_EQ(v.size(), 2u) << k;
}

TEST(Stratify, ConcatenationIsPermutation) {
  TempDir dir;
  const auto d = load_sagc(six_rows(dir));
  for (auto key : {StratifyKey::kRobotType, StratifyKey::kLabel, StratifyKey::kSceneId}) {
    std::vector<std::string> goals;
    for (const auto& [k, v] : stratify(d.records, key))
      for (const auto& r : v) goals.push_back(r.goal_text);
    std::sort(goals.begin(), goals.end());
    EXPECT_EQ(goals, (std::vector<std::string>{"a", "b", "c", "d", "e", "f"}));
  }
}

TEST(Stratify, UnknownKey) {
  EXPECT_EQ(stratify_key_from_string("label"), StratifyKey::kLabel);
  EXPECT_THROW(stratify_key_from_string("colour"), PreconditionError);
}

TEST(Report, JsonShape) {
  MetricsReport r;
  r.mode = "uq";
  r.auroc = {{"context_sampling", true, 0.9, ""}, {"predictive_entropy", false, 0.0, "no probs"}};
  r.n = {1, 2, 3};
  const auto j = to_json(r);
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["auroc"][1]["auroc"], nullptr);
  EXPECT_EQ(j["auroc"][1]["supported"], false);
  EXPECT_EQ(j["n"]["infeasible"], 3);
  EXPECT_NE(to_text_table(r).find("unsupported"), std::string::npos);
}

TEST(Labels, Mapping) {
  EXPECT_EQ(from_triage(triage::Label::kClear), GoldLabel::kCertain);
  EXPECT_EQ(from_triage(triage::Label::kAmbiguous), GoldLabel::kAmbiguous);
  EXPECT_EQ(from_triage(triage::Label::kInfeasible), GoldLabel::kInfeasible);
  EXPECT_EQ(gold_label_from_string("ambiguous"), GoldLabel::kAmbiguous);
}

}  // namespace
}  // namespace cmdtriage::evalkit
