// One PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cmdtriage/app.hpp"
#include "cmdtriage/evalkit.hpp"
#include "cmdtriage/service.hpp"
#include "cmdtriage/tabletop.hpp"
#include "cmdtriage/uq.hpp"
#include "test_support.hpp"

namespace {

using namespace cmdtriage;
using cmdtriage::testing::data_path;
using nlohmann::json;

struct Failure {
  std::string what;
};

void require(bool cond, const std::string& what) {
  if (!cond) throw Failure{what};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void context_sampling_matches_brute_force() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> h_dist(2, 10), d_dist(1, 16);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int set_i = 0; set_i < 200; ++set_i) {
    const auto h = h_dist(rng), dim = d_dist(rng);
    uq::SampleSet set;
    for (std::size_t i = 0; i < h; ++i) {
      embed::Vector v{std::vector<double>(dim)};
      for (auto& x : v.components) x = g(rng);
      set.samples.push_back({"s", {}, "oracle", 0});
      set.embeddings.push_back(std::move(v));
      set.degenerate.push_back(0);
    }
    double ordered = 0.0;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < h; ++j) {
        if (i == j) continue;
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = set.embeddings[i].components[d] - set.embeddings[j].components[d];
          sq += diff * diff;
        }
        ordered += std::sqrt(sq);
      }
    const double expect = ordered / static_cast<double>(h * (h - 1));
    const double got = uq::context_sampling_uncertainty(set).value;
    require(std::abs(got - expect) <= 1e-9, "set " + std::to_string(set_i) + ": " + std::to_string(got) +
                                                " vs " + std::to_string(expect));
  }
  require(seconds_since(t0) < 1.0, "took " + std::to_string(seconds_since(t0)) + " s");
}

void entropy_closed_forms() {
  for (std::size_t k : {2, 4, 8})
    for (std::size_t t : {1, 2, 5}) {
      gateway::GenerationSample s;
      s.token_probs = gateway::TokenProbs{};
      for (std::size_t i = 0; i < t; ++i) {
        gateway::TokenPosition p{"w0", {}};
        for (std::size_t j = 0; j < k; ++j) p.top.push_back({"w" + std::to_string(j), 1.0 / static_cast<double>(k)});
        s.token_probs->push_back(p);
      }
      const double ln_k = std::log(static_cast<double>(k));
      const auto tag = "K=" + std::to_string(k) + " T=" + std::to_string(t);
      require(std::abs(uq::predictive_entropy(s).value - static_cast<double>(t) * ln_k) <= 1e-9, tag + " total");
      require(std::abs(uq::normalized_entropy(s).value - ln_k) <= 1e-9, tag + " normalized");
    }
}

void auroc_is_mann_whitney() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> level(0, 9);
  std::bernoulli_distribution coin(0.5);
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t n = 2 + static_cast<std::size_t>(draw % 50);
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) / 10.0;  // coarse grid: ties
      pos[i] = coin(rng);
    }
    pos[0] = true;
    pos[n - 1] = false;
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (pos[i] && !pos[j]) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    const double a = evalkit::auroc(s, pos);
    require(std::abs(a - wins / pairs) <= 1e-12, "draw " + std::to_string(draw));
    std::vector<double> neg(s);
    for (auto& x : neg) x = -x;
    require(std::abs(evalkit::auroc(neg, pos) - (1.0 - a)) <= 1e-12, "reversal at draw " + std::to_string(draw));
  }
}

void mock_end_to_end_separation() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto config = app::load_engine_config(data_path("configs/household.json"));
  const auto resources = app::make_resources(config);
  const auto dataset = evalkit::load_sagc(data_path("sagc/separation20.ndjson"));
  require(dataset.records.size() == 20, "fixture has " + std::to_string(dataset.records.size()) + " rows");

  const auto scores = evalkit::score_records(dataset.records, config.triage, resources);
  std::vector<bool> uncertain, certain;
  std::vector<triage::ValidationRow> rows;
  for (const auto& r : dataset.records) {
    uncertain.push_back(r.label != evalkit::GoldLabel::kCertain);
    certain.push_back(r.label == evalkit::GoldLabel::kCertain);
    rows.push_back({{r.goal_text, {}}, r.scene, r.label == evalkit::GoldLabel::kCertain});
  }
  require(std::count(certain.begin(), certain.end(), true) == 10, "fixture is not 10/10");
  const double a = evalkit::auroc(scores, uncertain);
  require(a == 1.0, "AUROC " + std::to_string(a));

  const double eps = triage::calibrate_epsilon(rows, config.triage, resources);
  for (std::size_t i = 0; i < scores.size(); ++i)
    require((scores[i] <= eps) == certain[i], "row " + std::to_string(i) + " misclassified at epsilon " +
                                                  std::to_string(eps));
  require(seconds_since(t0) < 5.0, "took " + std::to_string(seconds_since(t0)) + " s");
}

void three_way_cascade() {
  const auto config = app::load_engine_config(data_path("configs/three_way.json"));
  const auto resources = app::make_resources(config);
  const auto dataset = evalkit::load_sagc(data_path("sagc/three_way18.ndjson"));
  require(dataset.counts == std::array<std::size_t, 3>{6, 6, 6}, "fixture is not 6/6/6");
  const auto results = evalkit::classify_records(dataset.records, config.triage, resources);
  std::vector<evalkit::GoldLabel> predicted, gold;
  for (std::size_t i = 0; i < results.size(); ++i) {
    require(results[i].satisfies_invariants(), "row " + std::to_string(i) + " breaks its label invariants");
    predicted.push_back(evalkit::from_triage(results[i].label));
    gold.push_back(dataset.records[i].label);
  }
  const auto acc = evalkit::accuracy3(predicted, gold);
  require(acc.accuracy == 1.0, "accuracy3 " + std::to_string(acc.accuracy));
}

// ---------------------------------------------------------------------------
// Simulator: metrics on the batch, then every block/handover predicate
// against an independent reading of every reachable state.

using tabletop::TabletopState;

std::string state_key(const TabletopState& s) {
  std::string k;
  for (const auto& [base, stack] : s.stacks) {
    k += base + ":";
    for (const auto& e : stack) k += e + ",";
    k += ";";
  }
  return k;
}

std::vector<TabletopState> reachable(const TabletopState& start) {
  std::vector<std::string> targets(tabletop::kCorners.begin(), tabletop::kCorners.end());
  std::vector<std::string> movable;
  for (const auto& [name, info] : start.entities) {
    if (info.kind != tabletop::EntityKind::kItem) targets.push_back(name);
    if (info.kind != tabletop::EntityKind::kBowl) movable.push_back(name);
  }
  std::vector<TabletopState> out{start};
  std::set<std::string> seen{state_key(start)};
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto& src : movable) {
      std::vector<tabletop::Action> acts;
      for (const auto& t : targets) acts.push_back({tabletop::Action::Kind::kPickAndPlace, src, t});
      for (const auto& p : start.people) acts.push_back({tabletop::Action::Kind::kHandover, src, p});
      for (const auto& a : acts) {
        TabletopState next;
        try {
          next = tabletop::apply_action(out[i], a);
        } catch (const PreconditionError&) {
          continue;
        }
        if (seen.insert(state_key(next)).second) out.push_back(std::move(next));
      }
    }
  }
  return out;
}

// base of every entity, read straight off the stacks
std::map<std::string, std::string> bases(const TabletopState& s) {
  std::map<std::string, std::string> b;
  for (const auto& [base, stack] : s.stacks)
    for (const auto& e : stack) b[e] = base;
  return b;
}

bool oracle(const std::string& id, const std::map<std::string, std::string>& slot, const TabletopState& s) {
  const auto b = bases(s);
  std::vector<std::string> blocks;
  for (const auto& [n, info] : s.entities)
    if (info.kind == tabletop::EntityKind::kBlock) blocks.push_back(n);
  const auto colour = [&](const std::string& n) { return s.entities.at(n).color; };
  const auto is_bowl = [&](const std::string& n) {
    return s.entities.count(n) && s.entities.at(n).kind == tabletop::EntityKind::kBowl;
  };
  if (id == "pick_place" || id == "pick_user_block" || id == "place_user_bowl" || id == "pick_block_put_bowl")
    return b.at(slot.at("block")) == slot.at("bowl");
  if (id == "all_on_corner" || id == "all_in_bowl") {
    const auto& where = id == "all_on_corner" ? slot.at("corner") : slot.at("bowl");
    return std::all_of(blocks.begin(), blocks.end(), [&](const auto& n) { return b.at(n) == where; });
  }
  if (id == "different_corners") {
    std::set<std::string> used;
    for (const auto& n : blocks) {
      const auto& c = b.at(n);
      if (std::find(tabletop::kCorners.begin(), tabletop::kCorners.end(), c) == tabletop::kCorners.end()) return false;
      used.insert(c);
    }
    return used.size() == blocks.size();
  }
  if (id == "matching_color" || id == "mismatching_color") {
    const bool same = id == "matching_color";
    return std::all_of(blocks.begin(), blocks.end(),
                       [&](const auto& n) { return is_bowl(b.at(n)) && (colour(b.at(n)) == colour(n)) == same; });
  }
  if (id == "stack_on_corner" || id == "stack_all") {
    const auto it = s.stacks.find(slot.at("corner"));
    return it != s.stacks.end() && it->second.size() == blocks.size() &&
           std::all_of(blocks.begin(), blocks.end(), [&](const auto& n) { return b.at(n) == slot.at("corner"); });
  }
  if (id.rfind("give", 0) == 0) return b.at(slot.at("item")) == slot.at("person");
  throw Failure{"oracle has no predicate for " + id};
}

// Every slot filling the scene admits.
std::vector<std::map<std::string, std::string>> fillings(const tabletop::TemplateInfo& info, const TabletopState& s) {
  std::vector<std::map<std::string, std::string>> out{{}};
  std::vector<std::string> slots = info.bound_slots;
  slots.insert(slots.end(), info.hidden_slots.begin(), info.hidden_slots.end());
  for (const auto& slot : slots) {
    std::vector<std::string> pool;
    if (slot == "block") pool = s.names_of(tabletop::EntityKind::kBlock);
    if (slot == "bowl") pool = s.names_of(tabletop::EntityKind::kBowl);
    if (slot == "corner") pool.assign(tabletop::kCorners.begin(), tabletop::kCorners.end());
    if (slot == "item") pool = s.names_of(tabletop::EntityKind::kItem);
    if (slot == "person") pool = s.people;
    std::vector<std::map<std::string, std::string>> next;
    for (const auto& f : out)
      for (const auto& v : pool) {
        auto g = f;
        g[slot] = v;
        next.push_back(std::move(g));
      }
    out = std::move(next);
  }
  return out;
}

void simulator_interaction() {
  const auto config = app::load_engine_config(data_path("configs/tabletop.json"));
  const auto resources = app::make_resources(config);
  const auto entries = tabletop::load_batch(data_path("batches/tabletop12.json"));
  require(entries.size() == 12, "batch has " + std::to_string(entries.size()) + " entries");
  const auto records = tabletop::run_batch(entries, config.triage, resources);
  const auto summary = tabletop::summarize(records);
  require(summary.ambiguous == 6, "batch is not 6 clear / 6 ambiguous");
  require(summary.timing && *summary.timing == 1.0, "timing " + std::to_string(summary.timing.value_or(-1)));
  require(summary.success_gap && *summary.success_gap >= 80.0,
          "success gap " + std::to_string(summary.success_gap.value_or(-1)));

  std::size_t checked = 0;
  const std::vector<TabletopState> scenes{tabletop::init_paired_scene(1, 3), tabletop::init_scene(2, 3, 3),
                                          tabletop::init_scene(3, 2, 2), tabletop::init_handover_scene(4, 3, 2)};
  for (const auto& scene : scenes) {
    const auto states = reachable(scene);
    for (const auto& info : tabletop::templates()) {
      if (info.category == tabletop::Category::kInfeasible) continue;
      const bool handover = info.id.rfind("give", 0) == 0;
      if (handover != scene.names_of(tabletop::EntityKind::kBlock).empty()) continue;
      for (const auto& fill : fillings(info, scene)) {
        std::map<std::string, std::string> bound, hidden;
        for (const auto& s : info.bound_slots) bound[s] = fill.at(s);
        for (const auto& s : info.hidden_slots) hidden[s] = fill.at(s);
        if (info.id.find("drink") != std::string::npos && !scene.entities.at(fill.at("item")).drink) continue;
        const auto task = tabletop::make_task(
            info.id, bound, info.hidden_slots.empty() ? std::nullopt : std::optional(hidden));
        for (const auto& st : states) {
          require(tabletop::check_success(task, st) == oracle(info.id, fill, st),
                  info.id + " disagrees on state " + state_key(st));
          ++checked;
        }
      }
    }
    for (const auto& id : {"wipe_desk"}) {
      const auto task = tabletop::make_task(id, {});
      for (const auto& st : states) require(tabletop::check_success(task, st) == (st.moves == 0), "wipe_desk");
    }
  }
  require(checked > 10000, "only " + std::to_string(checked) + " predicate checks");
}

void determinism() {
  auto triage_once = [] {
    app::TriageOptions o;
    o.goal = "stack all blocks";
    o.scene_path = data_path("scenes/tabletop.json");
    std::ostringstream out, err;
    const int code = app::cmd_triage(data_path("configs/tabletop.json"), o, out, err);
    return std::to_string(code) + out.str();
  };
  auto simulate_once = [] {
    app::SimulateOptions o;
    o.batch_path = data_path("batches/tabletop12.json");
    std::ostringstream out, err;
    const int code = app::cmd_simulate(data_path("configs/tabletop.json"), o, out, err);
    return std::to_string(code) + out.str();
  };
  const auto t1 = triage_once(), t2 = triage_once();
  require(t1.rfind("10", 0) == 0, "triage did not exit 10");
  require(t1 == t2, "cmd_triage output differs between runs");
  const auto s1 = simulate_once(), s2 = simulate_once();
  require(s1.rfind("0", 0) == 0, "simulate failed");
  require(s1 == s2, "cmd_simulate output differs between runs");
}

void service_contract() {
  const auto config = app::load_engine_config(data_path("configs/three_way.json"));
  service::SessionService svc(config.triage, app::make_resources(config));
  cmdtriage::testing::LocalServer server;
  svc.register_routes(server.server());
  server.start();
  httplib::Client client("127.0.0.1", server.port());
  const auto post = [&](const std::string& path, const json& body) {
    auto r = client.Post(path, body.dump(), "application/json");
    require(static_cast<bool>(r), "no response from " + path);
    return std::make_pair(r->status, json::parse(r->body.empty() ? "null" : r->body));
  };

  const auto scene = json::parse(std::ifstream(data_path("scenes/service.json")));
  const auto [c_status, created] = post("/sessions", {{"scene", scene}});
  require(c_status == 201, "create returned " + std::to_string(c_status));
  const auto id = created.at("session_id").get<std::string>();
  const auto base = "/sessions/" + id;

  const auto [early_status, early] = post(base + "/answer", {{"answer", "Alice"}});
  require(early_status == 409, "answer before any question returned " + std::to_string(early_status));

  const auto [q_status, asked] = post(base + "/command", {{"goal", "give the coke can to someone"}});
  require(q_status == 200, "command returned " + std::to_string(q_status));
  require(asked.at("label") == "ambiguous" && asked.contains("question"), "command did not ask a question");

  const auto [a_status, answered] = post(base + "/answer", {{"answer", "Alice"}});
  require(a_status == 200, "answer returned " + std::to_string(a_status));
  require(answered.at("label") == "clear", "answer did not resolve to clear");
  require(answered.at("skill").at("text").get<std::string>().find("Alice") != std::string::npos,
          "resolved skill does not hand over to Alice");

  const auto [late_status, late] = post(base + "/answer", {{"answer", "Bob"}});
  require(late_status == 409, "answer after resolution returned " + std::to_string(late_status));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> checks = {
      {"context sampling equals ordered-pair brute force", context_sampling_matches_brute_force},
      {"entropy closed forms", entropy_closed_forms},
      {"AUROC equals pair counting", auroc_is_mann_whitney},
      {"mock end-to-end separation and calibration", mock_end_to_end_separation},
      {"three-way cascade fixture", three_way_cascade},
      {"simulator interaction and predicates", simulator_interaction},
      {"deterministic triage and simulate output", determinism},
      {"session service conversation", service_contract},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    try {
      fn();
      std::cout << "PASS  " << name << '\n';
    } catch (const Failure& f) {
      ++failed;
      std::cout << "FAIL  " << name << ": " << f.what << '\n';
    } catch (const std::exception& e) {
      ++failed;
      std::cout << "FAIL  " << name << ": exception: " << e.what() << '\n';
    }
  }
  std::cout << (checks.size() - static_cast<std::size_t>(failed)) << '/' << checks.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
