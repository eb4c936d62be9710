#include <iostream>

#include <CLI11.hpp>

#include "cmdtriage/app.hpp"
#include "cmdtriage/service.hpp"

namespace {

void add_overrides(CLI::App* cmd, cmdtriage::app::Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override triage.seed");
  cmd->add_option("--epsilon", o.epsilon, "Override triage.epsilon");
  cmd->add_option("--estimator", o.estimator, "Override triage.estimator");
  cmd->add_option("--budget", o.budget, "Override triage.max_question_rounds");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cmdtriage;
  CLI::App cli{"Classify robot commands as clear, ambiguous or infeasible"};
  cli.require_subcommand(1);
  std::string config;
  cli.add_option("-c,--config", config, "Engine config (JSON)");

  app::TriageOptions triage_opt;
  auto* triage_cmd = cli.add_subcommand("triage", "Classify one goal against a scene");
  triage_cmd->add_option("goal", triage_opt.goal, "Goal text")->required();
  triage_cmd->add_option("-s,--scene", triage_opt.scene_path, "Scene description (JSON)")->required();
  triage_cmd->add_option("--fact", triage_opt.facts, "Known fact appended to the goal (repeatable)");
  triage_cmd->add_flag("-i,--interactive", triage_opt.interactive, "Answer clarifying questions on stdin");
  add_overrides(triage_cmd, triage_opt.overrides);

  app::EvalOptions eval_opt;
  auto* eval_cmd = cli.add_subcommand("eval", "Evaluate on a labelled dataset");
  eval_cmd->add_option("-d,--dataset", eval_opt.dataset, "Dataset (NDJSON); defaults to paths.dataset");
  eval_cmd->add_option("-m,--metric", eval_opt.metric, "uq | cls")->check(CLI::IsMember({"uq", "cls"}));
  eval_cmd->add_option("-f,--format", eval_opt.format, "json | text")->check(CLI::IsMember({"json", "text"}));
  eval_cmd->add_option("-o,--out", eval_opt.out_path, "Also write the report here");
  add_overrides(eval_cmd, eval_opt.overrides);

  app::SimulateOptions sim_opt;
  auto* sim_cmd = cli.add_subcommand("simulate", "Run a tabletop episode batch");
  sim_cmd->add_option("batch", sim_opt.batch_path, "Batch spec (JSON)")->required();
  sim_cmd->add_option("--episode-budget", sim_opt.budget, "Question budget for every episode");
  sim_cmd->add_option("-o,--out", sim_opt.out_path, "Also write the NDJSON here");
  add_overrides(sim_cmd, sim_opt.overrides);

  app::CalibrateOptions cal_opt;
  auto* cal_cmd = cli.add_subcommand("calibrate", "Fit epsilon on a validation dataset");
  cal_cmd->add_option("-d,--dataset", cal_opt.dataset, "Dataset (NDJSON); defaults to paths.dataset");
  add_overrides(cal_cmd, cal_opt.overrides);

  service::ServiceOptions serve_opt;
  auto* serve_cmd = cli.add_subcommand("serve", "Run the session HTTP service");
  serve_cmd->add_option("--host", serve_opt.host, "Bind address");
  serve_cmd->add_option("-p,--port", serve_opt.port, "Port");
  serve_cmd->add_flag("--queue", serve_opt.queue_when_busy, "Queue requests on a busy session instead of 409");

  std::string scene_template;
  std::uint64_t scene_seed = 0;
  auto* scene_cmd = cli.add_subcommand("scene", "Print a seeded simulator scene and task");
  scene_cmd->add_option("template", scene_template, "Task template id")->required();
  scene_cmd->add_option("--scene-seed", scene_seed, "Scene seed");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : app::kExitError;
  }

  if (*scene_cmd) return app::cmd_scene(scene_template, scene_seed, std::cout, std::cerr);
  if (config.empty()) {
    std::cerr << "error: --config is required\n";
    return app::kExitError;
  }
  if (*triage_cmd) return app::cmd_triage(config, triage_opt, std::cout, std::cerr);
  if (*eval_cmd) return app::cmd_eval(config, eval_opt, std::cout, std::cerr);
  if (*sim_cmd) return app::cmd_simulate(config, sim_opt, std::cout, std::cerr);
  if (*cal_cmd) return app::cmd_calibrate(config, cal_opt, std::cout, std::cerr);
  if (*serve_cmd) return service::cmd_serve(config, serve_opt, std::cerr);
  return app::kExitError;
}
