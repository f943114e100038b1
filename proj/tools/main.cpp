// mrte: middlepoint-routing traffic-engineering toolkit.
//
// Subcommands: gen-dataset, train, eval, compare, verify-report.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "mrte/checkpoint.hpp"
#include "mrte/error.hpp"
#include "mrte/experiments.hpp"

namespace fs = std::filesystem;
using namespace mrte;

namespace {

struct CommonArgs {
  std::uint64_t seed = 1;
  std::string config;
  std::string out_dir = ".";
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out = true) {
  cmd->add_option("--seed", args.seed, "Master seed");
  cmd->add_option("--config", args.config, "JSON config file");
  if (with_out) cmd->add_option("--out-dir", args.out_dir, "Output directory");
  cmd->add_option("--threads", args.threads, "Worker threads for per-TM runs")
      ->check(CLI::PositiveNumber);
}

GnnModel load_model(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  if (j.value("format", "") == "mrte-train-checkpoint") return GnnModel::from_json(j.at("model"));
  return GnnModel::from_json(j);
}

std::vector<std::string> parse_solver_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string token;
  std::stringstream ss(csv);
  while (std::getline(ss, token, ','))
    if (!token.empty()) out.push_back(token);
  return out;
}

void write_report_files(Report& report, const std::string& out_dir, bool svg) {
  fs::create_directories(out_dir);
  report.write_rows_csv(out_dir + "/report.csv");
  report.write_aggregates_csv(out_dir + "/aggregates.csv");
  bool has_sa = false;
  for (const auto& r : report.rows) has_sa |= r.solver == "sa";
  if (has_sa)
    for (const std::string& solver : report.solvers())
      report.write_cdf_csv(out_dir + "/cdf_" + solver + ".csv", solver);
  if (svg) report.write_cdf_svg(out_dir + "/cdf.svg");
  std::cout << "wrote " << out_dir << "/report.csv (" << report.rows.size() << " rows)\n";
  for (const auto& agg : report.aggregates()) {
    std::cout << "  " << agg.solver << ": mean maxU " << agg.mean_max_utilization;
    if (agg.mean_improvement_vs_ospf)
      std::cout << ", improvement vs OSPF " << *agg.mean_improvement_vs_ospf * 100.0 << "%";
    std::cout << '\n';
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Traffic-engineering toolkit: GNN policy trained with PPO to minimize "
               "maximum link utilization via middlepoint routing, plus OSPF/SAP/"
               "simulated-annealing baselines"};
  app.require_subcommand(1);

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "Generate calibrated topology+TM instances");
  CommonArgs gen_args;
  std::string gen_topology = "nsfnet";
  int gen_train = 100, gen_eval = 25;
  double gen_volume = 0.0;
  std::string gen_profile;
  add_common(gen, gen_args);
  gen->add_option("--topology", gen_topology, "Bundled name (nsfnet|gbn|geant2) or JSON path");
  gen->add_option("--train", gen_train, "Training instance count")->check(CLI::NonNegativeNumber);
  gen->add_option("--eval", gen_eval, "Evaluation instance count")->check(CLI::NonNegativeNumber);
  gen->add_option("--total-volume", gen_volume, "Total traffic volume per matrix");
  gen->add_option("--profile", gen_profile, "Capacity candidates: narrow (5K..20K) or wide (25K..100K)");

  // train
  auto* tr = app.add_subcommand("train", "Train the policy on a dataset");
  CommonArgs tr_args;
  std::string tr_dataset;
  int tr_updates = -1;
  bool tr_resume = false, tr_det_timing = false;
  add_common(tr, tr_args);
  tr->add_option("--dataset", tr_dataset, "Dataset directory")->required();
  tr->add_option("--updates", tr_updates, "Override update count");
  tr->add_flag("--resume", tr_resume, "Resume from checkpoint_last.json in --out-dir");
  tr->add_flag("--deterministic-timing", tr_det_timing,
               "Write zeros to wall-clock fields (byte-identical reruns)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (plus baselines) on a dataset");
  CommonArgs ev_args;
  std::string ev_dataset, ev_checkpoint, ev_solvers = "ospf,sap,sa,drl";
  std::int64_t ev_sa_steps = 4'000'000;
  bool ev_svg = false, ev_sample = false, ev_det_timing = false;
  add_common(ev, ev_args);
  ev->add_option("--dataset", ev_dataset, "Dataset directory")->required();
  ev->add_option("--checkpoint", ev_checkpoint, "Model or training checkpoint")->required();
  ev->add_option("--solvers", ev_solvers, "Comma list of ospf,sap,sa,drl,brute");
  ev->add_option("--sa-steps", ev_sa_steps, "Simulated-annealing step count");
  ev->add_flag("--svg", ev_svg, "Also render the CDF as SVG");
  ev->add_flag("--sample", ev_sample, "Sample actions instead of greedy argmax");
  ev->add_flag("--deterministic-timing", ev_det_timing, "Zero wall-clock fields");

  // compare
  auto* cp = app.add_subcommand("compare", "Run baseline solvers on a dataset");
  CommonArgs cp_args;
  std::string cp_dataset, cp_solvers = "ospf,sap,sa";
  std::int64_t cp_sa_steps = 4'000'000;
  bool cp_svg = false, cp_det_timing = false;
  add_common(cp, cp_args);
  cp->add_option("--dataset", cp_dataset, "Dataset directory")->required();
  cp->add_option("--solvers", cp_solvers, "Comma list of ospf,sap,sa,brute");
  cp->add_option("--sa-steps", cp_sa_steps, "Simulated-annealing step count");
  cp->add_flag("--svg", cp_svg, "Also render the CDF as SVG");
  cp->add_flag("--deterministic-timing", cp_det_timing, "Zero wall-clock fields");

  // verify-report
  auto* vr = app.add_subcommand("verify-report", "Check report aggregates against their rows");
  std::string vr_dir;
  vr->add_option("--dir", vr_dir, "Report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // any parse failure is a validation error
  }

  if (gen->parsed()) {
    const std::string base_name = fs::path(gen_topology).stem().string();
    const CapacityProfile profile =
        gen_profile.empty() ? default_profile(base_name)
                            : (gen_profile == "narrow" ? CapacityProfile::narrow()
                                                       : CapacityProfile::wide());
    const DatasetSpec spec{base_name,
                           load_topology_by_name(gen_topology),
                           profile,
                           gen_train,
                           gen_eval,
                           gen_volume > 0.0 ? gen_volume : default_total_volume(base_name),
                           gen_args.seed};
    const Dataset ds = generate_dataset(spec, gen_args.out_dir);
    std::cout << "wrote " << ds.train.size() << " train + " << ds.eval.size()
              << " eval instances to " << gen_args.out_dir << '\n';
    return 0;
  }

  if (tr->parsed()) {
    PpoConfig config;
    if (!tr_args.config.empty()) config = PpoConfig::from_json(read_json_file(tr_args.config));
    if (tr->count("--seed") > 0) config.seed = tr_args.seed;
    if (tr_updates >= 0) config.updates = tr_updates;
    const Dataset ds = load_dataset(tr_dataset);
    require(!ds.train.empty(), "train: dataset has no training instances");
    require(!ds.eval.empty(), "train: dataset has no evaluation instances");
    const TrainResult result =
        train(config, ds.train, ds.eval, tr_args.out_dir, tr_resume, tr_det_timing);
    std::cout << "trained " << result.updates_done << " updates; best held-out mean maxU "
              << result.best_eval_mean_max_util << '\n'
              << "checkpoints: " << result.best_checkpoint_path << ", "
              << result.last_checkpoint_path << '\n';
    return 0;
  }

  if (ev->parsed() || cp->parsed()) {
    const bool is_eval = ev->parsed();
    const CommonArgs& args = is_eval ? ev_args : cp_args;
    const Dataset ds = load_dataset(is_eval ? ev_dataset : cp_dataset);
    const InstancePool& pool = ds.eval.empty() ? ds.train : ds.eval;
    SolverRunConfig cfg;
    cfg.solvers = parse_solver_list(is_eval ? ev_solvers : cp_solvers);
    cfg.sa_steps = is_eval ? ev_sa_steps : cp_sa_steps;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    cfg.deterministic_timing = is_eval ? ev_det_timing : cp_det_timing;
    cfg.sample_actions = is_eval && ev_sample;
    std::unique_ptr<GnnModel> model;
    if (is_eval) model = std::make_unique<GnnModel>(load_model(ev_checkpoint));
    Report report = run_solvers(pool, ds.name, model.get(), cfg);
    write_report_files(report, args.out_dir, is_eval ? ev_svg : cp_svg);
    return 0;
  }

  if (vr->parsed()) {
    const auto error = verify_report_dir(vr_dir);
    if (error) {
      std::cerr << "verify-report: " << *error << '\n';
      return 1;
    }
    std::cout << "report verified: aggregates and CDFs match their rows\n";
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return 2;
  }
}
