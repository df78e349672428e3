// Command-line entry point. Subcommands: generate, simulate, train, verify,
// report. See README.md for formats and examples.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "bicb/bicb.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& spec) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t comma = spec.find(',', pos);
    const std::string tok = spec.substr(pos, comma == std::string::npos ? spec.size() - pos
                                                                        : comma - pos);
    if (!tok.empty()) {
      const std::size_t dash = tok.find('-');
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(tok.substr(0, dash));
        const auto hi = std::stoull(tok.substr(dash + 1));
        if (hi < lo) throw bicb::ConfigError("bad seed range '" + tok + "'");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      } else {
        seeds.push_back(std::stoull(tok));
      }
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (seeds.empty()) throw bicb::ConfigError("empty seed list");
  return seeds;
}

int cmd_generate(std::uint64_t seed, std::size_t n, int steps, const std::string& profile,
                 const std::string& out) {
  bicb::SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_impressions = n;
  cfg.n_steps = steps;
  if (profile == "bump") {
    cfg.volume_profile.resize(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t)
      cfg.volume_profile[static_cast<std::size_t>(t)] =
          1.0 + 0.6 * std::sin(2.0 * 3.14159265358979323846 * (t + 0.5) / steps - 1.5707963267948966);
  } else if (profile != "uniform") {
    throw bicb::ConfigError("unknown profile '" + profile + "' (expected uniform|bump)");
  }
  const bicb::TrafficSlice slice = bicb::synth_generate(cfg);
  bicb::save_traffic(out, {{"0", slice}});

  double cost = 0, clicks = 0, value = 0;
  for (const auto& imp : slice.impressions) {
    cost += imp.expected_cost();
    clicks += imp.expected_clicks();
    value += imp.expected_value();
  }
  std::cout << "wrote " << out << ": " << slice.size() << " impressions, " << steps
            << " steps\n"
            << "  expected cost " << bicb::csv::fmt(cost) << ", clicks "
            << bicb::csv::fmt(clicks) << ", value " << bicb::csv::fmt(value) << ", mean cpc "
            << bicb::csv::fmt(clicks > 0 ? cost / clicks : 0) << "\n";
  return 0;
}

int cmd_simulate(const bicb::ExperimentConfig& cfg) {
  const bicb::ExperimentResult result = bicb::run_experiment(cfg);
  std::cout << result.report_csv;
  if (!cfg.out_dir.empty()) std::cout << "report written to " << cfg.out_dir << "/report.csv\n";
  return 0;
}

int cmd_train(const std::vector<std::string>& history_paths, const std::string& logs_path,
              const std::string& eval_path, const std::string& duals_spec, double calibration,
              int steps) {
  if (!logs_path.empty()) {
    const auto records = bicb::read_control_log(logs_path);
    const bicb::TrainingDataset ds = bicb::ingest_logs(records);
    std::cout << "ingested " << ds.size() << " records for " << ds.by_campaign.size()
              << " campaigns\n";
    for (const auto& [id, rows] : ds.by_campaign)
      std::cout << "  " << id << ": " << rows.size() << " steps\n";
    return 0;
  }
  if (history_paths.empty())
    throw bicb::ConfigError("train needs --history or --logs");
  std::vector<bicb::TrafficSlice> history;
  for (const auto& p : history_paths)
    for (auto& [_, slice] : bicb::load_traffic(p, bicb::LoadOptions{steps}))
      history.push_back(std::move(slice));
  const auto model = bicb::train_empirical(std::move(history), calibration);
  std::cout << "model: " << model->describe() << "\n";

  if (!eval_path.empty()) {
    const auto fields = bicb::csv::split(duals_spec);
    if (fields.size() != 3) throw bicb::ConfigError("--duals expects p,q_u,q_l");
    bicb::DualVars d;
    d.p = bicb::csv::parse_double(fields[0], "--duals");
    d.q_u = bicb::csv::parse_double(fields[1], "--duals");
    d.q_l = bicb::csv::parse_double(fields[2], "--duals");
    const auto periods = bicb::load_traffic(eval_path, bicb::LoadOptions{steps});
    bicb::Campaign c;
    c.id = "eval";
    c.start_step = 0;
    c.end_step = steps - 1;
    c.budget = 1;  // unused by unconstrained replays below
    for (const auto& [id, slice] : periods) {
      const bicb::CostClicks predicted =
          bicb::predict_remaining(*model, c, 0, d, bicb::AccumStats{});
      const bicb::AccumStats realized = bicb::replay(slice, d, c, bicb::ReplayMode::Unconstrained);
      std::cout << "period " << id << ": predicted cost " << bicb::csv::fmt(predicted.cost)
                << " clicks " << bicb::csv::fmt(predicted.clicks) << "; realized cost "
                << bicb::csv::fmt(realized.cost) << " clicks " << bicb::csv::fmt(realized.clicks)
                << "\n";
    }
  }
  return 0;
}

int cmd_verify(const std::string& suite, std::size_t trials, std::uint64_t seed) {
  std::vector<bicb::SuiteResult> results;
  if (suite == "all" || suite == "theorem_gap")
    results.push_back(bicb::theorem_gap_suite(trials, 15, seed));
  if (suite == "all" || suite == "monotonicity")
    results.push_back(bicb::monotonicity_suite(std::max<std::size_t>(1, trials / 10), 20, seed));
  if (suite == "all" || suite == "convergence")
    results.push_back(bicb::convergence_suite(trials, seed));
  if (suite == "all" || suite == "positivity")
    results.push_back(bicb::positivity_suite(std::max<std::size_t>(1, trials / 10), seed));
  if (results.empty())
    throw bicb::ConfigError("unknown suite '" + suite +
                            "' (expected all|theorem_gap|monotonicity|convergence|positivity)");
  bool all_ok = true;
  for (const auto& r : results) {
    const bool ok = r.passed();
    all_ok &= ok;
    std::cout << (ok ? "PASS" : "FAIL") << " " << r.name << ": " << (r.trials - r.failures) << "/"
              << r.trials << " checks";
    if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
    std::cout << "\n";
  }
  return all_ok ? 0 : 1;
}

int cmd_report(const std::string& episodes_dir, const std::string& out_dir) {
  if (!fs::is_directory(episodes_dir))
    throw bicb::Error("episode directory not found: " + episodes_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(episodes_dir))
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  if (files.empty()) throw bicb::Error("no episode logs in " + episodes_dir);
  std::sort(files.begin(), files.end());
  fs::create_directories(out_dir);
  for (const auto& file : files) {
    auto in = bicb::csv::open_input(file.string());
    bicb::csv::expect_header(in, bicb::kEpisodeHeader, file.string());
    auto out = bicb::csv::open_output((fs::path(out_dir) / file.filename()).string());
    out << "step,p,q_u,q_l,alpha,beta,cum_cost,cum_clicks,cum_value\n";
    std::string line;
    int line_no = 1;
    double cum_cost = 0, cum_clicks = 0, cum_value = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::string ctx = file.string() + ":" + std::to_string(line_no);
      const auto f = bicb::csv::split(line);
      if (f.size() != 9) throw bicb::ParseError(ctx + ": expected 9 fields");
      cum_cost += bicb::csv::parse_double(f[6], ctx);
      cum_clicks += bicb::csv::parse_double(f[7], ctx);
      cum_value += bicb::csv::parse_double(f[8], ctx);
      out << std::string(f[0]) << ',' << std::string(f[1]) << ',' << std::string(f[2]) << ','
          << std::string(f[3]) << ',' << std::string(f[4]) << ',' << std::string(f[5]) << ','
          << bicb::csv::fmt(cum_cost) << ',' << bicb::csv::fmt(cum_clicks) << ','
          << bicb::csv::fmt(cum_value) << "\n";
    }
    std::cout << "wrote " << (fs::path(out_dir) / file.filename()).string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained auto-bidding laboratory"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may appear after the subcommand

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Global random seed")->envname("BICB_SEED");
  std::string out_dir;
  app.add_option("--out-dir", out_dir, "Output directory for generated artifacts");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic traffic CSV");
  std::size_t gen_n = 10000;
  int gen_steps = 48;
  std::string gen_profile = "uniform";
  std::string gen_out;
  gen->add_option("--n", gen_n, "Number of impressions")->capture_default_str();
  gen->add_option("--steps", gen_steps, "Steps per period")->capture_default_str();
  gen->add_option("--profile", gen_profile, "Per-step volume profile: uniform|bump")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "Output CSV path")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run the experiment protocol");
  sim->set_config("--config", "", "Read options from a key=value config file");
  std::string sim_setting = "bicb";
  std::string sim_methods = "manual,pid,online_lp,bicb,bicb_star,offline_lp";
  std::string sim_seeds = "0";
  int sim_campaigns = 8;
  std::size_t sim_n = 10000;
  int sim_steps = 48;
  std::string sim_train, sim_test;
  double sim_lambda = 100.0;
  double sim_calibration = 1.0;
  sim->add_option("--setting", sim_setting, "bcb|bicb")->capture_default_str();
  sim->add_option("--methods", sim_methods, "Comma-separated method list")->capture_default_str();
  sim->add_option("--seeds", sim_seeds, "Seed list, e.g. 0,1,2 or 0-4")->capture_default_str();
  sim->add_option("--campaigns", sim_campaigns, "Campaigns per seed")->capture_default_str();
  sim->add_option("--n", sim_n, "Synthetic impressions per day")->capture_default_str();
  sim->add_option("--steps", sim_steps, "Steps per period")->capture_default_str();
  sim->add_option("--train", sim_train, "Training traffic CSV (optional)");
  sim->add_option("--test", sim_test, "Evaluation traffic CSV (optional)");
  sim->add_option("--lambda", sim_lambda, "Violation penalty base")->capture_default_str();
  sim->add_option("--calibration", sim_calibration, "Predictor calibration factor")
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Build or inspect a prediction model");
  std::vector<std::string> train_history;
  std::string train_logs, train_eval, train_duals = "1,0,0";
  double train_calibration = 1.0;
  int train_steps = 48;
  train->add_option("--history", train_history, "Historical traffic CSVs");
  train->add_option("--logs", train_logs, "Control log CSV to ingest and validate");
  train->add_option("--eval", train_eval, "Traffic CSV to compare predictions against");
  train->add_option("--duals", train_duals, "p,q_u,q_l used for --eval")->capture_default_str();
  train->add_option("--calibration", train_calibration, "Calibration factor")
      ->capture_default_str();
  train->add_option("--steps", train_steps, "Steps per period")->capture_default_str();

  // verify
  auto* ver = app.add_subcommand("verify", "Run the property suites");
  std::string ver_suite = "all";
  std::size_t ver_trials = 1000;
  ver->add_option("--suite", ver_suite, "all|theorem_gap|monotonicity|convergence|positivity")
      ->capture_default_str();
  ver->add_option("--trials", ver_trials, "Trial count for the big suites")
      ->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "Emit cumulative per-episode time series");
  std::string rep_episodes, rep_out = "report_out";
  rep->add_option("--episodes", rep_episodes, "Directory with per-episode logs")->required();
  rep->add_option("--out", rep_out, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(seed, gen_n, gen_steps, gen_profile, gen_out);
    if (sim->parsed()) {
      bicb::ExperimentConfig cfg;
      cfg.setting = bicb::parse_setting(sim_setting);
      cfg.methods.clear();
      for (const auto tok : bicb::csv::split(sim_methods))
        cfg.methods.push_back(bicb::parse_method(std::string(tok)));
      cfg.seeds = parse_seed_list(sim_seeds);
      for (auto& s : cfg.seeds) s += seed;  // global seed shifts the whole list
      cfg.n_campaigns = sim_campaigns;
      cfg.synth.n_impressions = sim_n;
      cfg.synth.n_steps = sim_steps;
      cfg.train_path = sim_train;
      cfg.test_path = sim_test;
      cfg.lambda = sim_lambda;
      cfg.calibration = sim_calibration;
      cfg.out_dir = out_dir;
      return cmd_simulate(cfg);
    }
    if (train->parsed())
      return cmd_train(train_history, train_logs, train_eval, train_duals, train_calibration,
                       train_steps);
    if (ver->parsed()) return cmd_verify(ver_suite, ver_trials, seed);
    if (rep->parsed()) return cmd_report(rep_episodes, out_dir.empty() ? rep_out : out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
