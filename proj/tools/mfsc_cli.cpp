// mfsc: command-line front end for the mean-field social control solvers.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mfsc/errors.hpp"
#include "mfsc/harness.hpp"
#include "mfsc/report_io.hpp"

namespace fs = std::filesystem;
using namespace mfsc;

namespace {

struct Options {
  std::string config;
  std::string dataset;
  std::string estimates;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<int> max_iter;
  std::optional<int> replications;
  std::optional<int> horizon;
  std::optional<double> tol;
};

struct Loaded {
  ProblemConfig config;
  std::string hash;
};

Loaded load(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  const std::string text = read_file(o.config);
  Loaded l{parse_config(text), content_hash(text)};
  if (o.seed) l.config.seed = *o.seed;
  if (o.epsilon) {
    if (!(*o.epsilon > 0.0)) throw ConfigError("--epsilon must be positive");
    l.config.epsilon = *o.epsilon;
  }
  if (o.max_iter) {
    if (*o.max_iter < 1) throw ConfigError("--max-iter must be >= 1");
    l.config.max_iter = *o.max_iter;
  }
  return l;
}

std::string out_path(const Options& o, const std::string& name) {
  fs::create_directories(o.out);
  return (fs::path(o.out) / name).string();
}

void print_residuals(const ResidualReport& r) {
  auto show = [](const char* name, const std::optional<double>& v) {
    fmt::print("  {:<12} {}\n", name, v ? fmt::format("{:.6e}", *v) : std::string("n/a"));
  };
  show("relerr_P", r.relerr_P);
  show("relerr_K", r.relerr_K);
  show("relerr_L1", r.relerr_L1);
  show("relerr_Pi", r.relerr_Pi);
  show("relerr_Kbar", r.relerr_Kbar);
  show("relerr_L2", r.relerr_L2);
  for (const auto& e : r.errors) fmt::print("  error: {}\n", e);
}

int cmd_mb_solve(const Options& o) {
  const Loaded l = load(o);
  const ModelBasedSolution s = model_based_solve(l.config);
  const ResultsHeader h{l.hash, l.config.seed, "model-based"};
  write_text(out_path(o, "mb_solution.json"), estimates_json(h, s.estimates, nullptr, &s));
  const std::string tag = fmt::format("# config_hash={} seed={}\n", l.hash, l.config.seed);
  write_text(out_path(o, "mb_stage1.csv"), tag + solve_report_csv(s.p_stage));
  write_text(out_path(o, "mb_stage2.csv"), tag + solve_report_csv(s.pi_stage));
  fmt::print("stage1 iterations: {}\nstage2 iterations: {}\n", s.p_stage.iterations(),
             s.pi_stage.iterations());
  print_residuals(s.residuals);
  return 0;
}

int cmd_collect(const Options& o) {
  Loaded l = load(o);
  if (o.replications) l.config.M = *o.replications;
  if (o.horizon) l.config.l = *o.horizon;
  Campaign c = collect(l.config);
  c.dataset.meta.config_hash = l.hash;
  const std::string path = o.dataset.empty() ? out_path(o, "dataset.csv") : o.dataset;
  if (const auto parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  save_dataset(c.dataset, path);
  const std::string tag = fmt::format("# config_hash={} seed={}\n", l.hash, l.config.seed);
  write_text(out_path(o, "fig5_trajectories.csv"), tag + replication_csv(c.sample));
  fmt::print("dataset: {} (l = {}, M = {}, aborted = {})\n", path, l.config.l, l.config.M,
             c.aborted);
  return 0;
}

int cmd_mf_solve(const Options& o) {
  const Loaded l = load(o);
  if (o.dataset.empty()) throw ConfigError("--dataset is required");
  const Dataset d = load_dataset(o.dataset);
  if (d.meta.n != l.config.model.n() || d.meta.m != l.config.model.m()) {
    throw DimensionError("dataset dimensions do not match the config");
  }
  const Algorithm1Result r = run_algorithm1(d.moments, l.config.K0, l.config.Kbar0, l.config.cost,
                                            l.config.epsilon, l.config.max_iter);
  const ResultsHeader h{l.hash, d.meta.seed, "model-free"};
  write_text(out_path(o, "mf_solution.json"), estimates_json(h, estimates_from(r), &r));
  const std::string tag = fmt::format("# config_hash={} seed={}\n", l.hash, d.meta.seed);
  write_text(out_path(o, "fig6_stage1.csv"), tag + stage_report_csv(r.stage1));
  write_text(out_path(o, "fig6_stage2.csv"), tag + stage_report_csv(r.stage2));
  fmt::print("rank: stage1 {}/{}, stage2 {}/{}\n", r.rank1.rank, r.rank1.required, r.rank2.rank,
             r.rank2.required);
  fmt::print("stage1 iterations: {}\nstage2 iterations: {}\n", r.stage1.iterations(),
             r.stage2.iterations());
  return 0;
}

int cmd_verify(const Options& o) {
  const Loaded l = load(o);
  if (o.estimates.empty()) throw ConfigError("--estimates is required");
  const Estimates est = estimates_from_json(read_file(o.estimates));
  const ResidualReport r = residual_report(l.config.model, l.config.cost, est);
  const double tol = o.tol.value_or(l.config.verify_tol);
  std::string body = residuals_json(r);
  body.insert(1, fmt::format("\n  \"config_hash\": \"{}\",\n  \"seed\": {},\n  \"tolerance\": {},",
                             l.hash, l.config.seed, format_number(tol)));
  write_text(out_path(o, "verify.json"), body + "\n");
  print_residuals(r);
  const bool ok = r.within(tol);
  fmt::print("max relative error {:.6e} {} tolerance {:.3e}\n", r.max(), ok ? "<=" : ">", tol);
  return ok ? 0 : static_cast<int>(ExitCode::kVerification);
}

int cmd_cost(const Options& o) {
  const Loaded l = load(o);
  GainPair gains;
  if (o.estimates.empty()) {
    const ModelBasedSolution s = model_based_solve(l.config);
    gains = {s.estimates.K, s.estimates.Kbar};
  } else {
    const Estimates est = estimates_from_json(read_file(o.estimates));
    gains = {est.K, est.Kbar};
  }
  CostSetup setup;
  setup.N = l.config.N;
  setup.seed = l.config.seed;
  setup.x0_low = l.config.x0_low;
  setup.x0_high = l.config.x0_high;
  if (o.replications) setup.replications = *o.replications;
  if (o.horizon) setup.horizon = *o.horizon;
  const CostEstimate c = social_cost_estimate(l.config.model, l.config.cost, gains, setup);
  write_text(out_path(o, "cost.txt"),
             fmt::format("config_hash = {}\nseed = {}\nN = {}\nhorizon = {}\nreplications = {}\n"
                         "per_agent_cost = {}\nstd_error = {}\ntail_factor = {}\n",
                         l.hash, setup.seed, setup.N, c.horizon, c.replications,
                         format_number(c.per_agent_cost), format_number(c.std_error),
                         format_number(c.tail_factor)));
  fmt::print("per-agent cost {:.6f} +/- {:.6f} (horizon {}, {} replications, tail factor {:.2e})\n",
             c.per_agent_cost, c.std_error, c.horizon, c.replications, c.tail_factor);
  return 0;
}

int cmd_pipeline(const Options& o) {
  Loaded l = load(o);
  if (o.replications) l.config.M = *o.replications;
  if (o.horizon) l.config.l = *o.horizon;
  const PipelineResult r = run_pipeline(l.config);
  write_text(out_path(o, "manifest.txt"), pipeline_manifest(l.config, l.hash, r));
  fmt::print("stage1 iterations: {}\nstage2 iterations: {}\n", r.solution.stage1.iterations(),
             r.solution.stage2.iterations());
  print_residuals(r.residuals);
  const double tol = o.tol.value_or(l.config.verify_tol);
  return r.residuals.within(tol) ? 0 : static_cast<int>(ExitCode::kVerification);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field LQG social control: model-based and data-driven solvers"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "problem definition file")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--epsilon", o.epsilon, "override the convergence threshold");
    sub->add_option("--max-iter", o.max_iter, "override the iteration cap");
  };

  auto* mb = app.add_subcommand("mb-solve", "model-based policy iteration on both equations");
  common(mb);
  auto* col = app.add_subcommand("collect", "simulate the population and write a moment dataset");
  common(col);
  col->add_option("--dataset", o.dataset, "dataset CSV path (default OUT/dataset.csv)");
  col->add_option("--replications", o.replications, "override M");
  col->add_option("--horizon", o.horizon, "override l, the number of data samples");
  auto* mf = app.add_subcommand("mf-solve", "data-driven solve from a moment dataset");
  common(mf);
  mf->add_option("--dataset", o.dataset, "dataset CSV written by collect")->required();
  auto* ver = app.add_subcommand("verify", "residuals of an estimates file against the model");
  common(ver);
  ver->add_option("--estimates", o.estimates, "mb_solution.json or mf_solution.json")->required();
  ver->add_option("--tol", o.tol, "override verify_tol");
  auto* cst = app.add_subcommand("cost", "Monte-Carlo social cost per agent");
  common(cst);
  cst->add_option("--estimates", o.estimates, "gains to evaluate (default: model-based)");
  cst->add_option("--replications", o.replications, "Monte-Carlo replications");
  cst->add_option("--horizon", o.horizon, "truncation horizon");
  auto* pipe = app.add_subcommand("pipeline", "collect, mf-solve and verify in one run");
  common(pipe);
  pipe->add_option("--replications", o.replications, "override M");
  pipe->add_option("--horizon", o.horizon, "override l");
  pipe->add_option("--tol", o.tol, "override verify_tol");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*mb) return cmd_mb_solve(o);
    if (*col) return cmd_collect(o);
    if (*mf) return cmd_mf_solve(o);
    if (*ver) return cmd_verify(o);
    if (*cst) return cmd_cost(o);
    if (*pipe) return cmd_pipeline(o);
  } catch (const std::exception& e) {
    std::cerr << "mfsc: " << e.what() << '\n';
    return static_cast<int>(exit_code_for(e));
  }
  return static_cast<int>(ExitCode::kFailure);
}
