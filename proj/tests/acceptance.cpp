// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mfsc/errors.hpp"
#include "mfsc/harness.hpp"
#include "mfsc/report_io.hpp"
#include "support.hpp"

using namespace mfsc;
using namespace mfsc::testing;
namespace fs = std::filesystem;

namespace {

constexpr double kFixedPointTol = 1e-8;
constexpr int kMaxStageIterations = 10;
constexpr double kCollapseTol = 1e-9;
constexpr double kMonotoneTol = -1e-8;
constexpr double kEquivalenceTol = 1e-6;
constexpr double kStochasticTol = 0.1;
constexpr double kSteinTol = 1e-9;
constexpr double kTrajectoryTol = 1e-3;

const std::string kConfigPath = std::string(MFSC_SOURCE_DIR) + "/configs/paper_system.cfg";

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  Outcome& out;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      out.pass = false;
      if (!out.detail.empty()) out.detail += "; ";
      out.detail += what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MFSC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfsc_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome criterion1(double& runtime) {
  Outcome o;
  Check c{o};
  const auto t0 = std::chrono::steady_clock::now();
  const SystemModel s = paper_model();
  const CostSpec cost = paper_cost();
  const SolveReport rp = solve_p(s, cost, paper_K0(), 1e-4);
  const SolveReport rpi = solve_pi(s, cost, final_gain(rp), paper_Kbar0(), 1e-4);
  const ResidualReport r = residual_report(s, cost, estimates_from(rp, rpi));
  runtime = seconds_since(t0);
  c.require(rp.converged && rpi.converged, "not converged");
  c.require(r.max() <= kFixedPointTol, fmt::format("max residual {:.3e}", r.max()));
  c.require(rp.iterations() <= kMaxStageIterations && rpi.iterations() <= kMaxStageIterations,
            "too many iterations");
  c.require(runtime < 1.0, "runtime >= 1 s");
  if (o.pass) {
    o.detail = fmt::format("iterations {}/{}, max residual {:.2e}", rp.iterations(),
                           rpi.iterations(), r.max());
  }
  return o;
}

Outcome criterion2(double& runtime) {
  Outcome o;
  Check c{o};
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2002);
  double worst_pi = 0.0;
  double worst_kbar = 0.0;
  for (int t = 0; t < 25; ++t) {
    const Instance in = random_instance(rng, 1 + t % 3, 1 + (t / 3) % 2, false);
    const SolveReport rp = solve_p(in.model, in.cost, in.K0, 1e-12);
    const SolveReport rpi = solve_pi(in.model, in.cost, final_gain(rp), in.Kbar0, 1e-12);
    const Mat p = final_value(rp).full();
    const double dpi = (final_value(rpi).full() - p).norm() / (1.0 + p.norm());
    const double kbar = final_gain(rpi).norm();
    worst_pi = std::max(worst_pi, dpi);
    worst_kbar = std::max(worst_kbar, kbar);
  }
  runtime = seconds_since(t0);
  c.require(worst_pi <= kCollapseTol, fmt::format("||Pi - P|| ratio {:.3e}", worst_pi));
  c.require(worst_kbar <= kCollapseTol, fmt::format("||Kbar|| {:.3e}", worst_kbar));
  if (o.pass) {
    o.detail = fmt::format("25 systems, max ||Pi-P||/(1+||P||) {:.2e}, max ||Kbar|| {:.2e}",
                           worst_pi, worst_kbar);
  }
  return o;
}

// Smallest eigenvalue over all consecutive and to-final differences; largest radius.
void monotone_stats(const SolveReport& r, double& min_eig, double& max_rho) {
  const Mat fin = final_value(r).full();
  for (std::size_t k = 0; k < r.iterates.size(); ++k) {
    const Mat pk = r.iterates[k].value.full();
    min_eig = std::min(min_eig, min_eig_sym(SymMat::from_full(pk - fin, true)));
    if (k + 1 < r.iterates.size()) {
      min_eig = std::min(min_eig,
                         min_eig_sym(SymMat::from_full(pk - r.iterates[k + 1].value.full(), true)));
    }
    max_rho = std::max(max_rho, r.spectral_radii[k]);
  }
}

Outcome criterion3(double& runtime) {
  Outcome o;
  Check c{o};
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3003);
  double eig_p = 0.0, eig_pi = 0.0, rho_p = 0.0, rho_pi = 0.0;
  for (int t = 0; t < 25; ++t) {
    const Instance in = random_instance(rng, 1 + t % 3, 1 + (t / 3) % 2);
    const AssumptionReport a = check_assumptions(in.model, in.cost);
    c.require(a.detectable_A_sqrtQ == Verdict::kTrue, fmt::format("system {} not detectable", t));
    const SolveReport rp = solve_p(in.model, in.cost, in.K0, 1e-10);
    const Mat k = final_gain(rp);
    const SolveReport rpi = solve_pi(in.model, in.cost, k, in.Kbar0 + in.K0 - k, 1e-10);
    monotone_stats(rp, eig_p, rho_p);
    monotone_stats(rpi, eig_pi, rho_pi);
  }
  runtime = seconds_since(t0);
  c.require(eig_p >= kMonotoneTol, fmt::format("P stage min eig {:.3e}", eig_p));
  c.require(eig_pi >= kMonotoneTol, fmt::format("Pi stage min eig {:.3e}", eig_pi));
  c.require(rho_p < 1.0 && rho_pi < 1.0, "closed loop not Schur");
  if (o.pass) {
    o.detail = fmt::format("25 systems, min eig {:.2e}/{:.2e}, max radius {:.4f}/{:.4f}", eig_p,
                           eig_pi, rho_p, rho_pi);
  }
  return o;
}

double rel_dev(const Mat& a, const Mat& b) {
  return max_abs_diff(a, b) / std::max(1.0, b.cwiseAbs().maxCoeff());
}

Outcome criterion4(double& runtime) {
  Outcome o;
  Check c{o};
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4004);
  double worst1 = 0.0;
  double worst2 = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Instance in = random_instance(rng, 1 + t % 3, 1 + (t / 3) % 2);
    const DataMoments d = build_moments_matrices(exact_moments(in.model, in.K0, 7000 + t));
    c.require(rank_check(d, Stage::kIndividual).ok && rank_check(d, Stage::kMeanField).ok,
              fmt::format("system {} fails the rank check", t));

    Mat k = in.K0;
    for (int it = 0; it < 5; ++it) {
      const LsqIterate l = lsq_step_p(d, k, in.cost.Q(), in.cost.R());
      const PiStep m = pi_step_p(in.model, in.cost, k);
      worst1 = std::max({worst1, rel_dev(l.value.full(), m.value.full()),
                         rel_dev(l.gain_next, m.next_gain),
                         rel_dev(l.lambda.full(), m.lambda.full())});
      k = m.next_gain;
    }
    const Mat khat = final_gain(solve_p(in.model, in.cost, in.K0, 1e-12));
    Mat kb = in.Kbar0 + in.K0 - khat;
    for (int it = 0; it < 5; ++it) {
      const LsqIterate l =
          lsq_step_pi(d, khat, kb, in.cost.Q(), in.cost.R(), in.cost.QGamma());
      const PiStep m = pi_step_pi(in.model, in.cost, khat, kb);
      worst2 = std::max({worst2, rel_dev(l.value.full(), m.value.full()),
                         rel_dev(l.gain_next, m.next_gain),
                         rel_dev(l.lambda.full(), m.lambda.full())});
      kb = m.next_gain;
    }
  }
  runtime = seconds_since(t0);
  c.require(worst1 <= kEquivalenceTol, fmt::format("stage 1 deviation {:.3e}", worst1));
  c.require(worst2 <= kEquivalenceTol, fmt::format("stage 2 deviation {:.3e}", worst2));
  c.require(runtime < 10.0, "runtime >= 10 s");
  if (o.pass) {
    o.detail = fmt::format("20 systems x 5 steps, max deviation {:.2e}/{:.2e}", worst1, worst2);
  }
  return o;
}

struct StochasticRun {
  ProblemConfig config;
  std::string hash;
  PipelineResult result;
  std::string manifest;
};

StochasticRun stochastic_run() {
  StochasticRun s;
  const std::string text = read_file(kConfigPath);
  s.config = parse_config(text);
  s.hash = content_hash(text);
  s.result = run_pipeline(s.config);
  s.manifest = pipeline_manifest(s.config, s.hash, s.result);
  return s;
}

Outcome criterion5(const StochasticRun& s, double runtime) {
  Outcome o;
  Check c{o};
  const ProblemConfig& cfg = s.config;
  c.require(cfg.N == 200 && cfg.l == 50 && cfg.M == 100 && cfg.model.sigma2 == 0.01 &&
                cfg.epsilon == 1e-4,
            "bundled config does not match the campaign settings");
  const auto& sol = s.result.solution;
  c.require(sol.rank1.ok && sol.rank2.ok, "rank check failed");
  c.require(sol.stage1.converged && sol.stage2.converged, "not converged");
  c.require(sol.stage1.iterations() <= kMaxStageIterations &&
                sol.stage2.iterations() <= kMaxStageIterations,
            "too many iterations");
  c.require(s.result.residuals.within(kStochasticTol),
            fmt::format("max residual {:.3e}", s.result.residuals.max()));
  c.require(runtime < 60.0, "runtime >= 60 s");
  if (o.pass) {
    const auto& r = s.result.residuals;
    o.detail = fmt::format(
        "rank {}/{}, iterations {}/{}, residuals P {:.4f} K {:.4f} L1 {:.4f} Pi {:.4f} "
        "Kbar {:.4f} L2 {:.4f}",
        sol.rank1.rank, sol.rank2.rank, sol.stage1.iterations(), sol.stage2.iterations(),
        *r.relerr_P, *r.relerr_K, *r.relerr_L1, *r.relerr_Pi, *r.relerr_Kbar, *r.relerr_L2);
  }
  return o;
}

Outcome criterion6(double& runtime) {
  Outcome o;
  Check c{o};
  const auto t0 = std::chrono::steady_clock::now();
  ProblemConfig cfg = load_config(kConfigPath);

  // Library path: truncated campaign and zero exploration.
  auto refuses = [&](ProblemConfig variant, const char* label) {
    const Campaign camp = collect(variant);
    const DataMoments d = build_moments_matrices(camp.dataset.moments);
    const bool verdict_fails = !rank_check(d, Stage::kIndividual).ok;
    bool refused = false;
    try {
      run_algorithm1(camp.dataset.moments, variant.K0, variant.Kbar0, variant.cost,
                     variant.epsilon, variant.max_iter);
    } catch (const RankConditionError& e) {
      refused = exit_code_for(e) == ExitCode::kRank;
    }
    c.require(verdict_fails, fmt::format("{}: rank_check passed", label));
    c.require(refused, fmt::format("{}: run_algorithm1 did not refuse", label));
  };
  ProblemConfig short_cfg = cfg;
  short_cfg.l = 4;
  refuses(short_cfg, "l = 4");
  ProblemConfig quiet_cfg = cfg;
  quiet_cfg.explore_terms = 0;
  refuses(quiet_cfg, "xi = 0");

  // CLI path: exit code 3 from mf-solve on both datasets.
  const fs::path dir = scratch("rank");
  const std::string config_arg = "--config " + kConfigPath;
  int rc = run_cli("collect " + config_arg + " --horizon 4 --dataset " +
                   (dir / "short.csv").string() + " --out " + dir.string());
  c.require(rc == 0, fmt::format("collect l = 4 exit {}", rc));
  rc = run_cli("mf-solve " + config_arg + " --dataset " + (dir / "short.csv").string() +
               " --out " + dir.string());
  c.require(rc == 3, fmt::format("mf-solve l = 4 exit {} (want 3)", rc));

  const fs::path quiet_path = dir / "quiet.cfg";
  {
    std::ofstream f(quiet_path);
    f << read_file(kConfigPath) << "\nexplore_terms = 0\n";
  }
  rc = run_cli("collect --config " + quiet_path.string() + " --dataset " +
               (dir / "quiet.csv").string() + " --out " + dir.string());
  c.require(rc == 0, fmt::format("collect xi = 0 exit {}", rc));
  rc = run_cli("mf-solve --config " + quiet_path.string() + " --dataset " +
               (dir / "quiet.csv").string() + " --out " + dir.string());
  c.require(rc == 3, fmt::format("mf-solve xi = 0 exit {} (want 3)", rc));
  runtime = seconds_since(t0);
  if (o.pass) o.detail = "both campaigns refused; CLI exit code 3 for both";
  return o;
}

Outcome criterion7(double& runtime) {
  Outcome o;
  Check c{o};
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(7007);
  std::uniform_real_distribution<double> radius(0.0, 0.95);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 5;
    const Mat a = random_with_radius(rng, n, radius(rng));
    const SymMat s = random_sym(rng, n);
    worst = std::max(worst, max_abs_diff(solve_stein(a, s).full(),
                                         stein_kronecker_oracle(a, s.full())));
  }
  runtime = seconds_since(t0);
  c.require(worst <= kSteinTol, fmt::format("max deviation {:.3e}", worst));
  if (o.pass) o.detail = fmt::format("100 cases, max deviation {:.2e}", worst);
  return o;
}

Outcome criterion8(const StochasticRun& s) {
  Outcome o;
  Check c{o};
  const SystemModel& m = s.config.model;
  const Mat& k = s.result.estimates.K;
  const Mat& kb = s.result.estimates.Kbar;
  const double rho1 = spectral_radius(m.A - m.B * k);
  const double rho2 = spectral_radius(m.A + m.G - m.B * (k + kb));
  const auto traj = mf_trajectory(m, {k, kb}, Vec{{6.0, -3.0}}, 60);
  int first_below = -1;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj[i].norm() < kTrajectoryTol) {
      first_below = static_cast<int>(i);
      break;
    }
  }
  c.require(rho1 < 1.0, fmt::format("rho(A - BK) = {:.4f}", rho1));
  c.require(rho2 < 1.0, fmt::format("rho(A + G - B(K + Kbar)) = {:.4f}", rho2));
  c.require(first_below >= 0, "trajectory not below 1e-3 within 60 steps");
  if (o.pass) {
    o.detail = fmt::format("radii {:.4f}/{:.4f}, |xbar| < 1e-3 from step {}", rho1, rho2,
                           first_below);
  }
  return o;
}

Outcome criterion9(const StochasticRun& first, double& runtime) {
  Outcome o;
  Check c{o};
  const auto t0 = std::chrono::steady_clock::now();
  const StochasticRun again = stochastic_run();
  c.require(again.manifest == first.manifest, "library manifests differ");

  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  const int ra = run_cli("pipeline --config " + kConfigPath + " --out " + a.string());
  const int rb = run_cli("pipeline --config " + kConfigPath + " --out " + b.string());
  c.require(ra == 0 && rb == 0, fmt::format("pipeline exit codes {}/{}", ra, rb));
  const std::string ma = slurp((a / "manifest.txt").string());
  const std::string mb = slurp((b / "manifest.txt").string());
  c.require(!ma.empty() && ma == mb, "CLI manifests differ");
  c.require(ma == first.manifest, "CLI manifest differs from the library manifest");
  runtime = seconds_since(t0);
  if (o.pass) o.detail = fmt::format("manifests identical ({} bytes)", ma.size());
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::function<Outcome(double&)>& fn) {
    double runtime = 0.0;
    Outcome o;
    try {
      o = fn(runtime);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    fmt::print("CRITERION {} {} ({:.3f} s) {}\n", id, o.pass ? "PASS" : "FAIL", runtime, o.detail);
    std::fflush(stdout);
  };

  report(1, criterion1);
  report(2, criterion2);
  report(3, criterion3);
  report(4, criterion4);

  StochasticRun run;
  double run_time = 0.0;
  bool have_run = false;
  report(5, [&](double& t) {
    const auto t0 = std::chrono::steady_clock::now();
    run = stochastic_run();
    run_time = seconds_since(t0);
    t = run_time;
    have_run = true;
    return criterion5(run, run_time);
  });
  report(6, criterion6);
  report(7, criterion7);
  report(8, [&](double& t) {
    if (!have_run) return Outcome{false, "criterion 5 run unavailable"};
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = criterion8(run);
    t = seconds_since(t0);
    return o;
  });
  report(9, [&](double& t) {
    if (!have_run) return Outcome{false, "criterion 5 run unavailable"};
    return criterion9(run, t);
  });

  fmt::print("{} of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
