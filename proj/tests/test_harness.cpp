#include <doctest.h>

#include <cmath>
#include <limits>

#include "mfsc/errors.hpp"
#include "mfsc/harness.hpp"
#include "mfsc/report_io.hpp"
#include "support.hpp"

using namespace mfsc;
using namespace mfsc::testing;

namespace {

Estimates printed_estimates() {
  Estimates e;
  e.P = SymMat::from_full(Mat{{1.7896, -2.1118}, {-2.1118, -0.9987}});
  e.K = Mat{{0.0848, 0.1059}};
  e.Lambda1 = SymMat::from_full(Mat{{-0.0723}});
  e.Pi = SymMat::from_full(Mat{{0.8598, -1.7990}, {-1.7990, 2.2797}});
  e.Kbar = Mat{{-0.0307, 0.0426}};
  e.Lambda2 = SymMat::from_full(Mat{{0.0090}});
  return e;
}

CostSetup setup_for(int n, int N, int horizon, int reps, double half_width) {
  CostSetup cs;
  cs.N = N;
  cs.horizon = horizon;
  cs.replications = reps;
  cs.seed = 5;
  cs.x0_low = Vec::Constant(n, -half_width);
  cs.x0_high = Vec::Constant(n, half_width);
  return cs;
}

// Mean and standard error of the paired differences b - a.
std::pair<double, double> paired(const CostEstimate& a, const CostEstimate& b) {
  const auto r = a.samples.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < r; ++i) mean += b.samples[i] - a.samples[i];
  mean /= static_cast<double>(r);
  double ss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double e = b.samples[i] - a.samples[i] - mean;
    ss += e * e;
  }
  return {mean, std::sqrt(ss / static_cast<double>(r - 1) / static_cast<double>(r))};
}

}  // namespace

TEST_CASE("exact solutions have vanishing residuals") {
  const ModelBasedSolution s = model_based_solve(paper_config());
  CHECK(s.residuals.errors.empty());
  CHECK(s.residuals.max() <= 1e-8);
  CHECK(s.p_stage.iterations() <= 10);
  CHECK(s.pi_stage.iterations() <= 10);
}

TEST_CASE("residuals of the printed four-digit estimates") {
  // Reference values from an independent numpy implementation of the six maps.
  const ResidualReport r = residual_report(paper_model(), paper_cost(), printed_estimates());
  CHECK(*r.relerr_P == doctest::Approx(0.24769193860234462).epsilon(1e-9));
  CHECK(*r.relerr_K == doctest::Approx(0.022049493653369577).epsilon(1e-9));
  CHECK(*r.relerr_L1 == doctest::Approx(0.03918120696913903).epsilon(1e-9));
  CHECK(*r.relerr_Pi == doctest::Approx(0.17049340779950684).epsilon(1e-9));
  CHECK(*r.relerr_Kbar == doctest::Approx(2.4834071783361473).epsilon(1e-9));
  CHECK(*r.relerr_L2 == doctest::Approx(0.04156620860630997).epsilon(1e-9));
}

TEST_CASE("singular inner matrix is reported per entry") {
  Estimates e = model_based_solve(paper_config()).estimates;
  // B' P B = -R makes R + B'PB vanish.
  const Mat b = paper_model().B;
  const double scale = 1.74 / (b.transpose() * b)(0, 0);
  e.P = SymMat::from_full(scale * Mat::Identity(2, 2));
  CHECK(std::abs((paper_cost().R().full() + b.transpose() * e.P.full() * b)(0, 0)) < 1e-12);
  const ResidualReport r = residual_report(paper_model(), paper_cost(), e);
  CHECK_FALSE(r.relerr_P.has_value());
  CHECK_FALSE(r.relerr_K.has_value());
  CHECK(r.relerr_L1.has_value());
  CHECK(r.relerr_Pi.has_value());
  CHECK(r.errors.size() == 2);
  CHECK(r.max() == std::numeric_limits<double>::infinity());
  CHECK_FALSE(r.within(1e6));
}

TEST_CASE("social cost trivial cases") {
  const SystemModel s = paper_model();
  const GainPair g{paper_K0(), paper_Kbar0()};
  const CostSpec zero(SymMat(2), SymMat(1), paper_cost().Gamma());
  const CostEstimate a = social_cost_estimate(s, zero, g, setup_for(2, 20, 30, 3, 5.0));
  CHECK(a.per_agent_cost == 0.0);
  CHECK(a.std_error == 0.0);

  SystemModel quiet = s;
  quiet.D.setZero();
  quiet.sigma2 = 0.0;
  const CostEstimate b = social_cost_estimate(quiet, paper_cost(), g, setup_for(2, 20, 30, 3, 0.0));
  CHECK(b.per_agent_cost == 0.0);

  const CostEstimate c = social_cost_estimate(s, paper_cost(), g, setup_for(2, 20, 30, 4, 5.0));
  CHECK(std::isfinite(c.per_agent_cost));
  CHECK(c.std_error >= 0.0);
  CHECK(c.samples.size() == 4);
  CHECK(c.tail_factor < 1.0);

  CHECK_THROWS_AS(social_cost_estimate(s, paper_cost(), {Mat{{-20.0, 0.0}}, paper_Kbar0()},
                                       setup_for(2, 20, 30, 2, 1.0)),
                  NotStabilizingError);
}

TEST_CASE("exact gains minimize the cost in the PSD regime") {
  std::mt19937_64 rng(606);
  for (int t = 0; t < 3; ++t) {
    const Instance in = random_instance(rng, 2, 1);
    const Mat k = final_gain(solve_p(in.model, in.cost, in.K0, 1e-10));
    const Mat kb = final_gain(solve_pi(in.model, in.cost, k, in.Kbar0 + in.K0 - k, 1e-10));
    const CostSetup cs = setup_for(2, 50, 100, 40, 2.0);
    const CostEstimate best = social_cost_estimate(in.model, in.cost, {k, kb}, cs);
    int tried = 0;
    for (int d = 0; d < 3; ++d) {
      GainPair g;
      do {
        g = {k + random_matrix(rng, 1, 2, 0.2 * std::max(1.0, k.norm())),
             kb + random_matrix(rng, 1, 2, 0.2 * std::max(1.0, kb.norm()))};
        ++tried;
      } while (spectral_radius(closed_loop(in.model, g).individual) >= 1.0 ||
               spectral_radius(closed_loop(in.model, g).mean_field) >= 1.0);
      const auto [diff, se] = paired(best, social_cost_estimate(in.model, in.cost, g, cs));
      CHECK(diff > 3.0 * se);
    }
    CHECK(tried < 100);
  }
}

TEST_CASE("benchmark weights are not convex in the input") {
  // R < 0: a detuned individual gain is cheaper than the Riccati gain.
  const ModelBasedSolution s = model_based_solve(paper_config());
  const SystemModel m = paper_model();
  const CostSetup cs = setup_for(2, 200, 200, 30, 0.0);
  CostSetup box = cs;
  box.x0_low = Vec{{0.0, 0.0}};
  box.x0_high = Vec{{12.0, -6.0}};
  const CostEstimate exact =
      social_cost_estimate(m, paper_cost(), {s.estimates.K, s.estimates.Kbar}, box);
  const CostEstimate detuned =
      social_cost_estimate(m, paper_cost(), {3.0 * s.estimates.K, s.estimates.Kbar}, box);
  const auto [diff, se] = paired(exact, detuned);
  CHECK(diff < -3.0 * se);
}

TEST_CASE("pipeline on the benchmark campaign") {
  const PipelineResult r = run_pipeline(paper_config());
  CHECK(r.campaign.aborted == 0);
  CHECK(r.solution.rank1.ok);
  CHECK(r.solution.rank2.ok);
  CHECK(r.residuals.within(0.1));
  CHECK(r.rho_individual < 1.0);
  CHECK(r.rho_mean_field < 1.0);
  CHECK(r.mf_trajectory.size() == 61);
  CHECK(r.mf_trajectory.back().norm() < 1e-3);
}

TEST_CASE("manifest is deterministic and self-describing") {
  const ProblemConfig cfg = paper_config();
  const std::string a = pipeline_manifest(cfg, "feedbeef", run_pipeline(cfg));
  const std::string b = pipeline_manifest(cfg, "feedbeef", run_pipeline(cfg));
  CHECK(a == b);
  CHECK(a.find("config_hash = feedbeef") != std::string::npos);
  CHECK(a.find("seed = 20240501") != std::string::npos);
  CHECK(a.find("[stage1_iterations]") != std::string::npos);
  CHECK(a.find("[stage2_iterations]") != std::string::npos);
  CHECK(a.find("[mf_trajectory]") != std::string::npos);
  CHECK(a.find("rank_stage1 = 6") != std::string::npos);

  ProblemConfig other = cfg;
  other.seed = 1;
  CHECK(pipeline_manifest(other, "feedbeef", run_pipeline(other)) != a);
}

TEST_CASE("estimates JSON round trip") {
  const ModelBasedSolution s = model_based_solve(paper_config());
  const std::string text = estimates_json({"abc", 3, "model-based"}, s.estimates, nullptr, &s);
  const Estimates back = estimates_from_json(text);
  CHECK(back.P == s.estimates.P);
  CHECK(back.K == s.estimates.K);
  CHECK(back.Lambda1 == s.estimates.Lambda1);
  CHECK(back.Pi == s.estimates.Pi);
  CHECK(back.Kbar == s.estimates.Kbar);
  CHECK(back.Lambda2 == s.estimates.Lambda2);
  CHECK(text.find("\"config_hash\": \"abc\"") != std::string::npos);
  CHECK_THROWS_AS(estimates_from_json("{"), DatasetError);
  CHECK_THROWS_AS(estimates_from_json("{\"P\": [[1]]}"), DatasetError);
}

TEST_CASE("CSV writers") {
  const ModelBasedSolution s = model_based_solve(paper_config());
  const std::string csv = solve_report_csv(s.p_stage);
  CHECK(csv.rfind("iter,are_residual,gain_change,spectral_radius,inner_min_abs_eig", 0) == 0);
  CHECK(static_cast<int>(std::count(csv.begin(), csv.end(), '\n')) == 1 + s.p_stage.iterations());
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);

  const Campaign c = collect(paper_config());
  const std::string traj = replication_csv(c.sample);
  CHECK(traj.rfind("k,x1_1,x1_2,x2_1,x2_2,u1_1,u2_1,xbar_1,xbar_2,ubar_1", 0) == 0);
  CHECK(static_cast<int>(std::count(traj.begin(), traj.end(), '\n')) == 51);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == ExitCode::kConfig);
  CHECK(exit_code_for(DatasetError("x")) == ExitCode::kConfig);
  CHECK(exit_code_for(DimensionError("x")) == ExitCode::kConfig);
  CHECK(exit_code_for(RankDeficientError("x", 1, 6)) == ExitCode::kRank);
  CHECK(exit_code_for(MaxIterExceededError("x", 5)) == ExitCode::kIteration);
  CHECK(exit_code_for(IterationError("x")) == ExitCode::kIteration);
  CHECK(exit_code_for(NotStabilizingError("x", 1.2)) == ExitCode::kIteration);
  CHECK(exit_code_for(SingularInnerMatrixError("x")) == ExitCode::kIteration);
  CHECK(exit_code_for(std::runtime_error("x")) == ExitCode::kFailure);
}
