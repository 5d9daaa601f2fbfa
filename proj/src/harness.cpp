#include "mfsc/harness.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "mfsc/errors.hpp"

namespace mfsc {

namespace {

double relative_error(const Mat& reference, const Mat& estimate) {
  const double diff = (reference - estimate).norm();
  const double scale = reference.norm();
  if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / scale;
}

template <class F>
void fill(std::optional<double>& slot, std::vector<std::string>& errors, const char* name, F f) {
  try {
    slot = f();
  } catch (const Error& e) {
    errors.push_back(std::string(name) + ": " + e.what());
  }
}

}  // namespace

double ResidualReport::max() const {
  double worst = 0.0;
  for (const auto* e : {&relerr_P, &relerr_K, &relerr_L1, &relerr_Pi, &relerr_Kbar, &relerr_L2}) {
    if (!e->has_value() || std::isnan(**e)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, **e);
  }
  return worst;
}

ResidualReport residual_report(const SystemModel& model, const CostSpec& cost,
                               const Estimates& est) {
  check_dimensions(model, cost);
  check_gain_shape(model, est.K, "K estimate");
  check_gain_shape(model, est.Kbar, "Kbar estimate");
  const Mat& a = model.A;
  const Mat ag = model.A + model.G;
  const Mat& b = model.B;
  const SymMat qq = SymMat::from_full(cost.Q().full() + cost.QGamma().full(), true);
  const Mat& p = est.P.full();
  const Mat& pi = est.Pi.full();

  ResidualReport rep;
  fill(rep.relerr_P, rep.errors, "P", [&] {
    return relative_error(riccati_map(a, b, cost.Q(), cost.R(), est.P).full(), p);
  });
  fill(rep.relerr_K, rep.errors, "K",
       [&] { return relative_error(riccati_gain(a, b, cost.R(), est.P), est.K); });
  fill(rep.relerr_L1, rep.errors, "Lambda1",
       [&] { return relative_error(b.transpose() * p * b, est.Lambda1.full()); });
  fill(rep.relerr_Pi, rep.errors, "Pi",
       [&] { return relative_error(riccati_map(ag, b, qq, cost.R(), est.Pi).full(), pi); });
  // The map yields the total mean-field gain K + Kbar.
  fill(rep.relerr_Kbar, rep.errors, "Kbar", [&] {
    return relative_error(riccati_gain(ag, b, cost.R(), est.Pi), est.K + est.Kbar);
  });
  fill(rep.relerr_L2, rep.errors, "Lambda2",
       [&] { return relative_error(b.transpose() * pi * b, est.Lambda2.full()); });
  return rep;
}

CostEstimate social_cost_estimate(const SystemModel& model, const CostSpec& cost,
                                  const GainPair& gains, const CostSetup& setup) {
  check_dimensions(model, cost);
  if (setup.N < 1 || setup.horizon < 0 || setup.replications < 1) {
    throw ConfigError("social_cost_estimate: need N >= 1, horizon >= 0, replications >= 1");
  }
  if (setup.x0_low.size() != model.n() || setup.x0_high.size() != model.n()) {
    throw DimensionError("social_cost_estimate: initial-state box has wrong dimension");
  }
  const ClosedLoop cl = closed_loop(model, gains);
  const double rho = std::max(spectral_radius(cl.individual), spectral_radius(cl.mean_field));
  if (!(rho < 1.0)) {
    throw NotStabilizingError("social_cost_estimate: closed loop is not Schur; the cost diverges",
                              rho);
  }

  const int n = model.n();
  const int agents = setup.N;
  const double sigma = std::sqrt(model.sigma2);
  const Mat& q = cost.Q().full();
  const Mat& r = cost.R().full();
  const Mat& gamma = cost.Gamma();

  CostEstimate out;
  out.horizon = setup.horizon;
  out.replications = setup.replications;
  out.tail_factor = std::pow(rho, 2.0 * setup.horizon);
  out.samples.reserve(static_cast<std::size_t>(setup.replications));

  for (int rep = 0; rep < setup.replications; ++rep) {
    // Random draws do not depend on the gains, so equal seeds give paired samples.
    std::mt19937_64 rng(replication_seed(setup.seed, static_cast<std::uint64_t>(rep)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat x(n, agents);
    for (int i = 0; i < agents; ++i)
      for (int j = 0; j < n; ++j)
        x(j, i) = setup.x0_low(j) + (setup.x0_high(j) - setup.x0_low(j)) * unit(rng);

    double total = 0.0;
    Mat w(n, agents);
    for (int k = 0; k < setup.horizon; ++k) {
      const Vec mean_x = x.rowwise().mean();
      Mat u = -gains.K * x;
      u.colwise() -= gains.Kbar * mean_x;
      Mat dev = x;
      dev.colwise() -= gamma * mean_x;
      total += (dev.array() * (q * dev).array()).sum() + (u.array() * (r * u).array()).sum();

      Mat next = model.A * x + model.B * u;
      next.colwise() += model.G * mean_x;
      if (sigma > 0.0) {
        for (int i = 0; i < agents; ++i)
          for (int j = 0; j < n; ++j) w(j, i) = sigma * gauss(rng);
        next += model.D * w;
      }
      x = std::move(next);
    }
    out.samples.push_back(total / agents);
  }

  double sum = 0.0;
  for (double s : out.samples) sum += s;
  out.per_agent_cost = sum / setup.replications;
  if (setup.replications > 1) {
    double ss = 0.0;
    for (double s : out.samples) ss += (s - out.per_agent_cost) * (s - out.per_agent_cost);
    out.std_error = std::sqrt(ss / (setup.replications - 1) / setup.replications);
  }
  return out;
}

Estimates estimates_from(const SolveReport& p_stage, const SolveReport& pi_stage) {
  return {p_stage.last().value,  p_stage.last().next_gain,  p_stage.last().lambda,
          pi_stage.last().value, pi_stage.last().next_gain, pi_stage.last().lambda};
}

Estimates estimates_from(const Algorithm1Result& r) {
  return {r.Phat, r.Khat, r.Lambda1, r.Pihat, r.Kbarhat, r.Lambda2};
}

ModelBasedSolution model_based_solve(const ProblemConfig& config) {
  ModelBasedSolution s;
  s.p_stage = solve_p(config.model, config.cost, config.K0, config.epsilon, config.max_iter);
  s.pi_stage = solve_pi(config.model, config.cost, final_gain(s.p_stage), config.Kbar0,
                        config.epsilon, config.max_iter);
  s.estimates = estimates_from(s.p_stage, s.pi_stage);
  s.residuals = residual_report(config.model, config.cost, s.estimates);
  return s;
}

Campaign collect(const ProblemConfig& config) {
  const RolloutConfig rc = config.rollout();
  const RawTrajectories raw = rollout_population(config.model, rc, config.exploration());
  Campaign c;
  c.dataset.moments = estimate_moments(raw);
  c.dataset.meta = {config.seed, config.N, config.M, config.l, config.model.n(),
                    config.model.m(), config.K0, {}};
  c.sample = raw.replications.front();
  c.aborted = raw.aborted;
  return c;
}

PipelineResult run_pipeline(const ProblemConfig& config, int mf_horizon) {
  PipelineResult r;
  r.campaign = collect(config);
  r.solution = run_algorithm1(r.campaign.dataset.moments, config.K0, config.Kbar0, config.cost,
                              config.epsilon, config.max_iter);
  r.estimates = estimates_from(r.solution);
  r.residuals = residual_report(config.model, config.cost, r.estimates);
  const GainPair gains{r.estimates.K, r.estimates.Kbar};
  const ClosedLoop cl = closed_loop(config.model, gains);
  r.rho_individual = spectral_radius(cl.individual);
  r.rho_mean_field = spectral_radius(cl.mean_field);
  r.mf_trajectory = mf_trajectory(config.model, gains, config.x0_mean(), mf_horizon);
  return r;
}

ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const RankDeficientError*>(&e)) return ExitCode::kRank;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DatasetError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e)) {
    return ExitCode::kConfig;
  }
  if (dynamic_cast<const IterationError*>(&e) || dynamic_cast<const NotStabilizingError*>(&e) ||
      dynamic_cast<const SingularInnerMatrixError*>(&e)) {
    return ExitCode::kIteration;
  }
  return ExitCode::kFailure;
}

}  // namespace mfsc
