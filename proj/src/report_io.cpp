#include "mfsc/report_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mfsc/errors.hpp"

namespace mfsc {

namespace {

using json = nlohmann::json;

json matrix_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat matrix_from_json(const json& j, const char* key) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw DatasetError(std::string("results: '") + key + "' must be a non-empty matrix");
  }
  const auto rows = j.size();
  const auto cols = j.front().size();
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw DatasetError(std::string("results: ragged matrix ") + key);
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json rank_json(const RankVerdict& v) {
  return {{"rank", v.rank}, {"required", v.required}, {"ok", v.ok},
          {"sigma_min_ratio", v.sigma_min_ratio}};
}

void append_row(std::string& out, const std::vector<double>& vals) {
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (i) out += ',';
    out += format_number(vals[i]);
  }
  out += '\n';
}

void append_matrix_cols(std::string& header, const char* name, Eigen::Index rows,
                        Eigen::Index cols) {
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) header += fmt::format(",{}_{}{}", name, i + 1, j + 1);
}

void append_values(std::vector<double>& row, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
}

}  // namespace

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

std::string solve_report_csv(const SolveReport& report) {
  if (report.iterates.empty()) return "iter\n";
  const auto& first = report.iterates.front();
  const auto n = first.value.dim();
  const auto m = first.lambda.dim();
  std::string out = "iter,are_residual,gain_change,spectral_radius,inner_min_abs_eig";
  append_matrix_cols(out, "value", n, n);
  append_matrix_cols(out, "gain", m, n);
  append_matrix_cols(out, "next_gain", m, n);
  append_matrix_cols(out, "lambda", m, m);
  out += '\n';
  for (std::size_t k = 0; k < report.iterates.size(); ++k) {
    const auto& it = report.iterates[k];
    std::vector<double> row{static_cast<double>(it.iter), report.residual_history[k],
                            report.gain_changes[k], report.spectral_radii[k],
                            report.inner_min_abs_eig[k]};
    append_values(row, it.value.full());
    append_values(row, it.gain);
    append_values(row, it.next_gain);
    append_values(row, it.lambda.full());
    append_row(out, row);
  }
  return out;
}

std::string stage_report_csv(const StageReport& report) {
  if (report.iterates.empty()) return "iter\n";
  const auto& first = report.iterates.front();
  const auto n = first.value.dim();
  const auto m = first.lambda.dim();
  std::string out = "iter,gain_change,lsq_residual";
  append_matrix_cols(out, "value", n, n);
  append_matrix_cols(out, "gain", m, n);
  append_matrix_cols(out, "next_gain", m, n);
  append_matrix_cols(out, "lambda", m, m);
  out += '\n';
  for (std::size_t k = 0; k < report.iterates.size(); ++k) {
    const auto& it = report.iterates[k];
    std::vector<double> row{static_cast<double>(k), report.gain_changes[k], it.residual};
    append_values(row, it.value.full());
    append_values(row, report.gains[k]);
    append_values(row, it.gain_next);
    append_values(row, it.lambda.full());
    append_row(out, row);
  }
  return out;
}

std::string replication_csv(const Replication& rep) {
  const auto n = rep.x1.cols();
  const auto m = rep.u1.cols();
  std::string out = "k";
  for (const char* name : {"x1", "x2"})
    for (Eigen::Index j = 0; j < n; ++j) out += fmt::format(",{}_{}", name, j + 1);
  for (const char* name : {"u1", "u2"})
    for (Eigen::Index j = 0; j < m; ++j) out += fmt::format(",{}_{}", name, j + 1);
  for (Eigen::Index j = 0; j < n; ++j) out += fmt::format(",xbar_{}", j + 1);
  for (Eigen::Index j = 0; j < m; ++j) out += fmt::format(",ubar_{}", j + 1);
  out += '\n';
  for (Eigen::Index k = 0; k < rep.x1.rows(); ++k) {
    std::vector<double> row{static_cast<double>(k)};
    for (const Mat* src : {&rep.x1, &rep.x2, &rep.u1, &rep.u2, &rep.xbar, &rep.ubar})
      for (Eigen::Index j = 0; j < src->cols(); ++j) row.push_back((*src)(k, j));
    append_row(out, row);
  }
  return out;
}

std::string mf_trajectory_csv(const std::vector<Vec>& traj) {
  std::string out = "k";
  const auto n = traj.empty() ? 0 : traj.front().size();
  for (Eigen::Index j = 0; j < n; ++j) out += fmt::format(",xbar_{}", j + 1);
  out += '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    std::vector<double> row{static_cast<double>(k)};
    for (Eigen::Index j = 0; j < n; ++j) row.push_back(traj[k](j));
    append_row(out, row);
  }
  return out;
}

std::string residuals_json(const ResidualReport& rep) {
  json j{{"relerr_P", optional_json(rep.relerr_P)},     {"relerr_K", optional_json(rep.relerr_K)},
         {"relerr_L1", optional_json(rep.relerr_L1)},   {"relerr_Pi", optional_json(rep.relerr_Pi)},
         {"relerr_Kbar", optional_json(rep.relerr_Kbar)}, {"relerr_L2", optional_json(rep.relerr_L2)},
         {"errors", rep.errors}};
  return j.dump(2);
}

std::string estimates_json(const ResultsHeader& header, const Estimates& est,
                           const Algorithm1Result* mf, const ModelBasedSolution* mb) {
  json j;
  j["source"] = header.source;
  j["config_hash"] = header.config_hash;
  j["seed"] = header.seed;
  j["P"] = matrix_json(est.P.full());
  j["K"] = matrix_json(est.K);
  j["Lambda1"] = matrix_json(est.Lambda1.full());
  j["Pi"] = matrix_json(est.Pi.full());
  j["Kbar"] = matrix_json(est.Kbar);
  j["Lambda2"] = matrix_json(est.Lambda2.full());
  if (mf) {
    j["rank"] = {{"stage1", rank_json(mf->rank1)}, {"stage2", rank_json(mf->rank2)}};
    j["stage1"] = {{"iterations", mf->stage1.iterations()},
                   {"converged", mf->stage1.converged},
                   {"gain_changes", mf->stage1.gain_changes}};
    j["stage2"] = {{"iterations", mf->stage2.iterations()},
                   {"converged", mf->stage2.converged},
                   {"gain_changes", mf->stage2.gain_changes}};
  }
  if (mb) {
    j["stage1"] = {{"iterations", mb->p_stage.iterations()},
                   {"converged", mb->p_stage.converged},
                   {"gain_changes", mb->p_stage.gain_changes},
                   {"are_residuals", mb->p_stage.residual_history}};
    j["stage2"] = {{"iterations", mb->pi_stage.iterations()},
                   {"converged", mb->pi_stage.converged},
                   {"gain_changes", mb->pi_stage.gain_changes},
                   {"are_residuals", mb->pi_stage.residual_history}};
    j["residuals"] = json::parse(residuals_json(mb->residuals));
  }
  return j.dump(2) + "\n";
}

Estimates estimates_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DatasetError(std::string("results: invalid JSON: ") + e.what());
  }
  try {
    Estimates est;
    est.P = SymMat::from_full(matrix_from_json(j.at("P"), "P"));
    est.K = matrix_from_json(j.at("K"), "K");
    est.Lambda1 = SymMat::from_full(matrix_from_json(j.at("Lambda1"), "Lambda1"));
    est.Pi = SymMat::from_full(matrix_from_json(j.at("Pi"), "Pi"));
    est.Kbar = matrix_from_json(j.at("Kbar"), "Kbar");
    est.Lambda2 = SymMat::from_full(matrix_from_json(j.at("Lambda2"), "Lambda2"));
    return est;
  } catch (const json::exception& e) {
    throw DatasetError(std::string("results: ") + e.what());
  }
}

std::string pipeline_manifest(const ProblemConfig& config, const std::string& config_hash,
                              const PipelineResult& r) {
  const auto& sol = r.solution;
  std::ostringstream out;
  out << "# mean-field social control pipeline manifest\n";
  out << "config_hash = " << config_hash << '\n';
  out << "seed = " << config.seed << '\n';
  out << "N = " << config.N << '\n';
  out << "l = " << config.l << '\n';
  out << "M = " << config.M << '\n';
  out << "epsilon = " << format_number(config.epsilon) << '\n';
  out << "aborted_replications = " << r.campaign.aborted << '\n';
  out << "rank_required = " << sol.rank1.required << '\n';
  out << "rank_stage1 = " << sol.rank1.rank << '\n';
  out << "rank_stage2 = " << sol.rank2.rank << '\n';
  out << "sigma_min_ratio_stage1 = " << format_number(sol.rank1.sigma_min_ratio) << '\n';
  out << "sigma_min_ratio_stage2 = " << format_number(sol.rank2.sigma_min_ratio) << '\n';
  out << "stage1_iterations = " << sol.stage1.iterations() << '\n';
  out << "stage2_iterations = " << sol.stage2.iterations() << '\n';
  out << "rho_individual = " << format_number(r.rho_individual) << '\n';
  out << "rho_mean_field = " << format_number(r.rho_mean_field) << '\n';
  auto opt = [](const std::optional<double>& v) {
    return v ? format_number(*v) : std::string("nan");
  };
  out << "relerr_P = " << opt(r.residuals.relerr_P) << '\n';
  out << "relerr_K = " << opt(r.residuals.relerr_K) << '\n';
  out << "relerr_L1 = " << opt(r.residuals.relerr_L1) << '\n';
  out << "relerr_Pi = " << opt(r.residuals.relerr_Pi) << '\n';
  out << "relerr_Kbar = " << opt(r.residuals.relerr_Kbar) << '\n';
  out << "relerr_L2 = " << opt(r.residuals.relerr_L2) << '\n';
  auto mat = [&](const char* name, const Mat& m) {
    out << name << " =";
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << format_number(m(i, j));
    out << '\n';
  };
  mat("Phat", r.estimates.P.full());
  mat("Khat", r.estimates.K);
  mat("Lambda1hat", r.estimates.Lambda1.full());
  mat("Pihat", r.estimates.Pi.full());
  mat("Kbarhat", r.estimates.Kbar);
  mat("Lambda2hat", r.estimates.Lambda2.full());
  out << "\n[stage1_iterations]\n" << stage_report_csv(sol.stage1);
  out << "\n[stage2_iterations]\n" << stage_report_csv(sol.stage2);
  out << "\n[mf_trajectory]\n" << mf_trajectory_csv(r.mf_trajectory);
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot write " + path);
  f << text;
}

}  // namespace mfsc
