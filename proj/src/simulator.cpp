#include "mfsc/simulator.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "mfsc/errors.hpp"

namespace mfsc {

namespace {

constexpr std::uint64_t kExplorationStream = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Exploration of all agents at every step: xi[k] is m x N.
std::vector<Mat> exploration_table(const ExplorationSpec& ex, int agents, int inputs, int l) {
  std::vector<Mat> table(static_cast<std::size_t>(l), Mat::Zero(inputs, agents));
  if (ex.is_zero()) return table;
  for (int k = 0; k < l; ++k)
    for (int i = 0; i < agents; ++i) table[k].col(i) = ex.value(i, k, inputs);
  return table;
}

std::vector<double> split_csv(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str()) throw DatasetError("dataset: malformed number '" + cell + "'");
    out.push_back(v);
  }
  return out;
}

std::string csv_header(int n, int m) {
  std::string h = "k";
  for (int j = 1; j <= n; ++j) h += fmt::format(",dx_{}", j);
  for (int j = 1; j <= m; ++j) h += fmt::format(",du_{}", j);
  for (int j = 1; j <= n; ++j) h += fmt::format(",xbar_{}", j);
  for (int j = 1; j <= m; ++j) h += fmt::format(",ubar_{}", j);
  return h;
}

}  // namespace

ExplorationSpec ExplorationSpec::draw(int agents, int inputs, int n_terms, double freq_low,
                                      double freq_high, std::uint64_t seed, Mode mode) {
  if (agents < 1 || inputs < 1 || n_terms < 0) throw ConfigError("exploration: bad sizes");
  if (!(freq_low <= freq_high)) throw ConfigError("exploration: freq_low > freq_high");
  ExplorationSpec ex;
  ex.n_terms = n_terms;
  ex.freq_low = freq_low;
  ex.freq_high = freq_high;
  ex.mode = mode;
  std::mt19937_64 rng(splitmix64(seed ^ kExplorationStream));
  std::uniform_real_distribution<double> freq(freq_low, freq_high);
  ex.frequencies.resize(static_cast<std::size_t>(agents));
  for (auto& f : ex.frequencies) {
    f.resize(static_cast<std::size_t>(n_terms) * inputs);
    for (auto& w : f) w = freq(rng);
  }
  return ex;
}

ExplorationSpec ExplorationSpec::none(int agents) {
  ExplorationSpec ex;
  ex.n_terms = 0;
  ex.frequencies.resize(static_cast<std::size_t>(agents));
  return ex;
}

Vec ExplorationSpec::value(int agent, int k, int inputs) const {
  Vec xi = Vec::Zero(inputs);
  if (n_terms == 0) return xi;
  const auto& f = frequencies.at(static_cast<std::size_t>(agent));
  if (f.size() != static_cast<std::size_t>(n_terms) * inputs) {
    throw DimensionError("exploration: frequency table does not match input dimension");
  }
  const double t = mode == Mode::kTimeIndexed ? static_cast<double>(k) : 1.0;
  for (int c = 0; c < inputs; ++c) {
    double s = 0.0;
    for (int j = 0; j < n_terms; ++j) s += std::sin(f[static_cast<std::size_t>(c * n_terms + j)] * t);
    xi(c) = s;
  }
  return xi;
}

void RolloutConfig::validate(const SystemModel& model) const {
  model.validate();
  if (N < 2) throw ConfigError("rollout: N must be >= 2");
  if (l < 0) throw ConfigError("rollout: l must be >= 0");
  if (M < 1) throw ConfigError("rollout: M must be >= 1");
  check_gain_shape(model, K0, "K0");
  if (x0_low.size() != model.n() || x0_high.size() != model.n()) {
    throw DimensionError("rollout: initial-state box has wrong dimension");
  }
}

bool RolloutConfig::horizon_sufficient(int n, int m) const {
  return l - 1 >= packed_size(n) + n * m + packed_size(m);
}

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication) {
  return splitmix64(splitmix64(seed) + replication);
}

RawTrajectories rollout_population(const SystemModel& model, const RolloutConfig& config,
                                   const ExplorationSpec& exploration) {
  config.validate(model);
  const int n = model.n();
  const int m = model.m();
  const int agents = config.N;
  if (!exploration.is_zero() && exploration.agents() < agents) {
    throw DimensionError("rollout: exploration defined for fewer agents than N");
  }
  const std::vector<Mat> xi = exploration_table(exploration, agents, m, config.l);
  const double sigma = std::sqrt(model.sigma2);
  const double inv_n = 1.0 / agents;

  RawTrajectories raw;
  for (int rep = 0; rep < config.M; ++rep) {
    std::mt19937_64 rng(replication_seed(config.seed, static_cast<std::uint64_t>(rep)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Mat x(n, agents);
    for (int i = 0; i < agents; ++i)
      for (int j = 0; j < n; ++j)
        x(j, i) = config.x0_low(j) + (config.x0_high(j) - config.x0_low(j)) * unit(rng);

    Replication r{Mat(config.l, n), Mat(config.l, n), Mat(config.l, m),
                  Mat(config.l, m), Mat(config.l, n), Mat(config.l, m)};
    bool ok = true;
    Mat w(n, agents);
    for (int k = 0; k < config.l; ++k) {
      const Vec mean_x = x.rowwise().sum() * inv_n;
      const Mat u = -config.K0 * x + xi[k];
      r.x1.row(k) = x.col(0).transpose();
      r.x2.row(k) = x.col(1).transpose();
      r.u1.row(k) = u.col(0).transpose();
      r.u2.row(k) = u.col(1).transpose();
      r.xbar.row(k) = mean_x.transpose();
      r.ubar.row(k) = (u.rowwise().sum() * inv_n).transpose();

      Mat next = model.A * x + model.B * u;
      next.colwise() += model.G * mean_x;
      if (sigma > 0.0) {
        for (int i = 0; i < agents; ++i)
          for (int j = 0; j < n; ++j) w(j, i) = sigma * gauss(rng);
        next += model.D * w;
      }
      if (!next.allFinite()) {
        ok = false;
        break;
      }
      x = std::move(next);
    }
    if (ok) {
      raw.replications.push_back(std::move(r));
    } else {
      ++raw.aborted;
    }
  }
  if (raw.replications.empty()) {
    throw NonFiniteError("rollout: every replication produced a non-finite state");
  }
  return raw;
}

MomentTrajectories estimate_moments(const RawTrajectories& raw) {
  if (raw.replications.empty()) throw DatasetError("estimate_moments: no replications");
  const auto& first = raw.replications.front();
  MomentTrajectories mt{Mat::Zero(first.x1.rows(), first.x1.cols()),
                        Mat::Zero(first.u1.rows(), first.u1.cols()),
                        Mat::Zero(first.xbar.rows(), first.xbar.cols()),
                        Mat::Zero(first.ubar.rows(), first.ubar.cols())};
  // Fixed summation order keeps the moments bit-reproducible.
  for (const auto& r : raw.replications) {
    mt.dx += r.x1 - r.x2;
    mt.du += r.u1 - r.u2;
    mt.xbar += r.xbar;
    mt.ubar += r.ubar;
  }
  const double inv = 1.0 / static_cast<double>(raw.replications.size());
  mt.dx *= inv;
  mt.du *= inv;
  mt.xbar *= inv;
  mt.ubar *= inv;
  return mt;
}

void MomentTrajectories::validate() const {
  const auto rows = dx.rows();
  if (du.rows() != rows || xbar.rows() != rows || ubar.rows() != rows) {
    throw DimensionError("moments: trajectory lengths differ");
  }
  if (xbar.cols() != dx.cols() || ubar.cols() != du.cols()) {
    throw DimensionError("moments: state/input widths differ");
  }
  if (!dx.allFinite() || !du.allFinite() || !xbar.allFinite() || !ubar.allFinite()) {
    throw NonFiniteError("moments: non-finite entry");
  }
}

MomentTrajectories propagate_expected_moments(const SystemModel& model, const Mat& K0,
                                              const ExplorationSpec& exploration, const Vec& dx0,
                                              const Vec& xbar0, int l) {
  model.validate();
  check_gain_shape(model, K0, "K0");
  const int n = model.n();
  const int m = model.m();
  const int agents = exploration.agents();
  if (agents < 2) throw ConfigError("propagate_expected_moments: need at least two agents");
  const std::vector<Mat> xi = exploration_table(exploration, agents, m, l);

  MomentTrajectories mt{Mat(l, n), Mat(l, m), Mat(l, n), Mat(l, m)};
  Vec dx = dx0;
  Vec xb = xbar0;
  for (int k = 0; k < l; ++k) {
    const Vec du = -K0 * dx + (xi[k].col(0) - xi[k].col(1));
    const Vec ub = -K0 * xb + xi[k].rowwise().mean();
    mt.dx.row(k) = dx.transpose();
    mt.du.row(k) = du.transpose();
    mt.xbar.row(k) = xb.transpose();
    mt.ubar.row(k) = ub.transpose();
    dx = model.A * dx + model.B * du;
    xb = (model.A + model.G) * xb + model.B * ub;
  }
  return mt;
}

std::string meta_path(const std::string& dataset_path) { return dataset_path + ".meta"; }

void save_dataset(const Dataset& data, const std::string& path) {
  const auto& mt = data.moments;
  mt.validate();
  const int n = mt.n();
  const int m = mt.m();
  std::ofstream csv(path);
  if (!csv) throw DatasetError("cannot write dataset " + path);
  csv << csv_header(n, m) << '\n';
  for (int k = 0; k < mt.l(); ++k) {
    csv << k;
    for (int j = 0; j < n; ++j) csv << fmt::format(",{:.17g}", mt.dx(k, j));
    for (int j = 0; j < m; ++j) csv << fmt::format(",{:.17g}", mt.du(k, j));
    for (int j = 0; j < n; ++j) csv << fmt::format(",{:.17g}", mt.xbar(k, j));
    for (int j = 0; j < m; ++j) csv << fmt::format(",{:.17g}", mt.ubar(k, j));
    csv << '\n';
  }

  std::ofstream meta(meta_path(path));
  if (!meta) throw DatasetError("cannot write dataset metadata " + meta_path(path));
  const auto& md = data.meta;
  if (!md.config_hash.empty()) meta << "config_hash = " << md.config_hash << '\n';
  meta << "seed = " << md.seed << '\n'
       << "N = " << md.N << '\n'
       << "M = " << md.M << '\n'
       << "l = " << mt.l() << '\n'
       << "n = " << n << '\n'
       << "m = " << m << '\n'
       << "K0 =";
  for (Eigen::Index i = 0; i < md.K0.rows(); ++i)
    for (Eigen::Index j = 0; j < md.K0.cols(); ++j) meta << fmt::format(" {:.17g}", md.K0(i, j));
  meta << '\n';
}

Dataset load_dataset(const std::string& path) {
  std::ifstream meta(meta_path(path));
  if (!meta) throw DatasetError("cannot read dataset metadata " + meta_path(path));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DatasetError(std::string("dataset metadata missing key ") + key);
    return it->second;
  };

  Dataset d;
  try {
    d.meta.seed = std::stoull(get("seed"));
    d.meta.N = std::stoi(get("N"));
    d.meta.M = std::stoi(get("M"));
    d.meta.l = std::stoi(get("l"));
    d.meta.n = std::stoi(get("n"));
    d.meta.m = std::stoi(get("m"));
  } catch (const std::logic_error&) {
    throw DatasetError("dataset metadata: malformed integer field");
  }
  if (const auto it = kv.find("config_hash"); it != kv.end()) d.meta.config_hash = it->second;
  const int n = d.meta.n;
  const int m = d.meta.m;
  if (n < 1 || m < 1 || d.meta.l < 0) throw DatasetError("dataset metadata: bad dimensions");
  {
    std::stringstream ss(get("K0"));
    std::vector<double> vals;
    double v = 0.0;
    while (ss >> v) vals.push_back(v);
    if (vals.size() != static_cast<std::size_t>(n) * m) {
      throw DatasetError("dataset metadata: K0 must have m*n entries");
    }
    d.meta.K0 = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                               Eigen::RowMajor>>(vals.data(), m, n);
  }

  std::ifstream csv(path);
  if (!csv) throw DatasetError("cannot read dataset " + path);
  if (!std::getline(csv, line)) throw DatasetError("dataset: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header(n, m)) throw DatasetError("dataset: header does not match n/m metadata");

  const int l = d.meta.l;
  auto& mt = d.moments;
  mt = {Mat(l, n), Mat(l, m), Mat(l, n), Mat(l, m)};
  int k = 0;
  while (std::getline(csv, line)) {
    if (line.empty() || line == "\r") continue;
    const auto vals = split_csv(line);
    if (vals.size() != static_cast<std::size_t>(1 + 2 * n + 2 * m)) {
      throw DatasetError(fmt::format("dataset: row {} has {} fields", k, vals.size()));
    }
    if (k >= l) throw DatasetError("dataset: more rows than metadata l");
    if (vals[0] != k) throw DatasetError(fmt::format("dataset: row {} has index {}", k, vals[0]));
    std::size_t c = 1;
    for (int j = 0; j < n; ++j) mt.dx(k, j) = vals[c++];
    for (int j = 0; j < m; ++j) mt.du(k, j) = vals[c++];
    for (int j = 0; j < n; ++j) mt.xbar(k, j) = vals[c++];
    for (int j = 0; j < m; ++j) mt.ubar(k, j) = vals[c++];
    ++k;
  }
  if (k != l) throw DatasetError(fmt::format("dataset: expected {} rows, found {}", l, k));
  mt.validate();
  return d;
}

}  // namespace mfsc
