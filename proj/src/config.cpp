#include "mfsc/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "mfsc/errors.hpp"

namespace mfsc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> numbers(const std::string& key, const std::string& value) {
  std::string cleaned = value;
  for (char& c : cleaned)
    if (c == ',' || c == ';' || c == '[' || c == ']') c = ' ';
  std::stringstream ss(cleaned);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      throw ConfigError(fmt::format("config: key '{}': '{}' is not a number", key, tok));
    }
    out.push_back(v);
  }
  return out;
}

class Table {
 public:
  explicit Table(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  const std::string& raw(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("config: missing required key '" + key + "'");
    used_.insert(key);
    return it->second;
  }

  Mat matrix(const std::string& key, int rows, int cols) const {
    const auto v = numbers(key, raw(key));
    if (v.size() != static_cast<std::size_t>(rows) * cols) {
      throw ConfigError(fmt::format("config: key '{}' needs {}x{} = {} numbers, got {}", key, rows,
                                    cols, rows * cols, v.size()));
    }
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
    return m;
  }

  double real(const std::string& key) const { return matrix(key, 1, 1)(0, 0); }

  double real_or(const std::string& key, double fallback) const {
    return has(key) ? real(key) : fallback;
  }

  long long integer(const std::string& key) const {
    const std::string& s = raw(key);
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (trim(s.substr(pos)).empty()) return v;
    } catch (const std::logic_error&) {
    }
    throw ConfigError(fmt::format("config: key '{}' must be an integer, got '{}'", key, s));
  }

  int int_or(const std::string& key, int fallback) const {
    return has(key) ? static_cast<int>(integer(key)) : fallback;
  }

  void reject_unknown() const {
    for (const auto& [k, v] : kv_) {
      if (!used_.count(k)) throw ConfigError("config: unknown key '" + k + "'");
    }
  }

 private:
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> used_;
};

}  // namespace

RolloutConfig ProblemConfig::rollout() const {
  RolloutConfig rc;
  rc.N = N;
  rc.l = l;
  rc.M = M;
  rc.seed = seed;
  rc.K0 = K0;
  rc.x0_low = x0_low;
  rc.x0_high = x0_high;
  return rc;
}

ExplorationSpec ProblemConfig::exploration() const {
  return ExplorationSpec::draw(N, model.m(), explore_terms, explore_freq_low, explore_freq_high,
                               seed, explore_mode);
}

ProblemConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream in(text);
  std::string line;
  std::string pending_key;
  std::string pending_value;
  int lineno = 0;
  auto flush = [&]() {
    if (!pending_key.empty()) {
      if (kv.count(pending_key)) throw ConfigError("config: duplicate key '" + pending_key + "'");
      kv[pending_key] = trim(pending_value);
    }
    pending_key.clear();
    pending_value.clear();
  };
  bool continuing = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    bool cont = !line.empty() && line.back() == '\\';
    if (cont) line.pop_back();
    if (continuing) {
      pending_value += " " + line;
    } else if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(fmt::format("config: line {}: expected 'key = value'", lineno));
      }
      pending_key = trim(line.substr(0, eq));
      pending_value = line.substr(eq + 1);
      if (pending_key.empty()) throw ConfigError(fmt::format("config: line {}: empty key", lineno));
    }
    continuing = cont;
    if (!continuing) flush();
  }
  flush();

  const Table t(std::move(kv));
  ProblemConfig c;
  const long long n = t.integer("n");
  const long long m = t.integer("m");
  if (n < 1 || m < 1 || n > 100 || m > 100) throw ConfigError("config: n and m must be in [1, 100]");
  const int ni = static_cast<int>(n);
  const int mi = static_cast<int>(m);
  const long long agents = t.integer("N");
  if (agents < 2) throw ConfigError("config: N must be >= 2");
  c.N = static_cast<int>(agents);

  c.model.A = t.matrix("A", ni, ni);
  c.model.G = t.matrix("G", ni, ni);
  c.model.B = t.matrix("B", ni, mi);
  c.model.D = t.matrix("D", ni, ni);
  c.model.sigma2 = t.real("sigma2");
  try {
    c.model.validate();
    c.cost = CostSpec(SymMat::from_full(t.matrix("Q", ni, ni)),
                      SymMat::from_full(t.matrix("R", mi, mi)), t.matrix("Gamma", ni, ni));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.x0_low = t.matrix("x0_low", ni, 1);
  c.x0_high = t.matrix("x0_high", ni, 1);
  c.K0 = t.matrix("K0", mi, ni);
  c.Kbar0 = t.matrix("Kbar0", mi, ni);
  c.epsilon = t.real("epsilon");
  if (!(c.epsilon > 0.0)) throw ConfigError("config: epsilon must be positive");
  const long long seed = t.integer("seed");
  if (seed < 0) throw ConfigError("config: seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);

  c.l = t.int_or("l", c.l);
  c.M = t.int_or("M", c.M);
  c.max_iter = t.int_or("max_iter", c.max_iter);
  c.explore_terms = t.int_or("explore_terms", c.explore_terms);
  c.explore_freq_low = t.real_or("explore_freq_low", c.explore_freq_low);
  c.explore_freq_high = t.real_or("explore_freq_high", c.explore_freq_high);
  c.verify_tol = t.real_or("verify_tol", c.verify_tol);
  if (t.has("explore_mode")) {
    const std::string mode = trim(t.raw("explore_mode"));
    if (mode == "time") {
      c.explore_mode = ExplorationSpec::Mode::kTimeIndexed;
    } else if (mode == "constant") {
      c.explore_mode = ExplorationSpec::Mode::kConstant;
    } else {
      throw ConfigError("config: explore_mode must be 'time' or 'constant'");
    }
  }
  if (c.l < 0 || c.M < 1 || c.max_iter < 1 || c.explore_terms < 0) {
    throw ConfigError("config: l >= 0, M >= 1, max_iter >= 1, explore_terms >= 0 required");
  }
  t.reject_unknown();
  return c;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ProblemConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string content_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace mfsc
