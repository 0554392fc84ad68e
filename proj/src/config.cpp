#include "rtnn/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rtnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Config, "key '" + key + "': expected a number, got '" + v + "'");
  }
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw Error(ErrorCode::Config, "key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::Config, "key '" + key + "': expected true or false, got '" + v + "'");
}

/// Binds every config key to a field, for parsing and serializing alike.
struct Binding {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::vector<Binding> bindings(RunConfig& c) {
  std::vector<Binding> b;
  auto dbl = [&](const std::string& key, double& ref) {
    b.push_back({key, [&ref] { return fmt_double(ref); }, [key, &ref](const std::string& v) { ref = parse_double(key, v); }});
  };
  auto num = [&](const std::string& key, int& ref) {
    b.push_back({key, [&ref] { return std::to_string(ref); }, [key, &ref](const std::string& v) { ref = parse_int<int>(key, v); }});
  };
  auto u64 = [&](const std::string& key, std::uint64_t& ref) {
    b.push_back({key, [&ref] { return std::to_string(ref); },
                 [key, &ref](const std::string& v) { ref = parse_int<std::uint64_t>(key, v); }});
  };
  auto str = [&](const std::string& key, std::string& ref) {
    b.push_back({key, [&ref] { return ref; }, [&ref](const std::string& v) { ref = v; }});
  };

  b.push_back({"problem", [&c] { return to_string(c.problem.kind); },
               [&c](const std::string& v) { c.problem.kind = parse_problem_kind(v); }});
  b.push_back({"hidden",
               [&c] {
                 std::string s;
                 for (std::size_t i = 0; i < c.hidden.size(); ++i) s += (i ? "," : "") + std::to_string(c.hidden[i]);
                 return s;
               },
               [&c](const std::string& v) {
                 c.hidden.clear();
                 std::stringstream ss(v);
                 std::string item;
                 while (std::getline(ss, item, ',')) c.hidden.push_back(parse_int<int>("hidden", trim(item)));
               }});
  u64("seed", c.seed);
  b.push_back({"identity_offset", [&c] { return std::string(c.identity_offset ? "true" : "false"); },
               [&c](const std::string& v) { c.identity_offset = parse_bool("identity_offset", v); }});
  num("interior", c.counts.interior);
  num("boundary", c.counts.boundary);
  num("initial", c.counts.initial);
  num("periodic", c.counts.periodic);
  u64("collocation_seed", c.collocation_seed);
  num("max_iters", c.optimizer.max_iters);
  num("memory", c.optimizer.memory);
  dbl("gtol", c.optimizer.gtol);
  dbl("ftol", c.optimizer.ftol);
  dbl("c1", c.optimizer.c1);
  dbl("c2", c.optimizer.c2);
  dbl("max_seconds", c.optimizer.max_seconds);
  dbl("w_interior", c.weights.interior);
  dbl("w_boundary", c.weights.boundary);
  dbl("w_initial", c.weights.initial);
  dbl("w_periodic", c.weights.periodic);
  num("chunk_size", c.chunk_size);
  str("output_dir", c.output_dir);
  str("validation_file", c.validation_file);
  num("validation_points", c.validation_points);
  u64("validation_seed", c.validation_seed);
  dbl("target_rel_l2", c.target_rel_l2);
  auto& e = c.problem.euler;
  dbl("euler.Lx", e.Lx);
  dbl("euler.Ly", e.Ly);
  dbl("euler.T", e.T);
  dbl("euler.gamma", e.gamma);
  dbl("euler.beta", e.beta);
  dbl("euler.xc", e.xc);
  dbl("euler.yc", e.yc);
  dbl("euler.rho_inf", e.rho_inf);
  dbl("euler.u_inf", e.u_inf);
  dbl("euler.v_inf", e.v_inf);
  dbl("euler.T_inf", e.T_inf);
  dbl("euler.kappa", e.kappa);
  dbl("beltrami.T", c.problem.beltrami.T);
  dbl("beltrami.nu", c.problem.beltrami.nu);
  dbl("mhd.L", c.problem.mhd.L);
  dbl("mhd.T", c.problem.mhd.T);
  dbl("mhd.nu", c.problem.mhd.nu);
  dbl("mhd.eta", c.problem.mhd.eta);
  return b;
}

}  // namespace

std::string RunConfig::serialize() const {
  RunConfig copy = *this;
  std::string out;
  for (const Binding& b : bindings(copy)) out += b.key + " = " + b.get() + "\n";
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  auto binds = bindings(c);
  std::map<std::string, const Binding*> by_key;
  for (const Binding& b : binds) by_key[b.key] = &b;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second->set(value);
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Config, "cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  RunConfig c = parse(ss.str());
  if (!c.validation_file.empty()) {
    std::filesystem::path v(c.validation_file);
    if (v.is_relative()) v = path.parent_path() / v;
    if (!std::filesystem::exists(v))
      throw Error(ErrorCode::Config, "validation file '" + v.string() + "' does not exist");
    c.validation_file = v.string();
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  try {
    problem.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  if (hidden.empty()) throw Error(ErrorCode::Config, "hidden must list at least one width");
  for (int w : hidden)
    if (w < 1) throw Error(ErrorCode::Config, "hidden widths must be >= 1");
  if (counts.interior < 1 || counts.initial < 1) throw Error(ErrorCode::Config, "collocation counts must be >= 1");
  if (problem.periodic() ? counts.periodic < 1 : counts.boundary < 1)
    throw Error(ErrorCode::Config, problem.periodic() ? "periodic count must be >= 1" : "boundary count must be >= 1");
  if (optimizer.max_iters < 0 || optimizer.memory < 1) throw Error(ErrorCode::Config, "invalid optimizer limits");
  if (!(optimizer.c1 > 0.0 && optimizer.c1 < optimizer.c2 && optimizer.c2 < 1.0))
    throw Error(ErrorCode::Config, "Wolfe constants need 0 < c1 < c2 < 1");
  if (chunk_size < 1) throw Error(ErrorCode::Config, "chunk_size must be >= 1");
  if (validation_points < 1) throw Error(ErrorCode::Config, "validation_points must be >= 1");
  if (output_dir.empty()) throw Error(ErrorCode::Config, "output_dir must not be empty");
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rtnn
