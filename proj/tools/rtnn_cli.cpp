#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "rtnn/config.hpp"
#include "rtnn/io.hpp"
#include "rtnn/version.hpp"

namespace fs = std::filesystem;
using namespace rtnn;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kNumericFailure = 2, kIoError = 3 };

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument: return kConfigError;
    case ErrorCode::Io: return kIoError;
    default: return kNumericFailure;
  }
}

fs::path output_root() {
  const char* env = std::getenv("RTNN_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::current_path();
}

fs::path resolve_output(const std::string& dir) {
  const fs::path p(dir);
  return p.is_absolute() ? p : output_root() / p;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + p.string() + "': " + ec.message());
}

/// Writes to `out` when given, otherwise to stdout.
void emit(const Json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    const fs::path p(out);
    if (p.has_parent_path()) ensure_dir(p.parent_path());
    write_json(p, j);
  }
}

/// Adds per_field_rel_l2 and mean_rel_l2 to `j`.
void put_rel_l2(Json& j, const RelativeL2& r) {
  Json per = Json::object();
  for (std::size_t f = 0; f < r.names.size(); ++f) per[r.names[f]] = r.per_field(static_cast<Eigen::Index>(f));
  j["per_field_rel_l2"] = per;
  j["mean_rel_l2"] = r.mean;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string compiler_id() {
#if defined(__clang__)
  return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  return std::string("gcc ") + __VERSION__;
#else
  return "unknown";
#endif
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- train

struct SeedOutcome {
  std::uint64_t seed = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  RelativeL2 rel;
  bool line_search_failed = false;
};

SeedOutcome train_one(const RunConfig& cfg, const ValidationSet& val, std::uint64_t seed, const fs::path& dir,
                      bool verbose) {
  const auto t0 = std::chrono::steady_clock::now();
  RtnnModel model(cfg.problem, cfg.hidden, seed, cfg.identity_offset);
  const CollocationSet colloc = sample_collocation(cfg.problem, cfg.counts, cfg.collocation_seed);
  const RtnnLoss loss = RtnnLoss::for_problem(model, colloc, cfg.weights, cfg.chunk_size);
  const double initial_loss = loss.value(model.parameters());
  if (!std::isfinite(initial_loss)) throw Error(ErrorCode::NonFinite, "initial loss is not finite");

  ensure_dir(dir);
  HistoryCsvWriter history(dir / "history.csv");
  const LbfgsResult res = minimize(loss, model.parameters(), cfg.optimizer, [&](const IterationRecord& r) {
    history.write(r);
    if (verbose && r.iter % 100 == 0)
      std::cerr << "seed " << seed << " iter " << r.iter << " loss " << r.loss << " |g| " << r.grad_norm << "\n";
  });
  if (!std::isfinite(res.loss)) throw Error(ErrorCode::NonFinite, "final loss is not finite");
  model.set_parameters(res.x);
  save_checkpoint(model, dir / "checkpoint.json");

  const RelativeL2 rl = relative_l2(model.predict_fields(val.points), val.fields, val.names);
  const std::vector<double> groups = loss.group_values(res.x);
  Json group_json = Json::object();
  for (std::size_t g = 0; g < groups.size(); ++g) group_json[loss.groups()[g].name] = groups[g];

  Json metrics = {{"problem", to_string(cfg.problem.kind)},
                  {"seed", seed},
                  {"iterations", res.iterations},
                  {"termination", to_string(res.reason)},
                  {"initial_loss", initial_loss},
                  {"final_loss", res.loss},
                  {"loss_drop", initial_loss / res.loss},
                  {"loss_groups", group_json},
                  {"loss_history", "history.csv"}};
  put_rel_l2(metrics, rl);
  metrics["target_rel_l2"] = cfg.target_rel_l2;
  metrics["meets_target"] = rl.mean <= cfg.target_rel_l2;
  write_json(dir / "metrics.json", metrics);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Json manifest = {{"tool", "rtnn"},
                   {"version", kVersion},
                   {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                         "." + std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", compiler_id()},
                   {"started_utc", utc_now()},
                   {"config_hash", fnv1a_hex(cfg.serialize())},
                   {"config", cfg.serialize()},
                   {"seeds",
                    {{"network", seed},
                     {"potential", cfg.problem.has_potential() ? Json(seed + 1) : Json(nullptr)},
                     {"collocation", cfg.collocation_seed},
                     {"validation", cfg.validation_file.empty() ? Json(cfg.validation_seed) : Json(nullptr)}}},
                   {"validation_source", cfg.validation_file.empty() ? "generated" : cfg.validation_file},
                   {"parameter_count", model.parameter_count()},
                   {"iterations", res.iterations},
                   {"evaluations", res.state.evaluations},
                   {"termination", to_string(res.reason)},
                   {"line_search_failed", res.line_search_failed},
                   {"wall_seconds", wall}};
  write_json(dir / "manifest.json", manifest);

  std::cout << "seed " << seed << ": loss " << format_double(initial_loss) << " -> " << format_double(res.loss)
            << " in " << res.iterations << " iterations (" << to_string(res.reason) << "), mean rel-L2 "
            << format_double(rl.mean) << "\n";
  return {seed, initial_loss, res.loss, rl, res.line_search_failed};
}

int cmd_train(const std::string& config_path, int seeds, bool verbose) {
  if (seeds < 1) throw Error(ErrorCode::Config, "--seeds must be >= 1");
  const RunConfig cfg = RunConfig::load(config_path);
  cfg.validate();
  const ValidationSet val = cfg.validation_file.empty()
                                ? make_validation_set(cfg.problem, cfg.validation_points, cfg.validation_seed)
                                : read_validation_csv(cfg.validation_file, cfg.problem.dim());
  if (val.names != cfg.problem.field_names())
    throw Error(ErrorCode::Config, "validation file fields do not match the problem");

  const fs::path out = resolve_output(cfg.output_dir);
  if (seeds == 1) {
    train_one(cfg, val, cfg.seed, out, verbose);
    return kOk;
  }
  std::vector<SeedOutcome> runs;
  for (int k = 0; k < seeds; ++k) {
    const std::uint64_t s = cfg.seed + static_cast<std::uint64_t>(k);
    runs.push_back(train_one(cfg, val, s, out / ("seed_" + std::to_string(s)), verbose));
  }
  Json per = Json::array();
  std::vector<double> rel, drop, fin;
  for (const auto& r : runs) {
    Json entry = {{"seed", r.seed},
                  {"initial_loss", r.initial_loss},
                  {"final_loss", r.final_loss},
                  {"loss_drop", r.initial_loss / r.final_loss}};
    put_rel_l2(entry, r.rel);
    entry["line_search_failed"] = r.line_search_failed;
    per.push_back(entry);
    rel.push_back(r.rel.mean);
    drop.push_back(r.initial_loss / r.final_loss);
    fin.push_back(r.final_loss);
  }
  Json per_field = Json::object();
  for (std::size_t f = 0; f < val.names.size(); ++f) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.rel.per_field(static_cast<Eigen::Index>(f)));
    per_field[val.names[f]] = median(v);
  }
  const Json summary = {{"problem", to_string(cfg.problem.kind)},
                        {"config_hash", fnv1a_hex(cfg.serialize())},
                        {"seeds", per},
                        {"median",
                         {{"mean_rel_l2", median(rel)},
                          {"per_field_rel_l2", per_field},
                          {"loss_drop", median(drop)},
                          {"final_loss", median(fin)}}},
                        {"target_rel_l2", cfg.target_rel_l2},
                        {"meets_target", median(rel) <= cfg.target_rel_l2}};
  write_json(out / "summary.json", summary);
  std::cout << "median mean rel-L2 over " << seeds << " seeds: " << format_double(median(rel)) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& checkpoint, const std::string& predictions, const std::string& validation,
             int points, std::uint64_t seed, double target, const std::string& out) {
  if (checkpoint.empty() == predictions.empty())
    throw Error(ErrorCode::Config, "eval needs exactly one of --checkpoint or --predictions");
  Json j;
  RelativeL2 rl;
  if (!checkpoint.empty()) {
    const RtnnModel model = load_checkpoint(checkpoint);
    const ValidationSet val = validation.empty() ? make_validation_set(model.problem(), points, seed)
                                                 : read_validation_csv(validation, model.problem().dim());
    if (val.names != model.problem().field_names())
      throw Error(ErrorCode::Config, "validation fields do not match the checkpoint problem");
    rl = relative_l2(model.predict_fields(val.points), val.fields, val.names);
    j["problem"] = to_string(model.problem().kind);
    j["points"] = val.points.cols();
  } else {
    if (validation.empty()) throw Error(ErrorCode::Config, "--predictions needs --validation");
    const ValidationSet exact = read_validation_csv(validation, -1);
    const ValidationSet pred = read_validation_csv(predictions, static_cast<int>(exact.points.rows()));
    if (pred.names != exact.names || pred.points != exact.points)
      throw Error(ErrorCode::Config, "prediction and validation files list different points or fields");
    rl = relative_l2(pred.fields, exact.fields, exact.names);
    j["points"] = exact.points.cols();
  }
  put_rel_l2(j, rl);
  if (target > 0.0) {
    j["target_rel_l2"] = target;
    j["meets_target"] = rl.mean <= target;
  }
  emit(j, out);
  return kOk;
}

// ---------------------------------------------------------------- check

Json basis_json(int dim) {
  const TwoFormBasis forms = enumerate_two_forms(dim);
  Json pairs = Json::array();
  for (const auto& p : forms.pairs()) pairs.push_back({p.p, p.q});
  Json entries = Json::array();
  for (const auto& t : build_riemann_basis(forms))
    for (const auto& [q, v] : t.entries())
      entries.push_back({{"i", t.slot().i}, {"j", t.slot().j}, {"quadruple", q}, {"coefficient", v}});
  return {{"dim", dim}, {"two_forms", pairs}, {"entries", entries}};
}

double sigma_dev_norm(const RtnnModel& m, const Eigen::VectorXd& x) {
  const DfstSample s = m.sample(x);
  switch (m.problem().kind) {
    case ProblemKind::EulerVortex: return extract_euler<double>(s.S, m.problem().euler.gamma).sigma_dev.norm();
    case ProblemKind::Beltrami: return extract_ns<double>(s.S).sigma_dev.norm();
    case ProblemKind::Mhd2d: return extract_mhd(s, m.potential(), x).sigma_dev.norm();
  }
  return 0.0;
}

/// Regular space-time grid with `n` nodes per axis: coordinates, fields, |sigma_dev|_F, max |div S| (FD).
void dump_fields(const RtnnModel& m, int n, double h, const fs::path& path) {
  if (n < 2) throw Error(ErrorCode::Config, "--resolution must be >= 2");
  const ProblemSpec& p = m.problem();
  const Box box = p.domain();
  const int N = p.dim();
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  std::vector<std::string> cols = coordinate_names(N);
  for (const auto& f : p.field_names()) cols.push_back(f);
  cols.push_back("sigma_dev_norm");
  cols.push_back("div_fd");
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << "\n";
  long total = 1;
  for (int i = 0; i < N; ++i) total *= n;
  for (long flat = 0; flat < total; ++flat) {
    Eigen::VectorXd x(N);
    long rem = flat;
    for (int i = N - 1; i >= 0; --i) {
      x(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * static_cast<double>(rem % n) / (n - 1);
      rem /= n;
    }
    for (int i = 0; i < N; ++i) out << (i ? "," : "") << format_double(x(i));
    Eigen::VectorXd f = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p.field_names().size()), std::nan(""));
    double dev = std::nan("");
    try {
      f = m.predict_fields(x);
      dev = sigma_dev_norm(m, x);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DensityUnderflow) throw;
    }
    for (Eigen::Index k = 0; k < f.size(); ++k) out << "," << format_double(f(k));
    out << "," << format_double(dev) << ","
        << format_double(divergence_fd(m.net(), m.plan(), x, h, m.identity_offset()).cwiseAbs().maxCoeff()) << "\n";
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

int cmd_check(const std::string& checkpoint, int npoints, double h, double h2, std::uint64_t seed,
              const std::string& out, const std::string& dump_basis, const std::string& fields_csv, int resolution) {
  const RtnnModel model = load_checkpoint(checkpoint);
  if (npoints < 1) throw Error(ErrorCode::Config, "--points must be >= 1");
  if (!(h > 0.0 && h2 > 0.0)) throw Error(ErrorCode::Config, "step sizes must be positive");
  const ProblemSpec& p = model.problem();
  const Box box = p.domain();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  double sym = 0.0, s00 = 0.0, div1 = 0.0, div2 = 0.0, equiv = 0.0, divB = 0.0;
  bool equiv_ok = true;
  for (int k = 0; k < npoints; ++k) {
    Eigen::VectorXd x(p.dim());
    for (int i = 0; i < p.dim(); ++i) {
      // 2h margin from the box faces.
      const double m = 2.0 * std::max(h, h2);
      x(i) = box.lo(i) + m + (box.hi(i) - box.lo(i) - 2.0 * m) * u(rng);
    }
    const Eigen::MatrixXd S = model.tensor(x);
    sym = std::max(sym, (S - S.transpose()).cwiseAbs().maxCoeff());
    if (p.incompressible()) s00 = std::max(s00, std::abs(S(0, 0) - 1.0));
    div1 = std::max(div1, divergence_fd(model.net(), model.plan(), x, h, model.identity_offset()).cwiseAbs().maxCoeff());
    div2 = std::max(div2, divergence_fd(model.net(), model.plan(), x, h2, model.identity_offset()).cwiseAbs().maxCoeff());
    try {
      equiv = std::max(equiv, momentum_equivalence_check(model.net(), model.plan(), model.identity_offset(), x, h));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DensityUnderflow) throw;
      equiv_ok = false;
    }
    if (model.has_potential()) {
      const auto B = [&](const Eigen::VectorXd& y) {
        const auto in = seed_jets<1>(y);
        const auto psi = forward_jet<1>(model.potential(), std::span<const Jet<double, 1>>(in))[0];
        return Eigen::Vector2d(psi.d(2), -psi.d(1));
      };
      double d = 0.0;
      for (int a = 0; a < 2; ++a) {
        Eigen::VectorXd xp = x, xm = x;
        xp(a + 1) += h;
        xm(a + 1) -= h;
        d += (B(xp)(a) - B(xm)(a)) / (2.0 * h);
      }
      divB = std::max(divB, std::abs(d));
    }
  }

  Json j = {{"problem", to_string(p.kind)},
            {"points", npoints},
            {"symmetry_defect", sym},
            {"s00_defect", p.incompressible() ? Json(s00) : Json(nullptr)},
            {"divergence", {{"h", h}, {"max", div1}}},
            {"divergence_h2", {{"h", h2}, {"max", div2}}},
            {"divergence_ratio", div2 > 0.0 ? Json(div1 / div2) : Json(nullptr)},
            {"expected_ratio", (h / h2) * (h / h2)},
            {"equivalence_residual", equiv_ok ? Json(equiv) : Json(nullptr)},
            {"magnetic_divergence", model.has_potential() ? Json(divB) : Json(nullptr)}};
  emit(j, out);
  if (!dump_basis.empty()) emit(basis_json(p.dim()), dump_basis);
  if (!fields_csv.empty()) dump_fields(model, resolution, h, fields_csv);
  return kOk;
}

// ---------------------------------------------------------------- oracle

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, "bad number '" + item + "'");
    }
  }
  return out;
}

int cmd_oracle(const std::string& grid, const std::string& shape_s, const std::string& lengths_s, int modes,
               std::uint64_t seed, bool offset, double gate, const std::string& write, const std::string& out) {
  PeriodicGridField S;
  if (!grid.empty()) {
    S = read_grid_binary(grid);
  } else {
    if (shape_s.empty()) throw Error(ErrorCode::Config, "oracle needs --grid or --synthesize SHAPE");
    std::vector<int> shape;
    for (double v : parse_doubles(shape_s)) shape.push_back(static_cast<int>(v));
    std::vector<double> lengths = lengths_s.empty() ? std::vector<double>(shape.size(), 1.0) : parse_doubles(lengths_s);
    if (lengths.size() != shape.size()) throw Error(ErrorCode::Config, "--lengths must match --synthesize");
    S = synthesize_assembled_grid(shape, lengths, modes, seed, offset);
    if (!write.empty()) {
      const fs::path w(write);
      if (w.has_parent_path()) ensure_dir(w.parent_path());
      if (w.extension() == ".csv") write_grid_csv(w, S);
      else write_grid_binary(w, S);
    }
  }
  Json j = {{"shape", S.shape()}, {"lengths", S.lengths()}, {"divergence_gate", gate}};
  try {
    const RepresentationReport r = verify_representation(S, gate);
    Json means = Json::array();
    for (Eigen::Index a = 0; a < r.means.rows(); ++a) {
      Json row = Json::array();
      for (Eigen::Index b = 0; b < r.means.cols(); ++b) row.push_back(r.means(a, b));
      means.push_back(row);
    }
    j["accepted"] = true;
    j["relative_error"] = r.relative_error;
    j["divergence"] = r.divergence;
    j["k_symmetries"] = r.k_symmetries;
    j["poisson_residual"] = r.poisson_residual;
    j["means"] = means;
    emit(j, out);
    return kOk;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RejectedInput) throw;
    j["accepted"] = false;
    j["reason"] = e.what();
    emit(j, out);
    return kNumericFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemann-tensor neural network experiments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model from a config file");
  std::string config;
  int seeds = 1;
  bool verbose = false;
  train->add_option("config", config, "config file")->required();
  train->add_option("--seeds", seeds, "number of consecutive network seeds");
  train->add_flag("-v,--verbose", verbose, "progress every 100 iterations on stderr");

  auto* eval = app.add_subcommand("eval", "relative L2 error against a validation set");
  std::string checkpoint, predictions, validation, out;
  int points = 2000;
  std::uint64_t seed = 7;
  double target = 0.0;
  eval->add_option("--checkpoint", checkpoint, "trained checkpoint");
  eval->add_option("--predictions", predictions, "CSV of predicted fields");
  eval->add_option("--validation", validation, "CSV of exact fields");
  eval->add_option("--points", points, "generated validation points");
  eval->add_option("--seed", seed, "generated validation seed");
  eval->add_option("--target", target, "rel-L2 pass threshold");
  eval->add_option("-o,--out", out, "report file (stdout if omitted)");

  auto* check = app.add_subcommand("check", "structural audit of a checkpoint");
  int npoints = 100;
  double h = 1e-2, h2 = 5e-3;
  std::uint64_t check_seed = 0;
  std::string dump_basis, check_out, fields_csv;
  int resolution = 16;
  check->add_option("checkpoint", checkpoint, "checkpoint")->required();
  check->add_option("--points", npoints, "random interior points");
  check->add_option("--step", h, "finite-difference step");
  check->add_option("--step2", h2, "second step of the sweep");
  check->add_option("--seed", check_seed, "point sampling seed");
  check->add_option("--dump-basis", dump_basis, "write the tensor basis as JSON");
  check->add_option("--dump-fields", fields_csv, "write a field-grid CSV");
  check->add_option("--resolution", resolution, "grid nodes per axis for --dump-fields");
  check->add_option("-o,--out", check_out, "report file (stdout if omitted)");

  auto* oracle = app.add_subcommand("oracle", "representation round trip on a periodic grid");
  std::string grid, shape_s, lengths_s, write, oracle_out;
  int modes = 3;
  std::uint64_t oracle_seed = 0;
  bool no_offset = false;
  double gate = kDivergenceGate;
  oracle->add_option("--grid", grid, "binary grid file");
  oracle->add_option("--synthesize", shape_s, "synthesize an assembled grid of this shape, e.g. 64,64");
  oracle->add_option("--lengths", lengths_s, "periods per axis");
  oracle->add_option("--modes", modes, "largest wavenumber of the synthetic coefficients");
  oracle->add_option("--seed", oracle_seed, "synthesis seed");
  oracle->add_flag("--no-offset", no_offset, "omit the identity offset");
  oracle->add_option("--gate", gate, "divergence gate");
  oracle->add_option("--write", write, "save the synthesized grid (.bin or .csv)");
  oracle->add_option("-o,--out", oracle_out, "report file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) return cmd_train(config, seeds, verbose);
    if (*eval) return cmd_eval(checkpoint, predictions, validation, points, seed, target, out);
    if (*check) return cmd_check(checkpoint, npoints, h, h2, check_seed, check_out, dump_basis, fields_csv, resolution);
    if (*oracle)
      return cmd_oracle(grid, shape_s, lengths_s, modes, oracle_seed, !no_offset, gate, write, oracle_out);
  } catch (const Error& e) {
    Json err = {{"error", to_string(e.code())}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << Json({{"error", "internal"}, {"message", e.what()}}).dump() << "\n";
    return kNumericFailure;
  }
  return kOk;
}
