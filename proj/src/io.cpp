#include "rtnn/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace rtnn {

namespace {

Json vector_to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const Json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

Json network_to_json(const CoefficientNetwork& net) {
  Json j;
  j["widths"] = net.widths();
  j["seed"] = net.seed();
  j["input_offset"] = vector_to_json(net.input_offset());
  j["input_scale"] = vector_to_json(net.input_scale());
  j["parameters"] = vector_to_json(net.parameters());
  return j;
}

CoefficientNetwork network_from_json(const Json& j) {
  CoefficientNetwork net(j.at("widths").get<std::vector<int>>(), j.at("seed").get<std::uint64_t>());
  net.set_input_normalization(vector_from_json(j.at("input_offset")), vector_from_json(j.at("input_scale")));
  net.set_parameters(vector_from_json(j.at("parameters")));
  return net;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && (item.back() == '\r' || item.back() == ' ')) item.pop_back();
    out.push_back(item);
  }
  return out;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  return f;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream f(path, mode);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  return f;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json problem_to_json(const ProblemSpec& p) {
  Json j;
  j["id"] = to_string(p.kind);
  switch (p.kind) {
    case ProblemKind::EulerVortex: {
      const auto& e = p.euler;
      j["params"] = {{"Lx", e.Lx},         {"Ly", e.Ly},       {"T", e.T},         {"gamma", e.gamma},
                     {"beta", e.beta},     {"xc", e.xc},       {"yc", e.yc},       {"rho_inf", e.rho_inf},
                     {"u_inf", e.u_inf},   {"v_inf", e.v_inf}, {"T_inf", e.T_inf}, {"kappa", e.kappa}};
      break;
    }
    case ProblemKind::Beltrami: j["params"] = {{"T", p.beltrami.T}, {"nu", p.beltrami.nu}}; break;
    case ProblemKind::Mhd2d:
      j["params"] = {{"L", p.mhd.L}, {"T", p.mhd.T}, {"nu", p.mhd.nu}, {"eta", p.mhd.eta}};
      break;
  }
  return j;
}

ProblemSpec problem_from_json(const Json& j) {
  ProblemSpec p;
  p.kind = parse_problem_kind(j.at("id").get<std::string>());
  const Json& q = j.at("params");
  switch (p.kind) {
    case ProblemKind::EulerVortex: {
      auto& e = p.euler;
      e.Lx = q.at("Lx");
      e.Ly = q.at("Ly");
      e.T = q.at("T");
      e.gamma = q.at("gamma");
      e.beta = q.at("beta");
      e.xc = q.at("xc");
      e.yc = q.at("yc");
      e.rho_inf = q.at("rho_inf");
      e.u_inf = q.at("u_inf");
      e.v_inf = q.at("v_inf");
      e.T_inf = q.at("T_inf");
      e.kappa = q.at("kappa");
      break;
    }
    case ProblemKind::Beltrami:
      p.beltrami.T = q.at("T");
      p.beltrami.nu = q.at("nu");
      break;
    case ProblemKind::Mhd2d:
      p.mhd.L = q.at("L");
      p.mhd.T = q.at("T");
      p.mhd.nu = q.at("nu");
      p.mhd.eta = q.at("eta");
      break;
  }
  return p;
}

Json checkpoint_to_json(const RtnnModel& model) {
  Json j;
  j["format"] = "rtnn-checkpoint";
  j["version"] = kCheckpointVersion;
  j["problem"] = problem_to_json(model.problem());
  j["dim"] = model.plan().dim();
  j["identity_offset"] = model.identity_offset();
  Json slots = Json::array();
  for (const Slot& s : model.plan().slots()) slots.push_back({s.i, s.j});
  j["slots"] = slots;
  j["network"] = network_to_json(model.net());
  j["potential"] = model.has_potential() ? network_to_json(model.potential()) : Json(nullptr);
  return j;
}

RtnnModel checkpoint_from_json(const Json& j) {
  try {
    if (j.at("format") != "rtnn-checkpoint") throw Error(ErrorCode::Io, "not an rtnn checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw Error(ErrorCode::Io, "unsupported checkpoint version " + j.at("version").dump());
    const ProblemSpec problem = problem_from_json(j.at("problem"));
    const int dim = j.at("dim").get<int>();
    std::vector<Slot> slots;
    for (const Json& s : j.at("slots")) slots.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    AssemblyPlan plan(enumerate_two_forms(dim), std::move(slots));
    std::optional<CoefficientNetwork> potential;
    if (!j.at("potential").is_null()) potential = network_from_json(j.at("potential"));
    return RtnnModel(problem, std::move(plan), j.at("identity_offset").get<bool>(), network_from_json(j.at("network")),
                     std::move(potential));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const RtnnModel& model, const std::filesystem::path& path) {
  write_json(path, checkpoint_to_json(model));
}

RtnnModel load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_json(path)); }

Json read_json(const std::filesystem::path& path) {
  auto f = open_in(path);
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, "cannot parse '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  auto f = open_out(path);
  f << j.dump(2) << "\n";
  if (!f) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

HistoryCsvWriter::HistoryCsvWriter(const std::filesystem::path& path) : out_(open_out(path)) {
  out_ << kHistoryHeader << "\n";
}

void HistoryCsvWriter::write(const IterationRecord& r) {
  out_ << r.iter << "," << format_double(r.loss) << "," << format_double(r.grad_norm) << "," << format_double(r.step)
       << "," << format_double(r.wall_seconds) << "\n";
  out_.flush();
}

std::vector<IterationRecord> read_history_csv(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::string line;
  std::getline(f, line);
  if (line != kHistoryHeader) throw Error(ErrorCode::Io, "unexpected history header in '" + path.string() + "'");
  std::vector<IterationRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != 5) throw Error(ErrorCode::Io, "malformed history row");
    out.push_back({std::stoi(cols[0]), std::stod(cols[1]), std::stod(cols[2]), std::stod(cols[3]), std::stod(cols[4])});
  }
  return out;
}

std::vector<std::string> coordinate_names(int dim) {
  static const char* names[] = {"t", "x", "y", "z"};
  if (dim < 1 || dim > 4) throw Error(ErrorCode::InvalidDimension, "coordinate names exist for N <= 4");
  return {names, names + dim};
}

void write_validation_csv(const std::filesystem::path& path, const ValidationSet& v) {
  auto f = open_out(path);
  const auto coords = coordinate_names(static_cast<int>(v.points.rows()));
  std::string header;
  for (const auto& c : coords) header += c + ",";
  for (std::size_t i = 0; i < v.names.size(); ++i) header += v.names[i] + (i + 1 < v.names.size() ? "," : "");
  f << header << "\n";
  for (Eigen::Index p = 0; p < v.points.cols(); ++p) {
    std::string row;
    for (Eigen::Index k = 0; k < v.points.rows(); ++k) row += format_double(v.points(k, p)) + ",";
    for (Eigen::Index k = 0; k < v.fields.rows(); ++k)
      row += format_double(v.fields(k, p)) + (k + 1 < v.fields.rows() ? "," : "");
    f << row << "\n";
  }
}

ValidationSet read_validation_csv(const std::filesystem::path& path, int dim) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorCode::Io, "empty validation file '" + path.string() + "'");
  const auto header = split_csv(line);
  if (dim < 0) {
    const auto all = coordinate_names(4);
    dim = 0;
    while (dim < 4 && static_cast<std::size_t>(dim) < header.size() && header[static_cast<std::size_t>(dim)] == all[static_cast<std::size_t>(dim)]) ++dim;
    if (dim == 0) throw Error(ErrorCode::Io, "validation file does not start with coordinate columns");
  }
  const auto coords = coordinate_names(dim);
  if (header.size() <= coords.size()) throw Error(ErrorCode::Io, "validation file has no field columns");
  for (std::size_t k = 0; k < coords.size(); ++k)
    if (header[k] != coords[k]) throw Error(ErrorCode::Io, "validation column " + std::to_string(k) + " should be '" + coords[k] + "'");
  ValidationSet v;
  v.names.assign(header.begin() + static_cast<std::ptrdiff_t>(coords.size()), header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    if (cols.size() != header.size()) throw Error(ErrorCode::Io, "validation row has the wrong column count");
    std::vector<double> r;
    for (const auto& c : cols) {
      try {
        r.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw Error(ErrorCode::Io, "validation value '" + c + "' is not a number");
      }
    }
    rows.push_back(std::move(r));
  }
  const auto P = static_cast<Eigen::Index>(rows.size());
  v.points.resize(dim, P);
  v.fields.resize(static_cast<Eigen::Index>(v.names.size()), P);
  for (Eigen::Index p = 0; p < P; ++p) {
    const auto& r = rows[static_cast<std::size_t>(p)];
    for (int k = 0; k < dim; ++k) v.points(k, p) = r[static_cast<std::size_t>(k)];
    for (Eigen::Index k = 0; k < v.fields.rows(); ++k) v.fields(k, p) = r[static_cast<std::size_t>(dim + k)];
  }
  return v;
}

namespace {
constexpr char kGridMagic[8] = {'R', 'T', 'N', 'N', 'G', 'R', 'I', 'D'};
constexpr std::uint32_t kGridVersion = 1;

template <typename T>
void put(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw Error(ErrorCode::Io, "truncated grid file");
  return v;
}
}  // namespace

void write_grid_binary(const std::filesystem::path& path, const PeriodicGridField& g) {
  auto f = open_out(path, std::ios::out | std::ios::binary);
  f.write(kGridMagic, sizeof kGridMagic);
  put<std::uint32_t>(f, kGridVersion);
  put<std::uint32_t>(f, static_cast<std::uint32_t>(g.dim()));
  for (int n : g.shape()) put<std::uint64_t>(f, static_cast<std::uint64_t>(n));
  for (double l : g.lengths()) put<double>(f, l);
  put<std::uint32_t>(f, static_cast<std::uint32_t>(g.component_count()));
  for (const auto& c : g.components())
    f.write(reinterpret_cast<const char*>(c.data()), static_cast<std::streamsize>(c.size() * sizeof(double)));
  if (!f) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

PeriodicGridField read_grid_binary(const std::filesystem::path& path) {
  auto f = open_in(path, std::ios::in | std::ios::binary);
  char magic[8];
  f.read(magic, sizeof magic);
  if (!f || std::memcmp(magic, kGridMagic, sizeof magic) != 0)
    throw Error(ErrorCode::Io, "'" + path.string() + "' is not a grid container");
  if (get<std::uint32_t>(f) != kGridVersion) throw Error(ErrorCode::Io, "unsupported grid container version");
  const auto ndim = get<std::uint32_t>(f);
  if (ndim < 2 || ndim > 4) throw Error(ErrorCode::Io, "grid dimension must be 2..4");
  std::vector<int> shape;
  std::vector<double> lengths;
  for (std::uint32_t k = 0; k < ndim; ++k) {
    const auto n = get<std::uint64_t>(f);
    if (n < 2 || n > (1u << 20)) throw Error(ErrorCode::Io, "implausible grid size");
    shape.push_back(static_cast<int>(n));
  }
  for (std::uint32_t k = 0; k < ndim; ++k) lengths.push_back(get<double>(f));
  PeriodicGridField g(shape, lengths);
  if (get<std::uint32_t>(f) != static_cast<std::uint32_t>(g.component_count()))
    throw Error(ErrorCode::Io, "component count does not match a symmetric tensor");
  for (auto& c : g.components()) {
    f.read(reinterpret_cast<char*>(c.data()), static_cast<std::streamsize>(c.size() * sizeof(double)));
    if (!f) throw Error(ErrorCode::Io, "truncated grid data");
  }
  return g;
}

void write_grid_csv(const std::filesystem::path& path, const PeriodicGridField& g) {
  auto f = open_out(path);
  const auto coords = coordinate_names(g.dim());
  std::string header;
  for (const auto& c : coords) header += c + ",";
  for (int a = 0; a < g.dim(); ++a)
    for (int b = a; b < g.dim(); ++b) header += "S" + std::to_string(a) + std::to_string(b) + ",";
  header.pop_back();
  f << header << "\n";
  for (Eigen::Index p = 0; p < g.point_count(); ++p) {
    const Eigen::VectorXd x = g.coordinates(p);
    std::string row;
    for (Eigen::Index k = 0; k < x.size(); ++k) row += format_double(x(k)) + ",";
    for (const auto& c : g.components()) row += format_double(c(p)) + ",";
    row.pop_back();
    f << row << "\n";
  }
}

}  // namespace rtnn
