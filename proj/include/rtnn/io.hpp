#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtnn/lbfgs.hpp"
#include "rtnn/oracle.hpp"
#include "rtnn/physics.hpp"
#include "rtnn/training.hpp"

namespace rtnn {

using Json = nlohmann::ordered_json;

inline constexpr int kCheckpointVersion = 1;

Json problem_to_json(const ProblemSpec& p);
ProblemSpec problem_from_json(const Json& j);

/// JSON checkpoint: problem, slot map, identity flag and every network with its
/// widths, seed, input normalization and flat parameters. Doubles are written
/// in shortest round-trip form, so load(save(m)) is bit-identical.
Json checkpoint_to_json(const RtnnModel& model);
RtnnModel checkpoint_from_json(const Json& j);
void save_checkpoint(const RtnnModel& model, const std::filesystem::path& path);
RtnnModel load_checkpoint(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// Header of the loss-history CSV.
inline constexpr const char* kHistoryHeader = "iter,loss,grad_norm,step,wall_seconds";

/// Streams optimizer history rows as they arrive.
class HistoryCsvWriter {
 public:
  explicit HistoryCsvWriter(const std::filesystem::path& path);
  void write(const IterationRecord& r);

 private:
  std::ofstream out_;
};

std::vector<IterationRecord> read_history_csv(const std::filesystem::path& path);

/// Coordinate names for an N-dimensional space-time point: t, x, y[, z].
std::vector<std::string> coordinate_names(int dim);

/// Validation CSV: coordinate columns then one column per field.
void write_validation_csv(const std::filesystem::path& path, const ValidationSet& v);
/// A negative `dim` infers the coordinate count from the header.
ValidationSet read_validation_csv(const std::filesystem::path& path, int dim);

/// Binary grid container (native little-endian):
///   char[8] "RTNNGRID", u32 version, u32 ndim, u64 shape[ndim],
///   f64 lengths[ndim], u32 ncomp, f64 data[ncomp][points]
/// with components in upper-triangle order and points row-major.
void write_grid_binary(const std::filesystem::path& path, const PeriodicGridField& g);
PeriodicGridField read_grid_binary(const std::filesystem::path& path);
/// CSV with coordinate columns and S_ab (a <= b) columns.
void write_grid_csv(const std::filesystem::path& path, const PeriodicGridField& g);

/// Plain float formatting with 17 significant digits.
std::string format_double(double v);

}  // namespace rtnn
