#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rtnn/lbfgs.hpp"
#include "rtnn/physics.hpp"
#include "rtnn/training.hpp"

namespace rtnn {

/// Experiment configuration.
///
/// File format: one `key = value` per line, `#` starts a comment, blank lines
/// are ignored, lists are comma separated. Unknown keys are errors. Missing
/// keys keep their defaults. Keys:
///
///   problem              euler_vortex | beltrami | mhd2d
///   hidden               hidden widths, e.g. 32,32,32,32
///   seed                 network seed
///   identity_offset      true | false
///   interior, boundary, initial, periodic   collocation counts
///   collocation_seed
///   max_iters, memory, gtol, ftol, c1, c2, max_seconds   optimizer
///   w_interior, w_boundary, w_initial, w_periodic        loss weights
///   chunk_size           points per batched jet pass
///   output_dir           relative paths resolve against the output root
///   validation_file      CSV of coordinates and exact fields (optional)
///   validation_points, validation_seed   generated set when no file is given
///   target_rel_l2        pass threshold reported by eval
///   euler.* (Lx Ly T gamma beta xc yc rho_inf u_inf v_inf T_inf kappa)
///   beltrami.* (T nu), mhd.* (L T nu eta)
struct RunConfig {
  ProblemSpec problem;
  std::vector<int> hidden{32, 32, 32, 32};
  std::uint64_t seed = 0;
  bool identity_offset = true;
  CollocationCounts counts;
  std::uint64_t collocation_seed = 1;
  LbfgsOptions optimizer;
  LossWeights weights;
  int chunk_size = 256;
  std::string output_dir = "run";
  std::string validation_file;
  int validation_points = 2000;
  std::uint64_t validation_seed = 7;
  double target_rel_l2 = 1e-2;

  friend bool operator==(const RunConfig& a, const RunConfig& b) { return a.serialize() == b.serialize(); }

  /// Canonical text form; parse(serialize()) reproduces every field exactly.
  std::string serialize() const;
  static RunConfig parse(const std::string& text);
  /// Parses a file and resolves validation_file against its directory; a
  /// named validation file must exist.
  static RunConfig load(const std::filesystem::path& path);

  void validate() const;
};

/// 64-bit FNV-1a of a string, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace rtnn
