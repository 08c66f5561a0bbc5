#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tubelab/geometry.hpp"
#include "tubelab/semigroup.hpp"

namespace tubelab {

inline constexpr const char* kVersion = "1.0.0";

struct ModelConfig {
  std::string kind = "circle";  // circle | curve | synthetic
  double radius = 1.0;
  // curve: profile names "constant" or "ellipse", or sampled arrays
  std::string profile = "constant";
  double curvature = 1.0;
  double torsion = 0.0;
  double length = 0.0;  // 0 = closing length 2 pi / curvature
  double axis_a = 2.0, axis_b = 1.0;
  int samples = 256;
  std::vector<double> curvature_samples, torsion_samples;
  // synthetic
  int base_dim = 0;
  int codim = 2;
  double base_length = 0.0;
  std::vector<SyntheticFiberModel::Component> components;
};

struct GridConfig {
  int n_base = 64;
  int n_fiber = 31;
  int n_angular = 32;
};

struct SweepConfig {
  std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
  std::vector<double> t_grid = default_t_grid();
  std::optional<double> alpha;  // resolvent shift; default lambda0 + 1.5
  std::vector<int> norms{0, 1, 2};
  std::string metric = "induced";
  int fiber_mode = 0;
  std::vector<double> base_cos{1.0, 0.5};
  std::vector<double> base_sin;
  std::vector<double> perturbation_cos;  // optional eps-linear part
  bool resolution_check = true;
  int fields = 100;
  std::uint64_t field_seed = 20240611;
};

struct McConfig {
  std::vector<double> eps{0.2, 0.1, 0.05};
  int n_paths = 100000;
  double dt_factor = 0.05;  // dt = dt_factor * eps^2
  double horizon = 1.0;
  std::vector<double> times{0.5};
  double x0 = 0.0;
  std::uint64_t seed = 20240611;
  std::vector<std::string> observables{"cos_angle"};
  bool resampling = true;
  int islands = 20;
  bool dump_paths = false;
};

struct OutputConfig {
  std::string directory = "results";
  std::vector<std::string> formats{"csv", "json"};
};

struct ExperimentConfig {
  ModelConfig model;
  GridConfig grid;
  SweepConfig sweep;
  McConfig mc;
  OutputConfig output;
  std::string text;
  std::uint64_t hash = 0;

  SubmanifoldModel build_model() const;
  SweepOptions sweep_options(int workers) const;
  std::string hash_hex() const;
};

// Raises ConfigError with line diagnostics.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

// FNV-1a, 64 bit.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace tubelab
