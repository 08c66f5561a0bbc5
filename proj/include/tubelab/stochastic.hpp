#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tubelab/geometry.hpp"
#include "tubelab/semigroup.hpp"

namespace tubelab {

// Philox4x32-10 counter-based generator: every draw is a pure function of
// (seed, counter), so paths do not depend on how work is partitioned.
struct Philox {
  std::uint64_t key;
  std::array<std::uint32_t, 4> operator()(std::uint32_t c0, std::uint32_t c1,
                                          std::uint32_t c2, std::uint32_t c3) const;
  // Two uniforms in (0, 1].
  std::pair<double, double> uniforms(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2) const;
};

double pairwise_sum(const double* x, std::size_t n);

enum class Resampling { None, Adaptive };

struct SamplerOptions {
  bool kill = true;
  bool use_potential = true;
  Resampling resampling = Resampling::Adaptive;
  double ess_threshold = 0.5;  // resample when an island's ESS < threshold * its size
  // Independent sub-populations that resample only among themselves; their
  // spread gives the standard error once genealogies have collapsed.
  int islands = 20;
  int workers = 1;
};

struct PathEnsemble {
  int n_paths = 0;
  int dim = 2;
  double dt = 0;
  double T = 0;
  double eps = 0;
  std::uint64_t seed = 0;
  std::vector<double> times;       // recorded times on the step grid
  std::vector<double> positions;   // [path][time][dim]
  std::vector<std::uint8_t> survived;
  std::vector<double> log_weight;  // since the last resampling
  std::vector<double> fk_log;      // 1/2 int U along the whole lineage
  std::vector<int> ancestor;       // index of the time-0 ancestor
  std::vector<int> island_start;            // path k is in island b iff start[b] <= k < start[b+1]
  std::vector<double> island_log_normalizer;  // log of the product of mean weights at resamplings
  bool resampled = false;                     // adaptive resampling was enabled
  int resample_count = 0;                     // summed over islands
  std::vector<double> survival;    // plain survival probability at `times`
  std::vector<double> fk_mass;     // E[survived * exp(1/2 int U)] at `times`

  const double* position(int path, int time_index) const {
    return positions.data() + (static_cast<std::size_t>(path) * times.size() + time_index) * dim;
  }
  int time_index(double t) const;
};

PathEnsemble sample_conditioned(const SubmanifoldModel& model, double eps, double x0, double T,
                                double dt, int n_paths, std::uint64_t seed,
                                std::vector<double> record_times,
                                const SamplerOptions& opt = {});

struct MarginalEstimate {
  double estimate = 0;
  double std_error = 0;
  double ess = 0;
  int lineages = 0;  // distinct time-0 ancestors carrying weight
  int islands = 1;   // independent replicates behind the standard error
  bool low_ess = false;
};

MarginalEstimate marginal_estimate(const PathEnsemble& ens, const Observable& f, double t);

// E[f(x_t)] for Brownian motion on the circle of radius R started at angle
// x0, f = sum cos_coef[n] cos(n x) + sum sin_coef[n] sin((n+1) x).
// `symbol`, when given, replaces n^2/R^2 by a discrete eigenvalue symbol.
double circle_heat_oracle(double R, double x0, double t, const std::vector<double>& cos_coef,
                          const std::vector<double>& sin_coef = {},
                          const std::function<double(int)>& symbol = {});

Observable make_observable(const std::string& name);

// Binary dump: "TLPATHS1", u64 N, f64 dt, f64 T, u64 seed, u32 dim,
// u32 n_times, f64 times[n_times], then per path f64 positions
// [n_times * dim], f64 log_weight, f64 survived, f64 ancestor.
void write_path_dump(std::ostream& os, const PathEnsemble& ens);

}  // namespace tubelab
