#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "tubelab/config.hpp"
#include "tubelab/discretize.hpp"
#include "tubelab/semigroup.hpp"

namespace tubelab {

// Outcome of one property suite; `details` is the machine-readable report.
struct SuiteReport {
  std::string name;
  std::string status = "pass";  // pass | fail | skipped
  std::vector<std::string> violations;
  nlohmann::json details = nlohmann::json::object();

  bool passed() const { return status != "fail"; }
  void violate(const std::string& what) {
    status = "fail";
    if (violations.size() < 20) violations.push_back(what);
  }
  nlohmann::json to_json() const;
};

// Largest admissible epsilon, 1 - lambda0 / lambda1.
double admissible_eps(const FiberSpectrum& spec);

// Every epsilon must stay below the admissible bound; violations carry the
// CoercivityViolation tag.
SuiteReport admissibility_suite(const FiberSpectrum& spec, const std::vector<double>& eps);

// Eigenvalues of HSa(eps) against lambda_k / eps^2 + nu_j, with nu_j the
// spectrum of DeltaH restricted to each fiber eigenspace.
SuiteReport composite_spectrum_suite(const ProductGrid& grid, double eps, bool dense,
                                     double tol = 1e-9);

// || e^{-t HSa0/2} f - E0 e^{-t DeltaH/2} E0 f || <= e^{-t gap / (2 eps^2)} ||f||
// for a pure fiber mode f, evaluated after scaling both sides by the
// reciprocal of the bound.
SuiteReport sasaki_limit_suite(const ProductGrid& grid, const std::vector<double>& eps,
                               const std::vector<double>& t_grid, const FieldSpec& base,
                               int fiber_mode = 1);

// Quadratic form values of one field, shared by the inequality suites.
struct FormSample {
  double norm2 = 0;       // |f|^2
  double e0_norm2 = 0;    // |E0 f|^2
  double qV = 0, qH = 0;  // Sasaki vertical and horizontal energies
  double h1_2 = 0;        // |f|_1^2 = |f|^2 + qV + qH
};

// Vertical energy bound, Sasaki form bound, the Kato-type bound with one
// constant fit at the first epsilon, and coercivity with shift alpha.
std::vector<SuiteReport> inequality_suites(const ProductGrid& grid,
                                           const std::vector<double>& eps,
                                           const std::vector<Vec>& fields, double alpha);

// Uniform boundedness of r_eps over random unit-H1 fields.
SuiteReport residual_suite(const ProductGrid& grid, const std::vector<double>& eps,
                           const std::vector<Vec>& fields);

// min spec(H0(eps) + alpha) >= alpha - lambda0 - delta_h.
SuiteReport spectral_bound_suite(const ProductGrid& grid, const std::vector<double>& eps,
                                 double alpha, double delta_h = 1e-6);

// Semigroup law, contraction and commuting vertical/horizontal parts.
SuiteReport semigroup_suite(const ProductGrid& grid, double eps, const std::vector<Vec>& fields);

// P E0 = 0 and [DeltaV, P] = 0 on q = 2 models.
SuiteReport curvature_operator_suite(const ProductGrid& grid, const std::vector<Vec>& fields,
                                     double tol_projection = 1e-6, double tol_commutator = 1e-4);

// Omega(f) = Omega(f - E0 f) up to discretization error.
SuiteReport omega_projection_suite(const ProductGrid& grid, const std::vector<Vec>& fields,
                                   double tol = 1e-6);

// Runs every suite that applies to the configured model.
std::vector<SuiteReport> run_property_suites(const ExperimentConfig& cfg);

}  // namespace tubelab
