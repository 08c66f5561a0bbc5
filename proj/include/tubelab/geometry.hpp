#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <variant>
#include <vector>

namespace tubelab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Periodic scalar function of arc length. Sampled data is evaluated by
// trigonometric interpolation, so smooth samples stay smooth.
class Profile {
 public:
  Profile() = default;
  static Profile constant(double value);
  static Profile sampled(std::vector<double> values, double period);

  double operator()(double s) const;
  double derivative(double s) const;
  bool is_constant() const { return coeff_cos_.empty() && nyquist_ == 0.0; }
  double max_abs() const;
  double mean() const { return mean_; }
  const std::vector<double>& samples() const { return samples_; }

 private:
  double period_ = 1.0;
  double mean_ = 0.0;
  double nyquist_ = 0.0;
  std::vector<double> coeff_cos_, coeff_sin_;
  std::vector<double> samples_;
};

struct CircleInPlane {
  double radius = 1.0;
};

// Intrinsic description of a closed space curve by its Frenet data,
// parametrized by arc length on [0, length).
struct CurveInSpace {
  Profile curvature;
  Profile torsion;
  double length = 0.0;

  static CurveInSpace constant(double kappa, double tau, double length = 0.0);
  static CurveInSpace ellipse(double a, double b, int samples = 256);
};

// Codimension q fibers over a point (l = 0) or a flat circle (l = 1), with a
// constant ambient curvature tensor restricted to normal directions.
struct SyntheticFiberModel {
  struct Component {
    int mu, alpha, nu, beta;  // 1-based normal indices
    double value;
  };

  int base_dim = 0;
  int codim = 2;
  double base_length = 0.0;
  std::vector<double> tensor;  // R[mu][alpha][nu][beta], q^4 entries

  static SyntheticFiberModel make(int base_dim, int codim,
                                  const std::vector<Component>& components,
                                  double base_length = 0.0);
  double at(int mu, int alpha, int nu, int beta) const;
  // Largest violation of the pair and antisymmetry identities.
  double symmetry_defect() const;
};

class SubmanifoldModel {
 public:
  using Kind = std::variant<CircleInPlane, CurveInSpace, SyntheticFiberModel>;

  SubmanifoldModel(Kind kind);

  const Kind& kind() const { return kind_; }
  int dim_base() const;
  int dim_ambient() const;
  int codim() const { return dim_ambient() - dim_base(); }
  bool flat_ambient() const;
  std::string name() const;

  // Base coordinate x runs over [0, period) with |d/dx| = speed.
  double period() const;
  double speed() const;
  // Normal connection coefficient tau(x): horizontal lift is
  // (1/speed) d/dx - tau Z_12.
  double normal_connection(double x) const;
  // Tube radius below which Fermi coordinates are a diffeomorphism.
  double focal_radius() const;

  template <class T>
  const T* as() const {
    return std::get_if<T>(&kind_);
  }

 private:
  Kind kind_;
};

struct TubePoint {
  double x = 0.0;
  Vec w;  // rescaled normal coordinates, |w| <= 1
  double eps = 1.0;
};

struct CometricAt {
  Mat horizontal;  // l x l
  Mat vertical;    // q x q
  Mat cross;       // l x q
  Mat assembled() const;
};

enum class MetricKind { Induced, Sasaki };

Mat weingarten(const SubmanifoldModel& model, double x, const Vec& W);

// Exact for flat ambient models, second-order truncation otherwise.
Mat jacobi_endomorphism(const SubmanifoldModel& model, double x, const Vec& W,
                        double eps);
// Always the second-order truncation I - A_W + R terms.
Mat jacobi_expansion(const SubmanifoldModel& model, double x, const Vec& W,
                     double eps);

// q x q matrix of V -> R(w,V)w at the rescaled fiber point.
Mat curvature_block(const SubmanifoldModel& model, const TubePoint& p);

CometricAt cometric(const SubmanifoldModel& model, const TubePoint& p,
                    MetricKind which);

double density_rho(const SubmanifoldModel& model, const TubePoint& p);

constexpr double kDefaultPotentialStep = 1e-4;

// U = rho^{1/2} Lap rho^{-1/2} with Lap = -div grad.
double potential_U(const SubmanifoldModel& model, const TubePoint& p,
                   double h = kDefaultPotentialStep);
// Finite-difference route regardless of closed forms.
double potential_U_fd(const SubmanifoldModel& model, const TubePoint& p,
                      double h = kDefaultPotentialStep);

// Coordinate metric in (x, v) with v = eps * w the unscaled normal
// coordinates. Used by the finite-difference potential and its tests.
Mat coordinate_metric(const SubmanifoldModel& model, double x, const Vec& v);

// Ambient position map and its local inverse for flat ambient models.
class FlatEmbedding {
 public:
  explicit FlatEmbedding(const SubmanifoldModel& model, int steps = 4096);

  int ambient_dim() const { return dim_; }
  Vec ambient(double x, const Vec& v) const;
  // Fermi coordinates (x, v) of an ambient point near the submanifold;
  // x_guess seeds the foot-point search.
  std::pair<double, Vec> fermi(const Vec& X, double x_guess) const;
  double closure_error() const { return closure_error_; }

 private:
  struct Node {
    Eigen::Vector3d pos, T, N, B;
  };
  void frame_at(double s, Eigen::Vector3d& pos, Eigen::Vector3d& T,
                Eigen::Vector3d& N, Eigen::Vector3d& B) const;

  int dim_ = 2;
  double radius_ = 1.0;
  double length_ = 0.0;
  double ds_ = 0.0;
  std::vector<Node> nodes_;
  std::vector<double> kappa_, tau_;
  double closure_error_ = 0.0;
};

}  // namespace tubelab
