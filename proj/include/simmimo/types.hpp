#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace simmimo {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

// Error taxonomy. Everything user-facing derives from std::runtime_error /
// std::invalid_argument so callers can catch coarsely or precisely.
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConvergenceError : std::runtime_error {
  double residual;
  ConvergenceError(const std::string& msg, double res)
      : std::runtime_error(msg), residual(res) {}
};

struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateVarianceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularSensitivityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TailUnderflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Geometry of one metasurface stack: `layers` planes of `atoms_per_layer`
// elements laid out on a grid_rows x grid_cols lattice with `atom_spacing`
// between neighbors, planes separated by `layer_spacing` along the normal.
struct SimGeometry {
  int layers = 1;
  int atoms_per_layer = 1;
  int grid_rows = 1;
  int grid_cols = 1;
  double atom_area = 1.0;      // m^2
  double atom_spacing = 0.5;   // m
  double layer_spacing = 1.0;  // m
  double wavelength = 1.0;     // m
};

enum class SimSide { transmit, receive };

// One programmable stack: per-layer phase angles (radians) plus the fixed
// inter-plane transfer matrices.
//
// Transmit side: transfers[0] maps the antenna array into layer 1
// (atoms x n_antennas); transfers[l] maps layer l into layer l+1
// (atoms x atoms). Composition applies layer 1 first.
//
// Receive side: transfers[0] maps layer 1 to the antenna array
// (n_antennas x atoms); transfers[k] maps layer k+1 into layer k
// (atoms x atoms). The wave enters at the last layer.
struct SimStack {
  SimGeometry geometry;
  SimSide side = SimSide::transmit;
  std::vector<RVec> phases;
  std::vector<CMat> transfers;

  int layers() const { return static_cast<int>(phases.size()); }
  int atoms() const { return geometry.atoms_per_layer; }
};

// Long-term channel statistics: spatial correlation at each aperture plus the
// scalar link gain folded into the fading variance.
struct ChannelStatistics {
  CMat r_t;           // m x m, transmit-aperture correlation
  CMat r_r;           // n x n, receive-aperture correlation
  double beta = 1.0;  // linear power gain
  int n_t = 1;        // transmit antennas
  int n_r = 1;        // receive antennas
};

// Correlation matrices after absorbing the stack responses:
// rbar_t = P^H R_T P (n_t x n_t), rbar_r = D R_R D^H (n_r x n_r).
// m, n, beta ride along because the closed forms normalize traces by the
// inner aperture size m, and min(m, n) fixes the multiplexing-gain scale.
struct EffectiveCorrelations {
  CMat rbar_t;
  CMat rbar_r;
  int m = 1;
  int n = 1;
  double beta = 1.0;

  int n_t() const { return static_cast<int>(rbar_t.rows()); }
  int n_r() const { return static_cast<int>(rbar_r.rows()); }
};

}  // namespace simmimo
