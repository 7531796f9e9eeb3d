#include "simmimo/channel.hpp"

#include <cmath>

#include "simmimo/linalg.hpp"

namespace simmimo {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

void validate_geometry(const SimGeometry& g) {
  if (g.layers < 1) throw InvalidInputError("geometry: layers must be >= 1");
  if (g.atoms_per_layer < 1) {
    throw InvalidInputError("geometry: atoms_per_layer must be >= 1");
  }
  if (g.grid_rows * g.grid_cols != g.atoms_per_layer) {
    throw InvalidInputError(
        "geometry: grid_rows*grid_cols must equal atoms_per_layer");
  }
  if (g.layer_spacing <= 0.0) {
    throw InvalidInputError("geometry: layer_spacing must be > 0");
  }
  if (g.atom_area <= 0.0) {
    throw InvalidInputError("geometry: atom_area must be > 0");
  }
  if (g.wavelength <= 0.0) {
    throw InvalidInputError("geometry: wavelength must be > 0");
  }
}

}  // namespace

SimGeometry make_geometry(int layers, int atoms_per_layer, int grid_rows,
                          int grid_cols, double wavelength,
                          double stack_depth) {
  if (layers < 1) throw InvalidInputError("geometry: layers must be >= 1");
  if (wavelength <= 0.0) {
    throw InvalidInputError("geometry: wavelength must be > 0");
  }
  if (stack_depth <= 0.0) {
    throw InvalidInputError("geometry: stack depth must be > 0");
  }
  SimGeometry g;
  g.layers = layers;
  g.atoms_per_layer = atoms_per_layer;
  g.grid_rows = grid_rows;
  g.grid_cols = grid_cols;
  g.wavelength = wavelength;
  g.atom_spacing = 0.5 * wavelength;
  g.atom_area = 0.25 * wavelength * wavelength;
  g.layer_spacing = stack_depth / layers;
  validate_geometry(g);
  return g;
}

SimGeometry make_square_geometry(int layers, int atoms_per_layer,
                                 double wavelength, double stack_depth) {
  const int side = static_cast<int>(std::lround(std::sqrt(
      static_cast<double>(atoms_per_layer))));
  if (side * side != atoms_per_layer) {
    throw InvalidInputError(
        "geometry: atom count " + std::to_string(atoms_per_layer) +
        " is not a perfect square; pass explicit grid_rows x grid_cols");
  }
  return make_geometry(layers, atoms_per_layer, side, side, wavelength,
                       stack_depth);
}

std::vector<Vec3> layer_positions(const SimGeometry& g, int layer_index) {
  validate_geometry(g);
  std::vector<Vec3> pos;
  pos.reserve(static_cast<std::size_t>(g.atoms_per_layer));
  const double y = layer_index * g.layer_spacing;
  const double x0 = -0.5 * (g.grid_cols - 1) * g.atom_spacing;
  const double z0 = -0.5 * (g.grid_rows - 1) * g.atom_spacing;
  for (int r = 0; r < g.grid_rows; ++r) {
    for (int c = 0; c < g.grid_cols; ++c) {
      pos.emplace_back(x0 + c * g.atom_spacing, y, z0 + r * g.atom_spacing);
    }
  }
  return pos;
}

std::vector<Vec3> antenna_positions(const SimGeometry& g, int count) {
  if (count < 1) throw InvalidInputError("antenna_positions: count must be >= 1");
  std::vector<Vec3> pos;
  pos.reserve(static_cast<std::size_t>(count));
  const double x0 = -0.5 * (count - 1) * g.atom_spacing;
  for (int i = 0; i < count; ++i) {
    pos.emplace_back(x0 + i * g.atom_spacing, 0.0, 0.0);
  }
  return pos;
}

CMat build_correlation_matrix(const std::vector<Vec3>& positions,
                              double wavelength) {
  if (positions.empty()) {
    throw InvalidInputError("build_correlation_matrix: need >= 1 position");
  }
  if (wavelength <= 0.0) {
    throw InvalidInputError("build_correlation_matrix: wavelength must be > 0");
  }
  for (const auto& p : positions) {
    if (!p.allFinite()) {
      throw InvalidInputError(
          "build_correlation_matrix: non-finite position coordinate");
    }
  }
  const auto n = static_cast<Eigen::Index>(positions.size());
  CMat r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dist = (positions[static_cast<std::size_t>(i)] -
                           positions[static_cast<std::size_t>(j)])
                              .norm();
      const double v = sinc(2.0 * dist / wavelength);
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

CMat propagation_matrix(const std::vector<Vec3>& from,
                        const std::vector<Vec3>& to, double wavelength,
                        double atom_area) {
  if (from.empty() || to.empty()) {
    throw InvalidInputError("propagation_matrix: empty position set");
  }
  if (wavelength <= 0.0 || atom_area <= 0.0) {
    throw InvalidInputError(
        "propagation_matrix: wavelength and atom_area must be > 0");
  }
  const auto nt = static_cast<Eigen::Index>(to.size());
  const auto nf = static_cast<Eigen::Index>(from.size());
  CMat w(nt, nf);
  const double k2pi = 2.0 * kPi / wavelength;
  for (Eigen::Index i = 0; i < nt; ++i) {
    for (Eigen::Index j = 0; j < nf; ++j) {
      const Vec3 d = to[static_cast<std::size_t>(i)] -
                     from[static_cast<std::size_t>(j)];
      const double r = d.norm();
      if (r <= 0.0) {
        throw DegenerateGeometryError(
            "propagation_matrix: coincident element pair (r = 0)");
      }
      // Axial separation over distance = cosine of the angle to the plane
      // normal (planes are stacked along y).
      const double cos_chi = std::abs(d.y()) / r;
      const cplx coeff =
          (atom_area * cos_chi / r) *
          cplx(1.0 / (2.0 * kPi * r), -1.0 / wavelength) *
          std::polar(1.0, k2pi * r);
      w(i, j) = coeff;
    }
  }
  return w;
}

CMat build_layer_transfer(const SimGeometry& geometry, int from_count,
                          int to_count) {
  validate_geometry(geometry);
  const auto plane = [&](int count, int layer_index) {
    if (count == geometry.atoms_per_layer) {
      return layer_positions(geometry, layer_index);
    }
    std::vector<Vec3> pos = antenna_positions(geometry, count);
    for (auto& p : pos) p.y() = layer_index * geometry.layer_spacing;
    return pos;
  };
  return propagation_matrix(plane(from_count, 0), plane(to_count, 1),
                            geometry.wavelength, geometry.atom_area);
}

double path_loss_db(double d, double d0, double b, double wavelength,
                    double shadow_db) {
  if (d0 <= 0.0) throw InvalidInputError("path_loss_db: d0 must be > 0");
  if (d < d0) throw InvalidInputError("path_loss_db: d must be >= d0");
  if (wavelength <= 0.0) {
    throw InvalidInputError("path_loss_db: wavelength must be > 0");
  }
  return 20.0 * std::log10(4.0 * kPi * d0 / wavelength) +
         10.0 * b * std::log10(d / d0) + shadow_db;
}

double db_to_linear_gain(double db) { return std::pow(10.0, -db / 10.0); }

SimStack build_sim_stack(const SimGeometry& geometry, SimSide side,
                         int antenna_count, const std::vector<RVec>& phases) {
  validate_geometry(geometry);
  if (antenna_count < 1) {
    throw InvalidInputError("build_sim_stack: antenna_count must be >= 1");
  }
  if (!phases.empty() && static_cast<int>(phases.size()) != geometry.layers) {
    throw InvalidInputError("build_sim_stack: need one phase vector per layer");
  }
  SimStack s;
  s.geometry = geometry;
  s.side = side;
  const int m = geometry.atoms_per_layer;

  const CMat inter = geometry.layers > 1
                         ? build_layer_transfer(geometry, m, m)
                         : CMat();
  if (side == SimSide::transmit) {
    s.transfers.push_back(build_layer_transfer(geometry, antenna_count, m));
    for (int l = 1; l < geometry.layers; ++l) s.transfers.push_back(inter);
  } else {
    s.transfers.push_back(build_layer_transfer(geometry, m, antenna_count));
    for (int k = 1; k < geometry.layers; ++k) s.transfers.push_back(inter);
  }

  for (int l = 0; l < geometry.layers; ++l) {
    if (phases.empty()) {
      s.phases.push_back(RVec::Zero(m));
    } else {
      if (phases[static_cast<std::size_t>(l)].size() != m) {
        throw InvalidInputError("build_sim_stack: phase vector length mismatch");
      }
      s.phases.push_back(phases[static_cast<std::size_t>(l)]);
    }
  }
  return s;
}

SimStack random_synthetic_stack(SimSide side, int layers, int atoms,
                                int antenna_count, SplitMix64& rng) {
  if (layers < 1 || atoms < 1 || antenna_count < 1) {
    throw InvalidInputError("random_synthetic_stack: dimensions must be >= 1");
  }
  SimStack s;
  s.side = side;
  s.geometry.layers = layers;
  s.geometry.atoms_per_layer = atoms;
  s.geometry.grid_rows = 1;
  s.geometry.grid_cols = atoms;

  const auto random_matrix = [&rng](int rows, int cols) {
    CMat m(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.complex_normal();
    }
    return m;
  };

  if (side == SimSide::transmit) {
    s.transfers.push_back(random_matrix(atoms, antenna_count));
    for (int l = 1; l < layers; ++l) {
      s.transfers.push_back(random_matrix(atoms, atoms));
    }
  } else {
    s.transfers.push_back(random_matrix(antenna_count, atoms));
    for (int k = 1; k < layers; ++k) {
      s.transfers.push_back(random_matrix(atoms, atoms));
    }
  }
  for (int l = 0; l < layers; ++l) {
    RVec th(atoms);
    for (int i = 0; i < atoms; ++i) th[i] = rng.uniform_angle();
    s.phases.push_back(th);
  }
  return s;
}

CMat exponential_correlation(int n, double decay) {
  if (n < 1) throw InvalidInputError("exponential_correlation: n must be >= 1");
  if (decay < 0.0 || decay >= 1.0) {
    throw InvalidInputError("exponential_correlation: decay must be in [0, 1)");
  }
  CMat r(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) r(i, j) = std::pow(decay, std::abs(i - j));
  }
  return r;
}

CMat compose_sim(const SimStack& stack) {
  const auto layers = stack.phases.size();
  if (layers == 0 || stack.transfers.size() != layers) {
    throw InvalidInputError("compose_sim: transfer count must match layers");
  }
  const auto phase_diag = [](const RVec& th) {
    CVec d(th.size());
    for (Eigen::Index i = 0; i < th.size(); ++i) d[i] = std::polar(1.0, th[i]);
    return d;
  };

  if (stack.side == SimSide::transmit) {
    // Apply transfer then that layer's phases, from the antenna side outward.
    CMat x = stack.transfers[0];
    if (stack.phases[0].size() != x.rows()) {
      throw InvalidInputError("compose_sim: phase/transfer dimension mismatch");
    }
    x = phase_diag(stack.phases[0]).asDiagonal() * x;
    for (std::size_t l = 1; l < layers; ++l) {
      if (stack.transfers[l].cols() != x.rows() ||
          stack.phases[l].size() != stack.transfers[l].rows()) {
        throw InvalidInputError("compose_sim: phase/transfer dimension mismatch");
      }
      x = stack.transfers[l] * x;
      x = phase_diag(stack.phases[l]).asDiagonal() * x;
    }
    return x;
  }

  // Receive: the wave hits the outermost layer first; transfers[k] carries
  // layer k+1 into layer k, and transfers[0] reaches the antennas.
  const std::size_t last = layers - 1;
  if (stack.transfers[last].cols() != stack.phases[last].size()) {
    throw InvalidInputError("compose_sim: phase/transfer dimension mismatch");
  }
  CMat x = stack.transfers[last] *
           CMat(phase_diag(stack.phases[last]).asDiagonal());
  for (std::size_t k = last; k-- > 0;) {
    if (stack.phases[k].size() != x.rows() ||
        stack.transfers[k].cols() != x.rows()) {
      throw InvalidInputError("compose_sim: phase/transfer dimension mismatch");
    }
    x = CVec(phase_diag(stack.phases[k])).asDiagonal() * x;
    x = stack.transfers[k] * x;
  }
  return x;
}

void randomize_phases(SimStack& stack, SplitMix64& rng) {
  for (auto& th : stack.phases) {
    for (Eigen::Index i = 0; i < th.size(); ++i) th[i] = rng.uniform_angle();
  }
}

CMat sample_gaussian_core(SplitMix64& rng, int rows, int cols, double beta) {
  if (rows < 1 || cols < 1) {
    throw InvalidInputError("sample_gaussian_core: dimensions must be >= 1");
  }
  if (beta <= 0.0) {
    throw InvalidInputError("sample_gaussian_core: beta must be > 0");
  }
  const double scale = std::sqrt(beta / static_cast<double>(cols));
  CMat gt(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) gt(i, j) = scale * rng.complex_normal();
  }
  return gt;
}

CMat sample_channel_presqrt(SplitMix64& rng, const CMat& sqrt_r_r,
                            const CMat& sqrt_r_t, double beta) {
  const CMat gt = sample_gaussian_core(rng, static_cast<int>(sqrt_r_r.rows()),
                                       static_cast<int>(sqrt_r_t.rows()), beta);
  return sqrt_r_r * gt * sqrt_r_t;
}

CMat sample_channel(SplitMix64& rng, const ChannelStatistics& stats, int m,
                    int n) {
  if (stats.r_t.rows() != m || stats.r_t.cols() != m) {
    throw InvalidInputError("sample_channel: r_t must be m x m");
  }
  if (stats.r_r.rows() != n || stats.r_r.cols() != n) {
    throw InvalidInputError("sample_channel: r_r must be n x n");
  }
  if (stats.beta <= 0.0) {
    throw InvalidInputError("sample_channel: beta must be > 0");
  }
  const CMat sr = hermitian_sqrt(stats.r_r);
  const CMat st = hermitian_sqrt(stats.r_t);
  return sample_channel_presqrt(rng, sr, st, stats.beta);
}

}  // namespace simmimo
