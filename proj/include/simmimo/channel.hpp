#pragma once

#include "simmimo/rng.hpp"
#include "simmimo/types.hpp"

namespace simmimo {

// Geometry with an automatic square grid layout. Rejects atom counts that are
// not perfect squares; pass explicit grid dimensions via make_geometry for
// rectangular lattices.
SimGeometry make_square_geometry(int layers, int atoms_per_layer,
                                 double wavelength, double stack_depth);

// Geometry with an explicit grid_rows x grid_cols layout
// (grid_rows * grid_cols must equal atoms_per_layer).
SimGeometry make_geometry(int layers, int atoms_per_layer, int grid_rows,
                          int grid_cols, double wavelength,
                          double stack_depth);

// Atom coordinates of one layer plane: a centered grid_rows x grid_cols
// lattice in the x-z plane at height y = layer_index * layer_spacing.
std::vector<Vec3> layer_positions(const SimGeometry& g, int layer_index);

// Centered uniform linear antenna array along x, spacing = atom_spacing,
// in the plane y = 0.
std::vector<Vec3> antenna_positions(const SimGeometry& g, int count);

// Isotropic-scattering spatial correlation: entry (i,j) =
// sinc(2*||p_i - p_j||/lambda) with sinc(x) = sin(pi x)/(pi x).
CMat build_correlation_matrix(const std::vector<Vec3>& positions,
                              double wavelength);

// Free-space diffraction coefficient between two planes: entry (to, from) =
// (A*cos(chi)/r) * (1/(2*pi*r) - j/lambda) * exp(j*2*pi*r/lambda), where r is
// the point-to-point distance, chi the angle to the plane normal, and A the
// element area. Coincident points are rejected.
CMat propagation_matrix(const std::vector<Vec3>& from,
                        const std::vector<Vec3>& to, double wavelength,
                        double atom_area);

// Transfer across one inter-layer gap of `geometry`. A count equal to
// atoms_per_layer selects the grid layout; any other count selects a centered
// linear antenna array. The matrix is to_count x from_count.
CMat build_layer_transfer(const SimGeometry& geometry, int from_count,
                          int to_count);

// Log-distance path loss: beta_dB = 20*log10(4*pi*d0/lambda)
//                                  + 10*b*log10(d/d0) + shadow_db.
double path_loss_db(double d, double d0, double b, double wavelength,
                    double shadow_db = 0.0);

// dB attenuation -> linear power gain 10^(-db/10).
double db_to_linear_gain(double db);

// Assembles a stack with physical transfer matrices and the given initial
// phases (empty phases -> all zeros).
SimStack build_sim_stack(const SimGeometry& geometry, SimSide side,
                         int antenna_count,
                         const std::vector<RVec>& phases = {});

// Dimension-flexible stack for numerical studies where no physical layout is
// intended: iid complex-normal transfers scaled by 1/sqrt(fan-in), phases
// drawn uniform on [0, 2*pi).
SimStack random_synthetic_stack(SimSide side, int layers, int atoms,
                                int antenna_count, SplitMix64& rng);

// Exponential correlation profile R_ij = decay^|i-j| (Hermitian PSD, unit
// diagonal) for synthetic statistics.
CMat exponential_correlation(int n, double decay);

// Full stack response: transmit side returns the (atoms x n_antennas) map
// applying transfers[0] first and the last layer's phases last; receive side
// returns the (n_antennas x atoms) map applying the last layer's phases first.
CMat compose_sim(const SimStack& stack);

// Replaces all phase angles from a flat sample of uniform [0, 2*pi) values.
void randomize_phases(SimStack& stack, SplitMix64& rng);

// One correlated Rayleigh channel realization: G = R_r^{1/2} * Gt * R_t^{1/2}
// with Gt iid CN(0, beta/m) of size n x m. Entries are drawn row-major.
CMat sample_channel(SplitMix64& rng, const ChannelStatistics& stats, int m,
                    int n);

// Same draw but with the Hermitian square roots precomputed by the caller
// (sample_channel computes them on each call; hot loops should not).
CMat sample_channel_presqrt(SplitMix64& rng, const CMat& sqrt_r_r,
                            const CMat& sqrt_r_t, double beta);

// The raw scattering core: a rows x cols matrix of iid CN(0, beta/cols)
// entries drawn row-major, so the draw order (and hence the realization for a
// given stream) is fixed.
CMat sample_gaussian_core(SplitMix64& rng, int rows, int cols, double beta);

}  // namespace simmimo
