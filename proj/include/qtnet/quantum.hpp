#pragma once

#include "qtnet/geometry.hpp"

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <vector>

namespace qtnet {

// Natural units: hbar = J = r0 = 1 throughout.

struct HoppingHamiltonian {
    Eigen::MatrixXd matrix; // real symmetric, zero diagonal, entries 1/r^3
    int n() const { return static_cast<int>(matrix.rows()); }
};

struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;  // ascending
    Eigen::MatrixXd eigenvectors; // orthonormal columns
    int n() const { return static_cast<int>(eigenvalues.size()); }
};

struct Trajectory {
    double tau = 0.0;
    std::vector<double> times;      // absolute times, hbar/J units
    Eigen::MatrixXd populations;    // row = time index, col = site
};

struct TransportResult {
    double epsilon_max = 0.0;
    double t_star = 0.0;            // in units of tau
    double epsilon_int = -1.0;      // negative = not computed
    double tau = 0.0;
    std::optional<Trajectory> trajectory;
};

HoppingHamiltonian build_hamiltonian(const SiteConfiguration& config);
SpectralDecomposition decompose(const HoppingHamiltonian& h);

// tau = (1/10) * 2π * r_in-out^3 : one tenth of the period associated with the
// direct input-output coupling.
double window_tau(const SiteConfiguration& config);

// <to| e^{+iHt} |from>
std::complex<double> amplitude(const SpectralDecomposition& spec, int from, int to, double t);
std::vector<std::complex<double>> amplitude_trajectory(const SpectralDecomposition& spec,
                                                       int from, int to,
                                                       const std::vector<double>& times);

inline constexpr int kTimeGridPoints = 2048;   // intervals on [0, tau]
inline constexpr double kTStarTol = 1e-6;      // golden-section width, tau units

struct TransportOptions {
    double window_multiplier = 1.0;
    int grid_points = kTimeGridPoints;
    bool compute_integral = false;
    bool record_trajectory = false;
};

TransportResult transport_efficiency(const SiteConfiguration& config,
                                     const TransportOptions& opts = {});

double integral_efficiency(const SiteConfiguration& config, double window_multiplier = 1.0);

// Per-site max_t p_k(t) on [0, tau], same grid and refinement as the efficiency.
std::vector<double> max_site_excitations(const SiteConfiguration& config,
                                         double window_multiplier = 1.0);

// p_out(t) on the uniform grid (grid_points+1 samples including both ends).
std::vector<double> output_population_grid(const SpectralDecomposition& spec,
                                           int from, int to, double t_end, int grid_points);

} // namespace qtnet
