#pragma once

#include "qtnet/geometry.hpp"
#include "qtnet/quantum.hpp"

#include <functional>
#include <string>
#include <vector>

namespace qtnet {

enum class NoiseKind { coherent, haken_strobl, ohmic_tcl2, non_markovian };

std::string noise_kind_name(NoiseKind kind);

// Dephasing-rate model gamma(t). Time-dependent kinds carry a precomputed
// table on their construction grid and interpolate linearly between entries.
struct NoiseRateModel {
    NoiseKind kind = NoiseKind::coherent;
    double constant_rate = 0.0;       // haken_strobl
    std::vector<double> times;        // table grid, ascending
    std::vector<double> rates;
    // parameters, recorded into manifests
    double lambda_reorg = 0.0;
    double omega_c = 0.0;
    double temperature = 0.0;
    double omega_channel = 0.0;

    double rate_at(double t) const;
};

struct QuadratureResult {
    double value = 0.0;
    bool converged = true;
    double residual = 0.0;
};

// Adaptive Simpson quadrature with absolute tolerance.
QuadratureResult adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                                     double abs_tol, int max_depth = 40);

NoiseRateModel coherent_model();

NoiseRateModel haken_strobl_rate(double gamma);

// gamma(t) = 2 * Int_0^inf dw J(w) coth(w / 2T) sin(w t) / w,
// J(w) = (lambda / omega_c) * w * exp(-w / omega_c), with hbar = k_B = 1.
// Integrand truncated at 50 * omega_c; tolerance 1e-8 per grid point.
NoiseRateModel ohmic_tcl2_rate(double lambda_reorg, double omega_c, double temperature,
                               const std::vector<double>& grid);

// Calibration: gamma(inf) = 2 pi lambda T / omega_c, so this lambda makes the
// Ohmic rate converge to the requested constant.
double calibrate_ohmic_lambda(double gamma_infinity, double omega_c, double temperature);

// Single-channel non-Markovian rate; may be negative for some t.
NoiseRateModel non_markovian_rate(double omega_channel, double lambda_reorg, double omega_c,
                                  double temperature, const std::vector<double>& grid);

std::vector<double> uniform_grid(double t_end, int points);

struct EvolveOptions {
    double window_multiplier = 1.0;
    int steps_per_tau = 5000;
    bool record_trajectory = false;
    double t_end = -1.0; // override the integration horizon (default: tau)
};

// Integrates rho' = -i[rho, H] + gamma(t) (diag(rho) - rho) from |in><in| with
// fixed-step RK4; the dissipator form is the site-projector Lindblad sum.
TransportResult evolve_master_equation(const SiteConfiguration& config,
                                       const NoiseRateModel& model,
                                       const EvolveOptions& opts = {});

} // namespace qtnet
