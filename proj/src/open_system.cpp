#include "qtnet/open_system.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace qtnet {

namespace {

constexpr double kQuadTol = 1e-8;
constexpr double kFrequencyCutoffFactor = 50.0; // integrand truncated at 50 omega_c
constexpr int kQuadPanels = 128;                // oscillatory integrands; panel then adapt

struct AdaptiveState {
    const std::function<double(double)>& f;
    double tol;
    int max_depth;
    bool converged = true;
    double worst_residual = 0.0;

    double simpson(double a, double b, double fa, double fm, double fb) const {
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    }

    double recurse(double a, double b, double fa, double fm, double fb, double whole,
                   double tol_here, int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        const double flm = f(lm), frm = f(rm);
        const double left = simpson(a, m, fa, flm, fm);
        const double right = simpson(m, b, fm, frm, fb);
        const double err = left + right - whole;
        if (std::abs(err) <= 15.0 * tol_here) return left + right + err / 15.0;
        if (depth >= max_depth) {
            converged = false;
            worst_residual = std::max(worst_residual, std::abs(err));
            return left + right;
        }
        return recurse(a, m, fa, flm, fm, left, 0.5 * tol_here, depth + 1) +
               recurse(m, b, fm, frm, fb, right, 0.5 * tol_here, depth + 1);
    }
};

double safe_sinc(double x, double t) {
    // sin(x t) / x with the x -> 0 limit
    if (std::abs(x * t) < 1e-8) return t;
    return std::sin(x * t) / x;
}

} // namespace

std::string noise_kind_name(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::coherent: return "coherent";
        case NoiseKind::haken_strobl: return "haken_strobl";
        case NoiseKind::ohmic_tcl2: return "ohmic_tcl2";
        case NoiseKind::non_markovian: return "non_markovian";
    }
    return "unknown";
}

double NoiseRateModel::rate_at(double t) const {
    switch (kind) {
        case NoiseKind::coherent: return 0.0;
        case NoiseKind::haken_strobl: return constant_rate;
        default: break;
    }
    if (times.empty()) return 0.0;
    if (t <= times.front()) return rates.front();
    if (t >= times.back()) return rates.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const size_t hi = static_cast<size_t>(it - times.begin());
    const size_t lo = hi - 1;
    const double w = (t - times[lo]) / (times[hi] - times[lo]);
    return rates[lo] * (1.0 - w) + rates[hi] * w;
}

QuadratureResult adaptive_quadrature(const std::function<double(double)>& f, double a, double b,
                                     double abs_tol, int max_depth) {
    AdaptiveState state{f, abs_tol, max_depth};
    double total = 0.0;
    const double panel = (b - a) / kQuadPanels;
    for (int p = 0; p < kQuadPanels; ++p) {
        const double pa = a + p * panel;
        const double pb = pa + panel;
        const double pm = 0.5 * (pa + pb);
        const double fa = f(pa), fm = f(pm), fb = f(pb);
        const double whole = state.simpson(pa, pb, fa, fm, fb);
        total += state.recurse(pa, pb, fa, fm, fb, whole, abs_tol / kQuadPanels, 0);
    }
    return {total, state.converged, state.worst_residual};
}

NoiseRateModel coherent_model() {
    NoiseRateModel m;
    m.kind = NoiseKind::coherent;
    return m;
}

NoiseRateModel haken_strobl_rate(double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("haken_strobl_rate: gamma must be >= 0");
    NoiseRateModel m;
    m.kind = NoiseKind::haken_strobl;
    m.constant_rate = gamma;
    return m;
}

double calibrate_ohmic_lambda(double gamma_infinity, double omega_c, double temperature) {
    return gamma_infinity * omega_c / (2.0 * M_PI * temperature);
}

NoiseRateModel ohmic_tcl2_rate(double lambda_reorg, double omega_c, double temperature,
                               const std::vector<double>& grid) {
    if (omega_c <= 0.0 || temperature <= 0.0)
        throw std::invalid_argument("ohmic_tcl2_rate: omega_c and temperature must be > 0");
    NoiseRateModel m;
    m.kind = NoiseKind::ohmic_tcl2;
    m.lambda_reorg = lambda_reorg;
    m.omega_c = omega_c;
    m.temperature = temperature;
    m.times = grid;
    m.rates.reserve(grid.size());
    const double w_max = kFrequencyCutoffFactor * omega_c;
    for (double t : grid) {
        auto integrand = [&](double w) {
            if (w < 1e-12) return 4.0 * lambda_reorg * temperature * t / omega_c;
            return 2.0 * (lambda_reorg / omega_c) * std::exp(-w / omega_c) *
                   (std::sin(w * t) / std::tanh(w / (2.0 * temperature)));
        };
        const auto q = adaptive_quadrature(integrand, 0.0, w_max, kQuadTol);
        if (!q.converged) {
            std::ostringstream msg;
            msg << "ohmic_tcl2_rate: quadrature residual " << q.residual << " at t=" << t;
            throw std::runtime_error(msg.str());
        }
        m.rates.push_back(q.value);
    }
    return m;
}

NoiseRateModel non_markovian_rate(double omega_channel, double lambda_reorg, double omega_c,
                                  double temperature, const std::vector<double>& grid) {
    if (omega_channel <= 0.0 || lambda_reorg <= 0.0 || omega_c <= 0.0 || temperature <= 0.0)
        throw std::invalid_argument("non_markovian_rate: parameters must be > 0");
    NoiseRateModel m;
    m.kind = NoiseKind::non_markovian;
    m.omega_channel = omega_channel;
    m.lambda_reorg = lambda_reorg;
    m.omega_c = omega_c;
    m.temperature = temperature;
    m.times = grid;
    m.rates.reserve(grid.size());
    const double w_max = kFrequencyCutoffFactor * omega_c;
    auto occupation = [&](double w) {
        // n(w) = w^3 / (4 pi^3) / (exp(w/T) - 1) with hbar = c = k_B = 1
        return w * w * w / (4.0 * M_PI * M_PI * M_PI) / std::expm1(w / temperature);
    };
    for (double t : grid) {
        auto integrand = [&](double w) {
            if (w < 1e-12) return 0.0;
            const double j = (lambda_reorg / omega_c) * w * std::exp(-w / omega_c);
            const double n = occupation(w);
            return 2.0 * j *
                   (n * safe_sinc(omega_channel + w, t) + (n + 1.0) * safe_sinc(omega_channel - w, t));
        };
        const auto q = adaptive_quadrature(integrand, 0.0, w_max, kQuadTol);
        if (!q.converged) {
            std::ostringstream msg;
            msg << "non_markovian_rate: quadrature residual " << q.residual << " at t=" << t;
            throw std::runtime_error(msg.str());
        }
        m.rates.push_back(q.value);
    }
    return m;
}

std::vector<double> uniform_grid(double t_end, int points) {
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = t_end * i / (points - 1);
    return grid;
}

TransportResult evolve_master_equation(const SiteConfiguration& config,
                                       const NoiseRateModel& model, const EvolveOptions& opts) {
    const auto h = build_hamiltonian(config);
    const int n = config.n_sites();
    const double tau = window_tau(config) * opts.window_multiplier;
    const double t_end = opts.t_end > 0.0 ? opts.t_end : tau;
    // Commutator frequencies reach twice the spectral radius; the fixed step
    // must resolve them or the integration diverges on tightly coupled sites.
    const double spectral_radius =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h.matrix, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .cwiseAbs()
            .maxCoeff();
    double dt = tau / opts.steps_per_tau;
    if (dt * spectral_radius > 0.25) dt = 0.25 / spectral_radius;
    const long steps = std::lround(std::ceil(t_end / dt - 1e-9));

    const Eigen::MatrixXcd hc = h.matrix.cast<std::complex<double>>();
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
    rho(config.input(), config.input()) = 1.0;

    Eigen::MatrixXcd k1(n, n), k2(n, n), k3(n, n), k4(n, n), tmp(n, n), stage(n, n);
    const std::complex<double> minus_i(0.0, -1.0);
    auto derivative = [&](double t, const Eigen::MatrixXcd& r, Eigen::MatrixXcd& out) {
        tmp.noalias() = r * hc;
        tmp.noalias() -= hc * r;
        out = minus_i * tmp;
        const double gamma = model.rate_at(t);
        if (gamma != 0.0) {
            out -= gamma * r;
            out.diagonal() += gamma * r.diagonal();
        }
    };

    const long record_stride = std::max<long>(1, steps / 5000);
    Trajectory traj;
    traj.tau = tau;
    auto record = [&](double t) {
        if (!opts.record_trajectory) return;
        traj.times.push_back(t);
        traj.populations.conservativeResize(traj.times.size(), n);
        for (int k = 0; k < n; ++k)
            traj.populations(traj.times.size() - 1, k) = rho(k, k).real();
    };

    TransportResult result;
    result.tau = tau;
    const int out_site = config.output();
    std::vector<double> p_hist;
    p_hist.reserve(steps + 1);
    p_hist.push_back(rho(out_site, out_site).real());
    record(0.0);

    for (long s = 0; s < steps; ++s) {
        const double t = s * dt;
        const double hstep = (s == steps - 1) ? t_end - t : dt;
        derivative(t, rho, k1);
        stage = rho + 0.5 * hstep * k1;
        derivative(t + 0.5 * hstep, stage, k2);
        stage = rho + 0.5 * hstep * k2;
        derivative(t + 0.5 * hstep, stage, k3);
        stage = rho + hstep * k3;
        derivative(t + hstep, stage, k4);
        rho += (hstep / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double trace = rho.trace().real();
        if (std::abs(trace - 1.0) > 1e-6) {
            std::ostringstream msg;
            msg << "evolve_master_equation: trace drift " << trace - 1.0 << " at t=" << t + hstep
                << " (step " << s + 1 << " of " << steps << ", dt=" << hstep << ")";
            throw std::runtime_error(msg.str());
        }

        p_hist.push_back(rho(out_site, out_site).real());
        if ((s + 1) % record_stride == 0 || s == steps - 1) record(t + hstep);
    }

    // Grid max plus parabolic refinement through the bracketing samples.
    long imax = 0;
    for (long i = 1; i < static_cast<long>(p_hist.size()); ++i)
        if (p_hist[i] > p_hist[imax]) imax = i;
    double best = p_hist[imax];
    double t_best = std::min(static_cast<double>(imax) * dt, t_end);
    if (imax > 0 && imax + 1 < static_cast<long>(p_hist.size())) {
        const double a = p_hist[imax - 1], b = p_hist[imax], c = p_hist[imax + 1];
        const double denom = a - 2.0 * b + c;
        if (denom < 0.0) {
            const double shift = 0.5 * (a - c) / denom;
            best = b - 0.25 * (a - c) * shift;
            t_best += shift * dt;
        }
    }

    result.epsilon_max = best;
    result.t_star = t_best / tau;
    if (opts.record_trajectory) result.trajectory = std::move(traj);
    return result;
}

} // namespace qtnet
