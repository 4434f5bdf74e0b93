#include "qtnet/quantum.hpp"

#include <cmath>
#include <stdexcept>

namespace qtnet {

namespace {

using cplx = std::complex<double>;

// p_{to}(t) = |sum_k c_k e^{i lambda_k t}|^2 with c_k = V(to,k) V(from,k).
struct PopulationEvaluator {
    Eigen::VectorXd lambdas;
    Eigen::VectorXd coeffs;

    PopulationEvaluator(const SpectralDecomposition& spec, int from, int to)
        : lambdas(spec.eigenvalues),
          coeffs((spec.eigenvectors.row(to).array() * spec.eigenvectors.row(from).array())
                     .matrix()
                     .transpose()) {}

    double operator()(double t) const {
        cplx a(0.0, 0.0);
        for (int k = 0; k < lambdas.size(); ++k)
            a += coeffs[k] * std::polar(1.0, lambdas[k] * t);
        return std::norm(a);
    }

    // Fills p on a uniform grid via incremental phase rotation, avoiding a
    // trig call per (k, t).
    void grid(double t_end, int intervals, std::vector<double>& out) const {
        const int n = static_cast<int>(lambdas.size());
        const double dt = t_end / intervals;
        std::vector<cplx> phase(n, cplx(1.0, 0.0));
        std::vector<cplx> step(n);
        for (int k = 0; k < n; ++k) step[k] = std::polar(1.0, lambdas[k] * dt);
        out.resize(intervals + 1);
        for (int i = 0; i <= intervals; ++i) {
            cplx a(0.0, 0.0);
            for (int k = 0; k < n; ++k) a += coeffs[k] * phase[k];
            out[i] = std::norm(a);
            if (i < intervals)
                for (int k = 0; k < n; ++k) phase[k] *= step[k];
        }
    }
};

// Golden-section maximization on [lo, hi].
template <typename F>
double golden_max(const F& f, double lo, double hi, double tol, double* x_at_max) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    if (x_at_max) *x_at_max = x;
    return f(x);
}

double simpson(const std::vector<double>& y, double dt) {
    // composite Simpson; grid size is even by construction
    const int n = static_cast<int>(y.size()) - 1;
    double s = y[0] + y[n];
    for (int i = 1; i < n; i += 2) s += 4.0 * y[i];
    for (int i = 2; i < n; i += 2) s += 2.0 * y[i];
    return s * dt / 3.0;
}

// Locate the max of a grid-sampled function, then refine with golden section
// in the bracketing interval.
double refine_grid_max(const PopulationEvaluator& p, const std::vector<double>& grid,
                       double t_end, double* t_at_max) {
    int imax = 0;
    for (int i = 1; i < static_cast<int>(grid.size()); ++i)
        if (grid[i] > grid[imax]) imax = i;
    const double dt = t_end / (static_cast<int>(grid.size()) - 1);
    const double lo = std::max(0.0, (imax - 1) * dt);
    const double hi = std::min(t_end, (imax + 1) * dt);
    double t_best = imax * dt;
    double best = golden_max(p, lo, hi, kTStarTol * t_end, &t_best);
    if (grid[imax] > best) { // grid point itself was the max
        best = grid[imax];
        t_best = imax * dt;
    }
    if (t_at_max) *t_at_max = t_best;
    return best;
}

} // namespace

HoppingHamiltonian build_hamiltonian(const SiteConfiguration& config) {
    const int n = config.n_sites();
    HoppingHamiltonian h;
    h.matrix = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double r = (config.positions[i] - config.positions[j]).norm();
            if (r < kCoincidenceTol)
                throw std::runtime_error("build_hamiltonian: coincident sites (coupling overflow)");
            const double v = 1.0 / (r * r * r);
            h.matrix(i, j) = v;
            h.matrix(j, i) = v;
        }
    }
    return h;
}

SpectralDecomposition decompose(const HoppingHamiltonian& h) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.matrix);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("decompose: eigensolver failed on symmetric matrix");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

double window_tau(const SiteConfiguration& config) {
    const double r_io = (config.positions[config.output()] - config.positions[config.input()]).norm();
    return 0.2 * M_PI * r_io * r_io * r_io;
}

std::complex<double> amplitude(const SpectralDecomposition& spec, int from, int to, double t) {
    cplx a(0.0, 0.0);
    for (int k = 0; k < spec.n(); ++k)
        a += spec.eigenvectors(to, k) * spec.eigenvectors(from, k) *
             std::polar(1.0, spec.eigenvalues[k] * t);
    return a;
}

std::vector<std::complex<double>> amplitude_trajectory(const SpectralDecomposition& spec,
                                                       int from, int to,
                                                       const std::vector<double>& times) {
    std::vector<cplx> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(amplitude(spec, from, to, t));
    return out;
}

std::vector<double> output_population_grid(const SpectralDecomposition& spec, int from, int to,
                                           double t_end, int grid_points) {
    PopulationEvaluator p(spec, from, to);
    std::vector<double> grid;
    p.grid(t_end, grid_points, grid);
    return grid;
}

TransportResult transport_efficiency(const SiteConfiguration& config, const TransportOptions& opts) {
    const auto spec = decompose(build_hamiltonian(config));
    const double tau = window_tau(config) * opts.window_multiplier;
    const int in = config.input();
    const int out = config.output();

    PopulationEvaluator p(spec, in, out);
    std::vector<double> grid;
    p.grid(tau, opts.grid_points, grid);

    TransportResult result;
    result.tau = tau;
    double t_best = 0.0;
    result.epsilon_max = refine_grid_max(p, grid, tau, &t_best);
    result.t_star = t_best / tau;
    if (opts.compute_integral)
        result.epsilon_int = simpson(grid, tau / opts.grid_points) / tau;

    if (opts.record_trajectory) {
        Trajectory traj;
        traj.tau = tau;
        const int n = config.n_sites();
        traj.times.resize(opts.grid_points + 1);
        traj.populations.resize(opts.grid_points + 1, n);
        for (int i = 0; i <= opts.grid_points; ++i)
            traj.times[i] = tau * i / opts.grid_points;
        std::vector<double> site_grid;
        for (int k = 0; k < n; ++k) {
            PopulationEvaluator pk(spec, in, k);
            pk.grid(tau, opts.grid_points, site_grid);
            for (int i = 0; i <= opts.grid_points; ++i) traj.populations(i, k) = site_grid[i];
        }
        result.trajectory = std::move(traj);
    }
    return result;
}

double integral_efficiency(const SiteConfiguration& config, double window_multiplier) {
    TransportOptions opts;
    opts.window_multiplier = window_multiplier;
    opts.compute_integral = true;
    return transport_efficiency(config, opts).epsilon_int;
}

std::vector<double> max_site_excitations(const SiteConfiguration& config, double window_multiplier) {
    const auto spec = decompose(build_hamiltonian(config));
    const double tau = window_tau(config) * window_multiplier;
    const int in = config.input();
    const int n = config.n_sites();

    std::vector<double> maxima(n);
    std::vector<double> grid;
    for (int k = 0; k < n; ++k) {
        PopulationEvaluator pk(spec, in, k);
        pk.grid(tau, kTimeGridPoints, grid);
        maxima[k] = refine_grid_max(pk, grid, tau, nullptr);
    }
    return maxima;
}

} // namespace qtnet
