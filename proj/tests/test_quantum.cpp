#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qtnet/quantum.hpp"
#include "qtnet/rng.hpp"

#include <cmath>
#include <complex>
#include <vector>

using namespace qtnet;

namespace {

// Reference propagator: Taylor series with scaling and squaring, independent
// of the eigendecomposition used by the library.
Eigen::MatrixXcd expm_reference(const Eigen::MatrixXd& h, double t) {
    Eigen::MatrixXcd a = std::complex<double>(0, 1) * t * h;
    int squarings = 0;
    double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    while (norm > 0.5) {
        a *= 0.5;
        norm *= 0.5;
        ++squarings;
    }
    Eigen::MatrixXcd result = Eigen::MatrixXcd::Identity(h.rows(), h.cols());
    Eigen::MatrixXcd term = result;
    for (int k = 1; k <= 24; ++k) {
        term = term * a / static_cast<double>(k);
        result += term;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

SiteConfiguration corner_pair() {
    SiteConfiguration c;
    c.positions = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 1, 1)};
    return c;
}

} // namespace

TEST_CASE("hamiltonian entries are inverse cube couplings with empty diagonal") {
    auto h2 = build_hamiltonian(corner_pair());
    CHECK(h2.matrix(0, 0) == 0.0);
    CHECK(h2.matrix(1, 1) == 0.0);
    CHECK(h2.matrix(0, 1) == doctest::Approx(std::pow(3.0, -1.5)).epsilon(1e-12));
    CHECK(h2.matrix(0, 1) == doctest::Approx(0.19245).epsilon(1e-4));

    auto c = sample_random_structure(6, 77);
    auto h = build_hamiltonian(c);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            if (i == j) {
                CHECK(h.matrix(i, j) == 0.0);
                continue;
            }
            double r = (c.positions[i] - c.positions[j]).norm();
            CHECK(h.matrix(i, j) == doctest::Approx(1.0 / (r * r * r)).epsilon(1e-12));
            CHECK(h.matrix(i, j) == h.matrix(j, i));
        }
}

TEST_CASE("hamiltonian rejects coincident sites") {
    SiteConfiguration c;
    c.positions = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1e-9, 0, 0),
                   Eigen::Vector3d(1, 1, 1)};
    CHECK_THROWS(build_hamiltonian(c));
}

TEST_CASE("coupling scales with the inverse cube of separation") {
    SiteConfiguration a, b;
    a.positions = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0.2, 0, 0)};
    b.positions = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0.4, 0, 0)};
    auto ha = build_hamiltonian(a), hb = build_hamiltonian(b);
    CHECK(ha.matrix(0, 1) == doctest::Approx(8.0 * hb.matrix(0, 1)).epsilon(1e-12));
}

TEST_CASE("time window is a tenth of the direct interaction period") {
    CHECK(window_tau(corner_pair()) ==
          doctest::Approx(0.2 * M_PI * 3.0 * std::sqrt(3.0)).epsilon(1e-12));
    // window depends only on the input-output separation
    auto c = sample_random_structure(6, 5);
    CHECK(window_tau(c) == doctest::Approx(window_tau(corner_pair())).epsilon(1e-12));
}

TEST_CASE("two-site transport matches the closed-form Rabi oscillation") {
    TransportOptions opts;
    opts.compute_integral = true;
    auto r = transport_efficiency(corner_pair(), opts);
    // p_out(t) = sin^2(v t) with v tau = 0.2 pi
    CHECK(r.epsilon_max == doctest::Approx(std::sin(0.2 * M_PI) * std::sin(0.2 * M_PI))
                               .epsilon(1e-8));
    CHECK(r.t_star == doctest::Approx(1.0).epsilon(1e-6));
    // (1/tau) int_0^tau sin^2(vt) dt = 1/2 - sin(0.4 pi) / (0.8 pi)
    CHECK(std::abs(r.epsilon_int - (0.5 - std::sin(0.4 * M_PI) / (0.8 * M_PI))) < 1e-4);
    CHECK(r.tau == doctest::Approx(0.2 * M_PI * 3.0 * std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("amplitudes agree with an independent matrix exponential") {
    for (int trial = 0; trial < 20; ++trial) {
        auto c = sample_random_structure(6, derive_seed(3, trial));
        auto h = build_hamiltonian(c);
        auto spec = decompose(h);
        double tau = window_tau(c);
        for (double f : {0.13, 0.5, 1.0}) {
            auto u = expm_reference(h.matrix, f * tau);
            auto a = amplitude(spec, c.input(), c.output(), f * tau);
            CHECK(std::abs(a - u(c.output(), c.input())) < 1e-8);
        }
    }
}

TEST_CASE("propagation is unitary") {
    for (int n : {4, 6, 8}) {
        for (int trial = 0; trial < 20; ++trial) {
            auto c = sample_random_structure(n, derive_seed(n, trial));
            auto spec = decompose(build_hamiltonian(c));
            double tau = window_tau(c);
            for (int step = 0; step <= 16; ++step) {
                double t = tau * step / 16.0;
                double total = 0.0;
                for (int k = 0; k < n; ++k)
                    total += std::norm(amplitude(spec, c.input(), k, t));
                CHECK(std::abs(total - 1.0) < 1e-10);
            }
        }
    }
}

TEST_CASE("transport is symmetric under input-output exchange") {
    for (int trial = 0; trial < 10; ++trial) {
        auto c = sample_random_structure(6, derive_seed(9, trial));
        auto spec = decompose(build_hamiltonian(c));
        double t = 0.4 * window_tau(c);
        auto fwd = amplitude(spec, c.input(), c.output(), t);
        auto bwd = amplitude(spec, c.output(), c.input(), t);
        CHECK(std::abs(std::abs(fwd) - std::abs(bwd)) < 1e-12);
    }
}

TEST_CASE("grid resolution is sufficient for the maximum search") {
    // quadrupling the grid never improves the refined maximum materially
    for (int trial = 0; trial < 100; ++trial) {
        auto c = sample_random_structure(6, derive_seed(31, trial));
        TransportOptions coarse, fine;
        fine.grid_points = 4 * kTimeGridPoints;
        double lo = transport_efficiency(c, coarse).epsilon_max;
        double hi = transport_efficiency(c, fine).epsilon_max;
        CHECK(hi - lo < 1e-6);
    }
}

TEST_CASE("doubling the window can only raise the maximum") {
    for (int trial = 0; trial < 20; ++trial) {
        auto c = sample_random_structure(6, derive_seed(47, trial));
        TransportOptions one, two;
        two.window_multiplier = 2.0;
        auto r1 = transport_efficiency(c, one);
        auto r2 = transport_efficiency(c, two);
        // the doubled window reuses the grid size, so allow refinement noise
        CHECK(r2.epsilon_max >= r1.epsilon_max - 1e-6);
        CHECK(r2.tau == doctest::Approx(2.0 * r1.tau).epsilon(1e-12));
    }
}

TEST_CASE("site excitation maxima bound the transport efficiency") {
    for (int trial = 0; trial < 10; ++trial) {
        auto c = sample_random_structure(6, derive_seed(53, trial));
        auto maxima = max_site_excitations(c);
        REQUIRE(maxima.size() == 6);
        auto r = transport_efficiency(c);
        CHECK(maxima[5] == doctest::Approx(r.epsilon_max).epsilon(1e-9));
        // the input starts fully excited
        CHECK(maxima[0] == doctest::Approx(1.0).epsilon(1e-12));
        for (double m : maxima) {
            CHECK(m >= 0.0);
            CHECK(m <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("trajectory recording samples normalized populations") {
    TransportOptions opts;
    opts.record_trajectory = true;
    auto c = sample_random_structure(6, 19);
    auto r = transport_efficiency(c, opts);
    REQUIRE(r.trajectory.has_value());
    const auto& traj = *r.trajectory;
    REQUIRE(traj.times.size() > 100);
    REQUIRE(static_cast<size_t>(traj.populations.rows()) == traj.times.size());
    REQUIRE(traj.populations.cols() == 6);
    for (Eigen::Index i = 0; i < traj.populations.rows(); ++i)
        CHECK(std::abs(traj.populations.row(i).sum() - 1.0) < 1e-10);
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == doctest::Approx(r.tau).epsilon(1e-12));
}
