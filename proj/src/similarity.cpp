#include "qtnet/similarity.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qtnet {

namespace {

constexpr int kRotationSteps = 180; // 2-degree grid

struct RotTable {
    std::array<double, kRotationSteps> c, s;
    RotTable() {
        for (int r = 0; r < kRotationSteps; ++r) {
            const double a = 2.0 * r * M_PI / 180.0;
            c[r] = std::cos(a);
            s[r] = std::sin(a);
        }
    }
};

Eigen::Vector3d rotate_step(const Eigen::Vector3d& p, int step) {
    static const RotTable table;
    static const Eigen::Vector3d axis = Eigen::Vector3d::Ones().normalized();
    return p * table.c[step] + axis.cross(p) * table.s[step] +
           axis * axis.dot(p) * (1.0 - table.c[step]);
}

// Enumerates permutations in lexicographic order with partial-sum abandonment.
// cost(i, j) = squared distance from a-intermediate i to transformed
// b-intermediate j; perm maps slot i -> b index.
struct PermSearch {
    const Eigen::MatrixXd& cost;
    double bound; // abandon branches whose partial sum exceeds this
    double best_sum = std::numeric_limits<double>::infinity();
    std::vector<int> best_perm;
    std::vector<int> current;
    std::vector<bool> used;
    long leaves = 0;
    bool prune;
    bool improved = false;

    PermSearch(const Eigen::MatrixXd& c, double bound_, bool prune_)
        : cost(c), bound(bound_), current(c.rows()), used(c.rows(), false), prune(prune_) {}

    void run() { descend(0, 0.0); }

    void descend(int slot, double partial) {
        const int m = static_cast<int>(cost.rows());
        if (slot == m) {
            ++leaves;
            if (partial < best_sum) {
                best_sum = partial;
                best_perm = current;
                improved = true;
            }
            return;
        }
        for (int j = 0; j < m; ++j) {
            if (used[j]) continue;
            const double next = partial + cost(slot, j);
            if (prune && next > bound && next > best_sum) continue;
            used[j] = true;
            current[slot] = j;
            descend(slot + 1, next);
            used[j] = false;
        }
    }
};

} // namespace

AlignmentResult similarity_score(const SiteConfiguration& a, const SiteConfiguration& b,
                                 const SimilarityOptions& opts) {
    const int n = a.n_sites();
    if (b.n_sites() != n) throw std::invalid_argument("similarity_score: dimension mismatch");
    const int m = n - 2;

    AlignmentResult result;
    result.s_squared = std::numeric_limits<double>::infinity();
    result.best_transform = SymmetryTransform::identity(m);

    // Input/output are fixed points of every candidate transform and coincide
    // between canonical structures, so only intermediates contribute to S^2.
    const double cutoff_sum =
        opts.cutoff ? *opts.cutoff * n : std::numeric_limits<double>::infinity();

    double best_sum = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd cost(m, m);
    std::vector<Eigen::Vector3d> tb(m);

    for (int r = 0; r < kRotationSteps; ++r) {
        for (int mir = 0; mir < 2; ++mir) {
            for (int j = 0; j < m; ++j) {
                Eigen::Vector3d p = rotate_step(b.positions[1 + j], r);
                if (mir) p = mirror_xy(p);
                tb[j] = p;
            }
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    cost(i, j) = (a.positions[1 + i] - tb[j]).squaredNorm();

            const double bound = opts.exhaustive
                                     ? std::numeric_limits<double>::infinity()
                                     : std::min(best_sum, cutoff_sum);
            PermSearch search(cost, bound, !opts.exhaustive);
            search.best_sum = opts.exhaustive ? std::numeric_limits<double>::infinity() : best_sum;
            search.best_perm.clear();
            search.run();
            result.evaluations += search.leaves;

            if (search.improved && search.best_sum < best_sum) {
                best_sum = search.best_sum;
                result.best_transform.permutation = search.best_perm;
                result.best_transform.rotation_step = r;
                result.best_transform.mirror = (mir == 1);
            }
            if (opts.cutoff && best_sum < cutoff_sum) {
                result.s_squared = best_sum / n;
                result.below_cutoff = true;
                return result;
            }
        }
    }
    result.s_squared = best_sum / n;
    result.below_cutoff = opts.cutoff && result.s_squared < *opts.cutoff;
    return result;
}

double axis_profile_lower_bound(const SiteConfiguration& a, const SiteConfiguration& b) {
    const int n = a.n_sites();
    if (b.n_sites() != n) throw std::invalid_argument("axis_profile_lower_bound: dimension mismatch");
    const int m = n - 2;
    if (m == 0) return 0.0;

    static const Eigen::Vector3d axis = Eigen::Vector3d::Ones().normalized();
    auto features = [&](const SiteConfiguration& c, int i) {
        const Eigen::Vector3d& p = c.positions[1 + i];
        const double axial = axis.dot(p);
        const double radial = (p - axial * axis).norm();
        return std::pair<double, double>(axial, radial);
    };

    // For matched sites, |a - T b|^2 >= (axial difference)^2 + (radial
    // difference)^2 for every rotation/mirror, so the assignment-minimized
    // feature cost bounds S^2 from below.
    Eigen::MatrixXd cost(m, m);
    for (int i = 0; i < m; ++i) {
        auto [ai, ri] = features(a, i);
        for (int j = 0; j < m; ++j) {
            auto [aj, rj] = features(b, j);
            cost(i, j) = (ai - aj) * (ai - aj) + (ri - rj) * (ri - rj);
        }
    }
    PermSearch search(cost, std::numeric_limits<double>::infinity(), true);
    search.run();
    return search.best_sum / n;
}

} // namespace qtnet
