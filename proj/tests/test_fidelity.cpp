#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "varmatch/fidelity.hpp"

using namespace varmatch;

namespace {

FidelityConfig oriented_cfg(double sigma = 1.0, double sigma_s = 1.5) {
    return {SpatialKernel(sigma), OrientationKernel(OrientationFamily::OrientedGaussian, sigma_s)};
}

// Independent naive evaluation of the double kernel sum.
double naive_inner(const FidelityConfig& cfg, const DiscreteVarifold& mu, const DiscreteVarifold& nu) {
    double total = 0.0;
    for (const Dirac& a : mu.diracs())
        for (const Dirac& b : nu.diracs()) {
            double s = 0.0, t = 0.0;
            for (int k = 0; k < 3; ++k) {
                s += (a.x[k] - b.x[k]) * (a.x[k] - b.x[k]);
                t += a.d[k] * b.d[k];
            }
            total += a.r * b.r * cfg.spatial.rho(s) * cfg.orientation.gamma(t);
        }
    return total;
}

}  // namespace

TEST_CASE("inner product basics") {
    const DiscreteVarifold single(2, {{Vec(0, 0), Vec(1, 0), 1.0}});
    CHECK(inner_product(oriented_cfg(), single, single) == doctest::Approx(1.0).epsilon(1e-15));

    SUBCASE("dimension mismatch is rejected") {
        const DiscreteVarifold three(3, {{Vec(0, 0, 0), Vec(1, 0, 0), 1.0}});
        CHECK_THROWS_AS(inner_product(oriented_cfg(), single, three), std::invalid_argument);
    }

    SUBCASE("a linear-kernel dipole annihilates against everything") {
        const FidelityConfig cfg{SpatialKernel(0.9), OrientationKernel(OrientationFamily::Linear)};
        const DiscreteVarifold dipole(
            2, {{Vec(0.2, -0.1), Vec(1, 0), 1.0}, {Vec(0.2, -0.1), Vec(-1, 0), 1.0}});
        testutil::Rng rng(5);
        for (int trial = 0; trial < 4; ++trial) {
            const DiscreteVarifold nu = testutil::random_varifold(rng, 2, 4);
            CHECK(std::fabs(inner_product(cfg, dipole, nu)) < 1e-14);
        }
        CHECK(std::fabs(inner_product(cfg, dipole, dipole)) < 1e-14);
    }

    SUBCASE("matches the naive double-loop oracle") {
        testutil::Rng rng(11);
        const DiscreteVarifold mu = testutil::random_varifold(rng, 3, 5);
        const DiscreteVarifold nu = testutil::random_varifold(rng, 3, 5);
        const FidelityConfig cfg{SpatialKernel(1.2),
                                 OrientationKernel(OrientationFamily::Binet)};
        CHECK(testutil::rel_err(inner_product(cfg, mu, nu), naive_inner(cfg, mu, nu)) < 1e-15);
    }

    SUBCASE("symmetry is exact") {
        testutil::Rng rng(12);
        const DiscreteVarifold mu = testutil::random_varifold(rng, 2, 6);
        const DiscreteVarifold nu = testutil::random_varifold(rng, 2, 3);
        const FidelityConfig cfg = oriented_cfg(0.7, 1.1);
        CHECK(inner_product(cfg, mu, nu) == inner_product(cfg, nu, mu));
    }

    SUBCASE("bilinearity in the weights") {
        testutil::Rng rng(13);
        const DiscreteVarifold mu = testutil::random_varifold(rng, 2, 5);
        const DiscreteVarifold nu = testutil::random_varifold(rng, 2, 4);
        std::vector<Dirac> scaled = mu.diracs();
        for (Dirac& a : scaled) a.r *= 3.25;
        const DiscreteVarifold mu3(2, std::move(scaled));
        const FidelityConfig cfg = oriented_cfg();
        CHECK(testutil::rel_err(inner_product(cfg, mu3, nu), 3.25 * inner_product(cfg, mu, nu)) <
              1e-14);
    }
}

TEST_CASE("squared distance and metric regimes") {
    testutil::Rng rng(21);

    SUBCASE("distance to itself is zero") {
        const DiscreteVarifold mu = testutil::random_varifold(rng, 2, 6);
        CHECK(squared_distance(oriented_cfg(), mu, mu) < 1e-12);
    }

    SUBCASE("oriented Gaussian separates distinct varifolds") {
        for (int trial = 0; trial < 10; ++trial) {
            const DiscreteVarifold mu = testutil::random_varifold(rng, 2, 4);
            const DiscreteVarifold nu = testutil::random_varifold(rng, 2, 4);
            CHECK(squared_distance(oriented_cfg(), mu, nu) > 1e-8);
        }
    }

    SUBCASE("orientation-invariant kernels identify flipped diracs") {
        const DiscreteVarifold mu(2, {{Vec(0.3, 0.4), Vec(0.6, 0.8), 1.3}});
        const DiscreteVarifold flipped(2, {{Vec(0.3, 0.4), Vec(-0.6, -0.8), 1.3}});
        for (const auto family :
             {OrientationFamily::UnorientedGaussian, OrientationFamily::Binet}) {
            const FidelityConfig cfg{SpatialKernel(1.0), OrientationKernel(family, 1.0)};
            CHECK(squared_distance(cfg, mu, flipped) < 1e-12);
        }
        CHECK(squared_distance(oriented_cfg(), mu, flipped) > 1e-3);
    }

    SUBCASE("Binet identifies co-located orthonormal pairs") {
        const FidelityConfig cfg{SpatialKernel(1.0), OrientationKernel(OrientationFamily::Binet)};
        const Vec x(0.1, -0.2);
        const double a = 0.77;
        const DiscreteVarifold mu(2, {{x, Vec(1, 0), 1.0}, {x, Vec(0, 1), 1.0}});
        const DiscreteVarifold nu(
            2, {{x, Vec(std::cos(a), std::sin(a)), 1.0}, {x, Vec(-std::sin(a), std::cos(a)), 1.0}});
        CHECK(squared_distance(cfg, mu, nu) < 1e-12);
        // the oriented Gaussian still tells them apart
        CHECK(squared_distance(oriented_cfg(), mu, nu) > 1e-4);
    }

    SUBCASE("linear kernel identifies same-point sums (3D rotation about the sum)") {
        const FidelityConfig cfg{SpatialKernel(1.0), OrientationKernel(OrientationFamily::Linear)};
        const Vec x(0.2, 0.1, -0.3);
        const Vec axis = normalized(Vec(1, 1, 0));
        const Vec d1 = normalized(Vec(1, 0, 0.4));
        const Vec d2 = normalized(axis * (2.0 * dot(axis, d1)) - d1);   // mirror: d1+d2 along axis
        const Mat rot = rotation_3d(axis, 0.9);
        const DiscreteVarifold mu(3, {{x, d1, 1.0}, {x, d2, 1.0}});
        const DiscreteVarifold nu(
            3, {{x, normalized(rot.apply(d1)), 1.0}, {x, normalized(rot.apply(d2)), 1.0}});
        CHECK(norm((mu[0].d + mu[1].d) - (nu[0].d + nu[1].d)) < 1e-12);
        CHECK(squared_distance(cfg, mu, nu) < 1e-12);
    }

    SUBCASE("rigid invariance of the squared distance") {
        const FidelityConfig cfg = oriented_cfg(0.8, 1.3);
        const DiscreteVarifold mu = testutil::random_varifold(rng, 2, 5);
        const DiscreteVarifold nu = testutil::random_varifold(rng, 2, 4);
        for (int trial = 0; trial < 5; ++trial) {
            const Mat rot = rotation_2d(rng.uniform(-M_PI, M_PI));
            const Vec shift = rng.vec_in_box(2, 1.5);
            const double before = squared_distance(cfg, mu, nu);
            const double after =
                squared_distance(cfg, rigid_transform(mu, rot, shift), rigid_transform(nu, rot, shift));
            CHECK(testutil::rel_err(after, before) < 1e-10);
        }
    }
}

TEST_CASE("normalized fidelity gradient") {
    testutil::Rng rng(31);

    SUBCASE("zero at the minimum") {
        const DiscreteVarifold mu = testutil::random_varifold(rng, 2, 4);
        const auto grads = grad_fidelity_normalized(oriented_cfg(), mu, mu);
        for (const auto& g : grads) {
            CHECK(norm(g.dx) < 1e-12);
            CHECK(norm(g.dd) < 1e-12);
        }
    }

    SUBCASE("matches finite differences on random instances") {
        const std::vector<OrientationKernel> families = {
            OrientationKernel(OrientationFamily::Linear),
            OrientationKernel(OrientationFamily::Binet),
            OrientationKernel(OrientationFamily::UnorientedGaussian, 1.2),
            OrientationKernel(OrientationFamily::OrientedGaussian, 1.6)};
        for (int trial = 0; trial < 8; ++trial) {
            const int dim = trial % 2 == 0 ? 2 : 3;
            const FidelityConfig cfg{SpatialKernel(0.9), families[static_cast<size_t>(trial) % 4]};
            const DiscreteVarifold target = testutil::random_varifold(rng, dim, 4);
            const DiscreteVarifold mu = testutil::random_varifold(rng, dim, 4);

            std::vector<OrientedParticle> q;
            std::vector<double> flat;
            for (const Dirac& a : mu.diracs()) {
                q.push_back({a.x, a.d, a.r});
                for (int k = 0; k < dim; ++k) flat.push_back(a.x[k]);
            }
            for (const Dirac& a : mu.diracs())
                for (int k = 0; k < dim; ++k) flat.push_back(a.d[k]);

            const auto eval = [&](const std::vector<double>& v) {
                std::vector<OrientedParticle> qq = q;
                size_t pos = 0;
                for (auto& p : qq)
                    for (int k = 0; k < dim; ++k) p.x[k] = v[pos++];
                for (auto& p : qq)
                    for (int k = 0; k < dim; ++k) p.d[k] = v[pos++];
                return fidelity_normalized(cfg, qq, dim, target);
            };

            const auto grads = grad_fidelity_normalized(cfg, q, dim, target);
            std::vector<double> analytic;
            for (const auto& g : grads)
                for (int k = 0; k < dim; ++k) analytic.push_back(g.dx[k]);
            for (const auto& g : grads)
                for (int k = 0; k < dim; ++k) analytic.push_back(g.dd[k]);

            CHECK(testutil::rel_err(analytic, testutil::grad_fd(eval, flat)) < 1e-6);
        }
    }

    SUBCASE("gradient opposes a small translation toward the target") {
        const DiscreteVarifold mu = testutil::random_varifold(rng, 2, 5);
        const Vec shift(0.05, -0.03);
        std::vector<Dirac> moved = mu.diracs();
        for (Dirac& a : moved) a.x += shift;
        const DiscreteVarifold target(2, std::move(moved));
        const auto grads = grad_fidelity_normalized(oriented_cfg(), mu, target);
        Vec total;
        for (const auto& g : grads) total += g.dx;
        CHECK(dot(total, shift) < 0.0);
    }
}

TEST_CASE("pushforward fidelity gradient") {
    testutil::Rng rng(41);

    SUBCASE("zero at an exact match") {
        const DiscreteVarifold target = testutil::random_varifold(rng, 2, 4);
        std::vector<WeightedParticle> q;
        for (const Dirac& a : target.diracs()) q.push_back({a.x, a.d * a.r});
        CHECK(fidelity_pushforward(oriented_cfg(), q, 2, target) < 1e-12);
        for (const auto& g : grad_fidelity_pushforward(oriented_cfg(), q, 2, target)) {
            CHECK(norm(g.dx) < 1e-12);
            CHECK(norm(g.du) < 1e-12);
        }
    }

    SUBCASE("matches finite differences in u") {
        for (int trial = 0; trial < 8; ++trial) {
            const int dim = trial % 2 == 0 ? 2 : 3;
            const FidelityConfig cfg{
                SpatialKernel(1.1),
                OrientationKernel(trial % 2 == 0 ? OrientationFamily::OrientedGaussian
                                                 : OrientationFamily::UnorientedGaussian,
                                  1.4)};
            const DiscreteVarifold target = testutil::random_varifold(rng, dim, 4);
            std::vector<WeightedParticle> q;
            std::vector<double> flat;
            for (int i = 0; i < 4; ++i)
                q.push_back({rng.vec_in_box(dim, 1.0), rng.unit_vec(dim) * rng.uniform(0.5, 1.5)});
            for (const auto& p : q)
                for (int k = 0; k < dim; ++k) flat.push_back(p.x[k]);
            for (const auto& p : q)
                for (int k = 0; k < dim; ++k) flat.push_back(p.u[k]);

            const auto eval = [&](const std::vector<double>& v) {
                std::vector<WeightedParticle> qq = q;
                size_t pos = 0;
                for (auto& p : qq)
                    for (int k = 0; k < dim; ++k) p.x[k] = v[pos++];
                for (auto& p : qq)
                    for (int k = 0; k < dim; ++k) p.u[k] = v[pos++];
                return fidelity_pushforward(cfg, qq, dim, target);
            };

            const auto grads = grad_fidelity_pushforward(cfg, q, dim, target);
            std::vector<double> analytic;
            for (const auto& g : grads)
                for (int k = 0; k < dim; ++k) analytic.push_back(g.dx[k]);
            for (const auto& g : grads)
                for (int k = 0; k < dim; ++k) analytic.push_back(g.du[k]);

            CHECK(testutil::rel_err(analytic, testutil::grad_fd(eval, flat)) < 1e-6);
        }
    }

    SUBCASE("linear kernel cross term is linear in the scale of u") {
        const FidelityConfig cfg{SpatialKernel(1.0), OrientationKernel(OrientationFamily::Linear)};
        const DiscreteVarifold target = testutil::random_varifold(rng, 2, 3);
        std::vector<WeightedParticle> q;
        for (int i = 0; i < 3; ++i)
            q.push_back({rng.vec_in_box(2, 1.0), rng.unit_vec(2) * rng.uniform(0.5, 1.5)});

        // cross term <mu, target> = (|mu|^2 - g + |target|^2) / 2
        const auto cross = [&](const std::vector<WeightedParticle>& qq) {
            std::vector<Dirac> diracs;
            for (const auto& p : qq) diracs.push_back({p.x, normalized(p.u), norm(p.u)});
            const DiscreteVarifold mu(2, std::move(diracs));
            return inner_product(cfg, mu, target);
        };
        const double base = cross(q);
        for (double c : {2.0, 3.5, 0.25}) {
            std::vector<WeightedParticle> scaled = q;
            for (auto& p : scaled) p.u *= c;
            CHECK(testutil::rel_err(cross(scaled), c * base) < 1e-12);
        }
    }

    SUBCASE("collapsed mass is reported") {
        const DiscreteVarifold target = testutil::random_varifold(rng, 2, 2);
        std::vector<WeightedParticle> q{{Vec(0, 0), Vec(1e-13, 0)}};
        CHECK_THROWS_AS(fidelity_pushforward(oriented_cfg(), q, 2, target), std::runtime_error);
    }
}
