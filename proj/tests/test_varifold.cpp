#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "testutil.hpp"
#include "varmatch/fidelity.hpp"
#include "varmatch/synthetic.hpp"
#include "varmatch/varifold.hpp"

using namespace varmatch;

TEST_CASE("dirac invariants are enforced at construction") {
    CHECK_THROWS_AS(DiscreteVarifold(2, {{Vec(0, 0), Vec(1, 0), -1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(DiscreteVarifold(2, {{Vec(0, 0), Vec(2, 0), 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(DiscreteVarifold(4, {}), std::invalid_argument);
    // coincident (x, d) pairs are rejected, repeated positions alone are fine
    CHECK_THROWS_AS(
        DiscreteVarifold(2, {{Vec(0, 0), Vec(1, 0), 1.0}, {Vec(0, 0), Vec(1, 0), 2.0}}),
        std::invalid_argument);
    const DiscreteVarifold two_dirs(2, {{Vec(0, 0), Vec(1, 0), 1.0}, {Vec(0, 0), Vec(0, 1), 2.0}});
    CHECK(two_dirs.size() == 2);
    CHECK_FALSE(two_dirs.has_distinct_positions());
}

TEST_CASE("curve conversion: midpoint, tangent, length") {
    const PolylineCurve segment(2, {Vec(0, 0), Vec(2, 0)}, false);
    const DiscreteVarifold mu = curve_to_varifold(segment);
    REQUIRE(mu.size() == 1);
    CHECK(mu[0].x[0] == 1.0);
    CHECK(mu[0].x[1] == 0.0);
    CHECK(mu[0].d[0] == 1.0);
    CHECK(mu[0].r == 2.0);

    const PolylineCurve square(2, {Vec(0, 0), Vec(1, 0), Vec(1, 1), Vec(0, 1)}, true);
    const DiscreteVarifold sq = curve_to_varifold(square);
    REQUIRE(sq.size() == 4);
    CHECK(sq.total_mass() == 4.0);
    CHECK(sq.has_distinct_positions());
    const Vec expected_dirs[4] = {Vec(1, 0), Vec(0, 1), Vec(-1, 0), Vec(0, -1)};
    for (int i = 0; i < 4; ++i) {
        CHECK(sq[static_cast<size_t>(i)].r == 1.0);
        CHECK(norm(sq[static_cast<size_t>(i)].d - expected_dirs[i]) < 1e-15);
    }
}

TEST_CASE("semicircle mass approaches the analytic arc length") {
    const DiscreteVarifold mu = curve_to_varifold(make_semicircle_polyline(Vec(0, 0), 1.0, 64));
    CHECK(std::fabs(mu.total_mass() - M_PI) < 0.002);
}

TEST_CASE("degenerate curve segments are rejected with their index") {
    std::vector<Vec> verts{Vec(0, 0), Vec(1, 0), Vec(1, 0), Vec(2, 0)};
    CHECK_THROWS_AS(PolylineCurve(2, verts, false), std::invalid_argument);
    // a nearly-degenerate segment passes curve validation but fails conversion
    verts[2] = Vec(1.0 + 1e-14, 0);
    const PolylineCurve curve(2, verts, false);
    CHECK_THROWS_WITH_AS(curve_to_varifold(curve), doctest::Contains("index 1"),
                         std::invalid_argument);
}

TEST_CASE("mesh conversion: barycenter, normal, area") {
    const TriangleMesh tri({Vec(0, 0, 0), Vec(1, 0, 0), Vec(0, 1, 0)}, {{0, 1, 2}});
    const DiscreteVarifold mu = mesh_to_varifold(tri);
    REQUIRE(mu.size() == 1);
    CHECK(norm(mu[0].x - Vec(1.0 / 3, 1.0 / 3, 0)) < 1e-15);
    CHECK(norm(mu[0].d - Vec(0, 0, 1)) < 1e-15);
    CHECK(mu[0].r == 0.5);

    // reversing the vertex order flips the normal
    const TriangleMesh flipped({Vec(0, 0, 0), Vec(1, 0, 0), Vec(0, 1, 0)}, {{0, 2, 1}});
    CHECK(norm(mesh_to_varifold(flipped)[0].d - Vec(0, 0, -1)) < 1e-15);

    CHECK_THROWS_AS(TriangleMesh({Vec(0, 0, 0), Vec(1, 0, 0)}, {{0, 1, 2}}), std::invalid_argument);
    CHECK_THROWS_AS(TriangleMesh({Vec(0, 0, 0), Vec(1, 0, 0), Vec(2, 0, 0)}, {{0, 1, 2}}),
                    std::invalid_argument);
}

TEST_CASE("icosphere area approaches the analytic sphere area") {
    const DiscreteVarifold mu = mesh_to_varifold(make_icosphere(1.0, 3));
    CHECK(std::fabs(mu.total_mass() - 4.0 * M_PI) / (4.0 * M_PI) < 0.02);
}

TEST_CASE("image conversion") {
    SUBCASE("constant image gives an empty varifold") {
        const GrayImage img(8, 8, std::vector<double>(64, 0.7));
        CHECK(image_to_varifold(img).empty());
    }

    SUBCASE("vertical step edge points along +x") {
        std::vector<double> pixels(9 * 7, 0.0);
        for (int row = 0; row < 7; ++row)
            for (int col = 5; col < 9; ++col) pixels[static_cast<size_t>(row) * 9 + col] = 1.0;
        const DiscreteVarifold mu = image_to_varifold(GrayImage(9, 7, pixels), 0.0);
        REQUIRE(!mu.empty());
        for (const Dirac& a : mu.diracs()) CHECK(norm(a.d - Vec(1, 0)) < 1e-15);
        for (const Dirac& a : mu.diracs()) CHECK(a.r == 1.0);
    }

    SUBCASE("images smaller than 3x3 are rejected") {
        CHECK_THROWS_AS(image_to_varifold(GrayImage(2, 5, std::vector<double>(10, 0.0))),
                        std::invalid_argument);
    }

    SUBCASE("monotone contrast change leaves directions unchanged") {
        // ridge image I = s(x+y): both central-difference pairs straddle the
        // same values, so any monotone c keeps the discrete direction exactly
        const int size = 12;
        std::vector<double> base(static_cast<size_t>(size) * size);
        for (int row = 0; row < size; ++row)
            for (int col = 0; col < size; ++col)
                base[static_cast<size_t>(row) * size + col] =
                    1.0 / (1.0 + std::exp(-(col + row - size) / 3.0));
        std::vector<double> contrasted = base;
        for (double& v : contrasted) v = v * v * v + v;   // c(I) = I^3 + I, c' > 0

        const DiscreteVarifold mu = image_to_varifold(GrayImage(size, size, base), 0.0);
        const DiscreteVarifold nu = image_to_varifold(GrayImage(size, size, contrasted), 0.0);
        REQUIRE(mu.size() == nu.size());
        REQUIRE(mu.size() == static_cast<size_t>((size - 2) * (size - 2)));
        for (size_t i = 0; i < mu.size(); ++i) {
            CHECK(norm(mu[i].x - nu[i].x) == 0.0);
            CHECK(norm(mu[i].d - nu[i].d) < 1e-12);
        }
    }
}

TEST_CASE("rigid transforms") {
    testutil::Rng rng(7);
    const DiscreteVarifold mu = testutil::random_varifold(rng, 2, 5);

    SUBCASE("identity leaves the varifold unchanged") {
        const DiscreteVarifold out = rigid_transform(mu, Mat::identity(), Vec());
        for (size_t i = 0; i < mu.size(); ++i) {
            CHECK(norm(out[i].x - mu[i].x) == 0.0);
            CHECK(norm(out[i].d - mu[i].d) < 1e-15);
            CHECK(out[i].r == mu[i].r);
        }
    }

    SUBCASE("quarter turn") {
        const DiscreteVarifold one(2, {{Vec(1, 0), Vec(1, 0), 1.0}});
        const DiscreteVarifold out = rigid_transform(one, rotation_2d(M_PI / 2), Vec());
        CHECK(norm(out[0].x - Vec(0, 1)) < 1e-15);
        CHECK(norm(out[0].d - Vec(0, 1)) < 1e-15);
    }

    SUBCASE("non-orthogonal matrices are rejected") {
        Mat bad = Mat::identity();
        bad(0, 1) = 0.01;
        CHECK_THROWS_AS(rigid_transform(mu, bad, Vec()), std::invalid_argument);
        // reflections (det -1) are rejected too
        Mat reflect = Mat::identity();
        reflect(0, 0) = -1.0;
        CHECK_THROWS_AS(rigid_transform(mu, reflect, Vec()), std::invalid_argument);
    }

    SUBCASE("the W* norm is rigid-motion invariant") {
        const FidelityConfig cfg{SpatialKernel(0.8),
                                 OrientationKernel(OrientationFamily::OrientedGaussian, 1.2)};
        for (int trial = 0; trial < 5; ++trial) {
            const Mat rot = rotation_2d(rng.uniform(-M_PI, M_PI));
            const Vec shift = rng.vec_in_box(2, 2.0);
            const DiscreteVarifold moved = rigid_transform(mu, rot, shift);
            const double before = inner_product(cfg, mu, mu);
            const double after = inner_product(cfg, moved, moved);
            CHECK(testutil::rel_err(after, before) < 1e-10);
        }
    }
}

TEST_CASE("permutation invariance of varifold-consuming operations") {
    testutil::Rng rng(99);
    const DiscreteVarifold mu = testutil::random_varifold(rng, 3, 6);
    std::vector<Dirac> shuffled(mu.diracs());
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled[0], shuffled[3]);
    const DiscreteVarifold pi_mu(3, std::move(shuffled));

    CHECK(testutil::rel_err(pi_mu.total_mass(), mu.total_mass()) < 1e-15);
    const FidelityConfig cfg{SpatialKernel(1.1),
                             OrientationKernel(OrientationFamily::UnorientedGaussian, 0.9)};
    const DiscreteVarifold nu = testutil::random_varifold(rng, 3, 4);
    CHECK(testutil::rel_err(inner_product(cfg, pi_mu, nu), inner_product(cfg, mu, nu)) < 1e-12);
    CHECK(std::fabs(squared_distance(cfg, pi_mu, mu)) < 1e-12);
}

TEST_CASE("conversion mass equals geometric measure to machine precision") {
    testutil::Rng rng(3);
    // an irregular open polyline
    std::vector<Vec> verts;
    for (int i = 0; i < 9; ++i) verts.push_back(Vec(i * 0.4 + rng.uniform(0, 0.1), rng.uniform(-1, 1)));
    const PolylineCurve curve(2, verts, false);
    double length = 0.0;
    for (size_t i = 0; i + 1 < verts.size(); ++i) length += norm(verts[i + 1] - verts[i]);
    CHECK(testutil::rel_err(curve_to_varifold(curve).total_mass(), length) < 1e-14);

    const TriangleMesh sphere = make_icosphere(0.7, 2);
    double area = 0.0;
    for (const auto& f : sphere.faces) {
        const Vec a = sphere.vertices[static_cast<size_t>(f[0])];
        const Vec b = sphere.vertices[static_cast<size_t>(f[1])];
        const Vec c = sphere.vertices[static_cast<size_t>(f[2])];
        area += 0.5 * norm(cross(b - a, c - a));
    }
    CHECK(testutil::rel_err(mesh_to_varifold(sphere).total_mass(), area) < 1e-14);
}
