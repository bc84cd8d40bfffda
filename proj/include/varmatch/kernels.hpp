// kernels.hpp - scalar kernel functions and their derivatives.
//
// Three kernel roles:
//   SpatialKernel     rho(s), s = |x-x'|^2, Gaussian family.
//   OrientationKernel gamma(t), t = <d,d'> in [-1,1], four families.
//   DeformationKernel h(s) for the vector-field RKHS, K(x,y) = h(|x-y|^2) I_n,
//                     Gaussian family with derivatives up to order 3.

#pragma once

#include <stdexcept>
#include <string>

namespace varmatch {

struct SpatialKernel {
    double sigma = 1.0;

    explicit SpatialKernel(double sigma_ = 1.0) : sigma(sigma_) {
        if (!(sigma > 0.0)) throw std::invalid_argument("spatial kernel sigma must be > 0");
    }

    // rho(s) = exp(-s / sigma^2)
    double rho(double s) const;
    double drho(double s) const;
};

enum class OrientationFamily { Linear, Binet, UnorientedGaussian, OrientedGaussian };

OrientationFamily parse_orientation_family(const std::string& name);
std::string to_string(OrientationFamily family);

struct OrientationKernel {
    OrientationFamily family = OrientationFamily::OrientedGaussian;
    double sigma_s = 1.0;  // used by the two Gaussian families

    OrientationKernel() = default;
    OrientationKernel(OrientationFamily family_, double sigma_s_ = 1.0)
        : family(family_), sigma_s(sigma_s_) {
        const bool needs_sigma = family == OrientationFamily::UnorientedGaussian ||
                                 family == OrientationFamily::OrientedGaussian;
        if (needs_sigma && !(sigma_s > 0.0))
            throw std::invalid_argument("orientation kernel sigma_s must be > 0");
    }

    // gamma(t); inputs slightly outside [-1,1] from unit-vector rounding are
    // clamped, anything beyond 1e-12 past the interval is rejected.
    double gamma(double t) const;
    double dgamma(double t) const;

    // Analytic extension without the clamp. All four families are entire in t;
    // gradient code differentiating through near-unit vectors needs the smooth
    // extension rather than the clamped boundary.
    double gamma_ext(double t) const;
    double dgamma_ext(double t) const;
};

// h(s) and its first three derivatives, sharing one exponential evaluation.
struct HDerivs {
    double h0, h1, h2, h3;
};

struct DeformationKernel {
    double sigma_v = 1.0;

    explicit DeformationKernel(double sigma_v_ = 1.0) : sigma_v(sigma_v_) {
        if (!(sigma_v > 0.0)) throw std::invalid_argument("deformation kernel sigma_v must be > 0");
    }

    // m-th derivative of h(s) = exp(-s / sigma_v^2), m in 0..3.
    double h(double s, int order = 0) const;

    HDerivs derivs(double s) const;
};

// Order-based entry points mirroring the kernel contracts. order beyond the
// supported range is rejected.
double rho_derivs(const SpatialKernel& k, double s, int order);
double gamma_derivs(const OrientationKernel& k, double t, int order);
double h_derivs(const DeformationKernel& k, double s, int order);

}  // namespace varmatch
