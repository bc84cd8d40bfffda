#include "varmatch/kernels.hpp"

#include <cmath>

namespace varmatch {

namespace {

double clamp_cosine(double t) {
    if (t > 1.0 + 1e-12 || t < -1.0 - 1e-12)
        throw std::invalid_argument("orientation kernel input outside [-1,1]: " + std::to_string(t));
    if (t > 1.0) return 1.0;
    if (t < -1.0) return -1.0;
    return t;
}

void require_nonnegative(double s, const char* what) {
    if (!(s >= 0.0)) throw std::invalid_argument(std::string(what) + " expects s >= 0");
}

}  // namespace

double SpatialKernel::rho(double s) const {
    require_nonnegative(s, "SpatialKernel::rho");
    return std::exp(-s / (sigma * sigma));
}

double SpatialKernel::drho(double s) const {
    require_nonnegative(s, "SpatialKernel::drho");
    const double inv = 1.0 / (sigma * sigma);
    return -inv * std::exp(-s * inv);
}

OrientationFamily parse_orientation_family(const std::string& name) {
    if (name == "linear") return OrientationFamily::Linear;
    if (name == "binet") return OrientationFamily::Binet;
    if (name == "unoriented-gaussian") return OrientationFamily::UnorientedGaussian;
    if (name == "oriented-gaussian") return OrientationFamily::OrientedGaussian;
    throw std::invalid_argument("unknown orientation kernel family: " + name);
}

std::string to_string(OrientationFamily family) {
    switch (family) {
        case OrientationFamily::Linear: return "linear";
        case OrientationFamily::Binet: return "binet";
        case OrientationFamily::UnorientedGaussian: return "unoriented-gaussian";
        case OrientationFamily::OrientedGaussian: return "oriented-gaussian";
    }
    throw std::logic_error("unreachable");
}

double OrientationKernel::gamma(double t) const { return gamma_ext(clamp_cosine(t)); }

double OrientationKernel::dgamma(double t) const { return dgamma_ext(clamp_cosine(t)); }

double OrientationKernel::gamma_ext(double t) const {
    switch (family) {
        case OrientationFamily::Linear:
            return t;
        case OrientationFamily::Binet:
            return t * t;
        case OrientationFamily::UnorientedGaussian:
            return std::exp(-2.0 * (1.0 - t * t) / (sigma_s * sigma_s));
        case OrientationFamily::OrientedGaussian:
            return std::exp(-2.0 * (1.0 - t) / (sigma_s * sigma_s));
    }
    throw std::logic_error("unreachable");
}

double OrientationKernel::dgamma_ext(double t) const {
    switch (family) {
        case OrientationFamily::Linear:
            return 1.0;
        case OrientationFamily::Binet:
            return 2.0 * t;
        case OrientationFamily::UnorientedGaussian:
            return 4.0 * t / (sigma_s * sigma_s) *
                   std::exp(-2.0 * (1.0 - t * t) / (sigma_s * sigma_s));
        case OrientationFamily::OrientedGaussian:
            return 2.0 / (sigma_s * sigma_s) * std::exp(-2.0 * (1.0 - t) / (sigma_s * sigma_s));
    }
    throw std::logic_error("unreachable");
}

double DeformationKernel::h(double s, int order) const {
    require_nonnegative(s, "DeformationKernel::h");
    if (order < 0 || order > 3)
        throw std::invalid_argument("deformation kernel derivative order must be in 0..3");
    const double inv = 1.0 / (sigma_v * sigma_v);
    double factor = 1.0;
    for (int m = 0; m < order; ++m) factor *= -inv;
    return factor * std::exp(-s * inv);
}

HDerivs DeformationKernel::derivs(double s) const {
    require_nonnegative(s, "DeformationKernel::derivs");
    const double inv = 1.0 / (sigma_v * sigma_v);
    const double e = std::exp(-s * inv);
    return {e, -inv * e, inv * inv * e, -inv * inv * inv * e};
}

double rho_derivs(const SpatialKernel& k, double s, int order) {
    if (order == 0) return k.rho(s);
    if (order == 1) return k.drho(s);
    throw std::invalid_argument("spatial kernel derivative order must be 0 or 1");
}

double gamma_derivs(const OrientationKernel& k, double t, int order) {
    if (order == 0) return k.gamma(t);
    if (order == 1) return k.dgamma(t);
    throw std::invalid_argument("orientation kernel derivative order must be 0 or 1");
}

double h_derivs(const DeformationKernel& k, double s, int order) { return k.h(s, order); }

}  // namespace varmatch
