// fidelity.hpp - the kernel metric on discrete varifolds and its gradients.
//
// <mu, nu> = sum_{i,j} r_i s_j rho(|x_i - y_j|^2) gamma(<d_i, e_j>), the dual
// RKHS inner product for the separable kernel rho (x) gamma. Sums are exact
// O(P*Q) double loops with deterministic blocked accumulation.

#pragma once

#include <vector>

#include "varmatch/kernels.hpp"
#include "varmatch/varifold.hpp"

namespace varmatch {

struct FidelityConfig {
    SpatialKernel spatial;
    OrientationKernel orientation;
};

double inner_product(const FidelityConfig& cfg, const DiscreteVarifold& mu, const DiscreteVarifold& nu);

// <mu,mu> - 2<mu,nu> + <nu,nu>, clamped to 0 when rounding makes it slightly
// negative. Values below -1e-10 indicate a non-PSD kernel setup and throw.
double squared_distance(const FidelityConfig& cfg, const DiscreteVarifold& mu, const DiscreteVarifold& nu);

struct DiracGradient {
    Vec dx;   // gradient with respect to the position
    Vec dd;   // gradient with respect to the direction (raw, ambient space)
};

// Gradient of g = |mu - target|_{W*}^2 with respect to each (x_i, d_i) of mu,
// weights held fixed (normalized action). The direction gradient is the plain
// Euclidean one; any tangent-space projection is the caller's concern.
std::vector<DiracGradient> grad_fidelity_normalized(const FidelityConfig& cfg,
                                                    const DiscreteVarifold& mu,
                                                    const DiscreteVarifold& target);

// Raw-particle variants for geodesic endpoints, whose directions carry a few
// ulp to ~1e-9 of integration drift and would fail varifold validation. The
// direction enters the kernel unnormalized, keeping g smooth in ambient (x,d).
struct OrientedParticle {
    Vec x, d;   // d near-unit but used as-is
    double r;
};

double fidelity_normalized(const FidelityConfig& cfg, const std::vector<OrientedParticle>& q,
                           int dimension, const DiscreteVarifold& target);
std::vector<DiracGradient> grad_fidelity_normalized(const FidelityConfig& cfg,
                                                    const std::vector<OrientedParticle>& q,
                                                    int dimension,
                                                    const DiscreteVarifold& target);

struct WeightedParticle {
    Vec x;
    Vec u;   // u = r d, |u| > 0
};

struct WeightedGradient {
    Vec dx;
    Vec du;
};

// Fidelity value and gradient for the pushforward state (x_i, u_i): the state
// is split as d = u/|u|, r = |u| and the chain rule maps (dd, dr) back to du.
double fidelity_pushforward(const FidelityConfig& cfg, const std::vector<WeightedParticle>& q,
                            int dimension, const DiscreteVarifold& target);
std::vector<WeightedGradient> grad_fidelity_pushforward(const FidelityConfig& cfg,
                                                        const std::vector<WeightedParticle>& q,
                                                        int dimension,
                                                        const DiscreteVarifold& target);

}  // namespace varmatch
