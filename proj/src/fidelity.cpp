#include "varmatch/fidelity.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "varmatch/parallel.hpp"

namespace varmatch {

namespace {

struct Particle {
    Vec x, d;
    double r;
};

std::vector<Particle> particles_of(const DiscreteVarifold& mu) {
    std::vector<Particle> out;
    out.reserve(mu.size());
    for (const Dirac& a : mu.diracs()) out.push_back({a.x, a.d, a.r});
    return out;
}

std::vector<Particle> particles_of(const std::vector<OrientedParticle>& q) {
    std::vector<Particle> out;
    out.reserve(q.size());
    for (const OrientedParticle& p : q) out.push_back({p.x, p.d, p.r});
    return out;
}

std::vector<Particle> particles_of(const std::vector<WeightedParticle>& q) {
    std::vector<Particle> out;
    out.reserve(q.size());
    for (size_t i = 0; i < q.size(); ++i) {
        const double r = norm(q[i].u);
        if (r <= 1e-12)
            throw std::runtime_error("pushforward particle " + std::to_string(i) +
                                     " has collapsed mass (|u| <= 1e-12)");
        out.push_back({q[i].x, q[i].u * (1.0 / r), r});
    }
    return out;
}

// Blocked double-loop sum; each kernel term is exactly symmetric under
// argument swap, so the loop order is the only source of asymmetry.
double pair_sum(const FidelityConfig& cfg, const std::vector<Particle>& a,
                const std::vector<Particle>& b) {
    return blocked_sum(a.size(), [&](size_t i) {
        const Particle& pi = a[i];
        double s = 0.0;
        for (const Particle& pj : b)
            s += pi.r * pj.r * cfg.spatial.rho(squared_norm(pi.x - pj.x)) *
                 cfg.orientation.gamma_ext(dot(pi.d, pj.d));
        return s;
    });
}

// Total order on particle lists used to canonicalize the summation order so
// that inner_product(mu, nu) and inner_product(nu, mu) are bit-identical.
bool canonical_less(const std::vector<Particle>& a, const std::vector<Particle>& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    for (size_t i = 0; i < a.size(); ++i)
        for (int k = 0; k < 3; ++k) {
            if (a[i].x[k] != b[i].x[k]) return a[i].x[k] < b[i].x[k];
            if (a[i].d[k] != b[i].d[k]) return a[i].d[k] < b[i].d[k];
            if (a[i].r != b[i].r) return a[i].r < b[i].r;
        }
    return false;
}

double inner_product_impl(const FidelityConfig& cfg, const std::vector<Particle>& a,
                          const std::vector<Particle>& b) {
    return canonical_less(b, a) ? pair_sum(cfg, b, a) : pair_sum(cfg, a, b);
}

double squared_distance_impl(const FidelityConfig& cfg, const std::vector<Particle>& a,
                             const std::vector<Particle>& b) {
    const double d2 =
        inner_product_impl(cfg, a, a) - 2.0 * inner_product_impl(cfg, a, b) + inner_product_impl(cfg, b, b);
    if (d2 < -1e-10)
        throw std::runtime_error("squared varifold distance is " + std::to_string(d2) +
                                 "; the kernel configuration is not positive semidefinite");
    return d2 < 0.0 ? 0.0 : d2;
}

struct FullGradient {
    Vec dx, dd;
    double dr;
};

// Gradient of |mu - target|^2 with respect to (x_i, d_i, r_i) of mu.
std::vector<FullGradient> grad_impl(const FidelityConfig& cfg, const std::vector<Particle>& a,
                                    const std::vector<Particle>& b) {
    std::vector<FullGradient> out(a.size());
    parallel_for(a.size(), [&](size_t i) {
        const Particle& pi = a[i];
        Vec dx, dd;
        double dr = 0.0;
        for (const Particle& pj : a) {
            const Vec w = pi.x - pj.x;
            const double rho = cfg.spatial.rho(squared_norm(w));
            const double drho = cfg.spatial.drho(squared_norm(w));
            const double t = dot(pi.d, pj.d);
            const double gam = cfg.orientation.gamma_ext(t);
            const double dgam = cfg.orientation.dgamma_ext(t);
            dx += w * (4.0 * pi.r * pj.r * drho * gam);
            dd += pj.d * (2.0 * pi.r * pj.r * rho * dgam);
            dr += 2.0 * pj.r * rho * gam;
        }
        for (const Particle& pj : b) {
            const Vec w = pi.x - pj.x;
            const double rho = cfg.spatial.rho(squared_norm(w));
            const double drho = cfg.spatial.drho(squared_norm(w));
            const double t = dot(pi.d, pj.d);
            const double gam = cfg.orientation.gamma_ext(t);
            const double dgam = cfg.orientation.dgamma_ext(t);
            dx -= w * (4.0 * pi.r * pj.r * drho * gam);
            dd -= pj.d * (2.0 * pi.r * pj.r * rho * dgam);
            dr -= 2.0 * pj.r * rho * gam;
        }
        out[i] = {dx, dd, dr};
    });
    return out;
}

void require_same_dimension(int a, int b) {
    if (a != b)
        throw std::invalid_argument("varifold dimension mismatch: " + std::to_string(a) + " vs " +
                                    std::to_string(b));
}

}  // namespace

double inner_product(const FidelityConfig& cfg, const DiscreteVarifold& mu, const DiscreteVarifold& nu) {
    require_same_dimension(mu.dimension(), nu.dimension());
    return inner_product_impl(cfg, particles_of(mu), particles_of(nu));
}

double squared_distance(const FidelityConfig& cfg, const DiscreteVarifold& mu, const DiscreteVarifold& nu) {
    require_same_dimension(mu.dimension(), nu.dimension());
    return squared_distance_impl(cfg, particles_of(mu), particles_of(nu));
}

std::vector<DiracGradient> grad_fidelity_normalized(const FidelityConfig& cfg,
                                                    const DiscreteVarifold& mu,
                                                    const DiscreteVarifold& target) {
    require_same_dimension(mu.dimension(), target.dimension());
    const auto full = grad_impl(cfg, particles_of(mu), particles_of(target));
    std::vector<DiracGradient> out(full.size());
    for (size_t i = 0; i < full.size(); ++i) out[i] = {full[i].dx, full[i].dd};
    return out;
}

double fidelity_normalized(const FidelityConfig& cfg, const std::vector<OrientedParticle>& q,
                           int dimension, const DiscreteVarifold& target) {
    require_same_dimension(dimension, target.dimension());
    return squared_distance_impl(cfg, particles_of(q), particles_of(target));
}

std::vector<DiracGradient> grad_fidelity_normalized(const FidelityConfig& cfg,
                                                    const std::vector<OrientedParticle>& q,
                                                    int dimension,
                                                    const DiscreteVarifold& target) {
    require_same_dimension(dimension, target.dimension());
    const auto full = grad_impl(cfg, particles_of(q), particles_of(target));
    std::vector<DiracGradient> out(full.size());
    for (size_t i = 0; i < full.size(); ++i) out[i] = {full[i].dx, full[i].dd};
    return out;
}

double fidelity_pushforward(const FidelityConfig& cfg, const std::vector<WeightedParticle>& q,
                            int dimension, const DiscreteVarifold& target) {
    require_same_dimension(dimension, target.dimension());
    return squared_distance_impl(cfg, particles_of(q), particles_of(target));
}

std::vector<WeightedGradient> grad_fidelity_pushforward(const FidelityConfig& cfg,
                                                        const std::vector<WeightedParticle>& q,
                                                        int dimension,
                                                        const DiscreteVarifold& target) {
    require_same_dimension(dimension, target.dimension());
    const auto particles = particles_of(q);
    const auto full = grad_impl(cfg, particles, particles_of(target));
    std::vector<WeightedGradient> out(full.size());
    for (size_t i = 0; i < full.size(); ++i) {
        const Vec d = particles[i].d;
        const double r = particles[i].r;
        // du = (I - d d^T)/r * dd + d * dr
        out[i] = {full[i].dx, project_orthogonal(d, full[i].dd) * (1.0 / r) + d * full[i].dr};
    }
    return out;
}

}  // namespace varmatch
