#include "varmatch/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "varmatch/parallel.hpp"

namespace varmatch {

RegistrationProblem::RegistrationProblem(DiscreteVarifold source_, DiscreteVarifold target_)
    : source(std::move(source_)), target(std::move(target_)) {}

void RegistrationProblem::validate() const {
    if (source.dimension() != target.dimension())
        throw std::invalid_argument("template and target dimensions differ");
    if (source.empty()) throw std::invalid_argument("template varifold is empty");
    if (target.empty()) throw std::invalid_argument("target varifold is empty");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (max_iter < 0) throw std::invalid_argument("max_iter must be >= 0");
    if (!(init_step_spatial > 0.0) || !(init_step_directional > 0.0))
        throw std::invalid_argument("initial step sizes must be > 0");
}

InitialMomenta InitialMomenta::zeros(size_t particles) {
    InitialMomenta m;
    m.p1.assign(particles, Vec{});
    m.p2.assign(particles, Vec{});
    return m;
}

std::vector<double> momenta_to_flat(const InitialMomenta& p0, int dim) {
    std::vector<double> flat;
    flat.reserve(2 * p0.p1.size() * static_cast<size_t>(dim));
    for (const Vec& v : p0.p1)
        for (int k = 0; k < dim; ++k) flat.push_back(v[k]);
    for (const Vec& v : p0.p2)
        for (int k = 0; k < dim; ++k) flat.push_back(v[k]);
    return flat;
}

InitialMomenta momenta_from_flat(const std::vector<double>& flat, size_t particles, int dim) {
    if (flat.size() != 2 * particles * static_cast<size_t>(dim))
        throw std::invalid_argument("flat momenta have wrong length");
    InitialMomenta m = InitialMomenta::zeros(particles);
    size_t pos = 0;
    for (size_t i = 0; i < particles; ++i)
        for (int k = 0; k < dim; ++k) m.p1[i][k] = flat[pos++];
    for (size_t i = 0; i < particles; ++i)
        for (int k = 0; k < dim; ++k) m.p2[i][k] = flat[pos++];
    return m;
}

namespace {

void check_momenta(const RegistrationProblem& prob, const InitialMomenta& p0) {
    if (p0.p1.size() != prob.source.size() || p0.p2.size() != prob.source.size())
        throw std::invalid_argument("momenta row count does not match template particle count");
}

double fidelity_of_state(const RegistrationProblem& prob, const GeodesicState& final_state) {
    if (const auto* st = std::get_if<NormalizedState>(&final_state)) {
        std::vector<OrientedParticle> q(st->particles.size());
        for (size_t i = 0; i < q.size(); ++i)
            q[i] = {st->particles[i].x, st->particles[i].d, st->weights[i]};
        return fidelity_normalized(prob.fidelity, q, st->dim, prob.target);
    }
    const auto& st = std::get<PushforwardReducedState>(final_state);
    std::vector<WeightedParticle> q(st.particles.size());
    for (size_t i = 0; i < q.size(); ++i) q[i] = {st.particles[i].x, st.particles[i].u};
    return fidelity_pushforward(prob.fidelity, q, st.dim, prob.target);
}

// Gradient of g with respect to the flat q-block of the final state.
std::vector<double> terminal_q_gradient(const RegistrationProblem& prob,
                                        const GeodesicState& final_state) {
    const int n = state_dimension(final_state);
    std::vector<double> grad(flat_q_size(final_state), 0.0);
    size_t pos = 0;
    if (const auto* st = std::get_if<NormalizedState>(&final_state)) {
        std::vector<OrientedParticle> q(st->particles.size());
        for (size_t i = 0; i < q.size(); ++i)
            q[i] = {st->particles[i].x, st->particles[i].d, st->weights[i]};
        const auto g = grad_fidelity_normalized(prob.fidelity, q, st->dim, prob.target);
        for (const auto& gi : g)
            for (int k = 0; k < n; ++k) grad[pos++] = gi.dx[k];
        for (const auto& gi : g)
            for (int k = 0; k < n; ++k) grad[pos++] = gi.dd[k];
    } else {
        const auto& rst = std::get<PushforwardReducedState>(final_state);
        std::vector<WeightedParticle> q(rst.particles.size());
        for (size_t i = 0; i < q.size(); ++i) q[i] = {rst.particles[i].x, rst.particles[i].u};
        const auto g = grad_fidelity_pushforward(prob.fidelity, q, rst.dim, prob.target);
        for (const auto& gi : g)
            for (int k = 0; k < n; ++k) grad[pos++] = gi.dx[k];
        for (const auto& gi : g)
            for (int k = 0; k < n; ++k) grad[pos++] = gi.du[k];
    }
    return grad;
}

GeodesicState initial_state_of(const RegistrationProblem& prob, const InitialMomenta& p0) {
    return make_initial_state(prob.model.action, prob.source, p0.p1, p0.p2);
}

double max_abs_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

// J (q, p) = (p, -q) on equally sized blocks.
std::vector<double> symplectic_swap(const std::vector<double>& z) {
    const size_t half = z.size() / 2;
    std::vector<double> out(z.size());
    for (size_t i = 0; i < half; ++i) {
        out[i] = z[half + i];
        out[half + i] = -z[i];
    }
    return out;
}

}  // namespace

EnergyBreakdown energy(const RegistrationProblem& prob, const InitialMomenta& p0) {
    check_momenta(prob, p0);
    const GeodesicState q0 = initial_state_of(prob, p0);
    const Trajectory traj = integrate(prob.model, q0, prob.deformation, prob.steps);
    EnergyBreakdown e;
    e.regularization = traj.hamiltonian_values.front();
    e.fidelity = fidelity_of_state(prob, traj.states.back());
    e.total = e.regularization + prob.lambda * e.fidelity;
    return e;
}

std::vector<double> adjoint_gradient(const RegistrationProblem& prob, const InitialMomenta& p0) {
    check_momenta(prob, p0);
    const Trajectory traj =
        integrate(prob.model, initial_state_of(prob, p0), prob.deformation, prob.steps);
    return adjoint_gradient(prob, p0, traj);
}

std::vector<double> adjoint_gradient(const RegistrationProblem& prob, const InitialMomenta& p0,
                                     const Trajectory& forward) {
    check_momenta(prob, p0);
    if (forward.states.size() != static_cast<size_t>(prob.steps) + 1)
        throw std::invalid_argument("forward trajectory does not match the configured step count");
    const GeodesicState& proto = forward.states.front();
    const size_t qsize = flat_q_size(proto);
    const double dt = 1.0 / prob.steps;

    // zeta = (q_tilde, p_tilde); terminal data (grad g, 0).
    std::vector<double> zeta(2 * qsize, 0.0);
    {
        const auto gq = terminal_q_gradient(prob, forward.states.back());
        std::copy(gq.begin(), gq.end(), zeta.begin());
    }

    const auto forward_flat = [&](const std::vector<double>& y) {
        return state_to_flat(forward_rhs(prob.model, state_from_flat(proto, y), prob.deformation));
    };

    // d zeta/dt = -dF(y)^T zeta; the transpose-product reduces to a single
    // forward JVP through the symplectic structure: dF^T z = J dF (J z).
    const auto adjoint_rhs = [&](const std::vector<double>& y, const std::vector<double>& z) {
        std::vector<double> eta = symplectic_swap(z);
        const double eta_max = max_abs_of(eta);
        std::vector<double> out(z.size(), 0.0);
        if (eta_max == 0.0) return out;
        const double eps = 1e-6 * std::max(1.0, max_abs_of(y)) / eta_max;
        std::vector<double> yp = y, ym = y;
        for (size_t i = 0; i < y.size(); ++i) {
            yp[i] += eps * eta[i];
            ym[i] -= eps * eta[i];
        }
        const auto fp = forward_flat(yp);
        const auto fm = forward_flat(ym);
        std::vector<double> jvp(y.size());
        for (size_t i = 0; i < y.size(); ++i) jvp[i] = (fp[i] - fm[i]) / (2.0 * eps);
        const auto swapped = symplectic_swap(jvp);
        for (size_t i = 0; i < z.size(); ++i) out[i] = -swapped[i];
        return out;
    };

    // Coupled backward RK4 on (y, zeta); y restarts from the stored forward
    // node at every step so the state stays on the computed trajectory.
    for (int j = prob.steps; j >= 1; --j) {
        std::vector<double> y = state_to_flat(forward.states[static_cast<size_t>(j)]);
        const double h = -dt;

        const auto fy1 = forward_flat(y);
        const auto fz1 = adjoint_rhs(y, zeta);

        std::vector<double> y2 = y, z2 = zeta;
        for (size_t i = 0; i < y.size(); ++i) y2[i] += 0.5 * h * fy1[i];
        for (size_t i = 0; i < zeta.size(); ++i) z2[i] += 0.5 * h * fz1[i];
        const auto fy2 = forward_flat(y2);
        const auto fz2 = adjoint_rhs(y2, z2);

        std::vector<double> y3 = y, z3 = zeta;
        for (size_t i = 0; i < y.size(); ++i) y3[i] += 0.5 * h * fy2[i];
        for (size_t i = 0; i < zeta.size(); ++i) z3[i] += 0.5 * h * fz2[i];
        const auto fy3 = forward_flat(y3);
        const auto fz3 = adjoint_rhs(y3, z3);

        std::vector<double> y4 = y, z4 = zeta;
        for (size_t i = 0; i < y.size(); ++i) y4[i] += h * fy3[i];
        for (size_t i = 0; i < zeta.size(); ++i) z4[i] += h * fz3[i];
        const auto fz4 = adjoint_rhs(y4, z4);

        for (size_t i = 0; i < zeta.size(); ++i)
            zeta[i] += h / 6.0 * (fz1[i] + 2.0 * fz2[i] + 2.0 * fz3[i] + fz4[i]);
        for (double v : zeta)
            if (!std::isfinite(v))
                throw std::runtime_error("adjoint sweep produced non-finite values at step " +
                                         std::to_string(j));
    }

    return {zeta.begin() + static_cast<long>(qsize), zeta.end()};
}

std::vector<double> grad_energy(const RegistrationProblem& prob, const InitialMomenta& p0) {
    check_momenta(prob, p0);
    const GeodesicState q0 = initial_state_of(prob, p0);
    const Trajectory traj = integrate(prob.model, q0, prob.deformation, prob.steps);

    // grad_p H_r(p0, q0) = K_q p0 = the state-velocity block of the forward RHS.
    const GeodesicState rhs0 = forward_rhs(prob.model, q0, prob.deformation);
    const auto rhs_flat = state_to_flat(rhs0);
    const size_t qsize = flat_q_size(q0);
    std::vector<double> grad(rhs_flat.begin(), rhs_flat.begin() + static_cast<long>(qsize));

    const auto fid = adjoint_gradient(prob, p0, traj);
    for (size_t i = 0; i < grad.size(); ++i) grad[i] += prob.lambda * fid[i];
    return grad;
}

namespace {

struct Candidate {
    double step_spatial = 0.0;
    double step_directional = 0.0;
    EnergyBreakdown e;
    InitialMomenta p0;
};

}  // namespace

RegistrationResult run_registration(const RegistrationProblem& prob) {
    return run_registration(prob, InitialMomenta::zeros(prob.source.size()));
}

RegistrationResult run_registration(const RegistrationProblem& prob, const InitialMomenta& p0_init) {
    prob.validate();
    check_momenta(prob, p0_init);
    const int n = prob.source.dimension();
    const size_t P = prob.source.size();

    InitialMomenta p0 = p0_init;
    EnergyBreakdown current = energy(prob, p0);

    RegistrationResult result;
    result.energy_history.push_back({0, current.total, current.regularization, current.fidelity, 0.0, 0.0});

    double base_s = prob.init_step_spatial;
    double base_d = prob.init_step_directional;
    const double base_floor = 1e-16 * std::max(prob.init_step_spatial, prob.init_step_directional);
    int accepted = 0;
    bool attempted = false;
    std::vector<double> accepted_energies{current.total};
    std::string termination = "max_iter";

    for (int iter = 1; iter <= prob.max_iter; ++iter) {
        const std::vector<double> grad = grad_energy(prob, p0);
        double gnorm2 = 0.0;
        for (double v : grad) gnorm2 += v * v;
        if (std::sqrt(gnorm2) < prob.tol_grad) {
            termination = "tol_grad";
            break;
        }

        const std::vector<double> flat = momenta_to_flat(p0, n);
        const size_t half = flat.size() / 2;
        attempted = true;

        // evaluate the 5x5 ladder (independent shoots, parallel); the argmin
        // scan runs in enumeration order so ties break toward the smaller
        // (spatial, directional) pair regardless of thread count
        std::vector<Candidate> candidates(25);
        std::vector<char> valid(25, 0);
        run_blocks(25, [&](size_t slot) {
            const int ka = static_cast<int>(slot) / 5 - 2;
            const int kb = static_cast<int>(slot) % 5 - 2;
            const double a = base_s * std::pow(2.0, ka);
            const double b = base_d * std::pow(2.0, kb);
            std::vector<double> trial = flat;
            for (size_t i = 0; i < half; ++i) trial[i] -= a * grad[i];
            for (size_t i = half; i < flat.size(); ++i) trial[i] -= b * grad[i];
            InitialMomenta pm = momenta_from_flat(trial, P, n);
            try {
                const EnergyBreakdown e = energy(prob, pm);
                candidates[slot] = {a, b, e, std::move(pm)};
                valid[slot] = 1;
            } catch (const std::runtime_error&) {
                // candidate step too large: integration blew up
            }
        });
        bool found = false;
        Candidate best;
        for (size_t slot = 0; slot < candidates.size(); ++slot) {
            if (!valid[slot]) continue;
            if (!found || candidates[slot].e.total < best.e.total) {
                found = true;
                best = std::move(candidates[slot]);
            }
        }

        if (found && best.e.total < current.total) {
            p0 = best.p0;
            current = best.e;
            base_s = best.step_spatial;
            base_d = best.step_directional;
            ++accepted;
            result.energy_history.push_back({accepted, current.total, current.regularization,
                                             current.fidelity, best.step_spatial,
                                             best.step_directional});
            accepted_energies.push_back(current.total);
            const size_t m = accepted_energies.size() - 1;
            if (m >= 10) {
                const double before = accepted_energies[m - 10];
                const double decrease = (before - current.total) / std::max(std::fabs(before), 1e-300);
                if (decrease < prob.tol_energy) {
                    termination = "tol_energy";
                    break;
                }
            }
        } else {
            base_s *= 0.25;
            base_d *= 0.25;
            if (std::max(base_s, base_d) < base_floor) {
                termination = "stalled";
                break;
            }
        }
    }

    result.p0 = p0;
    result.iterations = accepted;
    result.termination = termination;
    result.no_descent =
        accepted == 0 && attempted && (termination == "stalled" || termination == "max_iter");
    result.trajectory =
        integrate(prob.model, initial_state_of(prob, p0), prob.deformation, prob.steps);
    result.deformed = state_to_varifold(result.trajectory.states.back());
    return result;
}

}  // namespace varmatch
