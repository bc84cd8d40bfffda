// optimizer.hpp - geodesic shooting registration: energy, adjoint gradient
// and the two-step-size gradient descent.
//
// E(p0) = H_r(p0, q0) + lambda * |mu(1) - target|_{W*}^2, optimized over the
// initial momenta (p1, p2) per template particle. The fidelity gradient is
// transported back to t=0 through the adjoint of the Hamiltonian flow; the
// Jacobian products inside the adjoint system use central finite differences
// of the forward right-hand side.

#pragma once

#include "varmatch/dynamics.hpp"
#include "varmatch/fidelity.hpp"

namespace varmatch {

struct RegistrationProblem {
    DiscreteVarifold source;            // template
    DiscreteVarifold target;
    ActionModel model;
    FidelityConfig fidelity;
    DeformationKernel deformation;
    double lambda = 1.0;
    int steps = 20;                     // RK4 steps
    int max_iter = 500;
    double tol_grad = 1e-6;
    double tol_energy = 1e-8;           // relative decrease over 10 iterations
    double init_step_spatial = 1.0;     // initial ladder center
    double init_step_directional = 1.0;

    RegistrationProblem(DiscreteVarifold source_, DiscreteVarifold target_);
    void validate() const;
};

struct InitialMomenta {
    std::vector<Vec> p1, p2;

    static InitialMomenta zeros(size_t particles);
};

struct EnergyBreakdown {
    double total = 0.0;
    double regularization = 0.0;   // H_r(p0, q0)
    double fidelity = 0.0;         // g(q(1)), unweighted
};

EnergyBreakdown energy(const RegistrationProblem& prob, const InitialMomenta& p0);

// Gradient of g(q(1)) with respect to p0 (flat momentum block, 2*P*n doubles:
// p1 rows then p2 rows). The optional trajectory must come from the same p0/T.
std::vector<double> adjoint_gradient(const RegistrationProblem& prob, const InitialMomenta& p0);
std::vector<double> adjoint_gradient(const RegistrationProblem& prob, const InitialMomenta& p0,
                                     const Trajectory& forward);

// Full energy gradient K_q p0 + lambda * p_tilde(0), flat momentum block.
std::vector<double> grad_energy(const RegistrationProblem& prob, const InitialMomenta& p0);

struct EnergyRecord {
    int iteration = 0;
    double total = 0.0;
    double regularization = 0.0;
    double fidelity = 0.0;
    double step_spatial = 0.0;
    double step_directional = 0.0;
};

struct RegistrationResult {
    InitialMomenta p0;
    std::vector<EnergyRecord> energy_history;   // accepted iterations only
    Trajectory trajectory;                      // geodesic of the returned p0
    DiscreteVarifold deformed;                  // varifold at t=1
    int iterations = 0;                         // accepted steps
    bool no_descent = false;                    // nothing ever decreased E
    std::string termination;                    // max_iter | tol_grad | tol_energy | stalled
};

// Gradient descent with separate spatial/directional step sizes chosen per
// iteration from a 5x5 geometric ladder {s * 2^k, k in -2..2} around the last
// accepted pair; if no candidate decreases E the ladder base shrinks by 4.
// Ties break toward the lexicographically smaller (spatial, directional) pair.
RegistrationResult run_registration(const RegistrationProblem& prob);
RegistrationResult run_registration(const RegistrationProblem& prob, const InitialMomenta& p0_init);

// Flat momentum block <-> per-particle momenta (p1 rows then p2 rows).
std::vector<double> momenta_to_flat(const InitialMomenta& p0, int dim);
InitialMomenta momenta_from_flat(const std::vector<double>& flat, size_t particles, int dim);

}  // namespace varmatch
