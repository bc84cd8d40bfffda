// dynamics.hpp - group actions of diffeomorphisms on discrete varifolds and
// the Hamiltonian geodesic systems.
//
// Three dynamical systems are implemented:
//   Normalized          per particle (x, d, p1, p2), weights constant, |d|=1.
//   PushforwardReduced  per particle (x, u, p1, p2), u = r d carries the weight.
//   PushforwardFull     per particle (x, d, r, p1, p2, p3); equivalent to the
//                       reduced system on compatible initial data.
//
// The vector-field RKHS uses the scalar radial kernel K(x,y) = h(|x-y|^2) I_n.
// Each forward right-hand side exists in two independently derived forms: the
// per-particle closed-form sums over h, hdot, hddot, h''' (used by the
// integrator for tangent transport) and a generic assembly from the velocity
// field and its analytic first/second derivatives (used for normal transport,
// for the full system, and as a cross-check of the closed forms).

#pragma once

#include <string>
#include <variant>
#include <vector>

#include "varmatch/kernels.hpp"
#include "varmatch/varifold.hpp"

namespace varmatch {

enum class GroupAction { Normalized, Pushforward };
enum class DirTransport { Tangent, Normal };

GroupAction parse_group_action(const std::string& name);
DirTransport parse_dir_transport(const std::string& name);
std::string to_string(GroupAction a);
std::string to_string(DirTransport t);

struct ActionModel {
    GroupAction action = GroupAction::Normalized;
    DirTransport transport = DirTransport::Tangent;
};

struct NormalizedParticle {
    Vec x, d, p1, p2;
};

struct NormalizedState {
    int dim = 2;
    std::vector<NormalizedParticle> particles;
    std::vector<double> weights;   // constant along the flow
};

struct ReducedParticle {
    Vec x, u, p1, p2;
};

struct PushforwardReducedState {
    int dim = 2;
    std::vector<ReducedParticle> particles;
};

struct FullParticle {
    Vec x, d;
    double r;
    Vec p1, p2;
    double p3;
};

struct PushforwardFullState {
    int dim = 2;
    std::vector<FullParticle> particles;
};

using GeodesicState = std::variant<NormalizedState, PushforwardReducedState, PushforwardFullState>;

int state_dimension(const GeodesicState& s);
size_t particle_count(const GeodesicState& s);

// Flat layout: all q-components then all p-components, n doubles per vector
// (the z component of 2D data is not stored). Both blocks have equal length.
size_t flat_size(const GeodesicState& s);
size_t flat_q_size(const GeodesicState& s);
std::vector<double> state_to_flat(const GeodesicState& s);
// proto supplies dimension, particle count and (normalized) weights.
GeodesicState state_from_flat(const GeodesicState& proto, const std::vector<double>& flat);

// Builds the initial state for a registration/shoot: the varifold provides
// positions, directions and weights; p1/p2 are per-particle initial momenta.
GeodesicState make_initial_state(GroupAction action, const DiscreteVarifold& mu,
                                 const std::vector<Vec>& p1, const std::vector<Vec>& p2);

// Samples of a diffeomorphism at Dirac locations: value and Jacobian.
struct PhiSample {
    Vec phi_x;
    Mat jacobian;
};

// Transports a varifold through sampled (phi(x_i), D_x phi): normalized keeps
// weights, pushforward multiplies them by |Dphi . d|; tangent transport maps d
// by the Jacobian, normal transport by its inverse transpose. Normal transport
// rejects Jacobians with condition estimate >= 1e12.
DiscreteVarifold apply_action(const ActionModel& model, const DiscreteVarifold& mu,
                              const std::vector<PhiSample>& phi_samples);

// The optimal velocity field of the current state evaluated at any point.
Vec velocity_field(const ActionModel& model, const GeodesicState& state,
                   const DeformationKernel& kernel, const Vec& x);
Mat velocity_jacobian(const ActionModel& model, const GeodesicState& state,
                      const DeformationKernel& kernel, const Vec& x);
// grad_x of <pi, D_x v (z)>, the Hessian of v contracted on both sides.
Vec velocity_hessian_form(const ActionModel& model, const GeodesicState& state,
                          const DeformationKernel& kernel, const Vec& x, const Vec& z, const Vec& pi);

// Reduced Hamiltonian H_r = 1/2 <K_q p, p>, evaluated matrix-free.
double hamiltonian(const ActionModel& model, const GeodesicState& state, const DeformationKernel& kernel);

// Independent evaluation through the unreduced Hamiltonian (p | xi_q v) -
// 1/2 |v|_V^2 with |v|_V^2 from the RKHS inner products of the field's kernel
// atoms. Agrees with hamiltonian() to roundoff; kept as a test oracle.
double hamiltonian_two_route(const ActionModel& model, const GeodesicState& state,
                             const DeformationKernel& kernel);

// Dense K_q (row-major, side = flat_q_size) for symmetry/PSD inspection.
// Limited to P <= 512.
std::vector<double> assemble_kernel_matrix(const ActionModel& model, const GeodesicState& state,
                                           const DeformationKernel& kernel);

// Forward RHS used by the integrator: closed-form sums for tangent transport
// of the normalized and reduced systems, generic assembly otherwise.
GeodesicState forward_rhs(const ActionModel& model, const GeodesicState& state,
                          const DeformationKernel& kernel);
// Generic assembly from velocity-field derivatives, always available.
GeodesicState generic_rhs(const ActionModel& model, const GeodesicState& state,
                          const DeformationKernel& kernel);

struct Trajectory {
    std::vector<double> times;              // 0 = t_0 < ... < t_T = 1, uniform
    std::vector<GeodesicState> states;      // T+1 entries
    std::vector<double> hamiltonian_values; // H_r at each node
    bool direction_drift_warning = false;   // normalized/full: |d| drifted > 1e-6
};

// Classical RK4 with T uniform steps on [0,1]. Non-finite values abort with
// the step index; reduced-pushforward mass collapse (|u_i| below 1e-10 of its
// initial value) aborts with a diagnostic.
Trajectory integrate(const ActionModel& model, const GeodesicState& initial,
                     const DeformationKernel& kernel, int steps);

// Same integration with passive tracer points advected by the velocity field
// at the RK4 stage states (used for deformed-grid rendering). tracer_tracks
// holds T+1 snapshots of the tracer positions.
Trajectory integrate_with_tracers(const ActionModel& model, const GeodesicState& initial,
                                  const DeformationKernel& kernel, int steps,
                                  const std::vector<Vec>& tracers,
                                  std::vector<std::vector<Vec>>& tracer_tracks);

// State maps of the reduced/full equivalence: requires the compatibility
// <p2_i, d_i> = r_i p3_i within 1e-8 on the full side.
PushforwardReducedState reduce_full_state(const PushforwardFullState& full);
PushforwardFullState expand_reduced_state(const PushforwardReducedState& reduced);

// Final state viewed as a varifold: normalized uses (x_i, d_i renormalized,
// r_{i,0}); pushforward uses (x_i, u_i/|u_i|, |u_i|).
DiscreteVarifold state_to_varifold(const GeodesicState& state);

}  // namespace varmatch
