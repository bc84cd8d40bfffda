#include "varmatch/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "varmatch/parallel.hpp"

namespace varmatch {

GroupAction parse_group_action(const std::string& name) {
    if (name == "normalized") return GroupAction::Normalized;
    if (name == "pushforward") return GroupAction::Pushforward;
    throw std::invalid_argument("unknown group action: " + name);
}

DirTransport parse_dir_transport(const std::string& name) {
    if (name == "tangent") return DirTransport::Tangent;
    if (name == "normal") return DirTransport::Normal;
    throw std::invalid_argument("unknown direction transport: " + name);
}

std::string to_string(GroupAction a) {
    return a == GroupAction::Normalized ? "normalized" : "pushforward";
}

std::string to_string(DirTransport t) { return t == DirTransport::Tangent ? "tangent" : "normal"; }

int state_dimension(const GeodesicState& s) {
    return std::visit([](const auto& st) { return st.dim; }, s);
}

size_t particle_count(const GeodesicState& s) {
    return std::visit([](const auto& st) { return st.particles.size(); }, s);
}

size_t flat_q_size(const GeodesicState& s) {
    const size_t n = static_cast<size_t>(state_dimension(s));
    const size_t p = particle_count(s);
    if (std::holds_alternative<PushforwardFullState>(s)) return p * (2 * n + 1);
    return 2 * p * n;
}

size_t flat_size(const GeodesicState& s) { return 2 * flat_q_size(s); }

namespace {

void write_vec(std::vector<double>& flat, size_t& pos, const Vec& v, int n) {
    for (int k = 0; k < n; ++k) flat[pos++] = v[k];
}

Vec read_vec(const std::vector<double>& flat, size_t& pos, int n) {
    Vec v;
    for (int k = 0; k < n; ++k) v[k] = flat[pos++];
    return v;
}

}  // namespace

std::vector<double> state_to_flat(const GeodesicState& s) {
    std::vector<double> flat(flat_size(s));
    size_t pos = 0;
    const int n = state_dimension(s);
    if (const auto* st = std::get_if<NormalizedState>(&s)) {
        for (const auto& p : st->particles) write_vec(flat, pos, p.x, n);
        for (const auto& p : st->particles) write_vec(flat, pos, p.d, n);
        for (const auto& p : st->particles) write_vec(flat, pos, p.p1, n);
        for (const auto& p : st->particles) write_vec(flat, pos, p.p2, n);
    } else if (const auto* st2 = std::get_if<PushforwardReducedState>(&s)) {
        for (const auto& p : st2->particles) write_vec(flat, pos, p.x, n);
        for (const auto& p : st2->particles) write_vec(flat, pos, p.u, n);
        for (const auto& p : st2->particles) write_vec(flat, pos, p.p1, n);
        for (const auto& p : st2->particles) write_vec(flat, pos, p.p2, n);
    } else {
        const auto& st3 = std::get<PushforwardFullState>(s);
        for (const auto& p : st3.particles) write_vec(flat, pos, p.x, n);
        for (const auto& p : st3.particles) write_vec(flat, pos, p.d, n);
        for (const auto& p : st3.particles) flat[pos++] = p.r;
        for (const auto& p : st3.particles) write_vec(flat, pos, p.p1, n);
        for (const auto& p : st3.particles) write_vec(flat, pos, p.p2, n);
        for (const auto& p : st3.particles) flat[pos++] = p.p3;
    }
    return flat;
}

GeodesicState state_from_flat(const GeodesicState& proto, const std::vector<double>& flat) {
    if (flat.size() != flat_size(proto))
        throw std::invalid_argument("flat state has wrong length");
    GeodesicState out = proto;
    size_t pos = 0;
    const int n = state_dimension(proto);
    if (auto* st = std::get_if<NormalizedState>(&out)) {
        for (auto& p : st->particles) p.x = read_vec(flat, pos, n);
        for (auto& p : st->particles) p.d = read_vec(flat, pos, n);
        for (auto& p : st->particles) p.p1 = read_vec(flat, pos, n);
        for (auto& p : st->particles) p.p2 = read_vec(flat, pos, n);
    } else if (auto* st2 = std::get_if<PushforwardReducedState>(&out)) {
        for (auto& p : st2->particles) p.x = read_vec(flat, pos, n);
        for (auto& p : st2->particles) p.u = read_vec(flat, pos, n);
        for (auto& p : st2->particles) p.p1 = read_vec(flat, pos, n);
        for (auto& p : st2->particles) p.p2 = read_vec(flat, pos, n);
    } else {
        auto& st3 = std::get<PushforwardFullState>(out);
        for (auto& p : st3.particles) p.x = read_vec(flat, pos, n);
        for (auto& p : st3.particles) p.d = read_vec(flat, pos, n);
        for (auto& p : st3.particles) p.r = flat[pos++];
        for (auto& p : st3.particles) p.p1 = read_vec(flat, pos, n);
        for (auto& p : st3.particles) p.p2 = read_vec(flat, pos, n);
        for (auto& p : st3.particles) p.p3 = flat[pos++];
    }
    return out;
}

GeodesicState make_initial_state(GroupAction action, const DiscreteVarifold& mu,
                                 const std::vector<Vec>& p1, const std::vector<Vec>& p2) {
    if (p1.size() != mu.size() || p2.size() != mu.size())
        throw std::invalid_argument("momenta row count does not match particle count");
    if (action == GroupAction::Normalized) {
        NormalizedState st;
        st.dim = mu.dimension();
        st.particles.reserve(mu.size());
        st.weights.reserve(mu.size());
        for (size_t i = 0; i < mu.size(); ++i) {
            st.particles.push_back({mu[i].x, mu[i].d, p1[i], p2[i]});
            st.weights.push_back(mu[i].r);
        }
        return st;
    }
    PushforwardReducedState st;
    st.dim = mu.dimension();
    st.particles.reserve(mu.size());
    for (size_t i = 0; i < mu.size(); ++i)
        st.particles.push_back({mu[i].x, mu[i].d * mu[i].r, p1[i], p2[i]});
    return st;
}

DiscreteVarifold apply_action(const ActionModel& model, const DiscreteVarifold& mu,
                              const std::vector<PhiSample>& phi_samples) {
    if (phi_samples.size() != mu.size())
        throw std::invalid_argument("phi sample count does not match particle count");
    std::vector<Dirac> out;
    out.reserve(mu.size());
    for (size_t i = 0; i < mu.size(); ++i) {
        const Mat& jac = phi_samples[i].jacobian;
        Vec moved;
        if (model.transport == DirTransport::Tangent) {
            moved = jac.apply(mu[i].d);
        } else {
            if (condition_estimate(jac) >= 1e12)
                throw std::invalid_argument("normal transport: Jacobian at dirac " + std::to_string(i) +
                                            " is numerically singular");
            moved = jac.inverse().apply_transpose(mu[i].d);
        }
        const double stretch = norm(moved);
        if (stretch < 1e-300)
            throw std::invalid_argument("transported direction vanished at dirac " + std::to_string(i));
        const double weight =
            model.action == GroupAction::Pushforward ? mu[i].r * stretch : mu[i].r;
        out.push_back({phi_samples[i].phi_x, moved * (1.0 / stretch), weight});
    }
    return DiscreteVarifold(mu.dimension(), std::move(out));
}

namespace {

// One particle's contribution to the optimal velocity field:
//   v(x) += h(|c - x|^2) alpha + 2 hdot(|c - x|^2) <c - x, a> b.
struct Atom {
    Vec c;       // particle position
    Vec alpha;   // p1 coefficient of the plain kernel term
    Vec a, b;    // directional derivative pair
};

Vec projected_p2(const Vec& d, const Vec& p2) { return project_orthogonal(d, p2); }

std::vector<Atom> build_atoms(const ActionModel& model, const GeodesicState& state) {
    std::vector<Atom> atoms;
    const bool tangent = model.transport == DirTransport::Tangent;
    if (const auto* st = std::get_if<NormalizedState>(&state)) {
        atoms.reserve(st->particles.size());
        for (const auto& p : st->particles) {
            const Vec pi = projected_p2(p.d, p.p2);
            atoms.push_back(tangent ? Atom{p.x, p.p1, p.d, pi} : Atom{p.x, p.p1, pi, -p.d});
        }
    } else if (const auto* st2 = std::get_if<PushforwardReducedState>(&state)) {
        atoms.reserve(st2->particles.size());
        for (const auto& p : st2->particles)
            atoms.push_back(tangent ? Atom{p.x, p.p1, p.u, p.p2} : Atom{p.x, p.p1, p.p2, -p.u});
    } else {
        const auto& st3 = std::get<PushforwardFullState>(state);
        atoms.reserve(st3.particles.size());
        for (const auto& p : st3.particles) {
            const Vec m = projected_p2(p.d, p.p2) + p.d * (p.p3 * p.r);
            atoms.push_back(tangent ? Atom{p.x, p.p1, p.d, m} : Atom{p.x, p.p1, m, -p.d});
        }
    }
    return atoms;
}

Vec eval_velocity(const std::vector<Atom>& atoms, const DeformationKernel& kernel, const Vec& x) {
    Vec v;
    for (const Atom& k : atoms) {
        const Vec w = x - k.c;
        const HDerivs h = kernel.derivs(squared_norm(w));
        v += k.alpha * h.h0;
        v += k.b * (-2.0 * h.h1 * dot(w, k.a));
    }
    return v;
}

Mat eval_jacobian(const std::vector<Atom>& atoms, const DeformationKernel& kernel, const Vec& x) {
    Mat jac;
    for (const Atom& k : atoms) {
        const Vec w = x - k.c;
        const HDerivs h = kernel.derivs(squared_norm(w));
        jac += outer(k.alpha, w * (2.0 * h.h1));
        jac += outer(k.b, w * (-4.0 * h.h2 * dot(w, k.a)) - k.a * (2.0 * h.h1));
    }
    return jac;
}

// grad_x of <pi, D_x v(z)> for fixed pi, z.
Vec eval_hessian_form(const std::vector<Atom>& atoms, const DeformationKernel& kernel, const Vec& x,
                      const Vec& z, const Vec& pi) {
    Vec g;
    for (const Atom& k : atoms) {
        const Vec w = x - k.c;
        const HDerivs h = kernel.derivs(squared_norm(w));
        const double wa = dot(w, k.a);
        const double wz = dot(w, z);
        g += w * (4.0 * h.h2 * dot(k.alpha, pi) * wz) + z * (2.0 * h.h1 * dot(k.alpha, pi));
        const double bp = dot(k.b, pi);
        g += w * (-8.0 * h.h3 * wa * wz * bp - 4.0 * h.h2 * dot(k.a, z) * bp);
        g += k.a * (-4.0 * h.h2 * wz * bp) + z * (-4.0 * h.h2 * wa * bp);
    }
    return g;
}

struct TransportOps {
    const Mat jac;
    const bool tangent;
    Vec T(const Vec& z) const { return tangent ? jac.apply(z) : -jac.apply_transpose(z); }
    Vec Tstar(const Vec& z) const { return tangent ? jac.apply_transpose(z) : -jac.apply(z); }
};

}  // namespace

Vec velocity_field(const ActionModel& model, const GeodesicState& state,
                   const DeformationKernel& kernel, const Vec& x) {
    return eval_velocity(build_atoms(model, state), kernel, x);
}

Mat velocity_jacobian(const ActionModel& model, const GeodesicState& state,
                      const DeformationKernel& kernel, const Vec& x) {
    return eval_jacobian(build_atoms(model, state), kernel, x);
}

Vec velocity_hessian_form(const ActionModel& model, const GeodesicState& state,
                          const DeformationKernel& kernel, const Vec& x, const Vec& z, const Vec& pi) {
    return eval_hessian_form(build_atoms(model, state), kernel, x, z, pi);
}

double hamiltonian(const ActionModel& model, const GeodesicState& state,
                   const DeformationKernel& kernel) {
    const auto atoms = build_atoms(model, state);
    const bool tangent = model.transport == DirTransport::Tangent;
    if (const auto* st = std::get_if<NormalizedState>(&state)) {
        return 0.5 * blocked_sum(st->particles.size(), [&](size_t i) {
            const auto& p = st->particles[i];
            const TransportOps ops{eval_jacobian(atoms, kernel, p.x), tangent};
            return dot(p.p1, eval_velocity(atoms, kernel, p.x)) +
                   dot(projected_p2(p.d, p.p2), ops.T(p.d));
        });
    }
    if (const auto* st2 = std::get_if<PushforwardReducedState>(&state)) {
        return 0.5 * blocked_sum(st2->particles.size(), [&](size_t i) {
            const auto& p = st2->particles[i];
            const TransportOps ops{eval_jacobian(atoms, kernel, p.x), tangent};
            return dot(p.p1, eval_velocity(atoms, kernel, p.x)) + dot(p.p2, ops.T(p.u));
        });
    }
    const auto& st3 = std::get<PushforwardFullState>(state);
    return 0.5 * blocked_sum(st3.particles.size(), [&](size_t i) {
        const auto& p = st3.particles[i];
        const TransportOps ops{eval_jacobian(atoms, kernel, p.x), tangent};
        const Vec td = ops.T(p.d);
        return dot(p.p1, eval_velocity(atoms, kernel, p.x)) + dot(projected_p2(p.d, p.p2), td) +
               p.p3 * p.r * dot(p.d, td);
    });
}

double hamiltonian_two_route(const ActionModel& model, const GeodesicState& state,
                             const DeformationKernel& kernel) {
    const auto atoms = build_atoms(model, state);
    // |v|_V^2 from the RKHS inner products of the kernel atoms.
    double vnorm2 = 0.0;
    for (const Atom& ka : atoms)
        for (const Atom& kb : atoms) {
            const Vec w = ka.c - kb.c;   // x - y
            const double s = squared_norm(w);
            const double h0 = kernel.h(s, 0);
            const double h1 = kernel.h(s, 1);
            const double h2 = kernel.h(s, 2);
            vnorm2 += h0 * dot(ka.alpha, kb.alpha);
            // <K(x,.)z, D1K(y,.)(a,b)> = 2 hdot <y-x, a> <b, z>
            vnorm2 += 2.0 * h1 * dot(-w, kb.a) * dot(kb.b, ka.alpha);
            vnorm2 += 2.0 * h1 * dot(w, ka.a) * dot(ka.b, kb.alpha);
            vnorm2 += (-4.0 * h2 * dot(w, ka.a) * dot(w, kb.a) - 2.0 * h1 * dot(ka.a, kb.a)) *
                      dot(ka.b, kb.b);
        }
    // (p | xi_q v) is twice the matrix-free Hamiltonian.
    const double pairing = 2.0 * hamiltonian(model, state, kernel);
    return pairing - 0.5 * vnorm2;
}

std::vector<double> assemble_kernel_matrix(const ActionModel& model, const GeodesicState& state,
                                           const DeformationKernel& kernel) {
    if (model.transport != DirTransport::Tangent)
        throw std::invalid_argument("explicit kernel matrix assembly supports tangent transport only");
    if (std::holds_alternative<PushforwardFullState>(state))
        throw std::invalid_argument("explicit kernel matrix assembly supports the reduced systems only");
    const size_t P = particle_count(state);
    if (P > 512) throw std::invalid_argument("explicit kernel matrix assembly is limited to P <= 512");
    const int n = state_dimension(state);
    const size_t side = 2 * P * static_cast<size_t>(n);
    std::vector<double> m(side * side, 0.0);
    const auto at = [&](size_t r, size_t c) -> double& { return m[r * side + c]; };

    const bool normalized = std::holds_alternative<NormalizedState>(state);
    std::vector<Vec> xs(P), gs(P);   // positions and geometric vectors (d or u)
    if (normalized) {
        const auto& st = std::get<NormalizedState>(state);
        for (size_t i = 0; i < P; ++i) xs[i] = st.particles[i].x, gs[i] = st.particles[i].d;
    } else {
        const auto& st = std::get<PushforwardReducedState>(state);
        for (size_t i = 0; i < P; ++i) xs[i] = st.particles[i].x, gs[i] = st.particles[i].u;
    }

    // Inner block matrix: [[h_ki I, A_ik I], [A_ki I, B_ik I]] with
    // A_ik = 2 hdot <x_k - x_i, g_k>, B_ik = -(4 hddot <w,g_i><w,g_k> + 2 hdot <g_i,g_k>).
    for (size_t i = 0; i < P; ++i)
        for (size_t k = 0; k < P; ++k) {
            const Vec w = xs[k] - xs[i];
            const double s = squared_norm(w);
            const double h0 = kernel.h(s, 0);
            const double h1 = kernel.h(s, 1);
            const double h2 = kernel.h(s, 2);
            const double A_ik = 2.0 * h1 * dot(w, gs[k]);
            const double A_ki = -2.0 * h1 * dot(w, gs[i]);
            const double B_ik = -(4.0 * h2 * dot(w, gs[i]) * dot(w, gs[k]) + 2.0 * h1 * dot(gs[i], gs[k]));
            for (int c = 0; c < n; ++c) {
                const size_t xi = i * static_cast<size_t>(n) + c;
                const size_t xk = k * static_cast<size_t>(n) + c;
                const size_t di = P * static_cast<size_t>(n) + xi;
                const size_t dk = P * static_cast<size_t>(n) + xk;
                at(xi, xk) += h0;
                at(xi, dk) += A_ik;
                at(di, xk) += A_ki;
                at(di, dk) += B_ik;
            }
        }

    if (!normalized) return m;

    // Conjugate by the block projection diag(I, P_{d^perp}).
    const auto& st = std::get<NormalizedState>(state);
    std::vector<double> proj(side * side, 0.0);
    for (size_t c = 0; c < P * static_cast<size_t>(n); ++c) proj[c * side + c] = 1.0;
    for (size_t i = 0; i < P; ++i) {
        const Vec& d = st.particles[i].d;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                const size_t rr = P * static_cast<size_t>(n) + i * static_cast<size_t>(n) + r;
                const size_t cc = P * static_cast<size_t>(n) + i * static_cast<size_t>(n) + c;
                proj[rr * side + cc] = (r == c ? 1.0 : 0.0) - d[r] * d[c];
            }
    }
    const auto matmul = [&](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> r(side * side, 0.0);
        for (size_t i = 0; i < side; ++i)
            for (size_t k = 0; k < side; ++k) {
                const double aik = a[i * side + k];
                if (aik == 0.0) continue;
                for (size_t j = 0; j < side; ++j) r[i * side + j] += aik * b[k * side + j];
            }
        return r;
    };
    return matmul(proj, matmul(m, proj));   // proj is symmetric
}

namespace {

// Closed-form right-hand sides for tangent transport (per-particle sums of
// h, hdot, hddot, h''' terms).
NormalizedState rhs_normalized_closed(const NormalizedState& st, const DeformationKernel& kernel) {
    NormalizedState out = st;
    const size_t P = st.particles.size();
    std::vector<Vec> pis(P);
    for (size_t k = 0; k < P; ++k) pis[k] = projected_p2(st.particles[k].d, st.particles[k].p2);
    parallel_for(P, [&](size_t i) {
        const auto& pi_part = st.particles[i];
        Vec dx, m, dp1, dp2;
        for (size_t k = 0; k < P; ++k) {
            const auto& pk = st.particles[k];
            const Vec w = pk.x - pi_part.x;
            const HDerivs hh = kernel.derivs(squared_norm(w));
            const double h0 = hh.h0, h1 = hh.h1, h2 = hh.h2, h3 = hh.h3;
            const double wdk = dot(w, pk.d);
            const double wdi = dot(w, pi_part.d);
            const double dkdi = dot(pk.d, pi_part.d);

            dx += pk.p1 * h0 + pis[k] * (2.0 * h1 * wdk);

            // unprojected direction velocity Dv(x_i) d_i
            m += pk.p1 * (-2.0 * h1 * wdi) - pis[k] * (4.0 * h2 * wdk * wdi + 2.0 * h1 * dkdi);

            const double p1kp1i = dot(pk.p1, pi_part.p1);
            const double pikp1i = dot(pis[k], pi_part.p1);
            const double p1kpii = dot(pk.p1, pis[i]);
            const double pikpii = dot(pis[k], pis[i]);
            dp1 += w * (2.0 * h1 * p1kp1i + 4.0 * h2 * wdk * pikp1i - 4.0 * h2 * wdi * p1kpii -
                        (8.0 * h3 * wdk * wdi + 4.0 * h2 * dkdi) * pikpii);
            dp1 += pk.d * (2.0 * h1 * pikp1i - 4.0 * h2 * wdi * pikpii);
            dp1 -= pi_part.d * (2.0 * h1 * p1kpii + 4.0 * h2 * wdk * pikpii);

            dp2 += w * (2.0 * h1 * p1kpii + 4.0 * h2 * wdk * pikpii);
            dp2 += pk.d * (2.0 * h1 * pikpii);
        }
        dp2 += m * dot(pi_part.d, pi_part.p2) + pi_part.p2 * dot(pi_part.d, m);
        out.particles[i] = {dx, project_orthogonal(pi_part.d, m), dp1, dp2};
    });
    for (double& w : out.weights) w = 0.0;   // derivative container; weights are constant
    return out;
}

PushforwardReducedState rhs_reduced_closed(const PushforwardReducedState& st,
                                           const DeformationKernel& kernel) {
    PushforwardReducedState out = st;
    const size_t P = st.particles.size();
    parallel_for(P, [&](size_t i) {
        const auto& pi_part = st.particles[i];
        Vec dx, du, dp1, dp2;
        for (size_t k = 0; k < P; ++k) {
            const auto& pk = st.particles[k];
            const Vec w = pk.x - pi_part.x;
            const HDerivs hh = kernel.derivs(squared_norm(w));
            const double h0 = hh.h0, h1 = hh.h1, h2 = hh.h2, h3 = hh.h3;
            const double wuk = dot(w, pk.u);
            const double wui = dot(w, pi_part.u);
            const double ukui = dot(pk.u, pi_part.u);

            dx += pk.p1 * h0 + pk.p2 * (2.0 * h1 * wuk);
            du += pk.p1 * (-2.0 * h1 * wui) - pk.p2 * (4.0 * h2 * wuk * wui + 2.0 * h1 * ukui);

            const double p1kp1i = dot(pk.p1, pi_part.p1);
            const double p2kp1i = dot(pk.p2, pi_part.p1);
            const double p1kp2i = dot(pk.p1, pi_part.p2);
            const double p2kp2i = dot(pk.p2, pi_part.p2);
            dp1 += w * (2.0 * h1 * p1kp1i + 4.0 * h2 * wuk * p2kp1i - 4.0 * h2 * wui * p1kp2i -
                        (8.0 * h3 * wuk * wui + 4.0 * h2 * ukui) * p2kp2i);
            dp1 += pk.u * (2.0 * h1 * p2kp1i - 4.0 * h2 * wui * p2kp2i);
            dp1 -= pi_part.u * (2.0 * h1 * p1kp2i + 4.0 * h2 * wuk * p2kp2i);

            dp2 += w * (2.0 * h1 * p1kp2i + 4.0 * h2 * wuk * p2kp2i);
            dp2 += pk.u * (2.0 * h1 * p2kp2i);
        }
        out.particles[i] = {dx, du, dp1, dp2};
    });
    return out;
}

NormalizedState rhs_normalized_generic(const ActionModel& model, const NormalizedState& st,
                                       const DeformationKernel& kernel,
                                       const std::vector<Atom>& atoms) {
    NormalizedState out = st;
    const bool tangent = model.transport == DirTransport::Tangent;
    parallel_for(st.particles.size(), [&](size_t i) {
        const auto& p = st.particles[i];
        const TransportOps ops{eval_jacobian(atoms, kernel, p.x), tangent};
        const Vec pi = projected_p2(p.d, p.p2);
        const Vec td = ops.T(p.d);
        const Vec coupling = tangent ? eval_hessian_form(atoms, kernel, p.x, p.d, pi)
                                     : -eval_hessian_form(atoms, kernel, p.x, pi, p.d);
        out.particles[i] = {
            eval_velocity(atoms, kernel, p.x),
            project_orthogonal(p.d, td),
            -ops.jac.apply_transpose(p.p1) - coupling,
            -ops.Tstar(p.p2) + p.p2 * dot(p.d, td) + (ops.T(p.d) + ops.Tstar(p.d)) * dot(p.d, p.p2)};
    });
    for (double& w : out.weights) w = 0.0;
    return out;
}

PushforwardReducedState rhs_reduced_generic(const ActionModel& model,
                                            const PushforwardReducedState& st,
                                            const DeformationKernel& kernel,
                                            const std::vector<Atom>& atoms) {
    PushforwardReducedState out = st;
    const bool tangent = model.transport == DirTransport::Tangent;
    parallel_for(st.particles.size(), [&](size_t i) {
        const auto& p = st.particles[i];
        const TransportOps ops{eval_jacobian(atoms, kernel, p.x), tangent};
        const Vec coupling = tangent ? eval_hessian_form(atoms, kernel, p.x, p.u, p.p2)
                                     : -eval_hessian_form(atoms, kernel, p.x, p.p2, p.u);
        out.particles[i] = {eval_velocity(atoms, kernel, p.x), ops.T(p.u),
                            -ops.jac.apply_transpose(p.p1) - coupling, -ops.Tstar(p.p2)};
    });
    return out;
}

PushforwardFullState rhs_full_generic(const ActionModel& model, const PushforwardFullState& st,
                                      const DeformationKernel& kernel,
                                      const std::vector<Atom>& atoms) {
    PushforwardFullState out = st;
    const bool tangent = model.transport == DirTransport::Tangent;
    parallel_for(st.particles.size(), [&](size_t i) {
        const auto& p = st.particles[i];
        const TransportOps ops{eval_jacobian(atoms, kernel, p.x), tangent};
        const Vec pi = projected_p2(p.d, p.p2);
        const Vec m = pi + p.d * (p.p3 * p.r);
        const Vec td = ops.T(p.d);
        const double dtd = dot(p.d, td);
        const Vec coupling = tangent ? eval_hessian_form(atoms, kernel, p.x, p.d, m)
                                     : -eval_hessian_form(atoms, kernel, p.x, m, p.d);
        out.particles[i] = {
            eval_velocity(atoms, kernel, p.x),
            project_orthogonal(p.d, td),
            p.r * dtd,
            -ops.jac.apply_transpose(p.p1) - coupling,
            -ops.Tstar(p.p2) + p.p2 * dtd + (ops.T(p.d) + ops.Tstar(p.d)) * (dot(p.d, p.p2) - p.r * p.p3),
            -p.p3 * dtd};
    });
    return out;
}

}  // namespace

GeodesicState generic_rhs(const ActionModel& model, const GeodesicState& state,
                          const DeformationKernel& kernel) {
    const auto atoms = build_atoms(model, state);
    if (const auto* st = std::get_if<NormalizedState>(&state))
        return rhs_normalized_generic(model, *st, kernel, atoms);
    if (const auto* st2 = std::get_if<PushforwardReducedState>(&state))
        return rhs_reduced_generic(model, *st2, kernel, atoms);
    return rhs_full_generic(model, std::get<PushforwardFullState>(state), kernel, atoms);
}

GeodesicState forward_rhs(const ActionModel& model, const GeodesicState& state,
                          const DeformationKernel& kernel) {
    if (model.transport == DirTransport::Tangent) {
        if (const auto* st = std::get_if<NormalizedState>(&state))
            return rhs_normalized_closed(*st, kernel);
        if (const auto* st2 = std::get_if<PushforwardReducedState>(&state))
            return rhs_reduced_closed(*st2, kernel);
    }
    return generic_rhs(model, state, kernel);
}

namespace {

void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

Trajectory integrate_with_tracers(const ActionModel& model, const GeodesicState& initial,
                                  const DeformationKernel& kernel, int steps,
                                  const std::vector<Vec>& tracers,
                                  std::vector<std::vector<Vec>>& tracer_tracks) {
    if (steps < 1) throw std::invalid_argument("integration needs at least one step");
    const double dt = 1.0 / steps;
    Trajectory traj;
    traj.times.reserve(static_cast<size_t>(steps) + 1);
    traj.states.reserve(static_cast<size_t>(steps) + 1);

    std::vector<double> initial_u_norm;
    if (const auto* st = std::get_if<PushforwardReducedState>(&initial))
        for (const auto& p : st->particles) initial_u_norm.push_back(norm(p.u));

    const auto check_state = [&](const GeodesicState& s, int step) {
        const auto flat = state_to_flat(s);
        for (double v : flat)
            if (!std::isfinite(v))
                throw std::runtime_error("integration produced non-finite values at step " +
                                         std::to_string(step));
        if (const auto* st = std::get_if<NormalizedState>(&s)) {
            for (const auto& p : st->particles)
                if (std::fabs(norm(p.d) - 1.0) > 1e-6) traj.direction_drift_warning = true;
        } else if (const auto* st2 = std::get_if<PushforwardFullState>(&s)) {
            for (const auto& p : st2->particles)
                if (std::fabs(norm(p.d) - 1.0) > 1e-6) traj.direction_drift_warning = true;
        } else {
            const auto& st3 = std::get<PushforwardReducedState>(s);
            for (size_t i = 0; i < st3.particles.size(); ++i)
                if (norm(st3.particles[i].u) < 1e-10 * initial_u_norm[i])
                    throw std::runtime_error("mass collapse: |u| of particle " + std::to_string(i) +
                                             " fell below 1e-10 of its initial value at step " +
                                             std::to_string(step));
        }
    };

    const bool track = !tracers.empty();
    std::vector<Vec> tr = tracers;
    tracer_tracks.clear();
    if (track) tracer_tracks.push_back(tr);

    // H_r is quadratic in p, so 2 H_r = <p, dq/dt> (the momentum block paired
    // with the state-velocity block of the RHS, which RK4 computes anyway).
    const auto pairing_hamiltonian = [](const std::vector<double>& state,
                                        const std::vector<double>& rhs) {
        const size_t half = state.size() / 2;
        double s = 0.0;
        for (size_t i = 0; i < half; ++i) s += state[half + i] * rhs[i];
        return 0.5 * s;
    };

    std::vector<double> y = state_to_flat(initial);
    GeodesicState current = initial;
    check_state(current, 0);
    traj.times.push_back(0.0);
    traj.states.push_back(current);

    const auto tracer_velocities = [&](const GeodesicState& s, const std::vector<Vec>& pts) {
        const auto atoms = build_atoms(model, s);
        std::vector<Vec> vel(pts.size());
        parallel_for(pts.size(), [&](size_t i) { vel[i] = eval_velocity(atoms, kernel, pts[i]); });
        return vel;
    };

    const auto ensure_finite = [](const std::vector<double>& v, int step) {
        for (double x : v)
            if (!std::isfinite(x))
                throw std::runtime_error("integration produced non-finite values at step " +
                                         std::to_string(step));
    };

    for (int step = 0; step < steps; ++step) {
        const GeodesicState s1 = state_from_flat(initial, y);
        const std::vector<double> k1 = state_to_flat(forward_rhs(model, s1, kernel));
        traj.hamiltonian_values.push_back(pairing_hamiltonian(y, k1));

        std::vector<double> y2 = y;
        axpy(y2, 0.5 * dt, k1);
        ensure_finite(y2, step + 1);
        const GeodesicState s2 = state_from_flat(initial, y2);
        const std::vector<double> k2 = state_to_flat(forward_rhs(model, s2, kernel));

        std::vector<double> y3 = y;
        axpy(y3, 0.5 * dt, k2);
        ensure_finite(y3, step + 1);
        const GeodesicState s3 = state_from_flat(initial, y3);
        const std::vector<double> k3 = state_to_flat(forward_rhs(model, s3, kernel));

        std::vector<double> y4 = y;
        axpy(y4, dt, k3);
        ensure_finite(y4, step + 1);
        const GeodesicState s4 = state_from_flat(initial, y4);
        const std::vector<double> k4 = state_to_flat(forward_rhs(model, s4, kernel));

        for (size_t i = 0; i < y.size(); ++i)
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

        if (track) {
            const auto v1 = tracer_velocities(s1, tr);
            std::vector<Vec> t2(tr.size()), t3(tr.size()), t4(tr.size());
            for (size_t i = 0; i < tr.size(); ++i) t2[i] = tr[i] + v1[i] * (0.5 * dt);
            const auto v2 = tracer_velocities(s2, t2);
            for (size_t i = 0; i < tr.size(); ++i) t3[i] = tr[i] + v2[i] * (0.5 * dt);
            const auto v3 = tracer_velocities(s3, t3);
            for (size_t i = 0; i < tr.size(); ++i) t4[i] = tr[i] + v3[i] * dt;
            const auto v4 = tracer_velocities(s4, t4);
            for (size_t i = 0; i < tr.size(); ++i)
                tr[i] += (v1[i] + v2[i] * 2.0 + v3[i] * 2.0 + v4[i]) * (dt / 6.0);
            tracer_tracks.push_back(tr);
        }

        current = state_from_flat(initial, y);
        check_state(current, step + 1);
        traj.times.push_back(dt * (step + 1));
        traj.states.push_back(current);
    }
    traj.hamiltonian_values.push_back(
        pairing_hamiltonian(y, state_to_flat(forward_rhs(model, current, kernel))));
    traj.times.back() = 1.0;
    return traj;
}

Trajectory integrate(const ActionModel& model, const GeodesicState& initial,
                     const DeformationKernel& kernel, int steps) {
    std::vector<std::vector<Vec>> unused;
    return integrate_with_tracers(model, initial, kernel, steps, {}, unused);
}

PushforwardReducedState reduce_full_state(const PushforwardFullState& full) {
    PushforwardReducedState out;
    out.dim = full.dim;
    out.particles.reserve(full.particles.size());
    for (size_t i = 0; i < full.particles.size(); ++i) {
        const auto& p = full.particles[i];
        if (std::fabs(dot(p.p2, p.d) - p.r * p.p3) > 1e-8)
            throw std::invalid_argument("particle " + std::to_string(i) +
                                        " violates the compatibility <p2, d> = r p3");
        if (!(p.r > 0.0))
            throw std::invalid_argument("particle " + std::to_string(i) + " has non-positive weight");
        const Vec p2_reduced = (projected_p2(p.d, p.p2) + p.d * (p.p3 * p.r)) * (1.0 / p.r);
        out.particles.push_back({p.x, p.d * p.r, p.p1, p2_reduced});
    }
    return out;
}

PushforwardFullState expand_reduced_state(const PushforwardReducedState& reduced) {
    PushforwardFullState out;
    out.dim = reduced.dim;
    out.particles.reserve(reduced.particles.size());
    for (size_t i = 0; i < reduced.particles.size(); ++i) {
        const auto& p = reduced.particles[i];
        const double r = norm(p.u);
        if (r <= 1e-12)
            throw std::invalid_argument("particle " + std::to_string(i) + " has |u| too small to expand");
        const Vec d = p.u * (1.0 / r);
        out.particles.push_back({p.x, d, r, p.p1, p.p2 * r, dot(p.p2, d)});
    }
    return out;
}

DiscreteVarifold state_to_varifold(const GeodesicState& state) {
    std::vector<Dirac> diracs;
    if (const auto* st = std::get_if<NormalizedState>(&state)) {
        diracs.reserve(st->particles.size());
        for (size_t i = 0; i < st->particles.size(); ++i)
            diracs.push_back({st->particles[i].x, normalized(st->particles[i].d), st->weights[i]});
    } else if (const auto* st2 = std::get_if<PushforwardReducedState>(&state)) {
        diracs.reserve(st2->particles.size());
        for (const auto& p : st2->particles) {
            const double r = norm(p.u);
            if (r <= 1e-12) throw std::runtime_error("state has a collapsed particle (|u| <= 1e-12)");
            diracs.push_back({p.x, p.u * (1.0 / r), r});
        }
    } else {
        const auto& st3 = std::get<PushforwardFullState>(state);
        diracs.reserve(st3.particles.size());
        for (const auto& p : st3.particles) diracs.push_back({p.x, normalized(p.d), p.r});
    }
    return DiscreteVarifold(state_dimension(state), std::move(diracs));
}

}  // namespace varmatch
