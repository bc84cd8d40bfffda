// varmatch - diffeomorphic registration of discrete varifolds.
//
// Subcommands:
//   convert    curve/mesh/image file -> varifold JSON
//   distance   kernel inner products and squared W* distance of two varifolds
//   shoot      integrate a geodesic from a varifold and initial momenta
//   register   geodesic-shooting registration driven by a JSON config
//
// Exit codes: 0 success, 1 input/config error, 2 optimizer made no progress,
// 3 numerical failure.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>

#include "varmatch/io.hpp"
#include "varmatch/svg.hpp"

using namespace varmatch;

namespace {

struct KernelFlags {
    std::string gamma = "oriented-gaussian";
    double sigma = 1.0;
    double sigma_s = 1.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--gamma", gamma,
                        "orientation kernel: linear|binet|unoriented-gaussian|oriented-gaussian");
        cmd->add_option("--sigma", sigma, "spatial kernel width");
        cmd->add_option("--sigma-s", sigma_s, "orientation kernel width");
    }

    FidelityConfig config() const {
        return {SpatialKernel(sigma), OrientationKernel(parse_orientation_family(gamma), sigma_s)};
    }
};

int run_convert(const std::string& kind, const std::string& input, const std::string& out,
                double grad_threshold, double pixel_spacing) {
    DiscreteVarifold mu;
    if (kind == "curve") {
        mu = curve_to_varifold(load_curve_json(input));
    } else if (kind == "mesh") {
        mu = mesh_to_varifold(load_mesh_obj(input));
    } else if (kind == "image") {
        mu = image_to_varifold(load_image_pgm(input, pixel_spacing), grad_threshold);
    } else {
        throw std::invalid_argument("unknown --kind: " + kind);
    }
    save_varifold_json(out, mu);
    std::printf("wrote %s: %zu diracs, total mass %.12g\n", out.c_str(), mu.size(), mu.total_mass());
    return 0;
}

int run_distance(const std::string& path_a, const std::string& path_b, const KernelFlags& kernels) {
    const DiscreteVarifold mu = load_varifold_json(path_a);
    const DiscreteVarifold nu = load_varifold_json(path_b);
    const FidelityConfig cfg = kernels.config();
    std::printf("<mu,mu>  = %.12g\n", inner_product(cfg, mu, mu));
    std::printf("<mu,nu>  = %.12g\n", inner_product(cfg, mu, nu));
    std::printf("<nu,nu>  = %.12g\n", inner_product(cfg, nu, nu));
    std::printf("dist2    = %.12g\n", squared_distance(cfg, mu, nu));
    return 0;
}

int run_shoot(const std::string& varifold_path, const std::string& momenta_path,
              const std::string& action, const std::string& transport, double sigma_v, int steps,
              const std::string& out_prefix, bool svg, int svg_grid) {
    const DiscreteVarifold mu = load_varifold_json(varifold_path);
    const InitialMomenta momenta = load_momenta_json(momenta_path, mu.dimension());
    if (momenta.p1.size() != mu.size())
        throw std::invalid_argument("momenta row count (" + std::to_string(momenta.p1.size()) +
                                    ") does not match particle count (" + std::to_string(mu.size()) +
                                    ")");
    const ActionModel model{parse_group_action(action), parse_dir_transport(transport)};
    const DeformationKernel kernel(sigma_v);
    const GeodesicState initial = make_initial_state(model.action, mu, momenta.p1, momenta.p2);

    Trajectory traj;
    std::vector<std::vector<Vec>> tracks;
    const bool draw = svg && mu.dimension() == 2;
    if (draw) {
        traj = integrate_with_tracers(model, initial, kernel, steps,
                                      make_tracer_grid(initial, svg_grid), tracks);
    } else {
        traj = integrate(model, initial, kernel, steps);
    }

    save_trajectory_json(out_prefix + ".trajectory.json", traj);
    save_trajectory_csv(out_prefix + ".trajectory.csv", traj);
    if (draw) write_text_file(out_prefix + ".svg", render_shoot_svg(traj, tracks, svg_grid));

    double drift = 0.0;
    for (double h : traj.hamiltonian_values)
        drift = std::max(drift, std::fabs(h - traj.hamiltonian_values.front()));
    const double h0 = std::fabs(traj.hamiltonian_values.front());
    std::printf("integrated %d steps, H_r(0) = %.12g, relative H_r drift = %.3g\n", steps,
                traj.hamiltonian_values.front(), h0 > 0 ? drift / h0 : 0.0);
    if (traj.direction_drift_warning)
        std::fprintf(stderr,
                     "warning: direction norms drifted by more than 1e-6; increase --steps\n");
    return 0;
}

int run_register(const std::string& config_path, RunConfig overrides,
                 const std::vector<std::string>& overridden) {
    RunConfig cfg = load_run_config(config_path);
    const auto is_set = [&](const std::string& name) {
        for (const auto& n : overridden)
            if (n == name) return true;
        return false;
    };
    if (is_set("action")) cfg.action = overrides.action;
    if (is_set("transport")) cfg.transport = overrides.transport;
    if (is_set("gamma")) cfg.gamma = overrides.gamma;
    if (is_set("sigma")) cfg.sigma = overrides.sigma;
    if (is_set("sigma_s")) cfg.sigma_s = overrides.sigma_s;
    if (is_set("sigma_v")) cfg.sigma_v = overrides.sigma_v;
    if (is_set("lambda")) cfg.lambda = overrides.lambda;
    if (is_set("steps")) cfg.steps = overrides.steps;
    if (is_set("max_iter")) cfg.max_iter = overrides.max_iter;
    if (is_set("out")) cfg.out_prefix = overrides.out_prefix;

    const RegistrationProblem prob = make_problem(cfg);
    const RegistrationResult result = run_registration(prob);

    const nlohmann::json echo = run_config_to_json(cfg);
    save_registration_result(cfg.out_prefix + ".result.json", result, echo);
    save_trajectory_json(cfg.out_prefix + ".trajectory.json", result.trajectory);
    save_energy_csv(cfg.out_prefix + ".energy.csv", result);
    if (cfg.svg && prob.source.dimension() == 2)
        write_text_file(cfg.out_prefix + ".svg",
                        render_overlay_svg(prob.source, result.deformed, prob.target,
                                           result.trajectory));

    const auto& last = result.energy_history.back();
    std::printf("iterations %d (%s), E = %.12g, H_r = %.12g, fidelity = %.12g\n",
                result.iterations, result.termination.c_str(), last.total, last.regularization,
                last.fidelity);
    return result.no_descent ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffeomorphic registration of discrete varifolds"};
    app.require_subcommand(1);

    // convert
    auto* convert = app.add_subcommand("convert", "convert a shape file to a varifold");
    std::string kind, convert_input, convert_out = "out.vf.json";
    double grad_threshold = 1e-8, pixel_spacing = 1.0;
    convert->add_option("--kind", kind, "curve|mesh|image")->required();
    convert->add_option("input", convert_input, "input file")->required();
    convert->add_option("-o,--out", convert_out, "output varifold JSON");
    convert->add_option("--grad-threshold", grad_threshold, "image gradient threshold");
    convert->add_option("--pixel-spacing", pixel_spacing, "image pixel spacing");

    // distance
    auto* distance = app.add_subcommand("distance", "squared W* distance between two varifolds");
    std::string dist_a, dist_b;
    KernelFlags dist_kernels;
    distance->add_option("a", dist_a, "first varifold JSON")->required();
    distance->add_option("b", dist_b, "second varifold JSON")->required();
    dist_kernels.attach(distance);

    // shoot
    auto* shoot = app.add_subcommand("shoot", "integrate a geodesic");
    std::string shoot_varifold, shoot_momenta, shoot_action = "normalized",
                shoot_transport = "tangent", shoot_out = "shoot_out";
    double shoot_sigma_v = 1.0;
    int shoot_steps = 20, shoot_grid = 20;
    bool shoot_svg = true;
    shoot->add_option("varifold", shoot_varifold, "varifold JSON")->required();
    shoot->add_option("--momenta", shoot_momenta, "momenta JSON (p1/p2 rows)")->required();
    shoot->add_option("--action", shoot_action, "normalized|pushforward");
    shoot->add_option("--transport", shoot_transport, "tangent|normal");
    shoot->add_option("--sigma-v", shoot_sigma_v, "deformation kernel width");
    shoot->add_option("--steps", shoot_steps, "RK4 steps");
    shoot->add_option("--out", shoot_out, "output prefix");
    shoot->add_flag("--svg,!--no-svg", shoot_svg, "emit an SVG figure (2D only)");
    shoot->add_option("--svg-grid", shoot_grid, "deformed-grid resolution");

    // register
    auto* reg = app.add_subcommand("register", "run a registration from a config file");
    std::string config_path;
    RunConfig reg_overrides;
    reg->add_option("config", config_path, "JSON config")->required();
    reg->add_option("--action", reg_overrides.action, "normalized|pushforward");
    reg->add_option("--transport", reg_overrides.transport, "tangent|normal");
    reg->add_option("--gamma", reg_overrides.gamma, "orientation kernel family");
    reg->add_option("--sigma", reg_overrides.sigma, "spatial kernel width");
    reg->add_option("--sigma-s", reg_overrides.sigma_s, "orientation kernel width")
        ->group("Kernels");
    reg->add_option("--sigma-v", reg_overrides.sigma_v, "deformation kernel width");
    reg->add_option("--lambda", reg_overrides.lambda, "fidelity weight");
    reg->add_option("--steps", reg_overrides.steps, "RK4 steps");
    reg->add_option("--max-iter", reg_overrides.max_iter, "iteration cap");
    reg->add_option("--out", reg_overrides.out_prefix, "output prefix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*convert)
            return run_convert(kind, convert_input, convert_out, grad_threshold, pixel_spacing);
        if (*distance) return run_distance(dist_a, dist_b, dist_kernels);
        if (*shoot)
            return run_shoot(shoot_varifold, shoot_momenta, shoot_action, shoot_transport,
                             shoot_sigma_v, shoot_steps, shoot_out, shoot_svg, shoot_grid);
        if (*reg) {
            std::vector<std::string> overridden;
            for (const auto* opt : reg->get_options())
                if (opt->count() > 0) {
                    std::string name = opt->get_name();
                    if (name.rfind("--", 0) == 0) name = name.substr(2);
                    for (auto& c : name)
                        if (c == '-') c = '_';
                    if (name == "out") name = "out";
                    overridden.push_back(name);
                }
            return run_register(config_path, reg_overrides, overridden);
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::runtime_error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
    return 1;
}
