// io.hpp - file formats: varifold/curve JSON, OBJ meshes, PGM images,
// momenta, trajectory and registration-result export, run configuration.
//
// All emitted files use nlohmann::json with sorted keys or fixed printf
// formats, so identical inputs produce byte-identical outputs.

#pragma once

#include <json.hpp>
#include <string>

#include "varmatch/optimizer.hpp"

namespace varmatch {

// Varifold JSON: {"dimension": n, "diracs": [{"x": [...], "d": [...], "r": w}, ...]}.
// Directions are renormalized on load; |d| off unit by more than 1e-6 fails.
nlohmann::json varifold_to_json(const DiscreteVarifold& mu);
DiscreteVarifold varifold_from_json(const nlohmann::json& j);
DiscreteVarifold load_varifold_json(const std::string& path);
void save_varifold_json(const std::string& path, const DiscreteVarifold& mu);

// Curve JSON: {"vertices": [[x,y(,z)], ...], "closed": bool}.
PolylineCurve load_curve_json(const std::string& path);

// Wavefront OBJ subset: only "v x y z" and triangular "f a b c" lines are
// interpreted (slash-qualified face indices keep their vertex part); comments
// and other keywords are skipped.
TriangleMesh load_mesh_obj(const std::string& path);

// PGM, binary (P5, maxval <= 255) or plain (P2). Intensities normalized to [0,1].
GrayImage load_image_pgm(const std::string& path, double pixel_spacing = 1.0);
void save_image_pgm(const std::string& path, const GrayImage& img);   // P5, maxval 255

// Momenta JSON: {"p1": [[...], ...], "p2": [[...], ...]}, one row per particle.
InitialMomenta load_momenta_json(const std::string& path, int dimension);
void save_momenta_json(const std::string& path, const InitialMomenta& m, int dimension);

// Trajectory export: JSON array of time-stamped states and a per-particle CSV
// (t, particle, state components, momenta).
nlohmann::json trajectory_to_json(const Trajectory& traj);
void save_trajectory_json(const std::string& path, const Trajectory& traj);
void save_trajectory_csv(const std::string& path, const Trajectory& traj);

// Registration result with the fully resolved configuration echoed in.
nlohmann::json registration_result_to_json(const RegistrationResult& result,
                                           const nlohmann::json& config_echo);
void save_registration_result(const std::string& path, const RegistrationResult& result,
                              const nlohmann::json& config_echo);
void save_energy_csv(const std::string& path, const RegistrationResult& result);

// Run configuration for the register subcommand. Unknown keys are rejected.
struct RunConfig {
    std::string template_path;
    std::string target_path;
    std::string action = "normalized";
    std::string transport = "tangent";
    std::string gamma = "oriented-gaussian";
    double sigma = 1.0;
    double sigma_s = 1.0;
    double sigma_v = 1.0;
    double lambda = 1.0;
    int steps = 20;
    int max_iter = 500;
    double tol_grad = 1e-6;
    double tol_energy = 1e-8;
    double init_step_spatial = 1.0;
    double init_step_directional = 1.0;
    std::string out_prefix = "register_out";
    bool svg = true;
    int svg_grid = 20;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

// Instantiates the registration problem (loads template/target files).
RegistrationProblem make_problem(const RunConfig& cfg);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace varmatch
