#include "varmatch/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace varmatch {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v, int dim) {
    json a = json::array();
    for (int k = 0; k < dim; ++k) a.push_back(v[k]);
    return a;
}

Vec vec_from_json(const json& a, int dim, const std::string& what) {
    if (!a.is_array() || static_cast<int>(a.size()) != dim)
        throw std::invalid_argument(what + " must be an array of " + std::to_string(dim) + " numbers");
    Vec v;
    for (int k = 0; k < dim; ++k) v[k] = a[static_cast<size_t>(k)].get<double>();
    return v;
}

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    return j;
}

void require_keys(const json& j, const std::vector<std::string>& allowed, const std::string& what) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const auto& k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw std::invalid_argument(what + ": unknown key \"" + item.key() + "\"");
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path);
}

json varifold_to_json(const DiscreteVarifold& mu) {
    json diracs = json::array();
    for (const Dirac& a : mu.diracs())
        diracs.push_back({{"x", vec_to_json(a.x, mu.dimension())},
                          {"d", vec_to_json(a.d, mu.dimension())},
                          {"r", a.r}});
    return {{"dimension", mu.dimension()}, {"diracs", diracs}};
}

DiscreteVarifold varifold_from_json(const json& j) {
    require_keys(j, {"dimension", "diracs"}, "varifold");
    if (!j.contains("dimension") || !j.contains("diracs"))
        throw std::invalid_argument("varifold JSON needs \"dimension\" and \"diracs\"");
    const int dim = j.at("dimension").get<int>();
    if (dim != 2 && dim != 3) throw std::invalid_argument("varifold dimension must be 2 or 3");
    std::vector<Dirac> diracs;
    size_t idx = 0;
    for (const json& dj : j.at("diracs")) {
        require_keys(dj, {"x", "d", "r"}, "dirac " + std::to_string(idx));
        const Vec x = vec_from_json(dj.at("x"), dim, "dirac " + std::to_string(idx) + " x");
        Vec d = vec_from_json(dj.at("d"), dim, "dirac " + std::to_string(idx) + " d");
        const double len = norm(d);
        if (std::fabs(len - 1.0) > 1e-6)
            throw std::invalid_argument("dirac " + std::to_string(idx) +
                                        " direction deviates from unit length by more than 1e-6");
        d = d * (1.0 / len);
        const double r = dj.at("r").get<double>();
        diracs.push_back({x, d, r});
        ++idx;
    }
    return DiscreteVarifold(dim, std::move(diracs));
}

DiscreteVarifold load_varifold_json(const std::string& path) {
    return varifold_from_json(parse_file(path));
}

void save_varifold_json(const std::string& path, const DiscreteVarifold& mu) {
    write_text_file(path, varifold_to_json(mu).dump(2) + "\n");
}

PolylineCurve load_curve_json(const std::string& path) {
    const json j = parse_file(path);
    require_keys(j, {"vertices", "closed"}, "curve");
    if (!j.contains("vertices")) throw std::invalid_argument(path + ": curve JSON needs \"vertices\"");
    const json& verts = j.at("vertices");
    if (!verts.is_array() || verts.empty())
        throw std::invalid_argument(path + ": \"vertices\" must be a non-empty array");
    const int dim = static_cast<int>(verts.front().size());
    if (dim != 2 && dim != 3) throw std::invalid_argument(path + ": vertices must be 2D or 3D");
    std::vector<Vec> vertices;
    for (size_t i = 0; i < verts.size(); ++i)
        vertices.push_back(vec_from_json(verts[i], dim, "vertex " + std::to_string(i)));
    const bool closed = j.value("closed", false);
    return PolylineCurve(dim, std::move(vertices), closed);
}

TriangleMesh load_mesh_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::vector<Vec> vertices;
    std::vector<std::array<int, 3>> faces;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag.empty() || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z))
                throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": malformed vertex");
            vertices.push_back({x, y, z});
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) {
                const size_t slash = tok.find('/');
                const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
                try {
                    idx.push_back(std::stoi(head));
                } catch (...) {
                    throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                                ": malformed face index \"" + tok + "\"");
                }
            }
            if (idx.size() != 3)
                throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                            ": only triangular faces are supported");
            std::array<int, 3> f{};
            for (int k = 0; k < 3; ++k) {
                int v = idx[static_cast<size_t>(k)];
                if (v < 0) v = static_cast<int>(vertices.size()) + v + 1;   // negative OBJ indices
                f[static_cast<size_t>(k)] = v - 1;
            }
            faces.push_back(f);
        }
        // other keywords (vn, vt, g, o, s, usemtl, mtllib) are ignored
    }
    return TriangleMesh(std::move(vertices), std::move(faces));
}

GrayImage load_image_pgm(const std::string& path, double pixel_spacing) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2")
        throw std::invalid_argument(path + ": not a PGM file (expected P5 or P2)");
    const auto next_int = [&](const char* what) {
        // skip whitespace and '#' comments
        for (;;) {
            const int c = in.peek();
            if (c == '#') {
                std::string comment;
                std::getline(in, comment);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        long v;
        if (!(in >> v)) throw std::invalid_argument(path + ": malformed PGM header (" + what + ")");
        return v;
    };
    const long width = next_int("width");
    const long height = next_int("height");
    const long maxval = next_int("maxval");
    if (width <= 0 || height <= 0 || maxval <= 0)
        throw std::invalid_argument(path + ": invalid PGM header values");
    std::vector<double> pixels(static_cast<size_t>(width) * static_cast<size_t>(height));
    if (magic == "P5") {
        if (maxval > 255)
            throw std::invalid_argument(path + ": binary PGM with maxval > 255 is not supported");
        in.get();   // single whitespace after maxval
        std::vector<unsigned char> raw(pixels.size());
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size()))
            throw std::invalid_argument(path + ": truncated PGM payload at byte " +
                                        std::to_string(in.gcount()));
        for (size_t i = 0; i < raw.size(); ++i) pixels[i] = raw[i] / static_cast<double>(maxval);
    } else {
        for (size_t i = 0; i < pixels.size(); ++i) {
            long v;
            if (!(in >> v))
                throw std::invalid_argument(path + ": truncated plain PGM at sample " + std::to_string(i));
            pixels[i] = v / static_cast<double>(maxval);
        }
    }
    return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(pixels), pixel_spacing);
}

void save_image_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (double v : img.pixels) {
        const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

InitialMomenta load_momenta_json(const std::string& path, int dimension) {
    const json j = parse_file(path);
    require_keys(j, {"p1", "p2"}, "momenta");
    if (!j.contains("p1") || !j.contains("p2"))
        throw std::invalid_argument(path + ": momenta JSON needs \"p1\" and \"p2\"");
    InitialMomenta m;
    for (size_t i = 0; i < j.at("p1").size(); ++i)
        m.p1.push_back(vec_from_json(j.at("p1")[i], dimension, "p1 row " + std::to_string(i)));
    for (size_t i = 0; i < j.at("p2").size(); ++i)
        m.p2.push_back(vec_from_json(j.at("p2")[i], dimension, "p2 row " + std::to_string(i)));
    if (m.p1.size() != m.p2.size())
        throw std::invalid_argument(path + ": p1 and p2 must have the same number of rows");
    return m;
}

void save_momenta_json(const std::string& path, const InitialMomenta& m, int dimension) {
    json p1 = json::array(), p2 = json::array();
    for (const Vec& v : m.p1) p1.push_back(vec_to_json(v, dimension));
    for (const Vec& v : m.p2) p2.push_back(vec_to_json(v, dimension));
    write_text_file(path, json{{"p1", p1}, {"p2", p2}}.dump(2) + "\n");
}

namespace {

json particle_to_json(const NormalizedParticle& p, int n) {
    return {{"x", vec_to_json(p.x, n)}, {"d", vec_to_json(p.d, n)},
            {"p1", vec_to_json(p.p1, n)}, {"p2", vec_to_json(p.p2, n)}};
}
json particle_to_json(const ReducedParticle& p, int n) {
    return {{"x", vec_to_json(p.x, n)}, {"u", vec_to_json(p.u, n)},
            {"p1", vec_to_json(p.p1, n)}, {"p2", vec_to_json(p.p2, n)}};
}
json particle_to_json(const FullParticle& p, int n) {
    return {{"x", vec_to_json(p.x, n)},  {"d", vec_to_json(p.d, n)}, {"r", p.r},
            {"p1", vec_to_json(p.p1, n)}, {"p2", vec_to_json(p.p2, n)}, {"p3", p.p3}};
}

}  // namespace

json trajectory_to_json(const Trajectory& traj) {
    json nodes = json::array();
    for (size_t t = 0; t < traj.states.size(); ++t) {
        const int n = state_dimension(traj.states[t]);
        json particles = json::array();
        std::visit(
            [&](const auto& st) {
                for (const auto& p : st.particles) particles.push_back(particle_to_json(p, n));
            },
            traj.states[t]);
        nodes.push_back({{"t", traj.times[t]},
                         {"hamiltonian", traj.hamiltonian_values[t]},
                         {"particles", particles}});
    }
    json out{{"nodes", nodes}};
    if (traj.direction_drift_warning) out["direction_drift_warning"] = true;
    return out;
}

void save_trajectory_json(const std::string& path, const Trajectory& traj) {
    write_text_file(path, trajectory_to_json(traj).dump(2) + "\n");
}

void save_trajectory_csv(const std::string& path, const Trajectory& traj) {
    if (traj.states.empty()) throw std::invalid_argument("empty trajectory");
    const int n = state_dimension(traj.states.front());
    std::ostringstream out;
    const bool reduced = std::holds_alternative<PushforwardReducedState>(traj.states.front());
    const bool full = std::holds_alternative<PushforwardFullState>(traj.states.front());
    out << "t,particle";
    const auto cols = [&](const std::string& base) {
        for (int k = 0; k < n; ++k) out << "," << base << static_cast<char>('x' + k);
    };
    cols("");
    cols(reduced ? "u" : "d");
    if (full) out << ",r";
    cols("p1");
    cols("p2");
    if (full) out << ",p3";
    out << "\n";
    for (size_t t = 0; t < traj.states.size(); ++t) {
        const double time = traj.times[t];
        if (const auto* st = std::get_if<NormalizedState>(&traj.states[t])) {
            for (size_t i = 0; i < st->particles.size(); ++i) {
                const auto& p = st->particles[i];
                std::vector<double> row;
                for (int k = 0; k < n; ++k) row.push_back(p.x[k]);
                for (int k = 0; k < n; ++k) row.push_back(p.d[k]);
                for (int k = 0; k < n; ++k) row.push_back(p.p1[k]);
                for (int k = 0; k < n; ++k) row.push_back(p.p2[k]);
                out << format_double(time) << "," << i;
                for (double v : row) out << "," << format_double(v);
                out << "\n";
            }
        } else if (const auto* st2 = std::get_if<PushforwardReducedState>(&traj.states[t])) {
            for (size_t i = 0; i < st2->particles.size(); ++i) {
                const auto& p = st2->particles[i];
                std::vector<double> row;
                for (int k = 0; k < n; ++k) row.push_back(p.x[k]);
                for (int k = 0; k < n; ++k) row.push_back(p.u[k]);
                for (int k = 0; k < n; ++k) row.push_back(p.p1[k]);
                for (int k = 0; k < n; ++k) row.push_back(p.p2[k]);
                out << format_double(time) << "," << i;
                for (double v : row) out << "," << format_double(v);
                out << "\n";
            }
        } else {
            const auto& st3 = std::get<PushforwardFullState>(traj.states[t]);
            for (size_t i = 0; i < st3.particles.size(); ++i) {
                const auto& p = st3.particles[i];
                std::vector<double> row;
                for (int k = 0; k < n; ++k) row.push_back(p.x[k]);
                for (int k = 0; k < n; ++k) row.push_back(p.d[k]);
                row.push_back(p.r);
                for (int k = 0; k < n; ++k) row.push_back(p.p1[k]);
                for (int k = 0; k < n; ++k) row.push_back(p.p2[k]);
                row.push_back(p.p3);
                out << format_double(time) << "," << i;
                for (double v : row) out << "," << format_double(v);
                out << "\n";
            }
        }
    }
    write_text_file(path, out.str());
}

json registration_result_to_json(const RegistrationResult& result, const json& config_echo) {
    const int n = result.deformed.dimension();
    json p1 = json::array(), p2 = json::array();
    for (const Vec& v : result.p0.p1) p1.push_back(vec_to_json(v, n));
    for (const Vec& v : result.p0.p2) p2.push_back(vec_to_json(v, n));
    json history = json::array();
    for (const auto& rec : result.energy_history)
        history.push_back({{"iteration", rec.iteration},
                           {"total", rec.total},
                           {"regularization", rec.regularization},
                           {"fidelity", rec.fidelity},
                           {"step_spatial", rec.step_spatial},
                           {"step_directional", rec.step_directional}});
    return {{"config", config_echo},
            {"p0", {{"p1", p1}, {"p2", p2}}},
            {"energy_history", history},
            {"iterations", result.iterations},
            {"termination", result.termination},
            {"no_descent", result.no_descent},
            {"deformed", varifold_to_json(result.deformed)}};
}

void save_registration_result(const std::string& path, const RegistrationResult& result,
                              const json& config_echo) {
    write_text_file(path, registration_result_to_json(result, config_echo).dump(2) + "\n");
}

void save_energy_csv(const std::string& path, const RegistrationResult& result) {
    std::ostringstream out;
    out << "iteration,total,regularization,fidelity,step_spatial,step_directional\n";
    for (const auto& rec : result.energy_history)
        out << rec.iteration << "," << format_double(rec.total) << ","
            << format_double(rec.regularization) << "," << format_double(rec.fidelity) << ","
            << format_double(rec.step_spatial) << "," << format_double(rec.step_directional) << "\n";
    write_text_file(path, out.str());
}

RunConfig run_config_from_json(const json& j) {
    require_keys(j,
                 {"template", "target", "action", "transport", "gamma", "sigma", "sigma_s",
                  "sigma_v", "lambda", "steps", "max_iter", "tol_grad", "tol_energy",
                  "init_step_spatial", "init_step_directional", "out_prefix", "svg", "svg_grid"},
                 "config");
    RunConfig cfg;
    if (!j.contains("template") || !j.contains("target"))
        throw std::invalid_argument("config needs \"template\" and \"target\" paths");
    cfg.template_path = j.at("template").get<std::string>();
    cfg.target_path = j.at("target").get<std::string>();
    cfg.action = j.value("action", cfg.action);
    cfg.transport = j.value("transport", cfg.transport);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.sigma = j.value("sigma", cfg.sigma);
    cfg.sigma_s = j.value("sigma_s", cfg.sigma_s);
    cfg.sigma_v = j.value("sigma_v", cfg.sigma_v);
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.max_iter = j.value("max_iter", cfg.max_iter);
    cfg.tol_grad = j.value("tol_grad", cfg.tol_grad);
    cfg.tol_energy = j.value("tol_energy", cfg.tol_energy);
    cfg.init_step_spatial = j.value("init_step_spatial", cfg.init_step_spatial);
    cfg.init_step_directional = j.value("init_step_directional", cfg.init_step_directional);
    cfg.out_prefix = j.value("out_prefix", cfg.out_prefix);
    cfg.svg = j.value("svg", cfg.svg);
    cfg.svg_grid = j.value("svg_grid", cfg.svg_grid);
    // validate enumerations early
    parse_group_action(cfg.action);
    parse_dir_transport(cfg.transport);
    parse_orientation_family(cfg.gamma);
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg = run_config_from_json(parse_file(path));
    // template/target paths resolve relative to the config file's directory
    const auto parent = std::filesystem::path(path).parent_path();
    const auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (parent / p).string();
    };
    resolve(cfg.template_path);
    resolve(cfg.target_path);
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    return {{"template", cfg.template_path},
            {"target", cfg.target_path},
            {"action", cfg.action},
            {"transport", cfg.transport},
            {"gamma", cfg.gamma},
            {"sigma", cfg.sigma},
            {"sigma_s", cfg.sigma_s},
            {"sigma_v", cfg.sigma_v},
            {"lambda", cfg.lambda},
            {"steps", cfg.steps},
            {"max_iter", cfg.max_iter},
            {"tol_grad", cfg.tol_grad},
            {"tol_energy", cfg.tol_energy},
            {"init_step_spatial", cfg.init_step_spatial},
            {"init_step_directional", cfg.init_step_directional},
            {"out_prefix", cfg.out_prefix},
            {"svg", cfg.svg},
            {"svg_grid", cfg.svg_grid}};
}

RegistrationProblem make_problem(const RunConfig& cfg) {
    RegistrationProblem prob(load_varifold_json(cfg.template_path),
                             load_varifold_json(cfg.target_path));
    prob.model = {parse_group_action(cfg.action), parse_dir_transport(cfg.transport)};
    prob.fidelity = {SpatialKernel(cfg.sigma),
                     OrientationKernel(parse_orientation_family(cfg.gamma), cfg.sigma_s)};
    prob.deformation = DeformationKernel(cfg.sigma_v);
    prob.lambda = cfg.lambda;
    prob.steps = cfg.steps;
    prob.max_iter = cfg.max_iter;
    prob.tol_grad = cfg.tol_grad;
    prob.tol_energy = cfg.tol_energy;
    prob.init_step_spatial = cfg.init_step_spatial;
    prob.init_step_directional = cfg.init_step_directional;
    prob.validate();
    return prob;
}

}  // namespace varmatch
