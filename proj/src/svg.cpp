#include "varmatch/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace varmatch {

namespace {

struct Box {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    void add(const Vec& p) {
        xmin = std::min(xmin, p[0]);
        xmax = std::max(xmax, p[0]);
        ymin = std::min(ymin, p[1]);
        ymax = std::max(ymax, p[1]);
    }
    double width() const { return std::max(xmax - xmin, 1e-9); }
    double height() const { return std::max(ymax - ymin, 1e-9); }
    double diag() const { return std::hypot(width(), height()); }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

constexpr double kCanvas = 640.0;

class Canvas {
  public:
    explicit Canvas(const Box& box) : box_(box) {
        const double pad = 0.08 * box_.diag();
        box_.xmin -= pad;
        box_.xmax += pad;
        box_.ymin -= pad;
        box_.ymax += pad;
        scale_ = kCanvas / std::max(box_.width(), box_.height());
    }

    double px(const Vec& p) const { return (p[0] - box_.xmin) * scale_; }
    double py(const Vec& p) const { return (box_.ymax - p[1]) * scale_; }   // y up
    double scale() const { return scale_; }
    double w() const { return box_.width() * scale_; }
    double h() const { return box_.height() * scale_; }

    void polyline(const std::vector<Vec>& pts, const std::string& color, double width,
                  double opacity = 1.0) {
        if (pts.size() < 2) return;
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << fmt(width)
              << "\" stroke-opacity=\"" << fmt(opacity) << "\" points=\"";
        for (size_t i = 0; i < pts.size(); ++i) {
            if (i) body_ << " ";
            body_ << fmt(px(pts[i])) << "," << fmt(py(pts[i]));
        }
        body_ << "\"/>\n";
    }

    void arrow(const Vec& base, const Vec& dir, double length, const std::string& color,
               double width) {
        const Vec tip = base + dir * length;
        const Vec side = Vec(-dir[1], dir[0]) * (0.18 * length);
        const Vec back = tip - dir * (0.3 * length);
        polyline({base, tip}, color, width);
        polyline({back + side, tip, back - side}, color, width);
    }

    void circle(const Vec& center, double radius_px, const std::string& color) {
        body_ << "<circle cx=\"" << fmt(px(center)) << "\" cy=\"" << fmt(py(center)) << "\" r=\""
              << fmt(radius_px) << "\" fill=\"" << color << "\"/>\n";
    }

    std::string finish() const {
        std::ostringstream out;
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << fmt(w()) << " "
            << fmt(h()) << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << body_.str() << "</svg>\n";
        return out.str();
    }

  private:
    Box box_;
    double scale_ = 1.0;
    std::ostringstream body_;
};

struct Glyph {
    Vec x, d;
    double r;
};

std::vector<Glyph> glyphs_of_state(const GeodesicState& s) {
    std::vector<Glyph> out;
    if (const auto* st = std::get_if<NormalizedState>(&s)) {
        for (size_t i = 0; i < st->particles.size(); ++i)
            out.push_back({st->particles[i].x, st->particles[i].d, st->weights[i]});
    } else if (const auto* st2 = std::get_if<PushforwardReducedState>(&s)) {
        for (const auto& p : st2->particles) {
            const double r = norm(p.u);
            out.push_back({p.x, r > 0.0 ? p.u * (1.0 / r) : Vec(1, 0), r});
        }
    } else {
        for (const auto& p : std::get<PushforwardFullState>(s).particles)
            out.push_back({p.x, p.d, p.r});
    }
    return out;
}

std::vector<Glyph> glyphs_of_varifold(const DiscreteVarifold& mu) {
    std::vector<Glyph> out;
    for (const Dirac& a : mu.diracs()) out.push_back({a.x, a.d, a.r});
    return out;
}

void draw_glyphs(Canvas& canvas, const std::vector<Glyph>& glyphs, double base_len,
                 const std::string& color, double width) {
    double rmax = 0.0;
    for (const auto& g : glyphs) rmax = std::max(rmax, g.r);
    if (rmax <= 0.0) rmax = 1.0;
    for (const auto& g : glyphs)
        canvas.arrow(g.x, g.d, base_len * (0.35 + 0.65 * g.r / rmax), color, width);
}

void require_2d(int dim) {
    if (dim != 2) throw std::invalid_argument("SVG rendering supports 2D data only");
}

}  // namespace

std::vector<Vec> make_tracer_grid(const GeodesicState& state, int grid_n, double pad_fraction) {
    require_2d(state_dimension(state));
    if (grid_n < 2) throw std::invalid_argument("tracer grid needs at least 2x2 nodes");
    Box box;
    for (const auto& g : glyphs_of_state(state)) box.add(g.x);
    const double pad = pad_fraction * box.diag();
    box.xmin -= pad;
    box.xmax += pad;
    box.ymin -= pad;
    box.ymax += pad;
    std::vector<Vec> nodes;
    nodes.reserve(static_cast<size_t>(grid_n) * static_cast<size_t>(grid_n));
    for (int row = 0; row < grid_n; ++row)
        for (int col = 0; col < grid_n; ++col)
            nodes.push_back({box.xmin + box.width() * col / (grid_n - 1),
                             box.ymin + box.height() * row / (grid_n - 1)});
    return nodes;
}

std::string render_shoot_svg(const Trajectory& traj,
                             const std::vector<std::vector<Vec>>& tracer_tracks, int grid_n) {
    if (traj.states.empty()) throw std::invalid_argument("empty trajectory");
    require_2d(state_dimension(traj.states.front()));

    Box box;
    for (const auto& s : traj.states)
        for (const auto& g : glyphs_of_state(s)) box.add(g.x);
    if (!tracer_tracks.empty())
        for (const Vec& p : tracer_tracks.back()) box.add(p);
    Canvas canvas(box);
    const double glyph_len = 0.06 * box.diag() + 1e-12;

    if (!tracer_tracks.empty()) {
        const auto& grid = tracer_tracks.back();
        if (grid.size() != static_cast<size_t>(grid_n) * static_cast<size_t>(grid_n))
            throw std::invalid_argument("tracer track size does not match grid_n");
        for (int row = 0; row < grid_n; ++row) {
            std::vector<Vec> line;
            for (int col = 0; col < grid_n; ++col)
                line.push_back(grid[static_cast<size_t>(row) * grid_n + col]);
            canvas.polyline(line, "#b0b0b0", 0.7, 0.8);
        }
        for (int col = 0; col < grid_n; ++col) {
            std::vector<Vec> line;
            for (int row = 0; row < grid_n; ++row)
                line.push_back(grid[static_cast<size_t>(row) * grid_n + col]);
            canvas.polyline(line, "#b0b0b0", 0.7, 0.8);
        }
    }

    const size_t P = particle_count(traj.states.front());
    for (size_t i = 0; i < P; ++i) {
        std::vector<Vec> track;
        for (const auto& s : traj.states) track.push_back(glyphs_of_state(s)[i].x);
        canvas.polyline(track, "#404040", 1.2);
    }

    const size_t mid = (traj.states.size() - 1) / 2;
    draw_glyphs(canvas, glyphs_of_state(traj.states.front()), glyph_len, "#1f4fd8", 2.0);
    draw_glyphs(canvas, glyphs_of_state(traj.states[mid]), glyph_len, "#888888", 1.5);
    draw_glyphs(canvas, glyphs_of_state(traj.states.back()), glyph_len, "#d82f2f", 2.0);
    return canvas.finish();
}

std::string render_overlay_svg(const DiscreteVarifold& source, const DiscreteVarifold& deformed,
                               const DiscreteVarifold& target, const Trajectory& traj) {
    require_2d(source.dimension());
    Box box;
    for (const auto& g : glyphs_of_varifold(source)) box.add(g.x);
    for (const auto& g : glyphs_of_varifold(deformed)) box.add(g.x);
    for (const auto& g : glyphs_of_varifold(target)) box.add(g.x);
    Canvas canvas(box);
    const double glyph_len = 0.06 * box.diag() + 1e-12;

    const size_t P = particle_count(traj.states.front());
    for (size_t i = 0; i < P; ++i) {
        std::vector<Vec> track;
        for (const auto& s : traj.states) track.push_back(glyphs_of_state(s)[i].x);
        canvas.polyline(track, "#909090", 0.8, 0.7);
    }
    draw_glyphs(canvas, glyphs_of_varifold(target), glyph_len, "#d82f2f", 2.2);
    draw_glyphs(canvas, glyphs_of_varifold(source), glyph_len, "#1f4fd8", 1.6);
    draw_glyphs(canvas, glyphs_of_varifold(deformed), glyph_len, "#1fa03c", 2.0);
    return canvas.finish();
}

}  // namespace varmatch
