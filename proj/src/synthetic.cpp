#include "varmatch/synthetic.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace varmatch {

PolylineCurve make_circle_polyline(const Vec& center, double radius, int segments) {
    if (segments < 3) throw std::invalid_argument("circle needs at least 3 segments");
    std::vector<Vec> vertices;
    vertices.reserve(static_cast<size_t>(segments));
    for (int i = 0; i < segments; ++i) {
        const double a = 2.0 * M_PI * i / segments;
        vertices.push_back(center + Vec(radius * std::cos(a), radius * std::sin(a)));
    }
    return PolylineCurve(2, std::move(vertices), true);
}

PolylineCurve make_semicircle_polyline(const Vec& center, double radius, int segments) {
    if (segments < 1) throw std::invalid_argument("semicircle needs at least 1 segment");
    std::vector<Vec> vertices;
    vertices.reserve(static_cast<size_t>(segments) + 1);
    for (int i = 0; i <= segments; ++i) {
        const double a = M_PI * i / segments;
        vertices.push_back(center + Vec(radius * std::cos(a), radius * std::sin(a)));
    }
    return PolylineCurve(2, std::move(vertices), false);
}

namespace {

// Midpoint cache for icosphere subdivision.
int midpoint(std::vector<Vec>& vertices, std::map<std::pair<int, int>, int>& cache, int a, int b) {
    const auto key = std::minmax(a, b);
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const Vec m = normalized((vertices[static_cast<size_t>(a)] + vertices[static_cast<size_t>(b)]) * 0.5);
    vertices.push_back(m);
    const int idx = static_cast<int>(vertices.size()) - 1;
    cache.emplace(key, idx);
    return idx;
}

}  // namespace

TriangleMesh make_icosphere(double radius, int level) {
    if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
    if (level < 0 || level > 6) throw std::invalid_argument("subdivision level must be in 0..6");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec> vertices = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    for (Vec& v : vertices) v = normalized(v);
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> cache;
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = midpoint(vertices, cache, f[0], f[1]);
            const int bc = midpoint(vertices, cache, f[1], f[2]);
            const int ca = midpoint(vertices, cache, f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    for (Vec& v : vertices) v *= radius;
    return TriangleMesh(std::move(vertices), std::move(faces));
}

namespace {

bool inside_ellipse(double x, double y, double cx, double cy, double ax, double ay) {
    const double dx = (x - cx) / ax;
    const double dy = (y - cy) / ay;
    return dx * dx + dy * dy <= 1.0;
}

}  // namespace

GrayImage make_phantom_image(int size, bool invert, double warp) {
    if (size < 16) throw std::invalid_argument("phantom size must be at least 16");
    std::vector<double> pixels(static_cast<size_t>(size) * static_cast<size_t>(size), 0.0);
    const double c = 0.5 * size;
    const double shift = warp * 0.045 * size;
    const double scale = 1.0 + warp * 0.06;
    // tissue levels, darkest to brightest; inversion reverses the ordering
    const double bg = invert ? 0.95 : 0.05;
    const double head = invert ? 0.15 : 0.85;
    const double ventricle = invert ? 0.85 : 0.15;
    const double lesion = invert ? 0.45 : 0.55;

    const auto level_at = [&](double x, double y) {
        double v = bg;
        if (inside_ellipse(x, y, c + shift, c + 0.6 * shift, 0.34 * size * scale, 0.28 * size * scale)) {
            v = head;
            if (inside_ellipse(x, y, c + shift, c + 0.6 * shift + 0.03 * size, 0.09 * size * scale,
                               0.06 * size * scale))
                v = ventricle;
            if (inside_ellipse(x, y, c + shift - 0.15 * size, c + 0.6 * shift - 0.09 * size,
                               0.045 * size * scale, 0.045 * size * scale))
                v = lesion;
        }
        return v;
    };

    // 3x3 supersampling: boundary pixels take intermediate levels, which keeps
    // the thresholded gradient support to a band about one pixel wide
    for (int row = 0; row < size; ++row)
        for (int col = 0; col < size; ++col) {
            double v = 0.0;
            for (int sy = 0; sy < 3; ++sy)
                for (int sx = 0; sx < 3; ++sx)
                    v += level_at(col + (sx + 0.5) / 3.0, row + (sy + 0.5) / 3.0);
            pixels[static_cast<size_t>(row) * size + col] = v / 9.0;
        }
    return GrayImage(size, size, std::move(pixels), 1.0);
}

PhantomPair make_phantom_pair(int size) {
    return {make_phantom_image(size, false, 0.0), make_phantom_image(size, true, 1.0)};
}

}  // namespace varmatch
