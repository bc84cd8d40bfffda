#include "varmatch/varifold.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace varmatch {

namespace {

void require_dimension(int dim) {
    if (dim != 2 && dim != 3)
        throw std::invalid_argument("varifold dimension must be 2 or 3, got " + std::to_string(dim));
}

bool in_plane(const Vec& v) { return v[2] == 0.0; }

}  // namespace

DiscreteVarifold::DiscreteVarifold(int dimension, std::vector<Dirac> diracs)
    : dim_(dimension), diracs_(std::move(diracs)) {
    require_dimension(dim_);
    for (size_t i = 0; i < diracs_.size(); ++i) {
        const Dirac& a = diracs_[i];
        if (dim_ == 2 && (!in_plane(a.x) || !in_plane(a.d)))
            throw std::invalid_argument("dirac " + std::to_string(i) + " has a nonzero third component in a 2D varifold");
        if (!(a.r > 0.0))
            throw std::invalid_argument("dirac " + std::to_string(i) + " has non-positive weight");
        if (std::fabs(norm(a.d) - 1.0) > 1e-12)
            throw std::invalid_argument("dirac " + std::to_string(i) + " direction is not unit length");
    }
    for (size_t i = 0; i < diracs_.size(); ++i)
        for (size_t j = i + 1; j < diracs_.size(); ++j) {
            if (max_abs(diracs_[i].x - diracs_[j].x) <= 1e-12 &&
                max_abs(diracs_[i].d - diracs_[j].d) <= 1e-12)
                throw std::invalid_argument("diracs " + std::to_string(i) + " and " + std::to_string(j) +
                                            " coincide in (position, direction)");
        }
}

double DiscreteVarifold::total_mass() const {
    double m = 0.0;
    for (const Dirac& a : diracs_) m += a.r;
    return m;
}

bool DiscreteVarifold::has_distinct_positions(double tol) const {
    for (size_t i = 0; i < diracs_.size(); ++i)
        for (size_t j = i + 1; j < diracs_.size(); ++j)
            if (max_abs(diracs_[i].x - diracs_[j].x) <= tol) return false;
    return true;
}

PolylineCurve::PolylineCurve(int dimension_, std::vector<Vec> vertices_, bool closed_)
    : dimension(dimension_), vertices(std::move(vertices_)), closed(closed_) {
    require_dimension(dimension);
    if (vertices.size() < 2) throw std::invalid_argument("curve needs at least 2 vertices");
    for (size_t i = 0; i < vertices.size(); ++i) {
        if (dimension == 2 && !in_plane(vertices[i]))
            throw std::invalid_argument("2D curve vertex " + std::to_string(i) + " has a nonzero third component");
        const size_t j = (i + 1) % vertices.size();
        if (!closed && j == 0) continue;
        if (max_abs(vertices[i] - vertices[j]) == 0.0)
            throw std::invalid_argument("curve vertices " + std::to_string(i) + " and " + std::to_string(j) +
                                        " coincide");
    }
}

TriangleMesh::TriangleMesh(std::vector<Vec> vertices_, std::vector<std::array<int, 3>> faces_)
    : vertices(std::move(vertices_)), faces(std::move(faces_)) {
    const int n = static_cast<int>(vertices.size());
    for (size_t f = 0; f < faces.size(); ++f) {
        for (int k = 0; k < 3; ++k)
            if (faces[f][k] < 0 || faces[f][k] >= n)
                throw std::invalid_argument("face " + std::to_string(f) + " has vertex index out of range");
        const Vec& a = vertices[static_cast<size_t>(faces[f][0])];
        const Vec& b = vertices[static_cast<size_t>(faces[f][1])];
        const Vec& c = vertices[static_cast<size_t>(faces[f][2])];
        if (0.5 * norm(cross(b - a, c - a)) < 1e-12)
            throw std::invalid_argument("face " + std::to_string(f) + " is degenerate (zero area)");
    }
}

GrayImage::GrayImage(int width_, int height_, std::vector<double> pixels_, double pixel_spacing_)
    : width(width_), height(height_), pixels(std::move(pixels_)), pixel_spacing(pixel_spacing_) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
    if (!(pixel_spacing > 0.0)) throw std::invalid_argument("pixel spacing must be positive");
    if (pixels.size() != static_cast<size_t>(width) * static_cast<size_t>(height))
        throw std::invalid_argument("pixel count does not match width*height");
}

DiscreteVarifold curve_to_varifold(const PolylineCurve& curve) {
    const size_t nseg = curve.vertices.size() - (curve.closed ? 0 : 1);
    std::vector<Dirac> diracs;
    diracs.reserve(nseg);
    for (size_t i = 0; i < nseg; ++i) {
        const Vec& a = curve.vertices[i];
        const Vec& b = curve.vertices[(i + 1) % curve.vertices.size()];
        const Vec t = b - a;
        const double len = norm(t);
        if (len < 1e-12)
            throw std::invalid_argument("degenerate curve segment at index " + std::to_string(i));
        diracs.push_back({(a + b) * 0.5, t * (1.0 / len), len});
    }
    return DiscreteVarifold(curve.dimension, std::move(diracs));
}

DiscreteVarifold mesh_to_varifold(const TriangleMesh& mesh) {
    std::vector<Dirac> diracs;
    diracs.reserve(mesh.faces.size());
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const Vec& a = mesh.vertices[static_cast<size_t>(mesh.faces[f][0])];
        const Vec& b = mesh.vertices[static_cast<size_t>(mesh.faces[f][1])];
        const Vec& c = mesh.vertices[static_cast<size_t>(mesh.faces[f][2])];
        const Vec n = cross(b - a, c - a);
        const double area = 0.5 * norm(n);
        if (area < 1e-12)
            throw std::invalid_argument("degenerate mesh face at index " + std::to_string(f));
        diracs.push_back({(a + b + c) * (1.0 / 3.0), normalized(n), area});
    }
    return DiscreteVarifold(3, std::move(diracs));
}

DiscreteVarifold image_to_varifold(const GrayImage& img, double grad_threshold) {
    if (img.width < 3 || img.height < 3)
        throw std::invalid_argument("image must be at least 3x3 for central differences");
    if (!(grad_threshold >= 0.0)) throw std::invalid_argument("grad_threshold must be >= 0");
    const double s = img.pixel_spacing;
    std::vector<Dirac> diracs;
    for (int row = 1; row + 1 < img.height; ++row)
        for (int col = 1; col + 1 < img.width; ++col) {
            const Vec grad((img.at(col + 1, row) - img.at(col - 1, row)) / (2.0 * s),
                           (img.at(col, row + 1) - img.at(col, row - 1)) / (2.0 * s));
            const double g = norm(grad);
            if (g > grad_threshold)
                diracs.push_back({Vec((col + 0.5) * s, (row + 0.5) * s), grad * (1.0 / g), 1.0});
        }
    return DiscreteVarifold(2, std::move(diracs));
}

DiscreteVarifold rigid_transform(const DiscreteVarifold& mu, const Mat& rotation, const Vec& translation) {
    Mat gram = rotation.transposed() * rotation;
    gram(0, 0) -= 1.0; gram(1, 1) -= 1.0; gram(2, 2) -= 1.0;
    if (gram.frobenius_norm() > 1e-10)
        throw std::invalid_argument("rigid_transform: matrix is not orthogonal");
    if (!(rotation.det() > 0.0))
        throw std::invalid_argument("rigid_transform: matrix must have determinant +1");
    std::vector<Dirac> diracs;
    diracs.reserve(mu.size());
    for (const Dirac& a : mu.diracs())
        diracs.push_back({rotation.apply(a.x) + translation, normalized(rotation.apply(a.d)), a.r});
    return DiscreteVarifold(mu.dimension(), std::move(diracs));
}

}  // namespace varmatch
