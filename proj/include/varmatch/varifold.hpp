// varifold.hpp - discrete varifolds and conversions from curves, meshes and
// grayscale images.
//
// A discrete varifold is a finite list of weighted Diracs (position, unit
// direction, positive weight). Positions may repeat (several directions at
// one point) but (position, direction) pairs must be pairwise distinct.
// All types are immutable after construction.

#pragma once

#include <vector>

#include "varmatch/geometry.hpp"

namespace varmatch {

struct Dirac {
    Vec x;      // position
    Vec d;      // unit direction
    double r;   // weight (> 0)
};

class DiscreteVarifold {
  public:
    DiscreteVarifold() = default;   // empty 2D varifold

    // Validates dimension, unit directions (|d| within 1e-12 of 1), positive
    // weights and pairwise distinctness of (x, d). An empty list is allowed.
    DiscreteVarifold(int dimension, std::vector<Dirac> diracs);

    int dimension() const { return dim_; }
    size_t size() const { return diracs_.size(); }
    bool empty() const { return diracs_.empty(); }
    const Dirac& operator[](size_t i) const { return diracs_[i]; }
    const std::vector<Dirac>& diracs() const { return diracs_; }

    double total_mass() const;

    // True when all positions are pairwise distinct (one direction per point).
    bool has_distinct_positions(double tol = 1e-12) const;

  private:
    int dim_ = 2;
    std::vector<Dirac> diracs_;
};

struct PolylineCurve {
    int dimension;               // 2 or 3
    std::vector<Vec> vertices;   // >= 2, consecutive vertices distinct
    bool closed = false;

    PolylineCurve(int dimension_, std::vector<Vec> vertices_, bool closed_);
};

struct TriangleMesh {
    std::vector<Vec> vertices;                    // 3D points
    std::vector<std::array<int, 3>> faces;        // vertex index triples

    TriangleMesh(std::vector<Vec> vertices_, std::vector<std::array<int, 3>> faces_);
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;   // row-major, pixels[row * width + col]
    double pixel_spacing = 1.0;

    GrayImage(int width_, int height_, std::vector<double> pixels_, double pixel_spacing_ = 1.0);

    double at(int col, int row) const { return pixels[static_cast<size_t>(row) * width + col]; }
};

// One Dirac per segment: midpoint, unit tangent (by vertex order), weight =
// segment length. Segments shorter than 1e-12 are rejected with their index.
DiscreteVarifold curve_to_varifold(const PolylineCurve& curve);

// One Dirac per face: barycenter, unit normal (right-hand rule on the vertex
// order), weight = area. Faces with area < 1e-12 are rejected with their index.
DiscreteVarifold mesh_to_varifold(const TriangleMesh& mesh);

// Central-difference gradients at interior pixels; a Dirac with weight 1 and
// direction grad/|grad| is emitted wherever |grad| > grad_threshold. Positions
// are pixel centers in physical units ((col+1/2, row+1/2) * spacing).
DiscreteVarifold image_to_varifold(const GrayImage& img, double grad_threshold = 1e-8);

// (x, d, r) -> (R x + h, R d, r). R must be a rotation: |R^T R - I|_F <= 1e-10
// and det R > 0.
DiscreteVarifold rigid_transform(const DiscreteVarifold& mu, const Mat& rotation, const Vec& translation);

}  // namespace varmatch
