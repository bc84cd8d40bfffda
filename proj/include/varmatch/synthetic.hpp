// synthetic.hpp - generators for demo and test data: circle/semicircle
// polylines, icospheres, and the contrast-inverted phantom image pair.

#pragma once

#include "varmatch/varifold.hpp"

namespace varmatch {

// Regular polygon approximation of a circle (closed polyline).
PolylineCurve make_circle_polyline(const Vec& center, double radius, int segments);

// Open semicircle (upper half, from (r,0) to (-r,0) around center).
PolylineCurve make_semicircle_polyline(const Vec& center, double radius, int segments);

// Icosahedron subdivided `level` times with vertices projected to the sphere.
TriangleMesh make_icosphere(double radius, int level);

// Piecewise-constant "phantom" slice: nested ellipses (head, cortex band,
// ventricle, one lesion blob) over a dark background. `warp` nudges the
// anatomy (center shift + axis scaling) so the pair needs a deformation;
// `invert` swaps the contrast ordering of the tissue levels.
GrayImage make_phantom_image(int size, bool invert, double warp);

// The pair used by the contrast-invariance experiment: template unwarped,
// target warped and contrast-inverted.
struct PhantomPair {
    GrayImage template_image;
    GrayImage target_image;
};
PhantomPair make_phantom_pair(int size);

}  // namespace varmatch
