// svg.hpp - SVG figure emission for trajectories and registration overlays.
//
// 2D data only; 3D runs export JSON/CSV instead. Output uses fixed "%.4f"
// coordinate formatting so identical inputs render byte-identically.

#pragma once

#include <string>
#include <vector>

#include "varmatch/dynamics.hpp"

namespace varmatch {

// Particle tracks over time, direction glyphs at t = 0, 1/2, 1 and, when
// tracer tracks are provided, the deformed grid (grid_n x grid_n nodes at t=1)
// as a backdrop.
std::string render_shoot_svg(const Trajectory& traj,
                             const std::vector<std::vector<Vec>>& tracer_tracks, int grid_n);

// Registration overlay: template (t=0) in blue, deformed (t=1) in green,
// target in red, with faint particle tracks.
std::string render_overlay_svg(const DiscreteVarifold& source, const DiscreteVarifold& deformed,
                               const DiscreteVarifold& target, const Trajectory& traj);

// A grid_n x grid_n lattice of tracer seeds covering the bounding box of the
// state (padded), for integrate_with_tracers.
std::vector<Vec> make_tracer_grid(const GeodesicState& state, int grid_n, double pad_fraction = 0.35);

}  // namespace varmatch
