#ifndef WDRO_COST_HPP
#define WDRO_COST_HPP

#include <span>

#include "wdro/types.hpp"

namespace wdro {

/// c((x,y),(x',y')) = |x - x'|^2 + kappa * 1[y != y'].
double mixed_cost(const Sample& xi, const Sample& zeta, const CostParams& cp);
double mixed_cost(std::span<const double> x, int y, std::span<const double> x2, int y2,
                  const CostParams& cp);

/// Componentwise clamp onto the box. Idempotent and nonexpansive.
ParamPoint project_box(const ParamPoint& w, const ParamBox& box);

/// Per-coordinate activity of the box at w, used for exact normal cones:
/// -1 lower bound active, +1 upper bound active, 2 both (degenerate
/// interval), 0 interior. The last entry is lambda.
std::vector<int> active_faces(const ParamPoint& w, const ParamBox& box);

double squared_norm(std::span<const double> v);
double distance(std::span<const double> a, std::span<const double> b);
double distance(const ParamPoint& a, const ParamPoint& b);

}  // namespace wdro

#endif  // WDRO_COST_HPP
