#ifndef WDRO_HULL_HPP
#define WDRO_HULL_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace wdro {

/// Convex hull of finitely many vertices in R^q. Represents a Clarke
/// subdifferential; the hull itself is never materialized.
struct SubdiffSet {
  std::vector<std::vector<double>> vertices;

  std::size_t dim() const { return vertices.empty() ? 0 : vertices.front().size(); }
};

/// Euclidean distance from point to conv(vertices). Closed-form case
/// analysis for up to three vertices; Wolfe's minimum-norm-point algorithm
/// otherwise, stopped once the optimality gap |x|^2 - min_i <x, v_i> is at
/// most 1e-9 (relative to the squared vertex scale).
double dist_to_hull(std::span<const double> point, const SubdiffSet& hull);

/// dist(0, conv(vertices) + N) where N is the normal cone of a box at a
/// point with the given per-coordinate activity (see active_faces):
/// -1 allows (-inf, 0], +1 allows [0, inf), 2 allows R, 0 allows {0}.
double dist_to_hull_plus_cone(const SubdiffSet& hull, std::span<const int> activity);

/// offset + (1/n) sum_i hull_i, by summing every combination of vertex
/// choices and dropping duplicates. Throws when the combination count
/// exceeds max_vertices.
SubdiffSet minkowski_average(std::span<const SubdiffSet> hulls, std::span<const double> offset,
                             std::size_t max_vertices = 1u << 16);

/// Removes vertices within tol (relative to the vertex scale) of an earlier one.
void dedupe_vertices(SubdiffSet& hull, double tol = 1e-12);

}  // namespace wdro

#endif  // WDRO_HULL_HPP
