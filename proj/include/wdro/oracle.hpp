#ifndef WDRO_ORACLE_HPP
#define WDRO_ORACLE_HPP

#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "wdro/growth.hpp"
#include "wdro/hull.hpp"
#include "wdro/losses.hpp"
#include "wdro/types.hpp"

namespace wdro {

// Brute-force ground truth for small instances (d <= 2, p + 1 <= 3).

/// Search region for the maximizers of h_xi: the cube of half-width radius
/// around x_xi (which contains the certified ball), times every label.
struct CompactWindow {
  std::vector<double> center;
  double radius = 0.0;
  int num_labels = 1;
};

/// Radius r with (lambda_xi / 2) r^2 = 1.5 (mu_xi - min_theta f(theta, xi)),
/// so the window holds the sublevel set containing every maximizer for
/// (theta, lambda) in Theta x [lambda_xi, inf). A degenerate sublevel set
/// gets the floor radius 1e-3.
CompactWindow compact_window(const GrowthCert& cert, const LossModel& model, const ParamBox& box,
                             const CostParams& cp, int num_labels);

struct ArgmaxPoint {
  std::vector<double> x;
  int label = 1;
  double h = 0.0;
};

/// Refined maximizers of h_xi within tol of h_star, one per cluster.
struct ArgmaxSet {
  std::vector<ArgmaxPoint> points;
  double h_star = 0.0;
  double tol = 0.0;
};

struct BruteForceOptions {
  /// Grid points per axis; 0 picks 2001 for d = 1 and 161 for d = 2.
  std::size_t grid = 0;
  std::size_t top_k = 5;
  int refine_steps = 200;
  double step0 = 1e-2;
  /// Defaults to 1e-6 (1 + |h_star|).
  std::optional<double> tol_argmax;
};

struct PhiOracle {
  double phi = 0.0;
  double grid_best = 0.0;  // incumbent before refinement
  ArgmaxSet argmax;
};

/// phi_xi(theta, lambda) = sup_zeta f(theta, zeta) - lambda c(xi, zeta) by
/// grid search over window x labels, then projected gradient ascent from the
/// top_k grid local maxima (step doubled on improvement, halved otherwise).
/// Maximizers closer than two grid cells with the same label are merged.
PhiOracle brute_force_phi(const LossModel& model, std::span<const double> theta, double lambda, const Sample& xi,
                          const CompactWindow& window, const CostParams& cp, const BruteForceOptions& options = {});

/// Vertices (grad_theta f(theta, zeta*), -c(xi, zeta*)) over the argmax set.
SubdiffSet clarke_subdiff(const LossModel& model, std::span<const double> theta, double lambda, const Sample& xi,
                          const ArgmaxSet& argmax, const CostParams& cp);

/// The unregularized objective F = lambda rho + (1/n) sum_i phi_{xi_i} and
/// its Clarke subdifferential (0, rho) + (1/n) sum_i conv V_{xi_i}.
class ObjectiveOracle {
 public:
  /// Refuses instances that are too large: d > 2, p + 1 > 3 or n > 32.
  ObjectiveOracle(const LossModel& model, const Dataset& data, std::vector<CompactWindow> windows, CostParams cp,
                  double rho, BruteForceOptions options = {});

  struct Evaluation {
    double value = 0.0;
    SubdiffSet subdiff;
    std::vector<PhiOracle> per_sample;
  };
  Evaluation evaluate(const ParamPoint& w) const;
  SubdiffSet subdiff(const ParamPoint& w) const { return evaluate(w).subdiff; }
  /// dist(0, dF(w) + N_K(w)) with the exact normal cone of the box.
  double criticality(const ParamPoint& w, const ParamBox& box) const;

 private:
  const LossModel& model_;
  const Dataset& data_;
  std::vector<CompactWindow> windows_;
  CostParams cp_;
  double rho_;
  BruteForceOptions options_;
};

/// Local probe grid around a point and its spacing.
struct ProbeGrid {
  std::vector<ParamPoint> points;
  double spacing = 0.0;
};

/// Points of the lattice box.lower + spacing Z^q that lie in the box within
/// eps of w, plus w itself.
ProbeGrid probe_lattice(const ParamPoint& w, double eps, const ParamBox& box, double spacing);

using SubdiffField = std::function<SubdiffSet(const ParamPoint&)>;

/// True iff some probe w' with |w' - w| <= eps has dist(grad, field(w')) <= eps,
/// i.e. grad lies in the eps-enlargement of the field at w (probes restricted
/// to the box). Refuses eps <= 0 and probe grids coarser than eps / 4.
bool enlargement_member(std::span<const double> grad, const ParamPoint& w, double eps, const SubdiffField& field,
                        const ProbeGrid& probes);

/// Memoizes a subdifferential field on the lattice box.lower + spacing Z^q
/// so overlapping probe balls share evaluations. Off-lattice points are
/// passed through uncached. Safe to call from several workers.
class LatticeField {
 public:
  LatticeField(const ParamBox& box, double spacing, SubdiffField field);
  SubdiffSet operator()(const ParamPoint& w) const;
  double spacing() const { return spacing_; }
  std::size_t cached() const;

 private:
  std::optional<std::size_t> index_of(const ParamPoint& w) const;

  ParamBox box_;
  double spacing_;
  std::vector<std::size_t> counts_;
  SubdiffField field_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::size_t, SubdiffSet> cache_;
};

using ResidualField = std::function<double(const ParamPoint&)>;

struct CritSet {
  std::vector<ParamPoint> points;
  std::vector<double> residuals;
  double min_residual = 0.0;
  ParamBox searched;  // box actually gridded (differs from input after zooming)
};

/// Regular grid over the box (resolution points per axis, theta axes first,
/// lambda last, faces included); keeps points whose residual is <= tol.
/// Refuses tol <= 0 and throws if no grid point qualifies (resolution too
/// coarse relative to tol).
CritSet crit_set_grid(const ResidualField& residual, const ParamBox& box, std::span<const std::size_t> resolution,
                      double tol);

/// crit_set_grid repeated `levels` more times on the bounding box of the
/// previous critical points grown by one cell, with tol scaled by the
/// spacing ratio.
CritSet crit_set_zoom(const ResidualField& residual, const ParamBox& box, std::span<const std::size_t> resolution,
                      double tol, int levels);

/// max over a of min over b |a - b|; +inf if b is empty, 0 if a is empty.
double directed_hausdorff(std::span<const ParamPoint> a, std::span<const ParamPoint> b);

}  // namespace wdro

#endif  // WDRO_ORACLE_HPP
