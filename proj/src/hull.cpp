#include "wdro/hull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "wdro/error.hpp"

namespace wdro {
namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double norm2(const Vec& a) { return dot(a, a); }

Vec sub(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) r[j] = a[j] - b[j];
  return r;
}

double segment_dist2(const Vec& a, const Vec& b) {
  const Vec e = sub(b, a);
  const double ee = norm2(e);
  double t = ee > 0.0 ? std::clamp(-dot(a, e) / ee, 0.0, 1.0) : 0.0;
  Vec x(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) x[j] = a[j] + t * e[j];
  return norm2(x);
}

double triangle_dist2(const Vec& a, const Vec& b, const Vec& c) {
  const Vec e1 = sub(b, a);
  const Vec e2 = sub(c, a);
  const double g00 = norm2(e1);
  const double g01 = dot(e1, e2);
  const double g11 = norm2(e2);
  const double r0 = -dot(a, e1);
  const double r1 = -dot(a, e2);
  const double det = g00 * g11 - g01 * g01;
  if (det > 1e-14 * g00 * g11) {
    const double s = (r0 * g11 - r1 * g01) / det;
    const double t = (g00 * r1 - g01 * r0) / det;
    if (s >= 0.0 && t >= 0.0 && s + t <= 1.0) {
      Vec x(a.size());
      for (std::size_t j = 0; j < a.size(); ++j) x[j] = a[j] + s * e1[j] + t * e2[j];
      return norm2(x);
    }
  }
  return std::min({segment_dist2(a, b), segment_dist2(b, c), segment_dist2(a, c)});
}

// Solves the (k+1) x (k+1) system [G 1; 1^T 0] [alpha; mu] = [0; 1] for the
// affine minimum-norm combination. Returns false if singular.
bool affine_min_norm(const std::vector<Vec>& pts, const std::vector<std::size_t>& S, Vec& alpha) {
  const std::size_t k = S.size();
  const std::size_t n = k + 1;
  std::vector<double> A(n * (n + 1), 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) A[r * (n + 1) + c] = dot(pts[S[r]], pts[S[c]]);
    A[r * (n + 1) + k] = 1.0;
    A[k * (n + 1) + r] = 1.0;
  }
  A[k * (n + 1) + n] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(A[r * (n + 1) + col]) > std::abs(A[piv * (n + 1) + col])) piv = r;
    }
    if (std::abs(A[piv * (n + 1) + col]) < 1e-300) return false;
    if (piv != col) {
      for (std::size_t c = 0; c <= n; ++c) std::swap(A[piv * (n + 1) + c], A[col * (n + 1) + c]);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = A[r * (n + 1) + col] / A[col * (n + 1) + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c <= n; ++c) A[r * (n + 1) + c] -= f * A[col * (n + 1) + c];
    }
  }
  alpha.resize(k);
  for (std::size_t r = 0; r < k; ++r) alpha[r] = A[r * (n + 1) + n] / A[r * (n + 1) + r];
  return std::all_of(alpha.begin(), alpha.end(), [](double a) { return std::isfinite(a); });
}

double wolfe_dist2(const std::vector<Vec>& pts) {
  const std::size_t q = pts.front().size();
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, norm2(p));
  const double gap_tol = 1e-12 * std::max(scale, 1.0);

  std::vector<std::size_t> S;
  Vec lam;
  std::size_t first = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (norm2(pts[i]) < norm2(pts[first])) first = i;
  }
  S.push_back(first);
  lam.push_back(1.0);
  Vec x = pts[first];

  auto combine = [&] {
    x.assign(q, 0.0);
    for (std::size_t a = 0; a < S.size(); ++a) {
      for (std::size_t j = 0; j < q; ++j) x[j] += lam[a] * pts[S[a]][j];
    }
  };

  for (int major = 0; major < 1000; ++major) {
    std::size_t jbest = 0;
    double best = dot(x, pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double v = dot(x, pts[i]);
      if (v < best) {
        best = v;
        jbest = i;
      }
    }
    if (norm2(x) - best <= gap_tol) break;
    if (std::find(S.begin(), S.end(), jbest) != S.end()) break;
    S.push_back(jbest);
    lam.push_back(0.0);

    for (int minor = 0; minor < 100; ++minor) {
      Vec alpha;
      if (!affine_min_norm(pts, S, alpha)) {
        // Affinely dependent support (numerical): drop the newest point.
        S.pop_back();
        lam.pop_back();
        combine();
        return norm2(x);
      }
      if (std::all_of(alpha.begin(), alpha.end(), [](double a) { return a > 1e-15; })) {
        lam = alpha;
        combine();
        break;
      }
      double step = 1.0;
      for (std::size_t a = 0; a < S.size(); ++a) {
        if (alpha[a] <= 1e-15) step = std::min(step, lam[a] / (lam[a] - alpha[a]));
      }
      for (std::size_t a = 0; a < S.size(); ++a) lam[a] = step * alpha[a] + (1.0 - step) * lam[a];
      std::vector<std::size_t> keepS;
      Vec keepL;
      for (std::size_t a = 0; a < S.size(); ++a) {
        if (lam[a] > 1e-15) {
          keepS.push_back(S[a]);
          keepL.push_back(lam[a]);
        }
      }
      S.swap(keepS);
      lam.swap(keepL);
      const double total = std::accumulate(lam.begin(), lam.end(), 0.0);
      for (double& l : lam) l /= total;
      combine();
    }
  }
  return norm2(x);
}

// Euclidean projection onto the probability simplex.
void project_simplex(Vec& v) {
  Vec u(v);
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    css += u[k];
    const double t = (css - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  for (double& e : v) e = std::max(e - tau, 0.0);
}

double clamp_component(double v, int activity) {
  switch (activity) {
    case -1: return std::min(v, 0.0);
    case 1: return std::max(v, 0.0);
    case 2: return 0.0;
    default: return v;
  }
}

}  // namespace

double dist_to_hull(std::span<const double> point, const SubdiffSet& hull) {
  if (hull.vertices.empty()) throw ValidationError("dist_to_hull: hull has no vertices");
  const std::size_t q = point.size();
  std::vector<Vec> pts;
  pts.reserve(hull.vertices.size());
  for (const auto& v : hull.vertices) {
    if (v.size() != q) {
      throw ValidationError("dist_to_hull: vertex dimension " + std::to_string(v.size()) + " differs from point dimension " +
                            std::to_string(q));
    }
    Vec u(q);
    for (std::size_t j = 0; j < q; ++j) u[j] = v[j] - point[j];
    pts.push_back(std::move(u));
  }
  double d2 = 0.0;
  switch (pts.size()) {
    case 1: d2 = norm2(pts[0]); break;
    case 2: d2 = segment_dist2(pts[0], pts[1]); break;
    case 3: d2 = triangle_dist2(pts[0], pts[1], pts[2]); break;
    default: d2 = wolfe_dist2(pts); break;
  }
  return std::sqrt(std::max(d2, 0.0));
}

double dist_to_hull_plus_cone(const SubdiffSet& hull, std::span<const int> activity) {
  if (hull.vertices.empty()) throw ValidationError("dist_to_hull_plus_cone: hull has no vertices");
  const std::size_t q = hull.dim();
  if (activity.size() != q) throw ValidationError("dist_to_hull_plus_cone: activity has wrong length");
  const std::size_t k = hull.vertices.size();

  auto residual = [&](const Vec& alpha, Vec& r) {
    r.assign(q, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t j = 0; j < q; ++j) r[j] += alpha[a] * hull.vertices[a][j];
    }
    for (std::size_t j = 0; j < q; ++j) r[j] = clamp_component(r[j], activity[j]);
  };

  Vec r;
  if (k == 1) {
    residual(Vec{1.0}, r);
    return std::sqrt(norm2(r));
  }

  // g(alpha) = |clamp(V alpha)|^2 is convex and C^1 with gradient
  // 2 V^T clamp(V alpha); accelerated projected gradient on the simplex.
  double trace = 0.0;
  for (const auto& v : hull.vertices) trace += norm2(Vec(v));
  const double L = 2.0 * std::max(trace, 1e-300);
  Vec alpha(k, 1.0 / static_cast<double>(k));
  Vec y = alpha;
  Vec grad(k);
  double t = 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 20000; ++it) {
    residual(y, r);
    for (std::size_t a = 0; a < k; ++a) grad[a] = 2.0 * dot(hull.vertices[a], r);
    Vec next(k);
    for (std::size_t a = 0; a < k; ++a) next[a] = y[a] - grad[a] / L;
    project_simplex(next);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t a = 0; a < k; ++a) y[a] = next[a] + ((t - 1.0) / tn) * (next[a] - alpha[a]);
    alpha = next;
    t = tn;

    residual(alpha, r);
    const double g = norm2(r);
    best = std::min(best, g);
    // Frank-Wolfe gap at alpha certifies g(alpha) - g* <= gap.
    Vec ga(k);
    for (std::size_t a = 0; a < k; ++a) ga[a] = 2.0 * dot(hull.vertices[a], r);
    const double inner = dot(ga, alpha);
    const double mn = *std::min_element(ga.begin(), ga.end());
    if (inner - mn <= 1e-14 * std::max(trace, 1.0)) break;
  }
  return std::sqrt(std::max(best, 0.0));
}

void dedupe_vertices(SubdiffSet& hull, double tol) {
  double scale = 1.0;
  for (const auto& v : hull.vertices) scale = std::max(scale, std::sqrt(norm2(v)));
  std::vector<Vec> kept;
  for (auto& v : hull.vertices) {
    bool dup = false;
    for (const auto& k : kept) {
      if (std::sqrt(norm2(sub(v, k))) <= tol * scale) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(std::move(v));
  }
  hull.vertices = std::move(kept);
}

SubdiffSet minkowski_average(std::span<const SubdiffSet> hulls, std::span<const double> offset,
                             std::size_t max_vertices) {
  if (hulls.empty()) throw ValidationError("minkowski_average: no hulls");
  const std::size_t q = offset.size();
  const double inv_n = 1.0 / static_cast<double>(hulls.size());
  SubdiffSet acc;
  acc.vertices.emplace_back(offset.begin(), offset.end());
  for (const auto& h : hulls) {
    if (h.vertices.empty()) throw ValidationError("minkowski_average: empty hull");
    if (acc.vertices.size() * h.vertices.size() > max_vertices) {
      throw ValidationError("minkowski_average: more than " + std::to_string(max_vertices) +
                            " vertex combinations; the instance is too large for the oracle");
    }
    SubdiffSet next;
    next.vertices.reserve(acc.vertices.size() * h.vertices.size());
    for (const auto& a : acc.vertices) {
      for (const auto& v : h.vertices) {
        if (v.size() != q) throw ValidationError("minkowski_average: vertex dimension mismatch");
        Vec s(q);
        for (std::size_t j = 0; j < q; ++j) s[j] = a[j] + inv_n * v[j];
        next.vertices.push_back(std::move(s));
      }
    }
    dedupe_vertices(next);
    acc = std::move(next);
  }
  return acc;
}

}  // namespace wdro
