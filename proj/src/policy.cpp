#include "cbo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cbo/rng.hpp"

namespace cbo {

double intervention_cost(const CostModel& model, const NodeSet& set,
                         const std::map<NodeId, double>& values) {
    double total = 0.0;
    for (const auto& node : set) {
        auto it = model.entries.find(node);
        if (it == model.entries.end()) {
            raise(ErrorKind::UnknownNode, "no cost entry for node '" + node + "'");
        }
        total += it->second.fixed;
        if (it->second.variable) {
            auto v = values.find(node);
            if (v == values.end()) {
                raise(ErrorKind::UnknownNode, "no value supplied for costed node '" + node + "'");
            }
            total += std::abs(v->second);
        }
    }
    return total;
}

namespace {

double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / 2.506628274631000502415765284811;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730950488016887242097); }

}  // namespace

double expected_improvement(const Posterior& post, double y_star, Direction direction) {
    const double improvement =
        direction == Direction::Max ? post.mean - y_star : y_star - post.mean;
    const double s = std::sqrt(std::max(0.0, post.variance));
    if (s <= 0.0) return std::max(improvement, 0.0);
    const double u = improvement / s;
    return std::max(0.0, improvement * norm_cdf(u) + s * norm_pdf(u));
}

double causal_ei(const GpModel& gp, const std::vector<double>& x, double y_star,
                 const CostModel& cost, const NodeSet& set, Direction direction) {
    double ei = expected_improvement(gp.posterior(x), y_star, direction);
    if (set.empty()) return ei;  // observational query: unit divisor
    std::map<NodeId, double> values;
    std::size_t i = 0;
    for (const auto& node : set) values[node] = x[i++];
    return ei / intervention_cost(cost, set, values);
}

namespace {

constexpr double kGolden = 0.6180339887498948482045868343656;

std::vector<std::vector<double>> latin_hypercube(const Box& box, std::size_t count, Rng& rng) {
    const std::size_t d = box.dim();
    std::vector<std::vector<std::size_t>> strata(d);
    for (std::size_t k = 0; k < d; ++k) strata[k] = rng.permutation(count);
    std::vector<std::vector<double>> points(count, std::vector<double>(d));
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            auto [lo, hi] = box.bounds[k];
            double u = (static_cast<double>(strata[k][i]) + rng.uniform01()) /
                       static_cast<double>(count);
            points[i][k] = lo + (hi - lo) * u;
        }
    }
    return points;
}

}  // namespace

AcqResult optimize_acquisition(const GpModel& gp, const NodeSet& set, const Box& box,
                               const CostModel& cost, double y_star, Direction direction,
                               std::size_t budget, std::uint64_t seed) {
    const std::size_t d = box.dim();
    auto acquisition = [&](const std::vector<double>& x) {
        return causal_ei(gp, x, y_star, cost, set, direction);
    };
    if (d == 0) {
        return {{}, acquisition({})};
    }
    Rng rng(mix_seed(seed));
    auto seeds = latin_hypercube(box, 64, rng);
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) ranked.emplace_back(acquisition(seeds[i]), i);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    AcqResult best{seeds[ranked[0].second], ranked[0].first};
    const std::size_t starts = std::min<std::size_t>(10, ranked.size());
    const std::size_t passes = 2;
    const std::size_t steps =
        std::max<std::size_t>(4, budget / std::max<std::size_t>(1, passes * d));
    for (std::size_t s = 0; s < starts; ++s) {
        std::vector<double> x = seeds[ranked[s].second];
        double fx = ranked[s].first;
        for (std::size_t pass = 0; pass < passes; ++pass) {
            for (std::size_t k = 0; k < d; ++k) {
                auto [lo, hi] = box.bounds[k];
                double a = lo, b = hi;
                auto eval_at = [&](double t) {
                    std::vector<double> probe = x;
                    probe[k] = t;
                    return acquisition(probe);
                };
                double x1 = b - kGolden * (b - a);
                double x2 = a + kGolden * (b - a);
                double f1 = eval_at(x1);
                double f2 = eval_at(x2);
                for (std::size_t it = 0; it + 2 < steps; ++it) {
                    if (f1 >= f2) {
                        b = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = b - kGolden * (b - a);
                        f1 = eval_at(x1);
                    } else {
                        a = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = a + kGolden * (b - a);
                        f2 = eval_at(x2);
                    }
                }
                double cand = f1 >= f2 ? x1 : x2;
                double fcand = f1 >= f2 ? f1 : f2;
                if (fcand > fx) {
                    x[k] = cand;
                    fx = fcand;
                }
            }
        }
        if (fx > best.value) best = {x, fx};
    }
    for (std::size_t k = 0; k < d; ++k) {
        best.x[k] = std::clamp(best.x[k], box.bounds[k].first, box.bounds[k].second);
    }
    return best;
}

namespace {

// Affine rank of the point cloud via Gram-Schmidt on centered points.
std::size_t affine_rank(const std::vector<std::vector<double>>& points, double tol) {
    if (points.size() < 2) return 0;
    const std::size_t d = points[0].size();
    std::vector<std::vector<double>> basis;
    const auto& origin = points[0];
    for (std::size_t i = 1; i < points.size() && basis.size() < d; ++i) {
        std::vector<double> v(d);
        for (std::size_t k = 0; k < d; ++k) v[k] = points[i][k] - origin[k];
        for (const auto& b : basis) {
            double dot = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
            for (std::size_t k = 0; k < d; ++k) v[k] -= dot * b[k];
        }
        double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm > tol) {
            for (std::size_t k = 0; k < d; ++k) v[k] /= norm;
            basis.push_back(std::move(v));
        }
    }
    return basis.size();
}

double hull_area_2d(std::vector<std::vector<double>> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n < 3) return 0.0;
    auto cross = [](const std::vector<double>& o, const std::vector<double>& a,
                    const std::vector<double>& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<std::vector<double>> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k > 0 ? k - 1 : 0);
    double area = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        area += a[0] * b[1] - b[0] * a[1];
    }
    return std::abs(area) / 2.0;
}

// Incremental 3-D convex hull; returns the enclosed volume. The visible
// region for each insertion is flood-filled from the most violated face, so
// it stays edge-connected and the horizon forms one closed loop even with
// coplanar inputs; points that violate no face strictly lie (numerically) on
// or inside the hull and are skipped.
double hull_volume_3d(const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size();
    struct Vec3 {
        double x, y, z;
        Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
        Vec3 cross(const Vec3& o) const {
            return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
        }
        double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
        double norm() const { return std::sqrt(x * x + y * y + z * z); }
    };
    std::vector<Vec3> p(n);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = {pts[i][0], pts[i][1], pts[i][2]};
        scale = std::max({scale, std::abs(p[i].x), std::abs(p[i].y), std::abs(p[i].z)});
    }
    const double eps = 1e-10 * std::max(1.0, scale * scale * scale);

    // Seed tetrahedron: spread-out extremes.
    std::size_t i0 = 0, i1 = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if ((p[i] - p[i0]).norm() > (p[i1] - p[i0]).norm()) i1 = i;
    }
    std::size_t i2 = i0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = (p[i1] - p[i0]).cross(p[i] - p[i0]).norm();
        if (a > best) {
            best = a;
            i2 = i;
        }
    }
    Vec3 norm0 = (p[i1] - p[i0]).cross(p[i2] - p[i0]);
    std::size_t i3 = i0;
    best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = std::abs(norm0.dot(p[i] - p[i0]));
        if (v > best) {
            best = v;
            i3 = i;
        }
    }
    if (best <= eps) return 0.0;

    struct Face {
        std::size_t a, b, c;
        bool alive = true;
    };
    std::vector<Face> faces;
    auto signed_vol = [&](std::size_t a, std::size_t b, std::size_t c, const Vec3& q) {
        return (p[b] - p[a]).cross(p[c] - p[a]).dot(q - p[a]);
    };
    Vec3 centroid{(p[i0].x + p[i1].x + p[i2].x + p[i3].x) / 4.0,
                  (p[i0].y + p[i1].y + p[i2].y + p[i3].y) / 4.0,
                  (p[i0].z + p[i1].z + p[i2].z + p[i3].z) / 4.0};
    auto add_face = [&](std::size_t a, std::size_t b, std::size_t c) {
        if (signed_vol(a, b, c, centroid) > 0) std::swap(b, c);  // interior below the plane
        faces.push_back({a, b, c});
    };
    add_face(i0, i1, i2);
    add_face(i0, i1, i3);
    add_face(i0, i2, i3);
    add_face(i1, i2, i3);

    std::map<std::pair<std::size_t, std::size_t>, std::size_t> face_of_edge;  // directed edge
    auto register_faces = [&]() {
        face_of_edge.clear();
        for (std::size_t f = 0; f < faces.size(); ++f) {
            if (!faces[f].alive) continue;
            const Face& face = faces[f];
            face_of_edge[{face.a, face.b}] = f;
            face_of_edge[{face.b, face.c}] = f;
            face_of_edge[{face.c, face.a}] = f;
        }
    };
    register_faces();

    std::vector<double> sv(faces.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i == i0 || i == i1 || i == i2 || i == i3) continue;
        sv.assign(faces.size(), 0.0);
        std::size_t seed = faces.size();
        double seed_sv = eps;
        for (std::size_t f = 0; f < faces.size(); ++f) {
            if (!faces[f].alive) continue;
            sv[f] = signed_vol(faces[f].a, faces[f].b, faces[f].c, p[i]);
            if (sv[f] > seed_sv) {
                seed_sv = sv[f];
                seed = f;
            }
        }
        if (seed == faces.size()) continue;  // inside (or on) the hull

        // Flood fill the visible region across shared edges. Coplanar
        // neighbours (sv within eps of zero) are absorbed as well: leaving
        // them alive when the point sits in their plane but beyond their
        // triangle would detach strictly visible faces and corrupt the mesh.
        std::vector<std::size_t> visible{seed};
        std::vector<bool> in_region(faces.size(), false);
        in_region[seed] = true;
        for (std::size_t k = 0; k < visible.size(); ++k) {
            const Face& face = faces[visible[k]];
            std::pair<std::size_t, std::size_t> e[3] = {
                {face.a, face.b}, {face.b, face.c}, {face.c, face.a}};
            for (const auto& edge : e) {
                auto it = face_of_edge.find({edge.second, edge.first});
                if (it == face_of_edge.end()) continue;
                std::size_t g = it->second;
                if (!in_region[g] && sv[g] > -eps) {
                    in_region[g] = true;
                    visible.push_back(g);
                }
            }
        }
        // Horizon: directed edges whose neighbour stayed alive.
        std::vector<std::pair<std::size_t, std::size_t>> horizon;
        for (std::size_t f : visible) {
            const Face& face = faces[f];
            std::pair<std::size_t, std::size_t> e[3] = {
                {face.a, face.b}, {face.b, face.c}, {face.c, face.a}};
            for (const auto& edge : e) {
                auto it = face_of_edge.find({edge.second, edge.first});
                if (it == face_of_edge.end() || !in_region[it->second]) horizon.push_back(edge);
            }
        }
        for (std::size_t f : visible) faces[f].alive = false;
        for (const auto& edge : horizon) add_face(edge.first, edge.second, i);
        register_faces();
        sv.resize(faces.size());
    }
    double vol = 0.0;
    for (const auto& f : faces) {
        if (!f.alive) continue;
        vol += (p[f.a] - centroid).dot((p[f.b] - centroid).cross(p[f.c] - centroid));
    }
    return std::abs(vol) / 6.0;
}

// Phase-1 simplex feasibility test for p in conv(points); both normalized to
// the unit box beforehand.
bool in_hull_lp(const std::vector<std::vector<double>>& pts, const std::vector<double>& q) {
    const std::size_t n = pts.size();
    const std::size_t d = q.size();
    const std::size_t m = d + 1;
    const double tol = 1e-9;
    // Tableau: m rows, n lambda columns + m artificial columns + rhs.
    std::vector<std::vector<double>> t(m, std::vector<double>(n + m + 1, 0.0));
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t j = 0; j < n; ++j) t[r][j] = pts[j][r];
        t[r][n + m] = q[r];
    }
    for (std::size_t j = 0; j < n; ++j) t[d][j] = 1.0;
    t[d][n + m] = 1.0;
    for (std::size_t r = 0; r < m; ++r) {
        if (t[r][n + m] < 0) {
            for (auto& v : t[r]) v = -v;
        }
        t[r][n + r] = 1.0;
    }
    std::vector<std::size_t> basis(m);
    for (std::size_t r = 0; r < m; ++r) basis[r] = n + r;

    auto objective = [&](std::size_t col) {
        double red = col >= n ? 1.0 : 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            if (basis[r] >= n) red -= t[r][col];
        }
        return red;
    };
    for (std::size_t iter = 0; iter < 50 * (n + m); ++iter) {
        std::size_t enter = n + m;
        for (std::size_t j = 0; j < n + m; ++j) {  // Bland's rule
            if (objective(j) < -tol) {
                enter = j;
                break;
            }
        }
        if (enter == n + m) break;
        std::size_t leave = m;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < m; ++r) {
            if (t[r][enter] > tol) {
                double ratio = t[r][n + m] / t[r][enter];
                if (ratio < best_ratio - tol ||
                    (ratio < best_ratio + tol && (leave == m || basis[r] < basis[leave]))) {
                    best_ratio = ratio;
                    leave = r;
                }
            }
        }
        if (leave == m) break;  // unbounded (cannot happen for phase 1)
        double pivot = t[leave][enter];
        for (auto& v : t[leave]) v /= pivot;
        for (std::size_t r = 0; r < m; ++r) {
            if (r == leave) continue;
            double f = t[r][enter];
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= n + m; ++c) t[r][c] -= f * t[leave][c];
        }
        basis[leave] = enter;
    }
    double infeasibility = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        if (basis[r] >= n) infeasibility += t[r][n + m];
    }
    return infeasibility <= 1e-7;
}

}  // namespace

HullVolume hull_volume(const std::vector<std::vector<double>>& points, std::uint64_t mc_seed) {
    if (points.empty()) return {0.0, 0.0};
    const std::size_t d = points[0].size();
    for (const auto& p : points) {
        if (p.size() != d) raise(ErrorKind::DimensionMismatch, "points of mixed dimension");
    }
    if (d == 0) return {0.0, 0.0};
    if (points.size() < d + 1) return {0.0, 0.0};

    double scale = 0.0;
    for (const auto& p : points) {
        for (double v : p) scale = std::max(scale, std::abs(v));
    }
    if (affine_rank(points, 1e-9 * std::max(1.0, scale)) < d) return {0.0, 0.0};

    if (d == 1) {
        double lo = points[0][0], hi = points[0][0];
        for (const auto& p : points) {
            lo = std::min(lo, p[0]);
            hi = std::max(hi, p[0]);
        }
        return {hi - lo, 0.0};
    }
    if (d == 2) return {hull_area_2d(points), 0.0};
    if (d == 3) return {hull_volume_3d(points), 0.0};

    // Monte Carlo hit fraction over the bounding box, points normalized to
    // the unit cube for tolerance stability.
    std::vector<double> lo(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    for (const auto& p : points) {
        for (std::size_t k = 0; k < d; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    }
    double box_vol = 1.0;
    for (std::size_t k = 0; k < d; ++k) box_vol *= hi[k] - lo[k];
    if (box_vol <= 0.0) return {0.0, 0.0};
    std::vector<std::vector<double>> unit(points.size(), std::vector<double>(d));
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t k = 0; k < d; ++k) unit[i][k] = (points[i][k] - lo[k]) / (hi[k] - lo[k]);
    }
    const std::size_t draws = 100000;
    Rng rng(mix_seed(mc_seed ^ 0x48554c4cull));
    std::size_t hits = 0;
    std::vector<double> q(d);
    for (std::size_t s = 0; s < draws; ++s) {
        for (std::size_t k = 0; k < d; ++k) q[k] = rng.uniform01();
        if (in_hull_lp(unit, q)) ++hits;
    }
    double frac = static_cast<double>(hits) / static_cast<double>(draws);
    double se = std::sqrt(frac * (1.0 - frac) / static_cast<double>(draws));
    return {frac * box_vol, se * box_vol};
}

double epsilon(const EpsilonInputs& inputs, std::uint64_t mc_seed) {
    if (inputs.n_max < 1) raise(ErrorKind::ConfigError, "N_max must be >= 1");
    if (inputs.n > inputs.n_max) raise(ErrorKind::ConfigError, "N exceeds N_max");
    double domain_vol = 1.0;
    for (const auto& [lo, hi] : inputs.domain.bounds) {
        if (lo >= hi) raise(ErrorKind::ConfigError, "empty domain interval");
        domain_vol *= hi - lo;
    }
    if (inputs.points.empty() || inputs.domain.dim() == 0) return 0.0;
    double ratio = hull_volume(inputs.points, mc_seed).volume / domain_vol;
    ratio = std::clamp(ratio, 0.0, 1.0);
    double fill = static_cast<double>(inputs.n) / static_cast<double>(inputs.n_max);
    return std::clamp(ratio * fill, 0.0, 1.0);
}

}  // namespace cbo
