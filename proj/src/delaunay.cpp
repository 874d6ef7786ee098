#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lrsm/rng.hpp"
#include "lrsm/weights.hpp"

// Incremental Bowyer–Watson triangulation with a super-triangle.
//
// Numerical strategy: points are mapped to the unit box (similarity transform,
// so the triangulation is unchanged), the super-triangle has moderate
// coordinates, and every orientation / in-circle determinant is checked
// against a relative epsilon. If any predicate lands inside the epsilon band
// (near-co-circular or near-collinear configuration), the whole run is redone
// with a deterministic hash-seeded jitter of relative size 1e-10, growing
// tenfold per attempt. Random continuous coordinates take the clean first
// pass; structured inputs (grids, co-circular quads) go through the jitter
// path and still produce a valid triangulation.

namespace lrsm {
namespace {

struct Pt {
  double x, y;
};

constexpr double kPredicateEps = 1e-12;

struct DegenerateHit {};  // thrown to restart with jitter

// > 0 when (a, b, c) makes a left turn; flags near-collinear triples.
double orient2d(const Pt& a, const Pt& b, const Pt& c, bool* degenerate) {
  const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double scale = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y),
                                 std::abs(c.x - a.x), std::abs(c.y - a.y), 1e-300});
  if (degenerate != nullptr && std::abs(det) <= kPredicateEps * scale * scale)
    *degenerate = true;
  return det;
}

// > 0 when p lies strictly inside the circumcircle of CCW triangle (a, b, c).
double incircle(const Pt& a, const Pt& b, const Pt& c, const Pt& p,
                bool* degenerate) {
  const double ax = a.x - p.x, ay = a.y - p.y;
  const double bx = b.x - p.x, by = b.y - p.y;
  const double cx = c.x - p.x, cy = c.y - p.y;
  const double a2 = ax * ax + ay * ay;
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  const double det = ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) +
                     a2 * (bx * cy - by * cx);
  const double m = std::max({std::abs(ax), std::abs(ay), std::abs(bx),
                             std::abs(by), std::abs(cx), std::abs(cy), 1e-300});
  const double m2 = m * m;
  if (degenerate != nullptr && std::abs(det) <= kPredicateEps * m2 * m2)
    *degenerate = true;
  return det;
}

struct Tri {
  int v[3];    // CCW vertex indices
  int adj[3];  // adj[i]: triangle across the edge opposite v[i], -1 if open
  bool alive = true;
};

class Triangulator {
 public:
  Triangulator(const std::vector<Pt>& pts, bool strict)
      : pts_(pts), strict_(strict) {}

  // Returns edges between real vertices; throws DegenerateHit in strict mode
  // when a predicate is ambiguous.
  std::vector<std::pair<Index, Index>> run() {
    const int n = static_cast<int>(pts_.size());
    // super-triangle well outside the unit box
    const double k = 1024.0;
    all_ = pts_;
    all_.push_back({0.5 - 3.0 * k, -k});
    all_.push_back({0.5 + 3.0 * k, -k});
    all_.push_back({0.5, 3.0 * k});
    tris_.clear();
    make_tri(n, n + 1, n + 2, -1, -1, -1);

    const std::vector<int> order = insertion_order();
    int hint = 0;
    for (int idx : order) {
      hint = insert(idx, hint);
    }

    std::unordered_set<std::uint64_t> seen;
    std::vector<std::pair<Index, Index>> edges;
    for (const Tri& t : tris_) {
      if (!t.alive) continue;
      if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
      for (int e = 0; e < 3; ++e) {
        int a = t.v[e], b = t.v[(e + 1) % 3];
        if (a > b) std::swap(a, b);
        const std::uint64_t key =
            (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
        if (seen.insert(key).second) edges.emplace_back(a, b);
      }
    }
    return edges;
  }

 private:
  // Morton-order insertion keeps the walk-based point location local.
  std::vector<int> insertion_order() const {
    const int n = static_cast<int>(pts_.size());
    std::vector<std::pair<std::uint64_t, int>> keyed(n);
    for (int i = 0; i < n; ++i) {
      const auto qx = static_cast<std::uint32_t>(
          std::min(65535.0, std::max(0.0, pts_[i].x * 65535.0)));
      const auto qy = static_cast<std::uint32_t>(
          std::min(65535.0, std::max(0.0, pts_[i].y * 65535.0)));
      std::uint64_t key = 0;
      for (int b = 0; b < 16; ++b) {
        key |= static_cast<std::uint64_t>((qx >> b) & 1u) << (2 * b);
        key |= static_cast<std::uint64_t>((qy >> b) & 1u) << (2 * b + 1);
      }
      keyed[i] = {key, i};
    }
    std::stable_sort(keyed.begin(), keyed.end());
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = keyed[i].second;
    return order;
  }

  int make_tri(int a, int b, int c, int na, int nb, int nc) {
    bool deg = false;
    if (orient2d(all_[a], all_[b], all_[c], &deg) < 0.0) {
      std::swap(b, c);
      std::swap(nb, nc);
    }
    tris_.push_back(Tri{{a, b, c}, {na, nb, nc}, true});
    return static_cast<int>(tris_.size()) - 1;
  }

  bool degenerate_guard(bool deg) const {
    if (deg && strict_) throw DegenerateHit{};
    return deg;
  }

  // Walks from `start` to a triangle containing p.
  int locate(const Pt& p, int start) const {
    int t = start;
    if (t < 0 || !tris_[t].alive)
      t = last_alive();
    int steps = 0;
    const int cap = 4 * static_cast<int>(tris_.size()) + 64;
    while (true) {
      if (++steps > cap) return scan_locate(p);
      const Tri& tr = tris_[t];
      int next = -1;
      for (int e = 0; e < 3; ++e) {
        const Pt& a = all_[tr.v[(e + 1) % 3]];
        const Pt& b = all_[tr.v[(e + 2) % 3]];
        bool deg = false;
        if (orient2d(a, b, p, &deg) < 0.0) {
          next = tr.adj[e];
          break;
        }
        degenerate_guard(deg);
      }
      if (next == -1) return t;
      t = next;
    }
  }

  int scan_locate(const Pt& p) const {
    for (int t = static_cast<int>(tris_.size()) - 1; t >= 0; --t) {
      if (!tris_[t].alive) continue;
      bool inside = true;
      for (int e = 0; e < 3 && inside; ++e) {
        const Pt& a = all_[tris_[t].v[(e + 1) % 3]];
        const Pt& b = all_[tris_[t].v[(e + 2) % 3]];
        if (orient2d(a, b, p, nullptr) < 0.0) inside = false;
      }
      if (inside) return t;
    }
    throw DegenerateHit{};  // walk lost: geometry too degenerate
  }

  int last_alive() const {
    for (int t = static_cast<int>(tris_.size()) - 1; t >= 0; --t)
      if (tris_[t].alive) return t;
    return 0;
  }

  // Bowyer–Watson cavity insertion; returns a new triangle index as the next
  // walk hint.
  int insert(int pi, int hint) {
    const Pt& p = all_[pi];
    const int t0 = locate(p, hint);

    // grow the cavity: all alive triangles whose circumcircle contains p
    std::vector<int> cavity;
    std::vector<int> stack{t0};
    std::unordered_set<int> in_cavity{t0};
    {
      bool deg = false;
      const Tri& tr = tris_[t0];
      if (incircle(all_[tr.v[0]], all_[tr.v[1]], all_[tr.v[2]], p, &deg) <= 0.0) {
        // containing triangle must strictly contain p in its circumcircle;
        // equality means co-circular input
        degenerate_guard(true);
      }
      degenerate_guard(deg);
    }
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      cavity.push_back(t);
      for (int e = 0; e < 3; ++e) {
        const int nb = tris_[t].adj[e];
        if (nb < 0 || in_cavity.count(nb)) continue;
        const Tri& tr = tris_[nb];
        bool deg = false;
        const double s =
            incircle(all_[tr.v[0]], all_[tr.v[1]], all_[tr.v[2]], p, &deg);
        degenerate_guard(deg);
        if (s > 0.0) {
          in_cavity.insert(nb);
          stack.push_back(nb);
        }
      }
    }

    // boundary edges of the cavity, each with its outside neighbor
    struct BEdge {
      int a, b, outer;
    };
    std::vector<BEdge> boundary;
    for (int t : cavity) {
      for (int e = 0; e < 3; ++e) {
        const int nb = tris_[t].adj[e];
        if (nb >= 0 && in_cavity.count(nb)) continue;
        boundary.push_back({tris_[t].v[(e + 1) % 3], tris_[t].v[(e + 2) % 3], nb});
      }
    }
    for (int t : cavity) tris_[t].alive = false;

    // fan of new triangles (p, a, b); neighbors across (a, b) stay, and the
    // two triangles sharing a fan spoke are linked through vertex matching
    std::unordered_map<int, std::pair<int, int>> spoke;  // vertex -> (tri, slot)
    int first_new = -1;
    for (const BEdge& be : boundary) {
      const int nt = make_tri(pi, be.a, be.b, be.outer, -1, -1);
      if (first_new < 0) first_new = nt;
      // slot 0 is opposite p, i.e. across edge (a, b): points at be.outer
      if (be.outer >= 0) {
        Tri& out = tris_[be.outer];
        for (int e = 0; e < 3; ++e) {
          const int oa = out.v[(e + 1) % 3], ob = out.v[(e + 2) % 3];
          if ((oa == be.a && ob == be.b) || (oa == be.b && ob == be.a))
            out.adj[e] = nt;
        }
      }
      // spokes p—a and p—b: each is shared by exactly two fan triangles,
      // identified by the spoke's far endpoint
      for (int slot = 0; slot < 3; ++slot) {
        const int far = tris_[nt].v[slot];
        if (far == pi) continue;
        // edge opposite `far` contains p and the remaining vertex
        int remaining = -1;
        for (int s2 = 0; s2 < 3; ++s2)
          if (s2 != slot && tris_[nt].v[s2] != pi) remaining = tris_[nt].v[s2];
        // spoke identified by `remaining`; pair up the two triangles on it
        auto it = spoke.find(remaining);
        if (it == spoke.end()) {
          spoke[remaining] = {nt, slot};
        } else {
          tris_[nt].adj[slot] = it->second.first;
          tris_[it->second.first].adj[it->second.second] = nt;
          spoke.erase(it);
        }
      }
    }
    return first_new;
  }

  const std::vector<Pt>& pts_;
  const bool strict_;
  std::vector<Pt> all_;
  std::vector<Tri> tris_;
};

// Exact-scale duplicate detection via spatial hashing (9-cell neighborhood).
void check_duplicates(const Matrix& coords) {
  const Index n = coords.rows();
  double max_abs = 1.0;
  for (Index i = 0; i < n; ++i)
    max_abs = std::max({max_abs, std::abs(coords(i, 0)), std::abs(coords(i, 1))});
  const double h = (max_abs <= 1e4) ? 1e-12 : 1e-12 * max_abs;
  const double tol2 = h * h;

  auto cell_key = [&](double x, double y) {
    const auto cx = static_cast<std::int64_t>(std::floor(x / h));
    const auto cy = static_cast<std::int64_t>(std::floor(y / h));
    return static_cast<std::uint64_t>(cx) * 0x9e3779b97f4a7c15ULL +
           static_cast<std::uint64_t>(cy);
  };
  std::unordered_multimap<std::uint64_t, Index> grid;
  grid.reserve(static_cast<std::size_t>(n) * 2);
  for (Index i = 0; i < n; ++i) {
    const double x = coords(i, 0), y = coords(i, 1);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        const auto range = grid.equal_range(cell_key(x + dx * h, y + dy * h));
        for (auto it = range.first; it != range.second; ++it) {
          const Index j = it->second;
          const double ddx = x - coords(j, 0), ddy = y - coords(j, 1);
          if (ddx * ddx + ddy * ddy <= tol2)
            throw DuplicatePoints("coincident coordinates at rows " +
                                  std::to_string(j) + " and " + std::to_string(i));
        }
      }
    }
    grid.emplace(cell_key(x, y), i);
  }
}

std::uint64_t hash_coords(const Matrix& coords) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over raw doubles
  for (Index i = 0; i < coords.rows(); ++i) {
    for (Index c = 0; c < 2; ++c) {
      const double v = coords(i, c);
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffu;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

}  // namespace

std::vector<std::pair<Index, Index>> delaunay_edges(const Matrix& coords) {
  const Index n = coords.rows();
  if (coords.cols() != 2) throw Error("coordinates must have two columns");
  if (n < 3)
    throw TooFewPoints("Delaunay adjacency needs at least 3 points, got " +
                       std::to_string(n));
  for (Index i = 0; i < n; ++i)
    if (!std::isfinite(coords(i, 0)) || !std::isfinite(coords(i, 1)))
      throw Error("non-finite coordinate at row " + std::to_string(i));
  check_duplicates(coords);

  // similarity transform to the unit box (preserves the triangulation)
  const double min_x = coords.col(0).minCoeff(), max_x = coords.col(0).maxCoeff();
  const double min_y = coords.col(1).minCoeff(), max_y = coords.col(1).maxCoeff();
  const double extent = std::max({max_x - min_x, max_y - min_y, 1e-300});

  std::vector<Pt> base(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    base[static_cast<std::size_t>(i)] = {(coords(i, 0) - min_x) / extent,
                                         (coords(i, 1) - min_y) / extent};
  }

  const std::uint64_t jitter_seed = hash_coords(coords);
  for (int attempt = 0; attempt < 4; ++attempt) {
    std::vector<Pt> pts = base;
    if (attempt > 0) {
      Rng rng(jitter_seed, static_cast<std::uint64_t>(attempt));
      const double amp = 1e-10 * std::pow(10.0, attempt - 1);
      for (auto& p : pts) {
        p.x += amp * (rng.uniform() - 0.5);
        p.y += amp * (rng.uniform() - 0.5);
      }
    }
    try {
      // last attempt runs non-strict: accept ties however they fall
      Triangulator tri(pts, /*strict=*/attempt < 3);
      auto edges = tri.run();
      if (edges.empty())
        throw DegenerateMatrix(
            "no Delaunay triangle: points are (nearly) collinear");
      return edges;
    } catch (const DegenerateHit&) {
      continue;  // redo with jitter
    }
  }
  throw DegenerateMatrix("Delaunay triangulation failed: degenerate geometry");
}

SpatialWeights build_delaunay_adjacency(const Matrix& coords) {
  const auto edges = delaunay_edges(coords);
  const Index n = coords.rows();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    trips.emplace_back(a, b, 1.0);
    trips.emplace_back(b, a, 1.0);
  }
  SpatialWeights w;
  w.entries.resize(n, n);
  w.entries.setFromTriplets(trips.begin(), trips.end());
  w.entries.makeCompressed();
  return w;
}

}  // namespace lrsm
