#include "mpp/templates.hpp"
#include "mpp/controlmap.hpp"
#include "mpp/errors.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>

namespace mpp {

// Template basics.

Vec2 ngon_corner(int n, int q) {
    const double a = -0.5 * kPi - kPi / n + 2.0 * kPi * q / n;
    return {std::cos(a), std::sin(a)};
}

void rebuild_edges(Template& t) {
    std::set<std::array<int, 2>> e;
    for (const auto& q : t.quads)
        for (int k = 0; k < 4; ++k) e.insert({std::min(q[k], q[(k + 1) % 4]), std::max(q[k], q[(k + 1) % 4])});
    t.edges.assign(e.begin(), e.end());
}

std::vector<int> vertex_valences(const Template& t) {
    std::vector<int> v(t.vertices.size(), 0);
    for (const auto& e : t.edges) {
        ++v[e[0]];
        ++v[e[1]];
    }
    return v;
}

double corner_cross(const Points& verts, const std::array<int, 4>& quad, int k) {
    const Vec2& c = verts[quad[k]];
    return cross(verts[quad[(k + 1) % 4]] - c, verts[quad[(k + 3) % 4]] - c);
}

TemplateCheck validate_template(const Template& t, double tol) {
    const int n = t.n_boundary;
    auto fail = [](std::string r) { return TemplateCheck{false, std::move(r)}; };
    if (n < 4 || n % 2) return fail("N must be even and >= 4");
    if (t.n_vertices() < n) return fail("fewer vertices than boundary corners");
    for (int q = 0; q < n; ++q)
        if ((t.vertices[q] - ngon_corner(n, q)).norm() > tol) return fail("boundary vertex off the N-gon corner");
    std::map<std::array<int, 2>, int> count;
    double area = 0;
    for (const auto& q : t.quads) {
        for (int k = 0; k < 4; ++k) {
            if (q[k] < 0 || q[k] >= t.n_vertices()) return fail("quad index out of range");
            for (int j = k + 1; j < 4; ++j)
                if (q[k] == q[j]) return fail("quad with repeated vertex");
            ++count[{std::min(q[k], q[(k + 1) % 4]), std::max(q[k], q[(k + 1) % 4])}];
            if (corner_cross(t.vertices, q, k) <= 0) return fail("nonpositive corner cross product");
        }
        area += signed_area({t.vertices[q[0]], t.vertices[q[1]], t.vertices[q[2]], t.vertices[q[3]]});
    }
    for (int i = 0; i < n; ++i) {
        const std::array<int, 2> e{std::min(i, (i + 1) % n), std::max(i, (i + 1) % n)};
        const auto it = count.find(e);
        if (it == count.end() || it->second != 1) return fail("boundary edge not in exactly one quad");
    }
    for (const auto& [e, c] : count) {
        const bool boundary = e[1] < n && (e[1] == e[0] + 1 || (e[0] == 0 && e[1] == n - 1));
        if (!boundary && c != 2) return fail("interior edge not shared by two quads");
    }
    const double ngon = 0.5 * n * std::sin(2 * kPi / n);
    if (std::abs(area - ngon) > tol * ngon * 10) return fail("quads do not tile the N-gon");
    return {};
}

// PAG enumeration.

namespace {

constexpr int kOpen = INT_MIN;

struct RollbackDSU {
    std::vector<int> parent, size, bv;
    std::vector<std::uint64_t> patches;
    struct Op {
        int child, root;
        std::uint64_t old_patches;
        int old_bv, old_size;
    };
    std::vector<Op> ops;

    RollbackDSU(int n_corner_patches, int n_boundary) {
        const int n = 4 * n_corner_patches + n_boundary;
        parent.resize(n);
        std::iota(parent.begin(), parent.end(), 0);
        size.assign(n, 1);
        bv.assign(n, -1);
        patches.assign(n, 0);
        for (int p = 0; p < n_corner_patches; ++p)
            for (int k = 0; k < 4; ++k) patches[4 * p + k] = std::uint64_t{1} << p;
        for (int b = 0; b < n_boundary; ++b) bv[4 * n_corner_patches + b] = b;
    }
    int find(int x) const {
        while (parent[x] != x) x = parent[x];
        return x;
    }
    // False when the merge would identify two corners of one patch or two boundary vertices.
    bool unite(int a, int b) {
        int ra = find(a), rb = find(b);
        if (ra == rb) return true;
        if ((patches[ra] & patches[rb]) || (bv[ra] >= 0 && bv[rb] >= 0)) return false;
        if (size[ra] < size[rb]) std::swap(ra, rb);
        ops.push_back({rb, ra, patches[ra], bv[ra], size[ra]});
        parent[rb] = ra;
        size[ra] += size[rb];
        patches[ra] |= patches[rb];
        if (bv[rb] >= 0) bv[ra] = bv[rb];
        return true;
    }
    size_t mark() const { return ops.size(); }
    void rollback(size_t m) {
        while (ops.size() > m) {
            const Op o = ops.back();
            ops.pop_back();
            parent[o.child] = o.child;
            patches[o.root] = o.old_patches;
            bv[o.root] = o.old_bv;
            size[o.root] = o.old_size;
        }
    }
};

struct SimpleDSU {
    std::vector<int> p;
    explicit SimpleDSU(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int x) {
        while (p[x] != x) x = p[x] = p[p[x]];
        return x;
    }
    void unite(int a, int b) { p[find(a)] = find(b); }
};

int corner_id(int p, int k) { return 4 * p + (k & 3); }

// Vertex classes of a complete gluing; returns false on pinched or low-valence vertices.
bool gluing_is_disk(int n, int q, const std::vector<std::array<int, 4>>& sides) {
    SimpleDSU full(4 * q + n), local(4 * q);
    for (int p = 0; p < q; ++p)
        for (int s = 0; s < 4; ++s) {
            const int v = sides[p][s];
            if (v < 0) {
                const int b = -1 - v;
                full.unite(corner_id(p, s), 4 * q + b);
                full.unite(corner_id(p, s + 1), 4 * q + (b + 1) % n);
            } else {
                const int p2 = v / 4, t = v % 4;
                full.unite(corner_id(p, s), corner_id(p2, t + 1));
                full.unite(corner_id(p, s + 1), corner_id(p2, t));
                local.unite(corner_id(p, s), corner_id(p2, t + 1));
                local.unite(corner_id(p, s + 1), corner_id(p2, t));
            }
        }
    std::set<int> full_roots, local_roots;
    std::map<int, int> corners_per_class;
    for (int c = 0; c < 4 * q; ++c) {
        full_roots.insert(full.find(c));
        local_roots.insert(local.find(c));
        ++corners_per_class[full.find(c)];
    }
    for (int b = 0; b < n; ++b)
        if (!full_roots.count(full.find(4 * q + b))) return false;
    if (static_cast<int>(full_roots.size()) != 1 + q + n / 2) return false;
    if (local_roots.size() != full_roots.size()) return false; // pinched vertex
    std::set<int> boundary_roots;
    for (int b = 0; b < n; ++b) boundary_roots.insert(full.find(4 * q + b));
    if (static_cast<int>(boundary_roots.size()) != n) return false;
    for (const auto& [root, count] : corners_per_class)
        if (!boundary_roots.count(root) && count < 3) return false;
    return true;
}

class PagEnumerator {
public:
    PagEnumerator(int n, int q, EnumerationLimits lim) : n_(n), q_(q), lim_(lim), dsu_(q, n) {
        sides_.assign(q, {kOpen, kOpen, kOpen, kOpen});
        used_.assign(n, false);
    }

    std::vector<PAG> run() {
        // patch 0 owns boundary edge 0 through its side 0
        nq_ = 1;
        dsu_.unite(corner_id(0, 0), bv(0));
        dsu_.unite(corner_id(0, 1), bv(1));
        sides_[0][0] = -1;
        used_[0] = true;
        n_used_ = 1;
        dfs();
        return found_;
    }

private:
    int n_, q_;
    EnumerationLimits lim_;
    RollbackDSU dsu_;
    std::vector<std::array<int, 4>> sides_;
    std::vector<bool> used_;
    int nq_ = 0, n_used_ = 0;
    size_t nodes_ = 0;
    std::set<std::vector<int>> keys_;
    std::vector<PAG> found_;

    int bv(int b) const { return 4 * q_ + (b % n_); }
    bool done() const {
        return (lim_.max_results && found_.size() >= lim_.max_results) || nodes_ > lim_.max_search_nodes;
    }

    void finish() {
        if (!gluing_is_disk(n_, q_, sides_)) return;
        PAG pag{n_, q_, sides_};
        auto key = pag_canonical_key(pag);
        if (keys_.insert(std::move(key)).second) found_.push_back(std::move(pag));
    }

    void dfs() {
        if (done()) return;
        ++nodes_;
        int p = -1, s = -1, open_total = 0;
        for (int i = 0; i < nq_; ++i)
            for (int k = 0; k < 4; ++k)
                if (sides_[i][k] == kOpen) {
                    if (p < 0) {
                        p = i;
                        s = k;
                    }
                    ++open_total;
                }
        if (p < 0) {
            if (nq_ == q_ && n_used_ == n_) finish();
            return;
        }
        const int unused = n_ - n_used_;
        if (unused > open_total + 4 * (q_ - nq_)) return;
        if (unused == 0 && open_total + 4 * (q_ - nq_) == 0) return;

        // boundary edge
        for (int b = 0; b < n_ && !done(); ++b) {
            if (used_[b]) continue;
            const size_t m = dsu_.mark();
            if (dsu_.unite(corner_id(p, s), bv(b)) && dsu_.unite(corner_id(p, s + 1), bv(b + 1))) {
                sides_[p][s] = -1 - b;
                used_[b] = true;
                ++n_used_;
                dfs();
                --n_used_;
                used_[b] = false;
                sides_[p][s] = kOpen;
            }
            dsu_.rollback(m);
        }
        // an open side of an existing patch, or side 0 of a new one
        const int limit = nq_ < q_ ? nq_ + 1 : nq_;
        for (int p2 = p; p2 < limit && !done(); ++p2) {
            const bool fresh = p2 == nq_;
            for (int t = 0; t < 4; ++t) {
                if (fresh && t > 0) break;
                if (p2 == p && t == s) continue;
                if (sides_[p2][t] != kOpen) continue;
                if (fresh) ++nq_;
                const size_t m = dsu_.mark();
                if (dsu_.unite(corner_id(p, s), corner_id(p2, t + 1)) && dsu_.unite(corner_id(p, s + 1), corner_id(p2, t))) {
                    sides_[p][s] = 4 * p2 + t;
                    sides_[p2][t] = 4 * p + s;
                    dfs();
                    sides_[p][s] = kOpen;
                    sides_[p2][t] = kOpen;
                }
                dsu_.rollback(m);
                if (fresh) --nq_;
            }
        }
    }
};

} // namespace

std::vector<int> PAG::boundary_patch() const {
    std::vector<int> bp(n_boundary, -1);
    for (int p = 0; p < n_patches; ++p)
        for (int s = 0; s < 4; ++s)
            if (sides[p][s] < 0) bp[-1 - sides[p][s]] = p;
    return bp;
}

std::vector<std::array<int, 2>> PAG::adjacency() const {
    std::vector<std::array<int, 2>> e;
    for (int b = 0; b < n_boundary; ++b) e.push_back({std::min(b, (b + 1) % n_boundary), std::max(b, (b + 1) % n_boundary)});
    const auto bp = boundary_patch();
    for (int b = 0; b < n_boundary; ++b) e.push_back({b, n_boundary + bp[b]});
    for (int p = 0; p < n_patches; ++p)
        for (int s = 0; s < 4; ++s) {
            const int v = sides[p][s];
            if (v >= 0 && (v / 4 > p || (v / 4 == p && v % 4 > s))) e.push_back({n_boundary + p, n_boundary + v / 4});
        }
    std::sort(e.begin(), e.end());
    return e;
}

std::vector<PAG> enumerate_pags(int n, int n_patches, EnumerationLimits limits) {
    if (n < 4 || n % 2) throw Error(ErrorCode::InfeasibleConfig, "N must be even and >= 4");
    if (n_patches < 1) throw Error(ErrorCode::InfeasibleConfig, "at least one patch is required");
    if (1 + n_patches - n / 2 < 0)
        throw Error(ErrorCode::InfeasibleConfig, "too few patches for " + std::to_string(n) + " boundary edges");
    if (n_patches > 64) throw Error(ErrorCode::InfeasibleConfig, "at most 64 patches supported");
    return PagEnumerator(n, n_patches, limits).run();
}

std::vector<int> pag_canonical_key(const PAG& pag) {
    const int n = pag.n_boundary, q = pag.n_patches;
    const auto bp = pag.boundary_patch();
    std::vector<std::vector<int>> mult(q, std::vector<int>(q, 0));
    for (int p = 0; p < q; ++p)
        for (int s = 0; s < 4; ++s)
            if (pag.sides[p][s] >= 0) ++mult[p][pag.sides[p][s] / 4];
    std::vector<int> best;
    for (int refl = 0; refl < 2; ++refl)
        for (int rot = 0; rot < n; ++rot) {
            auto orig = [&](int b) { return refl ? ((rot - b) % n + n) % n : (b + rot) % n; };
            std::vector<int> label(q, -1), order;
            for (int b = 0; b < n; ++b) {
                const int p = bp[orig(b)];
                if (label[p] < 0) {
                    label[p] = static_cast<int>(order.size());
                    order.push_back(p);
                }
            }
            // breadth-first labelling of the remaining patches, branching on ties
            std::function<void(size_t)> go = [&](size_t cursor) {
                while (cursor < order.size()) {
                    bool any = false;
                    for (int r = 0; r < q && !any; ++r) any = mult[order[cursor]][r] && label[r] < 0;
                    if (any) break;
                    ++cursor;
                }
                if (order.size() == static_cast<size_t>(q) || cursor >= order.size()) {
                    if (order.size() != static_cast<size_t>(q)) return;
                    std::vector<int> key;
                    key.reserve(n + q * q / 2);
                    for (int b = 0; b < n; ++b) key.push_back(label[bp[orig(b)]]);
                    for (int i = 0; i < q; ++i)
                        for (int j = i + 1; j < q; ++j) key.push_back(mult[order[i]][order[j]]);
                    if (best.empty() || key < best) best = std::move(key);
                    return;
                }
                std::vector<int> fresh;
                for (int r = 0; r < q; ++r)
                    if (mult[order[cursor]][r] && label[r] < 0) fresh.push_back(r);
                do {
                    for (int r : fresh) {
                        label[r] = static_cast<int>(order.size());
                        order.push_back(r);
                    }
                    go(cursor + 1);
                    for (size_t k = 0; k < fresh.size(); ++k) {
                        label[order.back()] = -1;
                        order.pop_back();
                    }
                } while (std::next_permutation(fresh.begin(), fresh.end()));
            };
            go(0);
        }
    best.insert(best.begin(), {n, q});
    return best;
}

void harmonic_positions(Template& t) {
    const int n = t.n_boundary, nv = t.n_vertices();
    t.vertices.resize(nv);
    for (int q = 0; q < n; ++q) t.vertices[q] = ngon_corner(n, q);
    const int ni = nv - n;
    if (ni == 0) return;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ni, 2);
    std::vector<int> deg(nv, 0);
    for (const auto& e : t.edges) {
        ++deg[e[0]];
        ++deg[e[1]];
        for (int k = 0; k < 2; ++k) {
            const int a = e[k], b = e[1 - k];
            if (a < n) continue;
            if (b < n) rhs.row(a - n) += t.vertices[b].transpose();
            else trip.emplace_back(a - n, b - n, -1.0);
        }
    }
    for (int i = n; i < nv; ++i) trip.emplace_back(i - n, i - n, static_cast<double>(deg[i]));
    Eigen::SparseMatrix<double> a(ni, ni);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularGlueSystem, "glue system is singular");
    const Eigen::MatrixXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite()) throw Error(ErrorCode::SingularGlueSystem, "glue solve failed");
    for (int i = 0; i < ni; ++i) t.vertices[n + i] = x.row(i).transpose();
}

void embed_template(Template& t) {
    harmonic_positions(t);
    if (min_corner_cross(t.vertices, t.quads) <= 0) t.vertices = untangle_layout(t.vertices, t.quads, t.n_boundary);
}

namespace {

std::map<std::pair<int, int>, std::pair<int, int>> directed_sides(const Template& t) {
    std::map<std::pair<int, int>, std::pair<int, int>> d;
    for (int q = 0; q < t.n_quads(); ++q)
        for (int k = 0; k < 4; ++k) d[{t.quads[q][k], t.quads[q][(k + 1) % 4]}] = {q, k};
    return d;
}

// Traversal from the boundary; returns new vertex ids and the visited (quad, start) order.
void traverse(const Template& t, std::vector<int>& newid, std::vector<std::pair<int, int>>& visit) {
    const int n = t.n_boundary;
    const auto dir = directed_sides(t);
    newid.assign(t.n_vertices(), -1);
    for (int i = 0; i < n; ++i) newid[i] = i;
    int next = n;
    std::vector<bool> queued(t.n_quads(), false);
    visit.clear();
    for (int b = 0; b < n; ++b) {
        const auto it = dir.find({b, (b + 1) % n});
        if (it == dir.end()) throw Error(ErrorCode::InvalidInput, "template misses boundary edge " + std::to_string(b));
        if (!queued[it->second.first]) {
            queued[it->second.first] = true;
            visit.push_back(it->second);
        }
    }
    for (size_t h = 0; h < visit.size(); ++h) {
        const auto [q, k] = visit[h];
        for (int j = 0; j < 4; ++j) {
            const int v = t.quads[q][(k + j) % 4];
            if (newid[v] < 0) newid[v] = next++;
        }
        for (int j = 0; j < 4; ++j) {
            const int a = t.quads[q][(k + j) % 4], b = t.quads[q][(k + j + 1) % 4];
            const auto it = dir.find({b, a});
            if (it != dir.end() && !queued[it->second.first]) {
                queued[it->second.first] = true;
                visit.push_back(it->second);
            }
        }
    }
    if (static_cast<int>(visit.size()) != t.n_quads() || next != t.n_vertices())
        throw Error(ErrorCode::InvalidInput, "template is not connected");
}

} // namespace

void canonicalize(Template& t) {
    std::vector<int> newid;
    std::vector<std::pair<int, int>> visit;
    traverse(t, newid, visit);
    Template out;
    out.n_boundary = t.n_boundary;
    out.id = t.id;
    out.vertices.resize(t.vertices.size());
    for (int v = 0; v < t.n_vertices(); ++v) out.vertices[newid[v]] = t.vertices[v];
    for (const auto& [q, k] : visit) {
        std::array<int, 4> nq;
        for (int j = 0; j < 4; ++j) nq[j] = newid[t.quads[q][(k + j) % 4]];
        out.quads.push_back(nq);
    }
    rebuild_edges(out);
    t = std::move(out);
}

std::vector<int> template_key(const Template& t) {
    std::vector<int> newid;
    std::vector<std::pair<int, int>> visit;
    traverse(t, newid, visit);
    std::vector<int> key{t.n_boundary, t.n_quads()};
    for (const auto& [q, k] : visit)
        for (int j = 0; j < 4; ++j) key.push_back(newid[t.quads[q][(k + j) % 4]]);
    return key;
}

Template pag_to_template(const PAG& pag) {
    const int n = pag.n_boundary, q = pag.n_patches;
    SimpleDSU dsu(4 * q + n);
    std::vector<bool> seen(n, false);
    for (int p = 0; p < q; ++p)
        for (int s = 0; s < 4; ++s) {
            const int v = pag.sides[p][s];
            if (v == kOpen) throw Error(ErrorCode::SingularGlueSystem, "PAG has an unglued side");
            if (v < 0) {
                const int b = -1 - v;
                seen[b] = true;
                dsu.unite(corner_id(p, s), 4 * q + b);
                dsu.unite(corner_id(p, s + 1), 4 * q + (b + 1) % n);
            } else {
                dsu.unite(corner_id(p, s), corner_id(v / 4, v % 4 + 1));
                dsu.unite(corner_id(p, s + 1), corner_id(v / 4, v % 4));
            }
        }
    if (std::count(seen.begin(), seen.end(), false))
        throw Error(ErrorCode::SingularGlueSystem, "PAG does not attach every boundary edge");
    std::map<int, int> vid;
    for (int b = 0; b < n; ++b) vid[dsu.find(4 * q + b)] = b;
    if (static_cast<int>(vid.size()) != n) throw Error(ErrorCode::SingularGlueSystem, "boundary vertices collapse");
    Template t;
    t.n_boundary = n;
    int next = n;
    for (int p = 0; p < q; ++p) {
        std::array<int, 4> quad;
        for (int k = 0; k < 4; ++k) {
            const int r = dsu.find(corner_id(p, k));
            auto it = vid.find(r);
            if (it == vid.end()) it = vid.emplace(r, next++).first;
            quad[k] = it->second;
        }
        t.quads.push_back(quad);
    }
    t.vertices.assign(next, Vec2::Zero());
    rebuild_edges(t);
    // disconnected corner networks leave interior vertices without a path to the boundary
    std::vector<std::vector<int>> nb(next);
    for (const auto& e : t.edges) {
        nb[e[0]].push_back(e[1]);
        nb[e[1]].push_back(e[0]);
    }
    std::vector<bool> reach(next, false);
    std::vector<int> stack;
    for (int b = 0; b < n; ++b) {
        reach[b] = true;
        stack.push_back(b);
    }
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : nb[v])
            if (!reach[w]) {
                reach[w] = true;
                stack.push_back(w);
            }
    }
    if (std::count(reach.begin(), reach.end(), false)) throw Error(ErrorCode::SingularGlueSystem, "disconnected PAG");
    embed_template(t);
    canonicalize(t);
    t.id = "pag-" + std::to_string(n) + "-" + std::to_string(q);
    return t;
}

Template rc_n_leaf(int n) {
    if (n < 4 || n % 2) throw Error(ErrorCode::InfeasibleConfig, "RC N-leaf needs an even N >= 4");
    Template t;
    t.n_boundary = n;
    for (int q = 0; q < n; ++q) t.vertices.push_back(ngon_corner(n, q));
    for (int q = 0; q < n; ++q) t.vertices.push_back(0.5 * ngon_corner(n, q));
    auto w = [n](int q) { return n + (q % n); };
    for (int q = 0; q < n; ++q) t.quads.push_back({q, (q + 1) % n, w(q + 1), w(q)});
    if (n == 4) {
        t.quads.push_back({w(0), w(1), w(2), w(3)});
    } else {
        const int c = static_cast<int>(t.vertices.size());
        t.vertices.push_back(Vec2::Zero());
        for (int j = 0; j < n / 2; ++j) t.quads.push_back({c, w(2 * j), w(2 * j + 1), w(2 * j + 2)});
    }
    rebuild_edges(t);
    t.id = "rc-" + std::to_string(n);
    return t;
}

Template relabel_template(const Template& t, int rotation, bool reflect) {
    const int n = t.n_boundary;
    auto bmap = [&](int q) {
        const int r = reflect ? ((1 - q) % n + n) % n : q;
        return ((r + rotation) % n + n) % n;
    };
    const double a = 2 * kPi * rotation / n;
    Mat2 rot;
    rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    Template out;
    out.n_boundary = n;
    out.id = t.id;
    out.vertices.resize(t.vertices.size());
    for (int v = 0; v < t.n_vertices(); ++v) {
        if (v < n) {
            out.vertices[bmap(v)] = ngon_corner(n, bmap(v));
        } else {
            Vec2 p = t.vertices[v];
            if (reflect) p.x() = -p.x();
            out.vertices[v] = rot * p;
        }
    }
    auto vmap = [&](int v) { return v < n ? bmap(v) : v; };
    for (const auto& q : t.quads) {
        if (reflect) out.quads.push_back({vmap(q[0]), vmap(q[3]), vmap(q[2]), vmap(q[1])});
        else out.quads.push_back({vmap(q[0]), vmap(q[1]), vmap(q[2]), vmap(q[3])});
    }
    rebuild_edges(out);
    canonicalize(out);
    return out;
}

// Catalogue.

nlohmann::json template_to_json(const Template& t) {
    nlohmann::json v = nlohmann::json::array(), q = nlohmann::json::array();
    for (const Vec2& p : t.vertices) v.push_back({p.x(), p.y()});
    for (const auto& quad : t.quads) q.push_back(quad);
    return {{"id", t.id}, {"n", t.n_boundary}, {"vertices", v}, {"quads", q}};
}

Template template_from_json(const nlohmann::json& j) {
    Template t;
    t.id = j.value("id", "");
    t.n_boundary = j.at("n").get<int>();
    for (const auto& p : j.at("vertices")) t.vertices.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    for (const auto& q : j.at("quads")) t.quads.push_back(q.get<std::array<int, 4>>());
    rebuild_edges(t);
    return t;
}

const std::vector<Template>& TemplateCatalogue::for_n(int n) const {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    if (!by_n_.count(n)) generate(n);
    return by_n_[n];
}

void TemplateCatalogue::add(const Template& t) { by_n_[t.n_boundary].push_back(t); }

void TemplateCatalogue::generate(int n) const {
    auto& list = by_n_[n];
    if (n < 4 || n % 2) return;
    const int max_p = opt_.max_patches > 0 ? opt_.max_patches : n / 2 + 2;
    std::set<std::vector<int>> keys;
    for (int np = std::max(1, n / 2 - 1); np <= max_p; ++np) {
        std::vector<PAG> pags;
        try {
            pags = enumerate_pags(n, np, {opt_.per_cell_cap, opt_.search_budget});
        } catch (const Error&) {
            continue;
        }
        for (size_t k = 0; k < pags.size(); ++k) {
            Template base;
            try {
                base = pag_to_template(pags[k]);
            } catch (const Error&) {
                continue;
            }
            if (!validate_template(base).ok) continue;
            const std::string id = "pag-" + std::to_string(n) + "-" + std::to_string(np) + "-" + std::to_string(k);
            for (int refl = 0; refl < (opt_.include_reflections ? 2 : 1); ++refl)
                for (int rot = 0; rot < n; ++rot) {
                    Template t = relabel_template(base, rot, refl == 1);
                    if (!keys.insert(template_key(t)).second) continue;
                    t.id = id + (refl ? "/m" : "/r") + std::to_string(rot);
                    list.push_back(std::move(t));
                }
        }
    }
}

void TemplateCatalogue::build(int n_min, int n_max) {
    for (int n = n_min; n <= n_max; ++n)
        if (n % 2 == 0) for_n(n);
}

std::vector<int> TemplateCatalogue::sizes() const {
    std::vector<int> s;
    for (const auto& [n, l] : by_n_) s.push_back(n);
    return s;
}

size_t TemplateCatalogue::total() const {
    size_t c = 0;
    for (const auto& [n, l] : by_n_) c += l.size();
    return c;
}

nlohmann::json TemplateCatalogue::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [n, l] : by_n_)
        for (const Template& t : l) list.push_back(template_to_json(t));
    return {{"format", "mpp-template-catalogue"}, {"version", 1}, {"templates", list}};
}

TemplateCatalogue TemplateCatalogue::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "mpp-template-catalogue" || j.value("version", 0) != 1)
        throw Error(ErrorCode::InvalidInput, "unsupported catalogue format");
    TemplateCatalogue c;
    for (const auto& t : j.at("templates")) c.add(template_from_json(t));
    return c;
}

void TemplateCatalogue::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::InvalidInput, "cannot write " + path);
    f << to_json().dump() << "\n";
}

TemplateCatalogue TemplateCatalogue::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::InvalidInput, "cannot read " + path);
    return from_json(nlohmann::json::parse(f));
}

std::vector<Template> prefilter(const std::vector<double>& face_angles, const TemplateCatalogue& cat, double mu_angle) {
    const int n = static_cast<int>(face_angles.size());
    std::vector<Template> out;
    for (const Template& t : cat.for_n(n)) {
        if (t.n_boundary != n) continue;
        const auto val = vertex_valences(t);
        bool ok = true;
        for (int i = 0; i < n && ok; ++i)
            if (face_angles[i] >= kPi - mu_angle && val[i] < 3) ok = false;
        if (ok) out.push_back(t);
    }
    if (out.empty()) out.push_back(rc_n_leaf(n));
    return out;
}

std::vector<Template> prefilter(const PlaneGraph& g, int face, const TemplateCatalogue& cat, double mu_angle) {
    return prefilter(face_angles(g, face), cat, mu_angle);
}

// Refinement.

Strip template_strip(const Template& t, int boundary_edge) {
    const int n = t.n_boundary;
    const auto dir = directed_sides(t);
    Strip s;
    s.entry = boundary_edge;
    auto it = dir.find({boundary_edge, (boundary_edge + 1) % n});
    if (it == dir.end()) throw Error(ErrorCode::InvalidInput, "boundary edge missing from template");
    auto [q, k] = it->second;
    for (int guard = 0; guard <= 2 * t.n_quads(); ++guard) {
        s.quads.push_back({q, k});
        const int a = t.quads[q][(k + 2) % 4], b = t.quads[q][(k + 3) % 4];
        const auto nx = dir.find({b, a});
        if (nx == dir.end()) {
            s.exit = a; // boundary edge a -> a+1
            return s;
        }
        q = nx->second.first;
        k = nx->second.second;
    }
    throw Error(ErrorCode::RefinementCycle, "quad strip does not terminate");
}

namespace {

Template refine_layout(const Template& t, const std::vector<Strip>& strips) {
    const int n = t.n_boundary;
    std::map<int, int> crossed; // quad -> bitmask of crossing parities
    std::set<std::array<int, 2>> split_sides;
    for (const Strip& s : strips)
        for (const auto& [q, k] : s.quads) {
            const int bit = 1 << (k % 2);
            if (crossed[q] & bit) throw Error(ErrorCode::RefinementCycle, "quad strip crosses a quad twice in one direction");
            crossed[q] |= bit;
            for (int j : {k, k + 2}) {
                const int a = t.quads[q][j % 4], b = t.quads[q][(j + 1) % 4];
                split_sides.insert({std::min(a, b), std::max(a, b)});
            }
        }
    Template out;
    std::vector<int> remap(t.n_vertices(), -1);
    std::map<std::array<int, 2>, int> mid;
    for (int i = 0; i < n; ++i) {
        remap[i] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(t.vertices[i]);
        const std::array<int, 2> e{std::min(i, (i + 1) % n), std::max(i, (i + 1) % n)};
        if (split_sides.count(e)) {
            mid[e] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(0.5 * (t.vertices[e[0]] + t.vertices[e[1]]));
        }
    }
    out.n_boundary = static_cast<int>(out.vertices.size());
    for (int v = n; v < t.n_vertices(); ++v) {
        remap[v] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(t.vertices[v]);
    }
    for (const auto& e : split_sides)
        if (!mid.count(e)) {
            mid[e] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(0.5 * (t.vertices[e[0]] + t.vertices[e[1]]));
        }
    auto m = [&](int a, int b) { return mid.at({std::min(a, b), std::max(a, b)}); };
    for (int q = 0; q < t.n_quads(); ++q) {
        std::array<int, 4> c;
        for (int j = 0; j < 4; ++j) c[j] = remap[t.quads[q][j]];
        const auto& o = t.quads[q];
        const int mask = crossed.count(q) ? crossed[q] : 0;
        if (mask == 0) {
            out.quads.push_back(c);
        } else if (mask == 3) {
            std::array<int, 4> mm;
            for (int j = 0; j < 4; ++j) mm[j] = m(o[j], o[(j + 1) % 4]);
            const int z = static_cast<int>(out.vertices.size());
            out.vertices.push_back(0.25 * (t.vertices[o[0]] + t.vertices[o[1]] + t.vertices[o[2]] + t.vertices[o[3]]));
            out.quads.push_back({c[0], mm[0], z, mm[3]});
            out.quads.push_back({mm[0], c[1], mm[1], z});
            out.quads.push_back({z, mm[1], c[2], mm[2]});
            out.quads.push_back({mm[3], z, mm[2], c[3]});
        } else {
            const int k = mask == 1 ? 0 : 1;
            const int ma = m(o[k], o[(k + 1) % 4]), mb = m(o[(k + 2) % 4], o[(k + 3) % 4]);
            out.quads.push_back({c[k], ma, mb, c[(k + 3) % 4]});
            out.quads.push_back({ma, c[(k + 1) % 4], c[(k + 2) % 4], mb});
        }
    }
    rebuild_edges(out);
    embed_template(out);
    canonicalize(out);
    out.id = t.id + "+";
    return out;
}

int position_in_face(const Face& f, int edge) {
    for (int k = 0; k < f.size(); ++k)
        if (f.edges[k].id == edge) return k;
    return -1;
}

} // namespace

std::vector<int> refine_template(PlaneGraph& g, int edge, std::optional<double> fraction) {
    if (edge < 0 || edge >= g.n_edges()) throw Error(ErrorCode::InvalidInput, "refinement of a missing edge");
    std::vector<int> to_split{edge};
    std::set<int> visited{edge};
    std::map<int, std::vector<Strip>> strips;
    for (int start : g.edge_faces(edge)) {
        if (!g.faces[start].tmpl) continue;
        int f = start, pos = position_in_face(g.faces[f], edge);
        for (;;) {
            const Strip s = template_strip(g.faces[f].tmpl->layout, pos);
            strips[f].push_back(s);
            const int e2 = g.faces[f].edges[s.exit].id;
            if (!visited.insert(e2).second)
                throw Error(ErrorCode::RefinementCycle, "refinement chain revisits edge " + std::to_string(e2));
            to_split.push_back(e2);
            int next = -1;
            for (int f2 : g.edge_faces(e2))
                if (f2 != f) next = f2;
            if (next < 0 || !g.faces[next].tmpl) break;
            f = next;
            pos = position_in_face(g.faces[f], e2);
        }
    }
    for (auto& [f, list] : strips) {
        FaceTemplate& ft = *g.faces[f].tmpl;
        ft.layout = refine_layout(ft.layout, list);
        ft.control.reset();
    }
    for (size_t k = 0; k < to_split.size(); ++k) {
        const int e = to_split[k];
        densify_edge(g, e, 9);
        const Points& pts = g.edges[e].points;
        const int idx = (k == 0 && fraction) ? split_index_at_fraction(pts, *fraction) : balanced_split_index(pts);
        split_edge(g, e, idx);
    }
    return to_split;
}

} // namespace mpp
