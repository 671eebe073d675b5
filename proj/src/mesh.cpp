#include "febe/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace febe {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string lower(std::string s) {
  for (char& c : s) c = (char)std::tolower((unsigned char)c);
  return s;
}

}  // namespace

double uniform_hash01(std::uint64_t seed, std::uint64_t k0, std::uint64_t k1) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(k0 ^ splitmix64(k1)));
  return (double)(h >> 11) * 0x1.0p-53;
}

QuadMesh::QuadMesh(std::vector<Vec3> vertices,
                   std::vector<std::array<int, 4>> quads,
                   std::vector<Region> regions)
    : vertex_(std::move(vertices)),
      quad_(std::move(quads)),
      region_(std::move(regions)) {
  finalize();
}

void QuadMesh::finalize() {
  const int nv = num_vertices();
  const int nf = num_quads();
  if (nf == 0) throw Error("mesh has no quads");
  if ((int)region_.size() != nf)
    throw Error("mesh has " + std::to_string(nf) + " quads but " +
                std::to_string(region_.size()) + " region tags");

  for (int f = 0; f < nf; ++f) {
    const auto& q = quad_[f];
    for (int k = 0; k < 4; ++k) {
      if (q[k] < 0 || q[k] >= nv)
        throw Error("quad " + std::to_string(f) + " references vertex " +
                    std::to_string(q[k]) + " out of range");
      for (int l = k + 1; l < 4; ++l)
        if (q[k] == q[l])
          throw Error("quad " + std::to_string(f) + " has repeated vertex " +
                      std::to_string(q[k]));
    }
  }

  // edges; a directed edge may appear only once, and each undirected edge
  // needs both directions (closed + consistently oriented)
  edge_.clear();
  std::unordered_map<std::uint64_t, int> undirected;
  std::unordered_map<std::uint64_t, int> directed;
  undirected.reserve(4 * nf);
  directed.reserve(4 * nf);
  auto ukey = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return ((std::uint64_t)a << 32) | (std::uint32_t)b;
  };
  auto dkey = [](int a, int b) {
    return ((std::uint64_t)a << 32) | (std::uint32_t)b;
  };
  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 4; ++k) {
      int a = quad_[f][k], b = quad_[f][(k + 1) & 3];
      if (!directed.emplace(dkey(a, b), f).second)
        throw Error("directed edge (" + std::to_string(a) + "," +
                    std::to_string(b) +
                    ") used twice: non-manifold or inconsistent orientation");
      auto [it, fresh] = undirected.emplace(ukey(a, b), (int)edge_.size());
      if (fresh) {
        MeshEdge e;
        e.v0 = std::min(a, b);
        e.v1 = std::max(a, b);
        e.face[0] = f;
        e.slot[0] = k;
        edge_.push_back(e);
      } else {
        MeshEdge& e = edge_[it->second];
        if (e.face[1] != -1)
          throw Error("edge (" + std::to_string(e.v0) + "," +
                      std::to_string(e.v1) + ") shared by more than 2 quads");
        e.face[1] = f;
        e.slot[1] = k;
      }
    }
  }
  for (const MeshEdge& e : edge_)
    if (e.face[1] == -1)
      throw Error("edge (" + std::to_string(e.v0) + "," +
                  std::to_string(e.v1) + ") has only one quad: mesh not closed");

  // per-vertex incident edge lists (CSR)
  edge_lookup_ptr_.assign(nv + 1, 0);
  for (const MeshEdge& e : edge_) {
    ++edge_lookup_ptr_[e.v0 + 1];
    ++edge_lookup_ptr_[e.v1 + 1];
  }
  for (int v = 0; v < nv; ++v) edge_lookup_ptr_[v + 1] += edge_lookup_ptr_[v];
  edge_lookup_.assign(edge_lookup_ptr_[nv], -1);
  {
    std::vector<int> fill(edge_lookup_ptr_.begin(), edge_lookup_ptr_.end() - 1);
    for (int ei = 0; ei < (int)edge_.size(); ++ei) {
      edge_lookup_[fill[edge_[ei].v0]++] = ei;
      edge_lookup_[fill[edge_[ei].v1]++] = ei;
    }
  }

  // ordered face fans: ccw successor of f around v is the face across the
  // edge that ends at v
  std::vector<std::vector<int>> incident(nv);
  for (int f = 0; f < nf; ++f)
    for (int k = 0; k < 4; ++k) incident[quad_[f][k]].push_back(f);
  fan_.assign(nv, {});
  for (int v = 0; v < nv; ++v) {
    const int deg = (int)incident[v].size();
    if (deg < 3)
      throw Error("vertex " + std::to_string(v) + " has valence " +
                  std::to_string(deg) + " (minimum 3)");
    std::vector<int>& fan = fan_[v];
    fan.reserve(deg);
    int f = incident[v][0];
    for (int step = 0; step < deg; ++step) {
      fan.push_back(f);
      int k = corner_slot(f, v);
      int prev = quad_[f][(k + 3) & 3];
      int ei = edge_between(prev, v);
      const MeshEdge& e = edge_[ei];
      f = e.face[0] == f ? e.face[1] : e.face[0];
      if (f == incident[v][0] && step + 1 < deg)
        throw Error("vertex " + std::to_string(v) +
                    " has a disconnected face fan: non-manifold vertex");
    }
    if (f != incident[v][0])
      throw Error("face fan around vertex " + std::to_string(v) +
                  " does not close");
  }

  // connected surface
  {
    std::vector<char> seen(nf, 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    int count = 0;
    while (!stack.empty()) {
      int f = stack.back();
      stack.pop_back();
      ++count;
      for (int k = 0; k < 4; ++k) {
        int g = face_across(f, k);
        if (!seen[g]) {
          seen[g] = 1;
          stack.push_back(g);
        }
      }
    }
    if (count != nf) throw Error("mesh surface is not connected");
  }

  // regions: both present, each edge-connected, separated by one closed curve
  int n_inflow = 0;
  for (Region r : region_) n_inflow += (r == Region::Inflow);
  if (n_inflow == 0) throw Error("Inflow region is empty");
  if (n_inflow == nf) throw Error("Shell region is empty");
  for (Region want : {Region::Shell, Region::Inflow}) {
    int start = -1;
    for (int f = 0; f < nf; ++f)
      if (region_[f] == want) {
        start = f;
        break;
      }
    std::vector<char> seen(nf, 0);
    std::vector<int> stack = {start};
    seen[start] = 1;
    int count = 0;
    while (!stack.empty()) {
      int f = stack.back();
      stack.pop_back();
      ++count;
      for (int k = 0; k < 4; ++k) {
        int g = face_across(f, k);
        if (!seen[g] && region_[g] == want) {
          seen[g] = 1;
          stack.push_back(g);
        }
      }
    }
    int total = want == Region::Inflow ? n_inflow : nf - n_inflow;
    if (count != total)
      throw Error(std::string(want == Region::Inflow ? "Inflow" : "Shell") +
                  " region is not edge-connected");
  }

  // boundary curve between the regions
  on_curve_.assign(nv, 0);
  touches_inflow_.assign(nv, 0);
  for (int f = 0; f < nf; ++f)
    if (region_[f] == Region::Inflow)
      for (int k = 0; k < 4; ++k) touches_inflow_[quad_[f][k]] = 1;
  std::vector<std::array<int, 2>> next(nv, {-1, -1});
  int n_curve_edges = 0;
  for (const MeshEdge& e : edge_) {
    if (region_[e.face[0]] == region_[e.face[1]]) continue;
    ++n_curve_edges;
    for (int v : {e.v0, e.v1}) {
      int other = v == e.v0 ? e.v1 : e.v0;
      if (next[v][0] == -1)
        next[v][0] = other;
      else if (next[v][1] == -1)
        next[v][1] = other;
      else
        throw Error("region boundary branches at vertex " + std::to_string(v));
    }
  }
  curve_.clear();
  {
    int start = -1;
    for (int v = 0; v < nv; ++v)
      if (next[v][0] != -1) {
        start = v;
        break;
      }
    int prev = -1, v = start;
    do {
      curve_.push_back(v);
      on_curve_[v] = 1;
      int nxt = next[v][0] == prev ? next[v][1] : next[v][0];
      if (nxt == -1)
        throw Error("region boundary is not a closed curve");
      prev = v;
      v = nxt;
    } while (v != start);
  }
  if ((int)curve_.size() != n_curve_edges)
    throw Error("region boundary is not a single closed curve");
}

std::vector<int> QuadMesh::vertex_valences() const {
  std::vector<int> val(num_vertices());
  for (int v = 0; v < num_vertices(); ++v) val[v] = valence(v);
  return val;
}

std::vector<int> QuadMesh::fan_from(int v, int f0) const {
  const std::vector<int>& fan = fan_[v];
  auto it = std::find(fan.begin(), fan.end(), f0);
  if (it == fan.end())
    throw Error("face " + std::to_string(f0) + " not incident to vertex " +
                std::to_string(v));
  std::vector<int> out(fan.size());
  int off = (int)(it - fan.begin());
  for (int i = 0; i < (int)fan.size(); ++i)
    out[i] = fan[(off + i) % fan.size()];
  return out;
}

int QuadMesh::corner_slot(int f, int v) const {
  for (int k = 0; k < 4; ++k)
    if (quad_[f][k] == v) return k;
  throw Error("vertex " + std::to_string(v) + " not in quad " +
              std::to_string(f));
}

int QuadMesh::edge_between(int va, int vb) const {
  for (int i = edge_lookup_ptr_[va]; i < edge_lookup_ptr_[va + 1]; ++i) {
    const MeshEdge& e = edge_[edge_lookup_[i]];
    if (e.v0 + e.v1 == va + vb && (e.v0 == va || e.v0 == vb))
      return edge_lookup_[i];
  }
  return -1;
}

int QuadMesh::face_across(int f, int slot) const {
  int a = quad_[f][slot], b = quad_[f][(slot + 1) & 3];
  const MeshEdge& e = edge_[edge_between(a, b)];
  return e.face[0] == f ? e.face[1] : e.face[0];
}

AdjacencyCase QuadMesh::classify_adjacency(int e, int f) const {
  if (e == f) return {PairCase::Identical, 0, 0};
  // shared edge first
  int shared_edges = 0;
  AdjacencyCase result;
  for (int k = 0; k < 4; ++k) {
    int ei = edge_between(quad_[e][k], quad_[e][(k + 1) & 3]);
    const MeshEdge& me = edge_[ei];
    int other = me.face[0] == e ? me.face[1] : me.face[0];
    if (other == f && me.face[0] != me.face[1]) {
      ++shared_edges;
      result = {PairCase::CommonEdge, k, me.face[0] == e ? me.slot[1] : me.slot[0]};
    }
  }
  if (shared_edges > 1)
    throw Error("quads " + std::to_string(e) + " and " + std::to_string(f) +
                " share more than one edge; mesh too degenerate for pairwise "
                "quadrature");
  if (shared_edges == 1) return result;

  int n_shared = 0;
  for (int k = 0; k < 4; ++k)
    for (int l = 0; l < 4; ++l)
      if (quad_[e][k] == quad_[f][l]) {
        ++n_shared;
        result = {PairCase::CommonVertex, k, l};
      }
  if (n_shared > 1)
    throw Error("quads " + std::to_string(e) + " and " + std::to_string(f) +
                " share " + std::to_string(n_shared) +
                " vertices but no edge; mesh too degenerate for pairwise "
                "quadrature");
  if (n_shared == 1) return result;
  return {PairCase::Disjoint, 0, 0};
}

void QuadMesh::perturb_interior(std::uint64_t seed, double amplitude) {
  for (int v = 0; v < num_vertices(); ++v) {
    if (touches_inflow_[v] || on_curve_[v]) continue;
    Vec3 d;
    for (int c = 0; c < 3; ++c)
      d[c] = amplitude * (2.0 * uniform_hash01(seed, (std::uint64_t)v,
                                               (std::uint64_t)c) -
                          1.0);
    vertex_[v] += d;
  }
}

QuadMesh QuadMesh::subdivided() const {
  const int nv = num_vertices();
  const int ne = num_edges();
  const int nf = num_quads();
  std::vector<Vec3> pos(nv + ne + nf);

  for (int f = 0; f < nf; ++f) {
    Vec3 c = Vec3::Zero();
    for (int k = 0; k < 4; ++k) c += vertex_[quad_[f][k]];
    pos[nv + ne + f] = c / 4.0;
  }
  for (int ei = 0; ei < ne; ++ei) {
    const MeshEdge& e = edge_[ei];
    pos[nv + ei] = (vertex_[e.v0] + vertex_[e.v1] + pos[nv + ne + e.face[0]] +
                    pos[nv + ne + e.face[1]]) /
                   4.0;
  }
  for (int v = 0; v < nv; ++v) {
    const double n = (double)valence(v);
    Vec3 esum = Vec3::Zero();
    for (int i = edge_lookup_ptr_[v]; i < edge_lookup_ptr_[v + 1]; ++i) {
      const MeshEdge& e = edge_[edge_lookup_[i]];
      esum += vertex_[e.v0 == v ? e.v1 : e.v0];
    }
    Vec3 fsum = Vec3::Zero();
    for (int f : fan_[v]) fsum += pos[nv + ne + f];
    pos[v] = (n - 2.0) / n * vertex_[v] + (esum + fsum) / (n * n);
  }

  std::vector<std::array<int, 4>> quads;
  std::vector<Region> regions;
  quads.reserve(4 * nf);
  regions.reserve(4 * nf);
  for (int f = 0; f < nf; ++f) {
    int fp = nv + ne + f;
    for (int k = 0; k < 4; ++k) {
      int v = quad_[f][k];
      int e_out = nv + edge_between(v, quad_[f][(k + 1) & 3]);
      int e_in = nv + edge_between(quad_[f][(k + 3) & 3], v);
      quads.push_back({v, e_out, fp, e_in});
      regions.push_back(region_[f]);
    }
  }
  return QuadMesh(std::move(pos), std::move(quads), std::move(regions));
}

namespace {

Region parse_region_tag(const std::string& tag, const std::string& where) {
  std::string t = lower(tag);
  if (t == "shell") return Region::Shell;
  if (t == "inflow") return Region::Inflow;
  throw Error("unknown region tag '" + tag + "' " + where);
}

QuadMesh parse_native(std::istream& in) {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 4>> quads;
  std::vector<Region> regions;
  std::string line;
  int lineno = 1;  // header consumed by caller
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok[0] == '#') continue;
    const std::string where = "at line " + std::to_string(lineno);
    if (tok == "v") {
      Vec3 p;
      if (!(ls >> p[0] >> p[1] >> p[2]))
        throw Error("malformed vertex line " + where);
      verts.push_back(p);
    } else if (tok == "q") {
      std::array<int, 4> q;
      std::string tag;
      if (!(ls >> q[0] >> q[1] >> q[2] >> q[3] >> tag))
        throw Error("malformed quad line " + where);
      quads.push_back(q);
      regions.push_back(parse_region_tag(tag, where));
    } else {
      throw Error("unknown record '" + tok + "' " + where);
    }
  }
  return QuadMesh(std::move(verts), std::move(quads), std::move(regions));
}

QuadMesh parse_obj(std::istream& in) {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 4>> quads;
  std::vector<Region> regions;
  Region current = Region::Shell;
  bool saw_group = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok[0] == '#') continue;
    const std::string where = "at line " + std::to_string(lineno);
    if (tok == "v") {
      Vec3 p;
      if (!(ls >> p[0] >> p[1] >> p[2]))
        throw Error("malformed vertex line " + where);
      verts.push_back(p);
    } else if (tok == "g" || tok == "usemtl" || tok == "o") {
      std::string name;
      ls >> name;
      if (lower(name).find("inflow") != std::string::npos)
        current = Region::Inflow;
      else
        current = Region::Shell;
      saw_group = true;
    } else if (tok == "f") {
      std::vector<int> idx;
      std::string ref;
      while (ls >> ref) {
        size_t slash = ref.find('/');
        int i = std::stoi(slash == std::string::npos ? ref
                                                     : ref.substr(0, slash));
        if (i <= 0)
          throw Error("only positive vertex references supported " + where);
        idx.push_back(i - 1);
      }
      if (idx.size() != 4)
        throw Error("face with " + std::to_string(idx.size()) +
                    " vertices " + where + " (quads required)");
      quads.push_back({idx[0], idx[1], idx[2], idx[3]});
      regions.push_back(current);
    }
    // vt/vn/s/mtllib records are irrelevant here
  }
  if (!saw_group)
    throw Error("polygon file defines no face groups (shell/inflow expected)");
  return QuadMesh(std::move(verts), std::move(quads), std::move(regions));
}

}  // namespace

QuadMesh load_quad_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh file '" + path + "'");
  // sniff the first meaningful line
  std::string line;
  std::streampos start = in.tellg();
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    if (ls >> tok && tok[0] != '#') {
      if (tok == "quadmesh") {
        int version = 0;
        if (!(ls >> version) || version != 1)
          throw Error("unsupported quadmesh version in '" + path + "'");
        return parse_native(in);
      }
      break;
    }
    start = in.tellg();
  }
  in.clear();
  in.seekg(0);
  return parse_obj(in);
}

void save_quad_mesh(const QuadMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file '" + path + "'");
  out << "quadmesh 1\n";
  char buf[128];
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const Vec3& p = mesh.position(v);
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", p[0], p[1], p[2]);
    out << buf;
  }
  for (int f = 0; f < mesh.num_quads(); ++f) {
    const auto& q = mesh.corners(f);
    out << "q " << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << ' '
        << (mesh.region(f) == Region::Shell ? "shell" : "inflow") << '\n';
  }
}

}  // namespace febe
