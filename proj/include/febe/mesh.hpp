#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace febe {

using Vec3 = Eigen::Vector3d;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Region : std::uint8_t { Shell = 0, Inflow = 1 };

enum class PairCase { Identical, CommonEdge, CommonVertex, Disjoint };

// Relative position of an ordered element pair plus the alignment data the
// singular quadrature transforms need. For CommonEdge, `a`/`b` are the local
// edge indices (edge k runs from corner k to corner k+1); the edge is
// traversed forward in the first face and backward in the second, consistent
// orientation being guaranteed by the manifold check. For CommonVertex they
// are the local corner indices of the shared vertex.
struct AdjacencyCase {
  PairCase kind = PairCase::Disjoint;
  int a = 0;
  int b = 0;
};

struct MeshEdge {
  int v0 = -1, v1 = -1;  // v0 < v1
  int face[2] = {-1, -1};
  int slot[2] = {-1, -1};  // local edge index within face[i]
};

// Closed orientable all-quad 2-manifold with Shell/Inflow face tags.
// Connectivity is built and all structural invariants are checked on
// construction; geometric data may be perturbed afterwards without
// invalidating it.
class QuadMesh {
public:
  QuadMesh() = default;
  QuadMesh(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> quads,
           std::vector<Region> regions);

  int num_vertices() const { return (int)vertex_.size(); }
  int num_quads() const { return (int)quad_.size(); }
  const Vec3& position(int v) const { return vertex_[v]; }
  void set_position(int v, const Vec3& p) { vertex_[v] = p; }
  const std::array<int, 4>& corners(int f) const { return quad_[f]; }
  int corner(int f, int k) const { return quad_[f][k & 3]; }
  Region region(int f) const { return region_[f]; }

  const std::vector<MeshEdge>& edges() const { return edge_; }
  int num_edges() const { return (int)edge_.size(); }
  int euler_characteristic() const {
    return num_vertices() - num_edges() + num_quads();
  }

  int valence(int v) const { return (int)fan_[v].size(); }
  std::vector<int> vertex_valences() const;

  // faces incident to v in counter-clockwise order (seen from outside)
  const std::vector<int>& faces_around(int v) const { return fan_[v]; }
  // same fan, rotated to start at f0
  std::vector<int> fan_from(int v, int f0) const;

  int corner_slot(int f, int v) const;
  int edge_between(int va, int vb) const;  // -1 if absent
  int face_across(int f, int slot) const;

  // ordered vertex loop separating the Shell and Inflow regions
  const std::vector<int>& boundary_curve() const { return curve_; }
  bool on_boundary_curve(int v) const { return on_curve_[v] != 0; }
  bool touches_inflow(int v) const { return touches_inflow_[v] != 0; }

  AdjacencyCase classify_adjacency(int e, int f) const;

  // Offsets every vertex that lies strictly inside the Shell region by a
  // uniform sample from [-amplitude, amplitude]^3 keyed by (seed, vertex id),
  // independent of iteration order.
  void perturb_interior(std::uint64_t seed, double amplitude);

  // One global Catmull-Clark refinement step. Children inherit the parent
  // region; vertex points keep their index, edge/face points are appended.
  QuadMesh subdivided() const;

private:
  void finalize();

  std::vector<Vec3> vertex_;
  std::vector<std::array<int, 4>> quad_;
  std::vector<Region> region_;

  std::vector<MeshEdge> edge_;
  std::vector<std::vector<int>> fan_;
  std::vector<int> edge_lookup_;  // CSR over vertices, see finalize()
  std::vector<int> edge_lookup_ptr_;
  std::vector<int> curve_;
  std::vector<char> on_curve_;
  std::vector<char> touches_inflow_;
};

QuadMesh load_quad_mesh(const std::string& path);
void save_quad_mesh(const QuadMesh& mesh, const std::string& path);

// counter-based generator used for reproducible perturbations
double uniform_hash01(std::uint64_t seed, std::uint64_t k0, std::uint64_t k1);

}  // namespace febe
