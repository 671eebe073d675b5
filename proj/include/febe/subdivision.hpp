#pragma once

#include <map>
#include <vector>

#include <Eigen/Core>

#include "febe/mesh.hpp"

namespace febe {

// coefficient array: one row per control vertex (geometry or any vector field)
using Coeffs = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

// One quad element with its control stencil. The parametric frame has corner
// `rot` of the face at (0,0); for extraordinary patches that corner is the EV.
// Regular stencils hold 16 ids in grid order (index 4*j+i, i along u); EV
// stencils hold 2N+8 ids in canonical ring order
//   [v0, E_0, D_0, E_1, D_1, ..., E_{N-1}, D_{N-1}, q0..q6]
// where E_j/D_j are the edge/diagonal neighbors of faces around v0 starting
// with this face and q0..q6 complete the bicubic grid around the face.
struct SubdivisionPatch {
  int face = -1;
  int rot = 0;
  bool extraordinary = false;
  int valence = 4;
  std::vector<int> stencil;
};

// basis weight rows at one parametric point: value, d/du, d/dv, d2/duu,
// d2/dudv, d2/dvv over the patch stencil (rows beyond `order` are untouched)
struct BasisValues {
  Eigen::Matrix<double, 6, Eigen::Dynamic> w;
  int order = 0;
  int n() const { return (int)w.cols(); }
};

struct Jet2 {
  Vec3 x = Vec3::Zero();
  Vec3 xu = Vec3::Zero(), xv = Vec3::Zero();
  Vec3 xuu = Vec3::Zero(), xuv = Vec3::Zero(), xvv = Vec3::Zero();
};

// square control-ring refinement matrix for one extraordinary valence
struct SubdivisionMatrix {
  int valence = 0;
  Eigen::MatrixXd A;  // (2N+8) x (2N+8), canonical ordering as above
};

class PatchSet {
public:
  // Builds one patch per quad. If any quad touches more than one
  // extraordinary vertex (e.g. a raw cube), a single global refinement is
  // applied first; the working mesh is owned by the PatchSet.
  static PatchSet build(QuadMesh mesh);

  const QuadMesh& mesh() const { return mesh_; }
  bool preliminary_refinement() const { return refined_; }
  int num_patches() const { return (int)patch_.size(); }
  const SubdivisionPatch& patch(int f) const { return patch_[f]; }
  const Coeffs& reference() const { return reference_; }

  // basis weights at patch-frame (u,v); throws for order >= 1 exactly at an
  // EV corner (unbounded derivatives)
  void basis(const SubdivisionPatch& p, double u, double v, int order,
             BasisValues& out) const;

  // basis weights at n points, one column per point: val is K x n; for
  // order 1, du and dv likewise. Extraordinary patches are grouped by
  // virtual-refinement cell so each group costs a single dense product with
  // the cached tile operator instead of one lookup per point.
  void basis_batch(const SubdivisionPatch& p, const double* u, const double* v,
                   int n, int order, Eigen::MatrixXd& val, Eigen::MatrixXd& du,
                   Eigen::MatrixXd& dv) const;

  // limit-surface jet of the field with coefficients C
  Jet2 evaluate(const SubdivisionPatch& p, const Coeffs& C, double u, double v,
                int order) const;

  // |current area element| / |reference area element| at (u,v)
  double surface_jacobian(const SubdivisionPatch& p, const Coeffs& current,
                          double u, double v) const;

  // order-0 weights of the limit position at the patch's (0,0) corner
  // (defined for regular and EV corners alike)
  Eigen::VectorXd corner_limit_weights(const SubdivisionPatch& p) const;

  static SubdivisionMatrix subdivision_matrix(int valence);

  // EV pipeline evaluated over the canonical stencil ordering, independent of
  // any mesh (valence 4 allowed; must then agree with the regular bicubic)
  static void canonical_ev_basis(int valence, double u, double v, int order,
                                 BasisValues& out);

  // Deepest virtual-refinement level the evaluator will use before clamping;
  // parameters closer than 2^-max_level to an EV corner evaluate on the
  // deepest ring (position error far below double precision).
  static constexpr int max_level = 48;

  // writes tabulated basis rows for one patch at the given points:
  // int64 header {patch id, order, point count, stencil size} followed by
  // row-major 64-bit floats, per point: u, v, then (rows x stencil) weights
  void dump_basis(const std::string& path, int face,
                  const std::vector<std::pair<double, double>>& uv,
                  int order) const;

private:
  struct EvTables {
    Eigen::MatrixXd A;
    Eigen::VectorXd limit;                            // corner limit row
    std::vector<std::array<Eigen::MatrixXd, 3>> tile;  // [level-1][tile], 16 x K
  };

  void build_patch(int f);
  const EvTables& tables(int valence) const;

  QuadMesh mesh_;
  bool refined_ = false;
  Coeffs reference_;
  std::vector<SubdivisionPatch> patch_;
  std::map<int, EvTables> ev_;
};

// Smallest number of virtual refinements after which every point of the
// order-q tensor Gauss rule on the unit square lies outside the sub-element
// touching the EV corner. Monotone nondecreasing in q.
int required_levels(int q, int valence);

}  // namespace febe
