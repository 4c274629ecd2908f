#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "thinhom/geometry.hpp"

namespace thinhom {

/// Slab domains of unit height: the finite cell (tQ')x(-1/2,1/2) or the
/// rescaled film omega x (-1/2,1/2).
struct SlabDomain {
  enum class Kind { Cell, Film };
  Kind kind = Kind::Cell;
  std::array<double, 2> extents{1.0, 1.0};  // in-plane (Lx, Ly), centered at 0

  static SlabDomain cell(int t);
  static SlabDomain film(std::array<double, 2> omega = {1.0, 1.0});
  double volume() const { return extents[0] * extents[1]; }  // height is 1
};

/// Uniform tensor grid of nodes over a slab domain (centered box).
struct Grid {
  std::array<int, 3> nodes{2, 2, 2};
  std::array<double, 3> length{1.0, 1.0, 1.0};

  std::array<double, 3> spacing() const {
    return {length[0] / (nodes[0] - 1), length[1] / (nodes[1] - 1),
            length[2] / (nodes[2] - 1)};
  }
  std::int64_t num_nodes() const {
    return std::int64_t(nodes[0]) * nodes[1] * nodes[2];
  }
  std::int64_t num_elements() const {
    return std::int64_t(nodes[0] - 1) * (nodes[1] - 1) * (nodes[2] - 1);
  }
  std::int64_t node_index(int i, int j, int k) const {
    return (std::int64_t(k) * nodes[1] + j) * nodes[0] + i;
  }
  Vec3 node_position(int i, int j, int k) const {
    const auto h = spacing();
    return {-0.5 * length[0] + i * h[0], -0.5 * length[1] + j * h[1],
            -0.5 * length[2] + k * h[2]};
  }
  bool lateral_boundary(int i, int j) const {
    return i == 0 || i == nodes[0] - 1 || j == 0 || j == nodes[1] - 1;
  }
};

struct FreeConstraint {};
struct TangentSubspace {
  TangentFrame frame;
};
struct ManifoldValued {
  ManifoldDescriptor manifold;
};
using FieldConstraint = std::variant<FreeConstraint, TangentSubspace, ManifoldValued>;

struct ZeroLateral {};
struct AffineLateral {
  Mat32 xi_alpha = Mat32::Zero();  // boundary nodes get xi_alpha * x_alpha
};
struct NoLateralBC {};
using LateralBC = std::variant<ZeroLateral, AffineLateral, NoLateralBC>;

/// Nodal 3-vector field, piecewise trilinear, tagged with its constraint and
/// lateral boundary condition. Value type; cheap to copy at desk scale.
struct DiscreteField {
  Grid grid;
  SlabDomain domain;
  FieldConstraint constraint = FreeConstraint{};
  LateralBC lateral_bc = NoLateralBC{};
  std::vector<Vec3> values;

  Vec3& at(int i, int j, int k) { return values[grid.node_index(i, j, k)]; }
  const Vec3& at(int i, int j, int k) const {
    return values[grid.node_index(i, j, k)];
  }
  /// Residual of the field's own invariants (constraint + lateral bc);
  /// 0 for Free/None.
  double constraint_residual() const;
  double lateral_bc_residual() const;
};

struct ZeroInit {};
struct AffineInit {
  Mat32 xi_alpha = Mat32::Zero();
};
struct NodalInit {
  std::vector<Vec3> values;
};
using FieldInit = std::variant<ZeroInit, AffineInit, NodalInit>;

/// Build a field satisfying all DiscreteField invariants. Throws
/// IncompatibleBC when an affine lateral datum leaves the tangent subspace,
/// RangeError for grids below (3,3,2).
DiscreteField seed_field(const SlabDomain& domain, std::array<int, 3> grid_nodes,
                         FieldConstraint constraint, LateralBC bc,
                         const FieldInit& init);

/// Trilinear interpolation onto the dyadically refined grid
/// (2N1-1, 2N2-1, 2N3-1); manifold-valued nodes are re-projected.
DiscreteField refine_field(const DiscreteField& field);

/// Trilinear evaluation at an arbitrary point of the closed box.
Vec3 sample_field(const DiscreteField& field, const Vec3& x);

/// Flat text format: header "N1,N2,N3,Lx,Ly" then one "x y z vx vy vz" line
/// per node (x3 fastest is NOT used; node order is i fastest, then j, then k).
void save_field(const DiscreteField& field, std::ostream& out);
DiscreteField load_field(std::istream& in);

}  // namespace thinhom
