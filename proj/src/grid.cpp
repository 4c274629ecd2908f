#include "thinhom/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "thinhom/errors.hpp"

namespace thinhom {

SlabDomain SlabDomain::cell(int t) {
  if (t < 1) throw RangeError("cell size t must be a positive integer");
  return {Kind::Cell, {double(t), double(t)}};
}

SlabDomain SlabDomain::film(std::array<double, 2> omega) {
  if (!(omega[0] > 0.0) || !(omega[1] > 0.0))
    throw RangeError("film extents must be positive");
  return {Kind::Film, omega};
}

namespace {

Vec3 boundary_value(const LateralBC& bc, const Vec3& x) {
  if (std::holds_alternative<ZeroLateral>(bc)) return Vec3::Zero();
  if (const auto* a = std::get_if<AffineLateral>(&bc))
    return a->xi_alpha * Eigen::Vector2d(x[0], x[1]);
  return Vec3::Zero();
}

}  // namespace

double DiscreteField::constraint_residual() const {
  double worst = 0.0;
  if (const auto* ts = std::get_if<TangentSubspace>(&constraint)) {
    const Mat3 off = Mat3::Identity() - ts->frame.proj;
    for (const Vec3& v : values) worst = std::max(worst, (off * v).norm());
  } else if (const auto* mv = std::get_if<ManifoldValued>(&constraint)) {
    for (const Vec3& v : values)
      worst = std::max(worst, mv->manifold.equation_residual(v));
  }
  return worst;
}

double DiscreteField::lateral_bc_residual() const {
  if (std::holds_alternative<NoLateralBC>(lateral_bc)) return 0.0;
  double worst = 0.0;
  for (int k = 0; k < grid.nodes[2]; ++k)
    for (int j = 0; j < grid.nodes[1]; ++j)
      for (int i = 0; i < grid.nodes[0]; ++i) {
        if (!grid.lateral_boundary(i, j)) continue;
        const Vec3 want = boundary_value(lateral_bc, grid.node_position(i, j, k));
        worst = std::max(worst, (at(i, j, k) - want).norm());
      }
  return worst;
}

DiscreteField seed_field(const SlabDomain& domain, std::array<int, 3> grid_nodes,
                         FieldConstraint constraint, LateralBC bc,
                         const FieldInit& init) {
  if (grid_nodes[0] < 3 || grid_nodes[1] < 3 || grid_nodes[2] < 2)
    throw RangeError("seed_field: grid must be at least (3,3,2) nodes");

  if (const auto* ts = std::get_if<TangentSubspace>(&constraint)) {
    if (const auto* a = std::get_if<AffineLateral>(&bc)) {
      const Mat32 off = a->xi_alpha - ts->frame.proj * a->xi_alpha;
      if (off.norm() > 1e-12)
        throw IncompatibleBC("affine lateral datum has columns outside the tangent subspace");
    }
  }

  DiscreteField f;
  f.grid.nodes = grid_nodes;
  f.grid.length = {domain.extents[0], domain.extents[1], 1.0};
  f.domain = domain;
  f.constraint = std::move(constraint);
  f.lateral_bc = bc;
  f.values.assign(f.grid.num_nodes(), Vec3::Zero());

  if (const auto* a = std::get_if<AffineInit>(&init)) {
    for (int k = 0; k < grid_nodes[2]; ++k)
      for (int j = 0; j < grid_nodes[1]; ++j)
        for (int i = 0; i < grid_nodes[0]; ++i) {
          const Vec3 x = f.grid.node_position(i, j, k);
          f.at(i, j, k) = a->xi_alpha * Eigen::Vector2d(x[0], x[1]);
        }
  } else if (const auto* nd = std::get_if<NodalInit>(&init)) {
    if (nd->values.size() != f.values.size())
      throw RangeError("seed_field: nodal data size does not match grid");
    f.values = nd->values;
  }

  // enforce the lateral trace exactly
  if (!std::holds_alternative<NoLateralBC>(bc)) {
    for (int k = 0; k < grid_nodes[2]; ++k)
      for (int j = 0; j < grid_nodes[1]; ++j)
        for (int i = 0; i < grid_nodes[0]; ++i)
          if (f.grid.lateral_boundary(i, j))
            f.at(i, j, k) = boundary_value(bc, f.grid.node_position(i, j, k));
  }

  if (const auto* ts = std::get_if<TangentSubspace>(&f.constraint)) {
    for (Vec3& v : f.values) v = ts->frame.proj * v;
  } else if (const auto* mv = std::get_if<ManifoldValued>(&f.constraint)) {
    for (Vec3& v : f.values) v = nearest_point(mv->manifold, v);
  }
  return f;
}

DiscreteField refine_field(const DiscreteField& field) {
  DiscreteField out = field;
  const auto& n = field.grid.nodes;
  out.grid.nodes = {2 * n[0] - 1, 2 * n[1] - 1, 2 * n[2] - 1};
  out.values.assign(out.grid.num_nodes(), Vec3::Zero());
  for (int k = 0; k < out.grid.nodes[2]; ++k)
    for (int j = 0; j < out.grid.nodes[1]; ++j)
      for (int i = 0; i < out.grid.nodes[0]; ++i) {
        const int i0 = i / 2, j0 = j / 2, k0 = k / 2;
        const int i1 = std::min(i0 + i % 2, n[0] - 1);
        const int j1 = std::min(j0 + j % 2, n[1] - 1);
        const int k1 = std::min(k0 + k % 2, n[2] - 1);
        Vec3 v = Vec3::Zero();
        v += field.at(i0, j0, k0) + field.at(i1, j0, k0) + field.at(i0, j1, k0) +
             field.at(i1, j1, k0);
        v += field.at(i0, j0, k1) + field.at(i1, j0, k1) + field.at(i0, j1, k1) +
             field.at(i1, j1, k1);
        out.values[out.grid.node_index(i, j, k)] = 0.125 * v;
      }
  if (const auto* mv = std::get_if<ManifoldValued>(&out.constraint))
    for (Vec3& v : out.values) v = nearest_point(mv->manifold, v);
  return out;
}

Vec3 sample_field(const DiscreteField& field, const Vec3& x) {
  const auto& g = field.grid;
  const auto h = g.spacing();
  double loc[3];
  int idx[3];
  for (int d = 0; d < 3; ++d) {
    const double t = (x[d] + 0.5 * g.length[d]) / h[d];
    int c = static_cast<int>(std::floor(t));
    c = std::clamp(c, 0, g.nodes[d] - 2);
    idx[d] = c;
    loc[d] = std::clamp(t - c, 0.0, 1.0);
  }
  Vec3 v = Vec3::Zero();
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) {
        const double w = (di ? loc[0] : 1 - loc[0]) * (dj ? loc[1] : 1 - loc[1]) *
                         (dk ? loc[2] : 1 - loc[2]);
        v += w * field.values[g.node_index(idx[0] + di, idx[1] + dj, idx[2] + dk)];
      }
  return v;
}

void save_field(const DiscreteField& field, std::ostream& out) {
  const auto& g = field.grid;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g,%.17g\n", g.nodes[0], g.nodes[1],
                g.nodes[2], g.length[0], g.length[1]);
  out << buf;
  for (int k = 0; k < g.nodes[2]; ++k)
    for (int j = 0; j < g.nodes[1]; ++j)
      for (int i = 0; i < g.nodes[0]; ++i) {
        const Vec3 x = g.node_position(i, j, k);
        const Vec3& v = field.at(i, j, k);
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g\n",
                      x[0], x[1], x[2], v[0], v[1], v[2]);
        out << buf;
      }
}

DiscreteField load_field(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw RangeError("field file: missing header");
  DiscreteField f;
  {
    std::istringstream hs(header);
    std::string tok;
    int vals_i[3];
    double vals_d[2];
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(hs, tok, ',')) throw RangeError("field file: bad header");
      vals_i[i] = std::stoi(tok);
    }
    for (int i = 0; i < 2; ++i) {
      if (!std::getline(hs, tok, ',')) throw RangeError("field file: bad header");
      vals_d[i] = std::stod(tok);
    }
    f.grid.nodes = {vals_i[0], vals_i[1], vals_i[2]};
    f.grid.length = {vals_d[0], vals_d[1], 1.0};
    f.domain = SlabDomain{SlabDomain::Kind::Film, {vals_d[0], vals_d[1]}};
  }
  f.values.reserve(f.grid.num_nodes());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    double x, y, z, vx, vy, vz;
    if (!(ls >> x >> y >> z >> vx >> vy >> vz))
      throw RangeError("field file: bad node line");
    f.values.emplace_back(vx, vy, vz);
  }
  if (std::int64_t(f.values.size()) != f.grid.num_nodes())
    throw RangeError("field file: node count does not match header");
  return f;
}

}  // namespace thinhom
