#include "thinhom/cell.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "thinhom/parallel.hpp"

namespace thinhom {

namespace {

TangentFrame validated_frame(const CellProblem& p) {
  const TangentFrame frame = tangent_frame(p.manifold, p.base_point);
  const Mat32 off = p.xi_alpha - frame.proj * p.xi_alpha;
  if (off.norm() > 1e-10)
    throw IncompatibleProblem("cell problem: xi_alpha columns are not tangent at s");
  if (p.t < 1) throw IncompatibleProblem("cell problem: t must be >= 1");
  if (p.n < 4) throw IncompatibleProblem("cell problem: n must be >= 4");
  return frame;
}

}  // namespace

CellSolution solve_cell(const CellProblem& problem) {
  const TangentFrame frame = validated_frame(problem);
  const SlabDomain domain = SlabDomain::cell(problem.t);
  const std::array<int, 3> nodes{problem.t * problem.n + 1,
                                 problem.t * problem.n + 1, problem.n + 1};

  DiscreteField field;
  DensityParams density;
  std::optional<TangentFrame> coord_frame;
  if (problem.formulation == CellFormulation::Constrained) {
    field = seed_field(domain, nodes, TangentSubspace{frame}, ZeroLateral{},
                       ZeroInit{});
    density = DensityParams{problem.integrand, std::nullopt, 1.0, problem.epsilon};
    coord_frame = frame;
  } else {
    field = seed_field(domain, nodes, FreeConstraint{}, ZeroLateral{}, ZeroInit{});
    density = DensityParams{problem.integrand, frame, 1.0, problem.epsilon};
  }

  const AssemblyPlan plan =
      make_plan(field, density, problem.xi_alpha, GradientScale{}, problem.quad);
  const SolveStats stats =
      minimize_on_subspace(plan, coord_frame, field.values, problem.solver);

  CellSolution sol;
  sol.value = stats.energy;
  sol.argmin = std::move(field);
  sol.gradient_residual = stats.residual;
  sol.iterations = stats.iterations;
  sol.converged = stats.converged;
  sol.formulation = problem.formulation;
  sol.t = problem.t;
  sol.n = problem.n;
  sol.epsilon = problem.epsilon;
  sol.log = stats.log;
  return sol;
}

EqualityReport check_constrained_penalized_equality(CellProblem problem) {
  EqualityReport rep;
  problem.formulation = CellFormulation::Constrained;
  rep.constrained = solve_cell(problem);
  problem.formulation = CellFormulation::Penalized;
  rep.penalized = solve_cell(problem);
  rep.relative_gap = std::abs(rep.constrained.value - rep.penalized.value) /
                     std::max(rep.constrained.value, 1e-12);
  return rep;
}

HomDensityEstimate estimate_hom_density(const CellProblem& base,
                                        const std::vector<int>& t_list) {
  if (t_list.empty()) throw IncompatibleProblem("estimate_hom_density: empty t list");
  for (size_t i = 1; i < t_list.size(); ++i)
    if (t_list[i] <= t_list[i - 1])
      throw IncompatibleProblem("estimate_hom_density: t_list must be increasing");

  HomDensityEstimate est;
  for (int t : t_list) {
    CellProblem p = base;
    p.t = t;
    p.formulation = CellFormulation::Penalized;
    const CellSolution sol = solve_cell(p);
    est.per_t.emplace_back(t, sol.value);
    est.iterations += sol.iterations;
  }

  const size_t k = est.per_t.size();
  const double v_last = est.per_t[k - 1].second;
  if (k == 1) {
    est.estimate = v_last;
    est.converged = true;
    return est;
  }

  const double v_prev = est.per_t[k - 2].second;
  const double flat_tol = std::max(0.01 * std::abs(v_last), 1e-8);
  if (std::abs(v_last - v_prev) <= flat_tol) {
    est.estimate = v_last;
    est.converged = true;
    return est;
  }

  // Richardson in 1/t on the last pair
  const double t1 = est.per_t[k - 2].first, t2 = est.per_t[k - 1].first;
  const double rich = (t2 * v_last - t1 * v_prev) / (t2 - t1);
  est.extrapolated = true;
  if (k == 2) {
    est.estimate = rich;
    est.converged = false;  // no second extrapolant to cross-check
    return est;
  }

  // v = m + c/t + d/t^2 through the last three values; Lagrange at 1/t = 0
  const double x0 = 1.0 / est.per_t[k - 3].first;
  const double x1 = 1.0 / t1, x2 = 1.0 / t2;
  const double v0 = est.per_t[k - 3].second;
  const double fit = v0 * (x1 * x2) / ((x0 - x1) * (x0 - x2)) +
                     v_prev * (x0 * x2) / ((x1 - x0) * (x1 - x2)) +
                     v_last * (x0 * x1) / ((x2 - x0) * (x2 - x1));
  est.estimate = fit;
  est.converged = std::abs(fit - rich) <= std::max(0.01 * std::abs(fit), 1e-8);
  return est;
}

std::int64_t DensityTable::entries_per_frame() const {
  return std::int64_t(m) * m * m * m;
}

std::int64_t DensityTable::index(int k, const std::array<int, 4>& idx) const {
  std::int64_t lin = 0;
  for (int a = 0; a < 4; ++a) lin = lin * m + idx[a];
  return k * entries_per_frame() + lin;
}

std::array<double, 4> DensityTable::coords_at(const std::array<int, 4>& idx) const {
  const double step = m > 1 ? 2.0 * xi_max / (m - 1) : 0.0;
  std::array<double, 4> c;
  for (int a = 0; a < 4; ++a) c[a] = -xi_max + step * idx[a];
  return c;
}

Mat32 DensityTable::xi_from_coords(int k, const std::array<double, 4>& c) const {
  Mat32 xi = Mat32::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) xi.col(j) += c[2 * i + j] * frames[k].basis[i];
  return xi;
}

std::array<double, 4> DensityTable::coords_of(int k, const Mat32& xi) const {
  std::array<double, 4> c;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[2 * i + j] = frames[k].basis[i].dot(xi.col(j));
  return c;
}

int DensityTable::nearest_base(const Vec3& s) const {
  int best = 0;
  double best_d = (s - frames[0].point).squaredNorm();
  for (int k = 1; k < int(frames.size()); ++k) {
    const double d = (s - frames[k].point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

bool DensityTable::in_range(const std::array<double, 4>& c, double margin) const {
  for (double v : c)
    if (std::abs(v) > xi_max - margin) return false;
  return true;
}

namespace {

struct InterpCell {
  std::array<int, 4> base;
  std::array<double, 4> theta;
};

InterpCell locate(const DensityTable& t, std::array<double, 4>& c, int* clamped) {
  InterpCell cell;
  const double step = 2.0 * t.xi_max / (t.m - 1);
  for (int a = 0; a < 4; ++a) {
    if (std::abs(c[a]) > t.xi_max * (1.0 + 1e-12)) {
      if (clamped) ++*clamped;
    }
    c[a] = std::clamp(c[a], -t.xi_max, t.xi_max);
    const double u = (c[a] + t.xi_max) / step;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, t.m - 2);
    cell.base[a] = i;
    cell.theta[a] = std::clamp(u - i, 0.0, 1.0);
  }
  return cell;
}

}  // namespace

double DensityTable::query_coords(int k, std::array<double, 4> c, int* clamped) const {
  if (m < 2) return values[index(k, {0, 0, 0, 0})];
  const InterpCell cell = locate(*this, c, clamped);
  double v = 0.0;
  for (int corner = 0; corner < 16; ++corner) {
    double w = 1.0;
    std::array<int, 4> idx;
    for (int a = 0; a < 4; ++a) {
      const int bit = (corner >> a) & 1;
      w *= bit ? cell.theta[a] : 1.0 - cell.theta[a];
      idx[a] = cell.base[a] + bit;
    }
    v += w * values[index(k, idx)];
  }
  return v;
}

double DensityTable::query_coords_grad(int k, std::array<double, 4> c,
                                       std::array<double, 4>& dc, int* clamped) const {
  dc = {0, 0, 0, 0};
  if (m < 2) return values[index(k, {0, 0, 0, 0})];
  const double step = 2.0 * xi_max / (m - 1);
  const InterpCell cell = locate(*this, c, clamped);
  double v = 0.0;
  for (int corner = 0; corner < 16; ++corner) {
    std::array<int, 4> idx;
    double w = 1.0;
    for (int a = 0; a < 4; ++a) {
      const int bit = (corner >> a) & 1;
      w *= bit ? cell.theta[a] : 1.0 - cell.theta[a];
      idx[a] = cell.base[a] + bit;
    }
    const double val = values[index(k, idx)];
    v += w * val;
    for (int a = 0; a < 4; ++a) {
      double dw = 1.0;
      for (int b = 0; b < 4; ++b) {
        const int bit = (corner >> b) & 1;
        if (b == a)
          dw *= bit ? 1.0 : -1.0;
        else
          dw *= bit ? cell.theta[b] : 1.0 - cell.theta[b];
      }
      dc[a] += dw * val / step;
    }
  }
  return v;
}

double DensityTable::query(const Vec3& s, const Mat32& xi_tangent, int* clamped) const {
  const int k = nearest_base(s);
  return query_coords(k, coords_of(k, xi_tangent), clamped);
}

DensityTable build_density_table(const ManifoldDescriptor& manifold,
                                 const TableBuildParams& params) {
  if (params.m < 3) throw RangeError("density table needs m >= 3 points per axis");
  if (params.base_points.empty())
    throw RangeError("density table needs at least one base point");

  DensityTable table;
  table.manifold = manifold;
  table.p = params.integrand.p;
  table.growth = growth_constants(params.integrand);
  table.envelope_C = fbar_growth_constant(params.integrand);
  table.xi_max = params.xi_max;
  table.m = params.m;
  table.t_list = params.t_list;
  table.n = params.n;
  for (const Vec3& s : params.base_points)
    table.frames.push_back(tangent_frame(manifold, s));

  const int K = static_cast<int>(table.frames.size());
  const std::int64_t per = table.entries_per_frame();
  table.values.assign(K * per, 0.0);
  table.converged.assign(K * per, 0);

  const std::int64_t total = K * per;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t lin = 0; lin < total; ++lin) {
    const int k = static_cast<int>(lin / per);
    std::int64_t rest = lin % per;
    std::array<int, 4> idx;
    for (int a = 3; a >= 0; --a) {
      idx[a] = static_cast<int>(rest % table.m);
      rest /= table.m;
    }
    CellProblem p;
    p.manifold = manifold;
    p.base_point = table.frames[k].point;
    p.xi_alpha = table.xi_from_coords(k, table.coords_at(idx));
    p.n = params.n;
    p.integrand = params.integrand;
    p.epsilon = params.epsilon;
    p.quad = params.quad;
    p.solver = params.solver;
    const HomDensityEstimate est = estimate_hom_density(p, params.t_list);
    table.values[lin] = est.estimate;
    table.converged[lin] = est.converged ? 1 : 0;
  }

  // growth envelope with the certified constants
  for (int k = 0; k < K; ++k)
    for (std::int64_t e = 0; e < per; ++e) {
      std::int64_t rest = e;
      std::array<int, 4> idx;
      for (int a = 3; a >= 0; --a) {
        idx[a] = static_cast<int>(rest % table.m);
        rest /= table.m;
      }
      const Mat32 xi = table.xi_from_coords(k, table.coords_at(idx));
      const double xn = std::pow(xi.squaredNorm(), 0.5 * table.p);
      const double v = table.values[k * per + e];
      if (v < xn / table.envelope_C - 1e-8 ||
          v > table.envelope_C * (1.0 + xn) + 1e-8)
        ++table.envelope_violations;
    }
  return table;
}

void save_table(const DensityTable& table, const std::string& csv_path,
                const std::string& meta_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw Error("cannot open " + csv_path);
  csv << "s_index,c0,c1,c2,c3,value,converged,t_max,n\n";
  const int t_max = table.t_list.back();
  char buf[256];
  for (int k = 0; k < int(table.frames.size()); ++k)
    for (std::int64_t e = 0; e < table.entries_per_frame(); ++e) {
      std::int64_t rest = e;
      std::array<int, 4> idx;
      for (int a = 3; a >= 0; --a) {
        idx[a] = static_cast<int>(rest % table.m);
        rest /= table.m;
      }
      const auto c = table.coords_at(idx);
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%d\n",
                    k, c[0], c[1], c[2], c[3],
                    table.values[k * table.entries_per_frame() + e],
                    int(table.converged[k * table.entries_per_frame() + e]), t_max,
                    table.n);
      csv << buf;
    }

  nlohmann::json meta;
  meta["manifold"]["kind"] = table.manifold.name();
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          meta["manifold"]["radius"] = k.radius;
        } else if constexpr (std::is_same_v<T, Torus>) {
          meta["manifold"]["R"] = k.major_radius;
          meta["manifold"]["r"] = k.minor_radius;
        } else {
          meta["manifold"]["point"] = {k.point[0], k.point[1], k.point[2]};
          meta["manifold"]["normal"] = {k.normal[0], k.normal[1], k.normal[2]};
        }
      },
      table.manifold.kind());
  meta["p"] = table.p;
  meta["alpha"] = table.growth.alpha;
  meta["beta"] = table.growth.beta;
  meta["envelope_C"] = table.envelope_C;
  meta["xi_max"] = table.xi_max;
  meta["m"] = table.m;
  meta["t_list"] = table.t_list;
  meta["n"] = table.n;
  meta["envelope_violations"] = table.envelope_violations;
  for (const auto& f : table.frames) {
    nlohmann::json jf;
    jf["point"] = {f.point[0], f.point[1], f.point[2]};
    jf["basis"] = {{f.basis[0][0], f.basis[0][1], f.basis[0][2]},
                   {f.basis[1][0], f.basis[1][1], f.basis[1][2]}};
    meta["frames"].push_back(jf);
  }
  std::ofstream mf(meta_path);
  if (!mf) throw Error("cannot open " + meta_path);
  mf << meta.dump(2) << "\n";
}

DensityTable load_table(const std::string& csv_path, const std::string& meta_path) {
  std::ifstream mf(meta_path);
  if (!mf) throw Error("cannot open " + meta_path);
  nlohmann::json meta = nlohmann::json::parse(mf);

  DensityTable table;
  const std::string kind = meta.at("manifold").at("kind");
  if (kind == "sphere")
    table.manifold = ManifoldDescriptor::sphere(meta["manifold"]["radius"]);
  else if (kind == "torus")
    table.manifold =
        ManifoldDescriptor::torus(meta["manifold"]["R"], meta["manifold"]["r"]);
  else {
    const auto& pt = meta["manifold"]["point"];
    const auto& nr = meta["manifold"]["normal"];
    table.manifold = ManifoldDescriptor::plane(Vec3(pt[0], pt[1], pt[2]),
                                               Vec3(nr[0], nr[1], nr[2]));
  }
  table.p = meta.at("p");
  table.growth = {meta.at("alpha"), meta.at("beta")};
  table.envelope_C = meta.at("envelope_C");
  table.xi_max = meta.at("xi_max");
  table.m = meta.at("m");
  table.t_list = meta.at("t_list").get<std::vector<int>>();
  table.n = meta.at("n");
  table.envelope_violations = meta.at("envelope_violations");
  for (const auto& jf : meta.at("frames")) {
    TangentFrame f;
    f.point = Vec3(jf["point"][0], jf["point"][1], jf["point"][2]);
    for (int i = 0; i < 2; ++i)
      f.basis[i] = Vec3(jf["basis"][i][0], jf["basis"][i][1], jf["basis"][i][2]);
    f.proj = f.basis[0] * f.basis[0].transpose() +
             f.basis[1] * f.basis[1].transpose();
    table.frames.push_back(f);
  }

  const std::int64_t total =
      std::int64_t(table.frames.size()) * table.entries_per_frame();
  table.values.assign(total, 0.0);
  table.converged.assign(total, 0);

  std::ifstream csv(csv_path);
  if (!csv) throw Error("cannot open " + csv_path);
  std::string line;
  std::getline(csv, line);  // header
  std::int64_t row = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    int k, conv, t_max, n;
    double c0, c1, c2, c3, v;
    if (!(ls >> k >> c0 >> c1 >> c2 >> c3 >> v >> conv >> t_max >> n))
      throw Error("bad table row: " + line);
    if (row >= total) throw Error("table CSV has more rows than meta declares");
    table.values[row] = v;
    table.converged[row] = static_cast<std::uint8_t>(conv);
    ++row;
  }
  if (row != total) throw Error("table CSV row count does not match meta");
  return table;
}

}  // namespace thinhom
