#include "fracpat/fem.hpp"

#include <ostream>
#include <stdexcept>
#include <vector>

#include "fracpat/format.hpp"

namespace fracpat {

Eigen::VectorXd simpson_weights(int nt, double T) {
  if (nt < 2 || nt % 2 != 0) throw std::invalid_argument("simpson_weights: nt must be even and >= 2");
  if (!(T > 0.0)) throw std::invalid_argument("simpson_weights: T must be positive");
  const double dt = T / nt;
  Eigen::VectorXd w(nt + 1);
  for (int j = 0; j <= nt; ++j) {
    if (j == 0 || j == nt) {
      w[j] = dt / 3.0;
    } else {
      w[j] = (j % 2 == 1 ? 4.0 : 2.0) * dt / 3.0;
    }
  }
  return w;
}

SparseMatrix restrict_matrix(const SparseMatrix& a, const std::vector<int>& index) {
  std::vector<int> pos(a.rows(), -1);
  for (std::size_t k = 0; k < index.size(); ++k) pos[index[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(a.nonZeros());
  for (int col = 0; col < a.outerSize(); ++col) {
    if (pos[col] < 0) continue;
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
      if (pos[it.row()] < 0) continue;
      trips.emplace_back(pos[it.row()], pos[col], it.value());
    }
  }
  const auto n = static_cast<Eigen::Index>(index.size());
  SparseMatrix out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

FemMatrices assemble(const Mesh& mesh, double gamma, double delta, int nt, double T) {
  if (!(gamma > 0.0) || !(delta > 0.0)) {
    throw std::invalid_argument("assemble: gamma and delta must be positive");
  }
  const int n = mesh.num_nodes();
  std::vector<Eigen::Triplet<double>> mt, kt, bt;
  mt.reserve(mesh.triangles.size() * 9);
  kt.reserve(mesh.triangles.size() * 9);

  for (const auto& tri : mesh.triangles) {
    const double area = signed_area(mesh, tri);
    if (!(area > 0.0)) throw std::logic_error("assemble: degenerate or inverted triangle");
    // gradients of the barycentric coordinates
    double gx[3], gy[3];
    for (int a = 0; a < 3; ++a) {
      const Point& p1 = mesh.nodes[tri[(a + 1) % 3]];
      const Point& p2 = mesh.nodes[tri[(a + 2) % 3]];
      gx[a] = (p1.y - p2.y) / (2.0 * area);
      gy[a] = (p2.x - p1.x) / (2.0 * area);
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        mt.emplace_back(tri[a], tri[b], area / 12.0 * (a == b ? 2.0 : 1.0));
        kt.emplace_back(tri[a], tri[b], area * (gx[a] * gx[b] + gy[a] * gy[b]));
      }
    }
  }
  for (const auto& seg : mesh.obs_segments) {
    const double l6 = seg.length / 6.0;
    bt.emplace_back(seg.a, seg.a, 2.0 * l6);
    bt.emplace_back(seg.b, seg.b, 2.0 * l6);
    bt.emplace_back(seg.a, seg.b, l6);
    bt.emplace_back(seg.b, seg.a, l6);
  }

  FemMatrices fem;
  fem.gamma = gamma;
  fem.delta = delta;
  fem.nt = nt;
  fem.T = T;
  fem.mass.resize(n, n);
  fem.mass.setFromTriplets(mt.begin(), mt.end());
  fem.stiffness.resize(n, n);
  fem.stiffness.setFromTriplets(kt.begin(), kt.end());
  fem.boundary.resize(n, n);
  fem.boundary.setFromTriplets(bt.begin(), bt.end());
  fem.prior_op = delta * fem.stiffness + gamma * fem.mass;
  fem.prior_op.makeCompressed();
  fem.mass_ii = restrict_matrix(fem.mass, mesh.interior_nodes);
  fem.stiffness_ii = restrict_matrix(fem.stiffness, mesh.interior_nodes);
  fem.obs_mass = Eigen::MatrixXd(restrict_matrix(fem.boundary, mesh.obs_nodes));
  fem.simpson = simpson_weights(nt, T);
  return fem;
}

void write_triplets(std::ostream& os, const SparseMatrix& a) {
  for (int col = 0; col < a.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << fmt_double(it.value()) << '\n';
    }
  }
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << "# nodes " << mesh.num_nodes() << '\n';
  for (const auto& p : mesh.nodes) os << fmt_double(p.x) << ' ' << fmt_double(p.y) << '\n';
  os << "# triangles " << mesh.triangles.size() << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "# obs_nodes " << mesh.num_obs() << '\n';
  for (int id : mesh.obs_nodes) os << id << '\n';
}

}  // namespace fracpat
