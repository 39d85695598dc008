#include "fracpat/mesh.hpp"

#include <stdexcept>
#include <string>

namespace fracpat {

Mesh build_mesh(int nx) {
  if (nx < 4) {
    throw std::invalid_argument("build_mesh: nx must be >= 4, got " + std::to_string(nx));
  }
  if (nx % 10 != 0) {
    throw std::invalid_argument("build_mesh: nx must be divisible by 10 so that the observation "
                                "loop lies on grid lines, got " +
                                std::to_string(nx));
  }

  Mesh mesh;
  mesh.nx = nx;
  mesh.h = 2.0 / nx;
  const int np = nx + 1;
  mesh.nodes.resize(static_cast<std::size_t>(np) * np);
  mesh.interior_index.assign(mesh.nodes.size(), -1);

  for (int j = 0; j < np; ++j) {
    for (int i = 0; i < np; ++i) {
      const int id = mesh.node_id(i, j);
      mesh.nodes[id] = {-1.0 + i * mesh.h, -1.0 + j * mesh.h};
      const bool on_boundary = i == 0 || j == 0 || i == nx || j == nx;
      if (on_boundary) {
        mesh.boundary_nodes.push_back(id);
      } else {
        mesh.interior_index[id] = static_cast<int>(mesh.interior_nodes.size());
        mesh.interior_nodes.push_back(id);
      }
    }
  }

  mesh.triangles.reserve(2 * static_cast<std::size_t>(nx) * nx);
  for (int j = 0; j < nx; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int n00 = mesh.node_id(i, j);
      const int n10 = mesh.node_id(i + 1, j);
      const int n01 = mesh.node_id(i, j + 1);
      const int n11 = mesh.node_id(i + 1, j + 1);
      mesh.triangles.push_back({n00, n10, n11});
      mesh.triangles.push_back({n00, n11, n01});
    }
  }

  // Observation loop: grid index of -0.8 is 0.1*nx, of +0.8 is 0.9*nx.
  const int lo = nx / 10;
  const int hi = nx - lo;
  for (int i = lo; i < hi; ++i) mesh.obs_nodes.push_back(mesh.node_id(i, lo));
  for (int j = lo; j < hi; ++j) mesh.obs_nodes.push_back(mesh.node_id(hi, j));
  for (int i = hi; i > lo; --i) mesh.obs_nodes.push_back(mesh.node_id(i, hi));
  for (int j = hi; j > lo; --j) mesh.obs_nodes.push_back(mesh.node_id(lo, j));

  const int m = mesh.num_obs();
  mesh.obs_segments.reserve(m);
  for (int k = 0; k < m; ++k) {
    mesh.obs_segments.push_back({mesh.obs_nodes[k], mesh.obs_nodes[(k + 1) % m], mesh.h});
  }
  return mesh;
}

double signed_area(const Mesh& mesh, const std::array<int, 3>& tri) {
  const Point& p0 = mesh.nodes[tri[0]];
  const Point& p1 = mesh.nodes[tri[1]];
  const Point& p2 = mesh.nodes[tri[2]];
  return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
}

}  // namespace fracpat
