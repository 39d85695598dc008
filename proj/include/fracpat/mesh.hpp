#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

namespace fracpat {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Segment {
  int a = 0;
  int b = 0;
  double length = 0.0;
};

/// Structured right-triangle mesh of [-1,1]^2 with the observation loop on
/// the boundary of [-0.8,0.8]^2.
///
/// Node (i, j) has id j*(nx+1) + i and coordinates (-1 + i*h, -1 + j*h).
/// Every grid cell is split along its (i,j)-(i+1,j+1) diagonal.
struct Mesh {
  int nx = 0;
  double h = 0.0;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> boundary_nodes;
  std::vector<int> interior_nodes;
  /// node id -> position in interior_nodes, or -1 on the boundary
  std::vector<int> interior_index;
  /// observation nodes in loop order (counter-clockwise from (-0.8,-0.8))
  std::vector<int> obs_nodes;
  std::vector<Segment> obs_segments;

  [[nodiscard]] int num_nodes() const { return static_cast<int>(nodes.size()); }
  [[nodiscard]] int num_interior() const { return static_cast<int>(interior_nodes.size()); }
  [[nodiscard]] int num_obs() const { return static_cast<int>(obs_nodes.size()); }
  [[nodiscard]] int node_id(int i, int j) const { return j * (nx + 1) + i; }
};

/// Throws std::invalid_argument unless nx >= 10 and nx % 10 == 0, which is
/// what puts the +-0.8 lines of the observation loop on grid lines.
Mesh build_mesh(int nx);

double signed_area(const Mesh& mesh, const std::array<int, 3>& tri);

}  // namespace fracpat
