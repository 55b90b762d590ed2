// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace nematic {

// Structured quadrilateral grid on [0, lx] x [0, ly].  Cells are congruent
// axis-aligned rectangles, so every Jacobian is the same diagonal matrix and
// basis derivative tables can be shared across cells.
//
// The node grid is the biquadratic refinement of the cell grid: one node per
// cell corner, edge midpoint, and cell center.  When periodic_x is set the
// rightmost node column is identified with column 0 and x-indices wrap.
struct Mesh {
  int nx = 0;  // cells in x
  int ny = 0;  // cells in y
  double lx = 1.0;
  double ly = 1.0;
  bool periodic_x = true;

  double hx() const { return lx / nx; }
  double hy() const { return ly / ny; }

  int cell_count() const { return nx * ny; }

  int node_cols() const { return periodic_x ? 2 * nx : 2 * nx + 1; }
  int node_rows() const { return 2 * ny + 1; }
  int node_count() const { return node_cols() * node_rows(); }

  // Node ids are row-major over (ix, iy); ix wraps when periodic.
  int node_id(int ix, int iy) const {
    if (periodic_x) {
      ix %= 2 * nx;
      if (ix < 0) ix += 2 * nx;
    }
    return iy * node_cols() + ix;
  }

  int node_ix(int id) const { return id % node_cols(); }
  int node_iy(int id) const { return id / node_cols(); }

  Eigen::Vector2d node_xy(int id) const {
    return {0.5 * hx() * node_ix(id), 0.5 * hy() * node_iy(id)};
  }

  // The y = 0 and y = ly walls carry the Dirichlet data everywhere in this
  // code base; the x walls are periodic (or traction-free if not).
  bool node_on_wall(int id) const {
    const int iy = node_iy(id);
    return iy == 0 || iy == 2 * ny;
  }
};

inline Mesh build_mesh(int nx, int ny, bool periodic_x = true,
                       double lx = 1.0, double ly = 1.0) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("mesh dims must be positive");
  if (periodic_x && nx < 2)
    throw std::invalid_argument("periodic direction needs at least 2 cells");
  if (lx <= 0.0 || ly <= 0.0) throw std::invalid_argument("domain extents must be positive");
  return Mesh{nx, ny, lx, ly, periodic_x};
}

// Uniform refinement; every cell splits in four and coarse nodes keep their
// coordinates (nested grids, which the grid transfer relies on).
inline Mesh refine(const Mesh& m) {
  return Mesh{2 * m.nx, 2 * m.ny, m.lx, m.ly, m.periodic_x};
}

}  // namespace nematic
