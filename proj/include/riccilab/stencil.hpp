#pragma once

#include <span>
#include <vector>

namespace riccilab {

enum class Topology { sphere, periodic, ball };

/// Symmetry of a grid function under reflection through a pole.
enum class Parity { even, odd };

/// Finite-difference weights for derivative `order` at offset 0 using the
/// given integer node offsets (Fornberg's recursion).
std::vector<double> fd_weights(std::span<const int> offsets, int order);

/// Fourth-order accurate derivative of a grid function on a uniform grid.
///
/// Boundary closure follows the topology: reflection through the pole node
/// with the given parity (sphere: both ends, ball: x = 0), periodic wrap,
/// and shifted one-sided stencils at the open end of a ball.
/// Orders 1, 2 and 3 are supported.
std::vector<double> derivative(std::span<const double> v, int order, Parity parity,
                               Topology topology, double h);

/// Value of a grid function at arbitrary x by 4-point Lagrange interpolation,
/// with the same boundary closure as `derivative`. For sphere topology x may
/// lie in [-1, 2]; points beyond a pole are reflected with the given parity.
double interpolate(std::span<const double> v, double x, Parity parity, Topology topology,
                   double h);

}  // namespace riccilab
