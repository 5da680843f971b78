#include "riccilab/stencil.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>

#include "riccilab/errors.hpp"

namespace riccilab {

std::vector<double> fd_weights(std::span<const int> offsets, int order) {
  const int npts = static_cast<int>(offsets.size());
  if (order < 0 || npts <= order) {
    throw ParameterError("fd_weights: need more nodes than the derivative order");
  }
  std::vector<std::vector<double>> c(npts, std::vector<double>(order + 1, 0.0));
  double c1 = 1.0;
  double c4 = offsets[0];
  c[0][0] = 1.0;
  for (int i = 1; i < npts; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = offsets[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = offsets[i] - offsets[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) {
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(npts);
  for (int i = 0; i < npts; ++i) w[i] = c[i][order];
  return w;
}

namespace {

// Value of node k on the extended grid (ghost nodes by reflection or wrap).
double node_value(std::span<const double> v, long k, Parity parity, Topology topology) {
  const long m = static_cast<long>(v.size());
  const double p = parity == Parity::even ? 1.0 : -1.0;
  switch (topology) {
    case Topology::periodic: {
      long j = k % m;
      if (j < 0) j += m;
      return v[j];
    }
    case Topology::sphere: {
      const long period = 2 * (m - 1);
      long j = k % period;
      if (j < 0) j += period;
      if (j <= m - 1) return v[j];
      return p * v[period - j];
    }
    case Topology::ball:
      if (k < 0) return p * v[-k];
      return v[std::min(k, m - 1)];
  }
  return 0.0;
}

const std::vector<double>& centered_weights(int order) {
  static std::once_flag once;
  static std::array<std::vector<double>, 4> table;
  std::call_once(once, [] {
    for (int d = 1; d <= 3; ++d) {
      const int w = d == 3 ? 3 : 2;
      std::vector<int> off;
      for (int k = -w; k <= w; ++k) off.push_back(k);
      table[d] = fd_weights(off, d);
    }
  });
  return table[order];
}

}  // namespace

std::vector<double> derivative(std::span<const double> v, int order, Parity parity,
                               Topology topology, double h) {
  if (order < 1 || order > 3) throw ParameterError("derivative: order must be 1, 2 or 3");
  const long m = static_cast<long>(v.size());
  if (m < 8) throw ParameterError("derivative: grid too small");
  const auto& cw = centered_weights(order);
  const long w = (static_cast<long>(cw.size()) - 1) / 2;
  const double scale = std::pow(h, -order);
  std::vector<double> out(m);
  for (long i = 0; i < m; ++i) {
    const bool open_end = topology == Topology::ball && i + w > m - 1;
    if (!open_end) {
      double acc = 0.0;
      for (long k = -w; k <= w; ++k) acc += cw[k + w] * node_value(v, i + k, parity, topology);
      out[i] = acc * scale;
      continue;
    }
    const int npts = order + 4;
    std::vector<int> off(npts);
    for (int k = 0; k < npts; ++k) off[k] = static_cast<int>(m - 1 - i) - (npts - 1) + k;
    const auto ow = fd_weights(off, order);
    double acc = 0.0;
    for (int k = 0; k < npts; ++k) acc += ow[k] * node_value(v, i + off[k], parity, topology);
    out[i] = acc * scale;
  }
  return out;
}

double interpolate(std::span<const double> v, double x, Parity parity, Topology topology,
                   double h) {
  const long m = static_cast<long>(v.size());
  const double u = x / h;
  long j = static_cast<long>(std::floor(u));
  if (topology == Topology::ball) {
    if (u > m - 1 + 1e-9) throw ParameterError("interpolate: x beyond the open end");
    j = std::min(j, m - 3);
  }
  const double t = u - static_cast<double>(j);
  // Lagrange basis on nodes j-1, j, j+1, j+2 evaluated at j + t.
  const double l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
  const double l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  const double l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
  const double l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
  return l0 * node_value(v, j - 1, parity, topology) + l1 * node_value(v, j, parity, topology) +
         l2 * node_value(v, j + 1, parity, topology) + l3 * node_value(v, j + 2, parity, topology);
}

}  // namespace riccilab
