#include "riccilab/tridiag.hpp"

#include <cmath>

#include "riccilab/errors.hpp"

namespace riccilab {

std::vector<double> SymTridiag::apply(const std::vector<double>& v) const {
  const std::size_t m = size();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = diag[i] * v[i];
  const std::size_t faces = cyclic ? m : m - 1;
  for (std::size_t f = 0; f < faces; ++f) {
    const std::size_t j = (f + 1) % m;
    out[f] += off[f] * v[j];
    out[j] += off[f] * v[f];
  }
  return out;
}

namespace {

std::vector<double> thomas(const std::vector<double>& lower, std::vector<double> b,
                           const std::vector<double>& upper, std::vector<double> d) {
  const std::size_t m = b.size();
  for (std::size_t i = 1; i < m; ++i) {
    if (b[i - 1] == 0.0) throw NumericError("zero pivot in tridiagonal solve", 0.0);
    const double w = lower[i] / b[i - 1];
    b[i] -= w * upper[i - 1];
    d[i] -= w * d[i - 1];
  }
  if (b[m - 1] == 0.0) throw NumericError("zero pivot in tridiagonal solve", 0.0);
  std::vector<double> x(m);
  x[m - 1] = d[m - 1] / b[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) x[i] = (d[i] - upper[i] * x[i + 1]) / b[i];
  return x;
}

}  // namespace

std::vector<double> solve(const SymTridiag& a, const std::vector<double>& rhs, double shift) {
  const std::size_t m = a.size();
  std::vector<double> lower(m, 0.0), upper(m, 0.0), b(m);
  for (std::size_t i = 0; i < m; ++i) b[i] = a.diag[i] - shift;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    upper[i] = a.off[i];
    lower[i + 1] = a.off[i];
  }
  if (!a.cyclic) return thomas(lower, b, upper, rhs);

  // A = B + u v^T with the corner entries folded into B's diagonal.
  const double corner = a.off[m - 1];
  const double gamma = -b[0];
  b[0] -= gamma;
  b[m - 1] -= corner * corner / gamma;
  std::vector<double> u(m, 0.0);
  u[0] = gamma;
  u[m - 1] = corner;
  const auto y = thomas(lower, b, upper, rhs);
  const auto z = thomas(lower, b, upper, u);
  const double vy = y[0] + corner / gamma * y[m - 1];
  const double vz = z[0] + corner / gamma * z[m - 1];
  const double denom = 1.0 + vz;
  if (denom == 0.0) throw NumericError("singular cyclic tridiagonal system", 0.0);
  std::vector<double> x(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = y[i] - vy / denom * z[i];
  return x;
}

}  // namespace riccilab
