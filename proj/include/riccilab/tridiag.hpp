#pragma once

#include <vector>

namespace riccilab {

/// Symmetric tridiagonal (optionally cyclic) matrix: diag[i], and off[i]
/// coupling i and i+1 (off[m-1] couples m-1 and 0 when cyclic).
struct SymTridiag {
  std::vector<double> diag;
  std::vector<double> off;
  bool cyclic = false;

  std::size_t size() const { return diag.size(); }
  std::vector<double> apply(const std::vector<double>& v) const;
};

/// Solves (A - shift I) x = rhs; Thomas algorithm, Sherman-Morrison for the
/// cyclic corner. Throws NumericError on a zero pivot.
std::vector<double> solve(const SymTridiag& a, const std::vector<double>& rhs, double shift = 0.0);

}  // namespace riccilab
