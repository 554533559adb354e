#include "ssmflow/state.hpp"

#include <algorithm>
#include <cmath>

#include "ssmflow/errors.hpp"

namespace ssmflow {

void check_layout(const ModeGrid& grid, const StateVector& state) {
  if (state.coeffs.size() != grid.half_coeff_size())
    throw ConfigError("state layout does not match grid: expected " +
                      std::to_string(grid.half_coeff_size()) + " coefficients, got " +
                      std::to_string(state.coeffs.size()));
}

double mode_zero_imag_norm(const ModeGrid& grid, const StateVector& state) {
  check_layout(grid, state);
  double m = 0.0;
  for (int f = 0; f < grid.nfields; ++f)
    for (int j = 0; j < grid.cheb(); ++j)
      m = std::max(m, std::abs(state.at(grid, 0, f, j).imag()));
  return m;
}

VectorXcd embed_full(const ModeGrid& grid, const StateVector& state) {
  check_layout(grid, state);
  VectorXcd full = VectorXcd::Zero(grid.full_size());
  const Index len = grid.block_len();
  for (int n = 0; n <= grid.n1; ++n) {
    const auto seg = state.coeffs.segment(grid.half_index(n, 0, 0), len);
    full.segment(grid.block_start(n), len) = seg;
    if (n > 0) full.segment(grid.block_start(-n), len) = seg.conjugate();
  }
  full[grid.f_slot()] = state.f;
  full[grid.c_slot()] = state.c;
  return full;
}

StateVector extract_half(const ModeGrid& grid, const VectorXcd& full,
                         double* asym_out) {
  if (full.size() != grid.full_size())
    throw ConfigError("full-space vector size mismatch");
  StateVector st(grid);
  const Index len = grid.block_len();
  double asym = 0.0;
  for (int n = 0; n <= grid.n1; ++n) {
    const auto pos = full.segment(grid.block_start(n), len);
    const auto neg = full.segment(grid.block_start(-n), len);
    const VectorXcd avg = 0.5 * (pos + neg.conjugate());
    asym = std::max(asym, (pos - neg.conjugate()).cwiseAbs().maxCoeff());
    st.coeffs.segment(grid.half_index(n, 0, 0), len) = avg;
  }
  asym = std::max(asym, std::abs(full[grid.f_slot()].imag()));
  asym = std::max(asym, std::abs(full[grid.c_slot()].imag()));
  st.f = full[grid.f_slot()].real();
  st.c = full[grid.c_slot()].real();
  if (asym_out) *asym_out = asym;
  return st;
}

void symmetrize_full(const ModeGrid& grid, VectorXcd& full) {
  const Index len = grid.block_len();
  for (int n = 0; n <= grid.n1; ++n) {
    auto pos = full.segment(grid.block_start(n), len);
    auto neg = full.segment(grid.block_start(-n), len);
    const VectorXcd avg = 0.5 * (pos + neg.conjugate());
    pos = avg;
    neg = avg.conjugate();
  }
  full[grid.f_slot()] = full[grid.f_slot()].real();
  full[grid.c_slot()] = full[grid.c_slot()].real();
}

VectorXcd conj_reflect(const ModeGrid& grid, const VectorXcd& full) {
  VectorXcd out(full.size());
  const Index len = grid.block_len();
  for (int n = -grid.n1; n <= grid.n1; ++n)
    out.segment(grid.block_start(n), len) =
        full.segment(grid.block_start(-n), len).conjugate();
  out[grid.f_slot()] = std::conj(full[grid.f_slot()]);
  out[grid.c_slot()] = std::conj(full[grid.c_slot()]);
  return out;
}

}  // namespace ssmflow
