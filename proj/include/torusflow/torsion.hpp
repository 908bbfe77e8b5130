#pragma once

// Determinant-line bookkeeping for the deformed complex at one (t, N):
//
//   log_vol   volume of the integration map: Σ_k (−1)^k · log|det Int_k|
//             (equivalently ½·log det(Int_kᵀ Int_k)); requires square
//             invertible blocks.
//   log_t_sm  torsion of the small spectrum: ½ Σ_k k(−1)^{k+1} Σ log λ over
//             the positive small eigenvalues (declared kernels excluded).
//   log_t_an  torsion of the whole positive spectrum: sparse-LDLT log-dets
//             with declared kernel modes deflated to 1 through the low-rank
//             determinant identity (raw near-zero pivots never reach a
//             logarithm).
//   log_t_la  torsion of the large spectrum: the same factorizations with
//             every small mode deflated to 1.  The decomposition identity
//             log_t_an = log_t_sm + log_t_la then compares the eigensolver's
//             small eigenvalues against an independent solve-based
//             evaluation of the same products — its residual is reported.
//   log_t_x   torsion of the pushforward complex on rest-point coefficients:
//             the compressed differential d_k = U_{k+1}ᵀ B_k(t) U_k carried
//             through the integration map, δ̂_k = Int_{k+1} d_k Int_k⁻¹.
//             The base-change identity log_vol = log_t_sm − log_t_x is
//             checked on the orthogonal complement of the declared kernels
//             (an empty complement degenerates to 0 = 0 − 0).
//
// Kernel dimensions are declared, not measured: the twisted cohomology of
// the 2-torus is (1,2,1)-dimensional when the class of ω vanishes and zero
// otherwise, while the discrete near-kernel eigenvalues are small positive
// numbers whose individual logarithms are not trustworthy.
//
// The rotation pairing and the Laplace transform of the closed-orbit count
// enter one reported combination (log_t_la − log_vol + t·ℛ − Z(t)); finite-
// model determinants are not zeta-regularized, so it is printed for
// inspection, never asserted.

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "torusflow/intmap.hpp"
#include "torusflow/novikov.hpp"
#include "torusflow/rinv.hpp"
#include "torusflow/series.hpp"
#include "torusflow/spectral.hpp"
#include "torusflow/witten.hpp"

namespace torusflow {

struct torsion_inputs {
  const std::vector<mat>* dynamic_deltas = nullptr;   // instanton differential at the same t
  const dirichlet_series* orbit_transform = nullptr;  // Laplace transform of the orbit count
  bool try_rotation = true;
  int rotation_grid = 512;
};

struct torsion_report {
  double t = 0.0;
  int N = 0;
  std::array<int, 3> small_counts{{0, 0, 0}};
  std::array<int, 3> kernel_dims{{0, 0, 0}};
  std::array<int, 3> point_counts{{0, 0, 0}};  // rest points per unstable dimension

  double log_vol = 0.0;
  double log_t_sm = 0.0;
  double log_t_an = 0.0;
  double log_t_la = 0.0;
  double log_t_x = 0.0;

  double e6_residual = 0.0;  // |log_t_an − log_t_sm − log_t_la|
  double s4_residual = 0.0;  // |log_vol − (log_t_sm − log_t_x)| on the complement

  double push_defect = std::numeric_limits<double>::quiet_NaN();  // ‖δ̂ − δ(t)‖_F

  bool r_available = false;
  double r_value = std::numeric_limits<double>::quiet_NaN();
  double z_value = std::numeric_limits<double>::quiet_NaN();
  double e5_combination = std::numeric_limits<double>::quiet_NaN();
  std::string caveat =
      "finite-model determinants are not zeta-regularized; the combination is "
      "reported for inspection, not asserted";
};

namespace detail {

// ½ Σ_k k(−1)^{k+1} (per-degree log-determinant contributions)
inline double torsion_combination(const std::array<double, 3>& logdet) {
  return 0.5 * (logdet[1] - 2.0 * logdet[2]);
}

inline double logabsdet_dense(const mat& A) {
  if (A.rows() != A.cols()) throw config_error("log-determinant of a non-square block");
  if (A.rows() == 0) return 0.0;
  return A.householderQr().logAbsDeterminant();
}

}  // namespace detail

// Declared kernel dimensions of the deformed complex for t > 0.
inline std::array<int, 3> declared_kernel_dims(const closed_one_form& omega) {
  bool trivial_class = omega.harmonic.size() == 0 || omega.harmonic.norm() == 0.0;
  if (trivial_class) return {1, 2, 1};
  return {0, 0, 0};
}

// Assemble the report.  `im` may be null only when the split carries no
// positive small spectrum beyond the declared kernels (e.g. rest-point-free
// fields); otherwise the pushforward and volume blocks need the matrices.
inline torsion_report build_torsion_report(const field_system& sys, const dec_grid& g,
                                           const witten_model& wm, const spectral_split& split,
                                           const integration_map* im,
                                           const torsion_inputs& in = {}) {
  if (!split.accepted)
    throw compute_error("spectral split was not accepted; torsion quantities are undefined");
  torsion_report rep;
  rep.t = split.t;
  rep.N = split.N;
  rep.kernel_dims = declared_kernel_dims(sys.omega);

  std::array<int, 3> comp{};  // positive small dimensions per degree
  for (int k = 0; k < 3; ++k) {
    rep.small_counts[k] = split.deg[k].small_count;
    if (split.deg[k].small_count < rep.kernel_dims[k])
      throw compute_error("declared kernel exceeds the resolved small spectrum in degree " +
                          std::to_string(k));
    comp[k] = split.deg[k].small_count - rep.kernel_dims[k];
  }
  bool need_im = comp[0] + comp[1] + comp[2] > 0;
  if (need_im && im == nullptr)
    throw config_error("positive small spectrum present but no integration data supplied");
  if (im != nullptr) {
    if (std::abs(im->t - split.t) > 1e-12 * std::max(1.0, split.t) || im->N != split.N)
      throw config_error("integration map was built at a different (t, N)");
    for (int k = 0; k < 3; ++k) rep.point_counts[k] = static_cast<int>(im->rows[k].size());
  }

  // --- small-spectrum torsion from the eigensolver ---------------------
  std::array<double, 3> logdet_sm{};
  for (int k = 0; k < 3; ++k) {
    double s = 0.0;
    for (int i = rep.kernel_dims[k]; i < rep.small_counts[k]; ++i) {
      double lam = split.deg[k].eigenvalues[i];
      if (!(lam > 0))
        throw compute_error("nonpositive eigenvalue in the positive small spectrum");
      s += std::log(lam);
    }
    logdet_sm[k] = s;
  }
  rep.log_t_sm = detail::torsion_combination(logdet_sm);

  // --- whole/large-spectrum torsion via LDLT + low-rank deflation ------
  // det(S + U C Uᵀ) = det(S) · det(I + C UᵀS⁻¹U); with C = I − Λ this
  // replaces the selected eigenvalues by 1 and leaves the rest untouched.
  std::array<double, 3> logdet_an{}, logdet_la{};
  for (int k = 0; k < 3; ++k) {
    spmat S = wm.laplacian(k, split.t);
    S.makeCompressed();
    Eigen::SimplicialLDLT<spmat> ldlt(S);
    if (ldlt.info() != Eigen::Success)
      throw compute_error("sparse factorization of the degree-" + std::to_string(k) +
                          " deformed Laplacian failed");
    double logdet_full = 0.0;
    const auto& D = ldlt.vectorD();
    for (Eigen::Index i = 0; i < D.size(); ++i) {
      double d = D[i];
      if (d == 0.0) throw compute_error("zero pivot in the deformed Laplacian factorization");
      logdet_full += std::log(std::abs(d));
    }
    auto deflate = [&](int count) -> double {
      if (count == 0) return 0.0;
      mat U = split.deg[k].vectors.leftCols(count);
      Eigen::VectorXd lam = split.deg[k].eigenvalues.head(count);
      mat SU = ldlt.solve(U);
      mat small = mat::Identity(count, count) +
                  (Eigen::VectorXd::Ones(count) - lam).asDiagonal() * (U.transpose() * SU);
      return detail::logabsdet_dense(small);
    };
    logdet_an[k] = logdet_full + deflate(rep.kernel_dims[k]);
    logdet_la[k] = logdet_full + deflate(rep.small_counts[k]);
  }
  rep.log_t_an = detail::torsion_combination(logdet_an);
  rep.log_t_la = detail::torsion_combination(logdet_la);
  rep.e6_residual = std::abs(rep.log_t_an - rep.log_t_sm - rep.log_t_la);

  // --- volume of the integration map ------------------------------------
  // Reported over all small columns (kernels included) when every block is
  // square; otherwise NaN.  The base-change identity below uses its own
  // volume restricted to the complement of the declared kernels.
  std::array<mat, 3> int_c;  // integration matrices on the complement
  std::array<double, 3> logvol_c{};
  if (im != nullptr) {
    bool full_square = true;
    std::array<double, 3> logvol_full{};
    for (int k = 0; k < 3; ++k) {
      const mat& full = im->matrices[k];
      int_c[k] = full.rightCols(comp[k]);
      if (full.rows() == full.cols()) {
        logvol_full[k] = detail::logabsdet_dense(full);
        if (!std::isfinite(logvol_full[k]))
          throw compute_error("integration block in degree " + std::to_string(k) +
                              " is singular");
      } else {
        full_square = false;
      }
      if (comp[k] == 0) continue;
      if (static_cast<int>(im->rows[k].size()) != comp[k])
        throw compute_error("integration block in degree " + std::to_string(k) + " is " +
                            std::to_string(im->rows[k].size()) + "×" + std::to_string(comp[k]) +
                            "; the base-change identity needs square blocks");
      logvol_c[k] = detail::logabsdet_dense(int_c[k]);
      if (!std::isfinite(logvol_c[k]))
        throw compute_error("integration block in degree " + std::to_string(k) + " is singular");
    }
    rep.log_vol = full_square ? logvol_full[0] - logvol_full[1] + logvol_full[2]
                              : std::numeric_limits<double>::quiet_NaN();
  } else {
    rep.log_vol = 0.0;  // no rest points, no small spectrum: empty volume
  }

  std::array<mat, 2> d_comp, d_push;
  for (int k = 0; k < 2; ++k) {
    if (comp[k] == 0 || comp[k + 1] == 0) {
      d_comp[k].resize(comp[k + 1], comp[k]);
      d_push[k].resize(comp[k + 1], comp[k]);
      continue;
    }
    spmat B = k == 0 ? wm.B0(split.t) : wm.B1(split.t);
    mat Uk = split.deg[k].vectors.middleCols(rep.kernel_dims[k], comp[k]);
    mat Ukk = split.deg[k + 1].vectors.middleCols(rep.kernel_dims[k + 1], comp[k + 1]);
    d_comp[k] = Ukk.transpose() * (B * Uk);
    // δ̂ = Int∘d∘Int⁻¹ on rest-point coefficients
    d_push[k] = int_c[k + 1] * d_comp[k] * int_c[k].inverse();
  }

  {
    std::array<double, 3> logdet_push{};
    for (int k = 0; k < 3; ++k) {
      if (comp[k] == 0) continue;
      mat L = mat::Zero(comp[k], comp[k]);
      if (k > 0) L += d_push[k - 1] * d_push[k - 1].transpose();
      if (k < 2) L += d_push[k].transpose() * d_push[k];
      logdet_push[k] = detail::logabsdet_dense(L);
      if (!std::isfinite(logdet_push[k]))
        throw compute_error("pushforward Laplacian singular in degree " + std::to_string(k));
    }
    rep.log_t_x = detail::torsion_combination(logdet_push);
  }
  double logvol_comp = logvol_c[0] - logvol_c[1] + logvol_c[2];
  rep.s4_residual = std::abs(logvol_comp - (rep.log_t_sm - rep.log_t_x));

  // --- diagnostic: pushforward differential vs instanton differential --
  if (in.dynamic_deltas != nullptr && in.dynamic_deltas->size() >= 2) {
    double acc = 0.0;
    bool comparable = true;
    for (int k = 0; k < 2; ++k) {
      const mat& dyn = (*in.dynamic_deltas)[k];
      if (dyn.rows() != d_push[k].rows() || dyn.cols() != d_push[k].cols()) {
        comparable = false;
        break;
      }
      acc += (d_push[k] - dyn).squaredNorm();
    }
    if (comparable) rep.push_defect = std::sqrt(acc);
  }

  // --- rotation pairing and the orbit transform ------------------------
  if (in.try_rotation) {
    try {
      rep.r_value = r_invariant(sys, sys.omega, in.rotation_grid);
      rep.r_available = true;
    } catch (const config_error&) {
      rep.r_available = false;  // rest points present: pairing undefined here
    }
  }
  if (in.orbit_transform != nullptr)
    rep.z_value = eval(*in.orbit_transform, std::complex<double>(split.t, 0.0)).real();
  if (rep.r_available && in.orbit_transform != nullptr)
    rep.e5_combination = rep.log_t_la - rep.log_vol + split.t * rep.r_value - rep.z_value;

  return rep;
}

}  // namespace torusflow
