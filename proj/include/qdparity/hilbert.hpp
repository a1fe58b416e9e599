#pragma once

// Dense linear algebra over small labelled Hilbert spaces.
//
// Two-dot basis convention: each dot has levels |0>, |1>, |X> (index 0, 1, 2);
// the composite index of |a b> is 3*a + b, dot a being the left tensor factor.

#include <Eigen/Dense>

#include <complex>
#include <initializer_list>
#include <span>
#include <vector>

namespace qdparity {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

}  // namespace qdparity

namespace qdparity::hilbert {

namespace tol {
inline constexpr double algebraic = 1e-12;
inline constexpr double psd_slack = 1e-10;
/// Largest drift accepted (and then repaired) when wrapping a numerically evolved matrix.
inline constexpr double repairable = 1e-8;
}  // namespace tol

enum class Level : int { zero = 0, one = 1, exciton = 2 };

inline constexpr int kDotLevels = 3;
inline constexpr int kTwoDotDim = kDotLevels * kDotLevels;

struct BasisLabel {
  Level a = Level::zero;
  Level b = Level::zero;

  constexpr int index() const { return kDotLevels * static_cast<int>(a) + static_cast<int>(b); }
  static BasisLabel from_index(int index);
  friend constexpr bool operator==(BasisLabel, BasisLabel) = default;
};

constexpr int two_dot_index(Level a, Level b) { return BasisLabel{a, b}.index(); }

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(CVector amplitudes);
  StateVector(std::initializer_list<Complex> amplitudes);

  static StateVector basis(int dim, int index);
  static StateVector two_dot(Level a, Level b);

  int dim() const { return static_cast<int>(amp_.size()); }
  const CVector& amplitudes() const { return amp_; }
  Complex operator[](int i) const { return amp_(i); }

  double norm() const { return amp_.norm(); }
  /// Throws when the norm vanishes.
  StateVector normalized() const;
  /// <this|other>
  Complex inner(const StateVector& other) const;

  friend StateVector operator+(const StateVector& x, const StateVector& y);
  friend StateVector operator-(const StateVector& x, const StateVector& y);
  friend StateVector operator*(Complex s, const StateVector& x);

 private:
  CVector amp_;
};

class Operator {
 public:
  Operator() = default;
  explicit Operator(CMatrix m);

  static Operator identity(int dim);
  static Operator zero(int dim);

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }
  Complex operator()(int r, int c) const { return m_(r, c); }

  Operator adjoint() const { return Operator(m_.adjoint()); }
  bool is_hermitian(double tolerance = tol::algebraic) const;
  StateVector apply(const StateVector& psi) const;

  friend Operator operator*(const Operator& x, const Operator& y);
  friend Operator operator+(const Operator& x, const Operator& y);
  friend Operator operator-(const Operator& x, const Operator& y);
  friend Operator operator*(Complex s, const Operator& x);

 private:
  CMatrix m_;
};

/// Density matrix. With `normalized == false` it holds the unnormalised rho~ of the
/// linear conditional master equation, whose trace is a probability weight.
class DensityOperator {
 public:
  DensityOperator() = default;
  /// Hermitian drift up to tol::repairable is symmetrised away; larger drift throws.
  DensityOperator(CMatrix m, bool normalized);

  static DensityOperator pure(const StateVector& psi);
  static DensityOperator maximally_mixed(int dim);

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }
  Complex operator()(int r, int c) const { return m_(r, c); }
  bool is_normalized() const { return normalized_; }

  double trace() const { return m_.trace().real(); }
  DensityOperator normalized() const;
  double population(int index) const { return m_(index, index).real(); }
  double expectation(const Operator& op) const;

  double min_eigenvalue() const;
  bool is_psd(double slack = tol::psd_slack) const { return min_eigenvalue() >= -slack; }

 private:
  CMatrix m_;
  bool normalized_ = true;
};

Operator tensor(const Operator& a, const Operator& b);
StateVector tensor(const StateVector& a, const StateVector& b);
CMatrix kron(const CMatrix& a, const CMatrix& b);

/// |ket><bra|
Operator dyad(const StateVector& ket, const StateVector& bra);

/// <psi|rho|psi>, clamped into [0, 1].
double fidelity(const DensityOperator& rho, const StateVector& target);

/// Trace out every subsystem not listed in `keep`. `dims` gives the subsystem
/// dimensions in tensor order; `keep` indices refer to that order.
DensityOperator partial_trace(const DensityOperator& rho, std::span<const int> dims,
                              std::span<const int> keep);

double trace_norm(const CMatrix& m);

/// Column-stacking vectorisation and its inverse.
CVector vec(const CMatrix& m);
CMatrix unvec(const CVector& v, int dim);

}  // namespace qdparity::hilbert
