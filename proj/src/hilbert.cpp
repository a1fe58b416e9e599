#include "qdparity/hilbert.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <string>

#include "qdparity/errors.hpp"

namespace qdparity::hilbert {

namespace {

void require_square(const CMatrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch(std::string(what) + ": matrix is not square");
  }
}

std::vector<int> digits(int index, std::span<const int> dims) {
  std::vector<int> out(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    out[k] = index % dims[k];
    index /= dims[k];
  }
  return out;
}

}  // namespace

BasisLabel BasisLabel::from_index(int index) {
  if (index < 0 || index >= kTwoDotDim) {
    throw DimensionMismatch("two-dot composite index out of range: " + std::to_string(index));
  }
  return {static_cast<Level>(index / kDotLevels), static_cast<Level>(index % kDotLevels)};
}

// ---------------------------------------------------------------------------

StateVector::StateVector(CVector amplitudes) : amp_(std::move(amplitudes)) {}

StateVector::StateVector(std::initializer_list<Complex> amplitudes)
    : amp_(static_cast<Eigen::Index>(amplitudes.size())) {
  Eigen::Index i = 0;
  for (const auto& a : amplitudes) amp_(i++) = a;
}

StateVector StateVector::basis(int dim, int index) {
  if (index < 0 || index >= dim) throw DimensionMismatch("basis index out of range");
  CVector v = CVector::Zero(dim);
  v(index) = 1.0;
  return StateVector(std::move(v));
}

StateVector StateVector::two_dot(Level a, Level b) { return basis(kTwoDotDim, two_dot_index(a, b)); }

StateVector StateVector::normalized() const {
  const double n = norm();
  if (n == 0.0) throw Error("cannot normalise a zero vector");
  return StateVector(amp_ / n);
}

Complex StateVector::inner(const StateVector& other) const {
  if (dim() != other.dim()) throw DimensionMismatch("inner product of vectors of different dimension");
  return amp_.dot(other.amp_);
}

StateVector operator+(const StateVector& x, const StateVector& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("state addition");
  return StateVector(x.amp_ + y.amp_);
}

StateVector operator-(const StateVector& x, const StateVector& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("state subtraction");
  return StateVector(x.amp_ - y.amp_);
}

StateVector operator*(Complex s, const StateVector& x) { return StateVector(s * x.amp_); }

// ---------------------------------------------------------------------------

Operator::Operator(CMatrix m) : m_(std::move(m)) { require_square(m_, "Operator"); }

Operator Operator::identity(int dim) { return Operator(CMatrix::Identity(dim, dim)); }

Operator Operator::zero(int dim) { return Operator(CMatrix::Zero(dim, dim)); }

bool Operator::is_hermitian(double tolerance) const {
  return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() <= tolerance;
}

StateVector Operator::apply(const StateVector& psi) const {
  if (psi.dim() != dim()) throw DimensionMismatch("operator applied to state of wrong dimension");
  return StateVector(m_ * psi.amplitudes());
}

Operator operator*(const Operator& x, const Operator& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("operator product");
  return Operator(x.m_ * y.m_);
}

Operator operator+(const Operator& x, const Operator& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("operator sum");
  return Operator(x.m_ + y.m_);
}

Operator operator-(const Operator& x, const Operator& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("operator difference");
  return Operator(x.m_ - y.m_);
}

Operator operator*(Complex s, const Operator& x) { return Operator(s * x.m_); }

// ---------------------------------------------------------------------------

DensityOperator::DensityOperator(CMatrix m, bool normalized) : m_(std::move(m)), normalized_(normalized) {
  require_square(m_, "DensityOperator");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  const double drift = m_.rows() ? (m_ - m_.adjoint()).cwiseAbs().maxCoeff() : 0.0;
  if (drift > tol::repairable * scale) {
    throw Error("DensityOperator: matrix is not Hermitian (drift " + std::to_string(drift) + ")");
  }
  m_ = 0.5 * (m_ + m_.adjoint()).eval();
  if (normalized_) {
    const double tr = trace();
    if (std::abs(tr - 1.0) > tol::repairable) {
      throw Error("DensityOperator: normalized flag set but trace is " + std::to_string(tr));
    }
    m_ /= tr;
  }
}

DensityOperator DensityOperator::pure(const StateVector& psi) {
  const CVector& a = psi.amplitudes();
  return DensityOperator(a * a.adjoint(), std::abs(psi.norm() - 1.0) <= tol::repairable);
}

DensityOperator DensityOperator::maximally_mixed(int dim) {
  return DensityOperator(CMatrix::Identity(dim, dim) / static_cast<double>(dim), true);
}

DensityOperator DensityOperator::normalized() const {
  const double tr = trace();
  if (tr <= 0.0) throw Error("cannot normalise a density operator with non-positive trace");
  return DensityOperator(m_ / tr, true);
}

double DensityOperator::expectation(const Operator& op) const {
  if (op.dim() != dim()) throw DimensionMismatch("expectation value");
  return (m_ * op.matrix()).trace().real();
}

double DensityOperator::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Operator tensor(const Operator& a, const Operator& b) { return Operator(kron(a.matrix(), b.matrix())); }

StateVector tensor(const StateVector& a, const StateVector& b) {
  return StateVector(CVector(kron(a.amplitudes(), b.amplitudes())));
}

Operator dyad(const StateVector& ket, const StateVector& bra) {
  if (ket.dim() != bra.dim()) throw DimensionMismatch("dyad of vectors of different dimension");
  return Operator(ket.amplitudes() * bra.amplitudes().adjoint());
}

double fidelity(const DensityOperator& rho, const StateVector& target) {
  if (rho.dim() != target.dim()) throw DimensionMismatch("fidelity: state and target dimension differ");
  const CVector& t = target.amplitudes();
  const double f = t.dot(rho.matrix() * t).real();
  return std::clamp(f, 0.0, 1.0);
}

DensityOperator partial_trace(const DensityOperator& rho, std::span<const int> dims, std::span<const int> keep) {
  const int total = std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<>());
  if (total != rho.dim()) {
    throw DimensionMismatch("partial_trace: subsystem dimensions do not factor the state dimension");
  }
  std::vector<bool> kept(dims.size(), false);
  for (int k : keep) {
    if (k < 0 || k >= static_cast<int>(dims.size())) throw DimensionMismatch("partial_trace: bad subsystem index");
    kept[k] = true;
  }
  int out_dim = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (kept[k]) out_dim *= dims[k];
  }

  auto kept_index = [&](const std::vector<int>& d) {
    int idx = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) {
      if (kept[k]) idx = idx * dims[k] + d[k];
    }
    return idx;
  };

  CMatrix out = CMatrix::Zero(out_dim, out_dim);
  for (int i = 0; i < total; ++i) {
    const auto di = digits(i, dims);
    for (int j = 0; j < total; ++j) {
      const auto dj = digits(j, dims);
      bool traced_equal = true;
      for (std::size_t k = 0; k < dims.size() && traced_equal; ++k) {
        if (!kept[k] && di[k] != dj[k]) traced_equal = false;
      }
      if (traced_equal) out(kept_index(di), kept_index(dj)) += rho(i, j);
    }
  }
  return DensityOperator(std::move(out), rho.is_normalized());
}

double trace_norm(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues().sum();
}

CVector vec(const CMatrix& m) { return Eigen::Map<const CVector>(m.data(), m.size()); }

CMatrix unvec(const CVector& v, int dim) {
  if (v.size() != static_cast<Eigen::Index>(dim) * dim) throw DimensionMismatch("unvec: length is not dim^2");
  return Eigen::Map<const CMatrix>(v.data(), dim, dim);
}

}  // namespace qdparity::hilbert
