#pragma once

#include <string>

#include "qdparity/hilbert.hpp"

namespace qdparity::model {

/// One decay channel of the two-dot system.
///
/// The collapse operator is `op + exp(-i phase_rate t / hbar) * phased`, with the
/// decay rate already folded in (units ps^-1/2). Only detuned dots use the phased
/// part; for them c^dagger c does not depend on t.
struct LindbladChannel {
  std::string name;
  CMatrix op;
  CMatrix phased;
  double phase_rate = 0.0;  // meV
  double efficiency = 0.0;
  bool detectable = true;

  int dim() const { return static_cast<int>(op.rows()); }
  bool has_phase() const { return phase_rate != 0.0 && phased.size() != 0 && !phased.isZero(0.0); }

  /// Collapse operator at time t [ps].
  CMatrix at(double t) const;

  /// Efficiency seen by the photon counter; filtered channels count as zero.
  double detection_efficiency() const { return detectable ? efficiency : 0.0; }

  /// Throws on shape mismatch or efficiency outside [0, 1].
  void validate() const;
};

}  // namespace qdparity::model
