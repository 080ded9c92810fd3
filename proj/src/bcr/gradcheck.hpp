#pragma once

#include <functional>

#include "bcr/rng.hpp"
#include "bcr/tensor.hpp"

namespace bcr {

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  int checked = 0;
};

// Compares the tape gradient of a scalar-valued function against central
// finite differences. `f` receives a tape plus the input already attached to
// it and must be deterministic. When max_coords > 0 only that many
// coordinates (a seeded random subset) are probed, which keeps the check
// tractable for large inputs. The per-coordinate relative error is
//   |ga - gn| / max(1, |ga|, |gn|).
GradCheckReport grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& x,
                           double eps = 1e-5, double tol = 1e-5, int max_coords = -1,
                           uint64_t seed = 0);

}  // namespace bcr
