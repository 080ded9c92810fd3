#include "bcr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcr {

GradCheckReport grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& x,
                           double eps, double tol, int max_coords, uint64_t seed) {
  std::vector<double> analytic;
  {
    Tape tape;
    Tensor xa = tape.watch(x);
    Tensor loss = f(tape, xa);
    tape.backward(loss);
    analytic = tape.grad(xa);
  }
  const int64_t n = x.size();
  std::vector<int64_t> coords(static_cast<size_t>(n));
  std::iota(coords.begin(), coords.end(), 0);
  if (max_coords > 0 && max_coords < n) {
    Rng rng(seed);
    for (int64_t i = 0; i < max_coords; ++i) {
      const int64_t j = i + static_cast<int64_t>(rng.below(static_cast<uint64_t>(n - i)));
      std::swap(coords[static_cast<size_t>(i)], coords[static_cast<size_t>(j)]);
    }
    coords.resize(static_cast<size_t>(max_coords));
  }

  auto eval_at = [&](const Tensor& probe) {
    Tape tape;
    Tensor xa = tape.watch(probe);
    return f(tape, xa).item();
  };

  GradCheckReport rep;
  rep.pass = true;
  for (int64_t i : coords) {
    Tensor hi = x.clone();
    Tensor lo = x.clone();
    hi.data()[i] += eps;
    lo.data()[i] -= eps;
    const double gn = (eval_at(hi) - eval_at(lo)) / (2.0 * eps);
    const double ga = analytic[static_cast<size_t>(i)];
    const double denom = std::max({1.0, std::fabs(ga), std::fabs(gn)});
    const double rel = std::fabs(ga - gn) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = i;
      rep.analytic = ga;
      rep.numeric = gn;
    }
    ++rep.checked;
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace bcr
