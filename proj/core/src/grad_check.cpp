#include "gma/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace gma {

GradCheckResult grad_check(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params,
    double h, double eps) {
  GradCheckResult res;

  for (const auto& [name, p] : params) {
    if (!p.defined()) throw std::invalid_argument("grad_check: undefined param " + name);
    Tensor t = p;
    t.zero_grad();
  }

  Tensor loss = f();
  if (loss.numel() != 1)
    throw std::invalid_argument("grad_check: f must return a scalar");
  loss.backward();

  std::vector<std::vector<double>> autodiff;
  autodiff.reserve(params.size());
  for (const auto& [name, p] : params) {
    if (p.has_grad())
      autodiff.push_back(p.grad());
    else
      autodiff.emplace_back(p.numel(), 0.0);
  }

  NoGradGuard off;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor t = params[pi].second;
    auto& vals = t.values();
    for (std::size_t k = 0; k < vals.size(); ++k) {
      double orig = vals[k];
      vals[k] = orig + h;
      double up = f().value();
      vals[k] = orig - h;
      double down = f().value();
      vals[k] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) res.finite = false;
      double central = (up - down) / (2.0 * h);
      double ad = autodiff[pi][k];
      double rel = std::fabs(ad - central) / (std::fabs(central) + eps);
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = params[pi].first;
        res.worst_index = static_cast<int>(k);
        res.worst_autodiff = ad;
        res.worst_central = central;
      }
    }
  }
  return res;
}

}  // namespace gma
