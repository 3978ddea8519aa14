#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "molpla/autodiff.hpp"

namespace testsupport {

struct GradReport {
  std::string name;
  double rel_error = 0;
  double grad_norm = 0;
};

// Central differences over every entry of every parameter. The relative
// error per tensor is ||analytic - numeric|| / max(||numeric||, floor).
inline std::vector<GradReport> check_gradients(molpla::ParameterStore& ps,
                                               const std::function<double(bool)>& f, double h = 1e-5,
                                               double floor = 1e-7) {
  ps.zero_grad();
  f(true);
  std::vector<molpla::Matrix> analytic;
  for (const auto& p : ps.all()) analytic.push_back(p.grad);
  std::vector<GradReport> out;
  size_t k = 0;
  for (auto& p : ps.all()) {
    double diff2 = 0, num2 = 0;
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double keep = p.value.data[i];
      p.value.data[i] = keep + h;
      const double up = f(false);
      p.value.data[i] = keep - h;
      const double down = f(false);
      p.value.data[i] = keep;
      const double num = (up - down) / (2 * h);
      const double a = analytic[k].data.empty() ? 0.0 : analytic[k].data[i];
      diff2 += (a - num) * (a - num);
      num2 += num * num;
    }
    out.push_back({p.name, std::sqrt(diff2) / std::max(std::sqrt(num2), floor), std::sqrt(num2)});
    ++k;
  }
  return out;
}

}  // namespace testsupport
