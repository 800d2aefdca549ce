#ifndef AESTH_GRAD_CHECK_HPP_
#define AESTH_GRAD_CHECK_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace aesth {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    bool passed = false;
};

/// Central finite differences against an analytic gradient.
///
/// f evaluates the scalar objective in 64-bit at an arbitrary parameter
/// vector; the point must be a differentiable point of f. The relative error
/// per parameter is |analytic - numeric| / max(1, |analytic|, |numeric|),
/// which behaves like an absolute bound for small gradients and a relative
/// one for large gradients.
inline GradCheckReport grad_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> point,
                                  std::span<const float> analytic_grad,
                                  double tolerance, double step = 1e-3) {
    GradCheckReport report;
    std::vector<double> x(point.begin(), point.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double f_plus = f(x);
        x[i] = saved - step;
        const double f_minus = f(x);
        x[i] = saved;
        const double numeric = (f_plus - f_minus) / (2.0 * step);
        const double analytic = static_cast<double>(analytic_grad[i]);
        const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
        const double rel = std::fabs(analytic - numeric) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
        ++report.checked;
    }
    report.passed = report.max_rel_error <= tolerance;
    return report;
}

}  // namespace aesth

#endif  // AESTH_GRAD_CHECK_HPP_
