#include "stgn/gradcheck.hpp"

#include <cmath>

namespace stgn {

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
    x.set_requires_grad(true);
    x.zero_grad();
    Tensor loss = f(x);
    if (!std::isfinite(loss.value())) throw NumericError("grad_check: non-finite loss");
    loss.backward();
    std::vector<double> analytic = x.grad();

    double max_rel = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x.raw()[i];
        double fp, fm;
        {
            NoGradGuard ng;
            x.raw()[i] = orig + h;
            fp = f(x).value();
            x.raw()[i] = orig - h;
            fm = f(x).value();
            x.raw()[i] = orig;
        }
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: non-finite value at coordinate " + std::to_string(i));
        const double fd = (fp - fm) / (2.0 * h);
        const double a = analytic[i];
        const double denom = std::max({std::fabs(a), std::fabs(fd), 1e-8});
        const double rel = std::fabs(a - fd) / denom;
        if (rel > max_rel) max_rel = rel;
    }
    return max_rel;
}

}  // namespace stgn
