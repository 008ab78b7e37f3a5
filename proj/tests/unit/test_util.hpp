#pragma once

#include <cmath>
#include <functional>

#include "fcenet/autograd.hpp"
#include "fcenet/noise.hpp"

namespace fcenet::test {

inline Tensor random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    CounterRng rng(seed, 0x74657374);
    Tensor t(s);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Max relative error between the tape gradient of f at x and central
// differences, with the usual max(|a|, |b|, 1e-8) denominator.
inline double input_grad_error(const std::function<ag::Var(const ag::Var&)>& f, const Tensor& x,
                               double h = 1e-5) {
    ag::GradTape tape;
    ag::Var in = tape.leaf(x);
    ag::Var out = f(in);
    tape.backward(out);
    const Tensor analytic = in.grad().empty() ? Tensor::zeros_like(x) : in.grad();
    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double up = f(ag::constant(probe)).value()[0];
        probe[i] = saved - h;
        const double down = f(ag::constant(probe)).value()[0];
        probe[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[i];
        worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8}));
    }
    return worst;
}

// Scalar reduction with fixed random weights, so every output element matters.
inline ag::Var project(const ag::Var& y, std::uint64_t seed) {
    return ag::sum(ag::mul(y, ag::constant(random_tensor(y.shape(), seed))));
}

}  // namespace fcenet::test
