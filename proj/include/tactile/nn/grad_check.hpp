#pragma once

#include <cmath>
#include <functional>

#include "tactile/nn/autodiff.hpp"

namespace tactile::nn {

struct GradCheckOptions {
    double step = 1e-5;
    double abs_floor = 1e-8;
};

inline double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

/// Compares reverse-mode gradients of a scalar function of one tensor against
/// central finite differences. Returns the maximum elementwise relative error.
inline double grad_check(const std::function<Var<double>(Tape<double>&, Var<double>)>& fn, const Tensor<double>& input,
                         const GradCheckOptions& opt = {}) {
    Tensor<double> analytic;
    {
        Tape<double> tape;
        Var<double> x = tape.variable(input);
        Var<double> y = fn(tape, x);
        require(y.value().size() == 1, ErrorKind::ShapeMismatch, "grad_check: closure must return a scalar");
        tape.backward(y);
        analytic = tape.grad(x.id).size() ? tape.grad(x.id) : Tensor<double>(input.shape);
    }
    auto eval = [&](const Tensor<double>& in) {
        Tape<double> tape;
        return fn(tape, tape.constant(in)).value()[0];
    };
    double worst = 0.0;
    Tensor<double> probe = input;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + opt.step;
        const double up = eval(probe);
        probe[i] = orig - opt.step;
        const double down = eval(probe);
        probe[i] = orig;
        worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * opt.step), opt.abs_floor));
    }
    return worst;
}

/// Same check with respect to every value in a parameter store. The closure
/// builds the scalar loss from the store on the given tape.
inline double grad_check_params(const std::function<Var<double>(Tape<double>&, ParamStore<double>&)>& fn,
                                ParamStore<double>& store, const GradCheckOptions& opt = {}) {
    store.zero_grad();
    {
        Tape<double> tape;
        tape.backward(fn(tape, store));
    }
    std::vector<Tensor<double>> analytic;
    for (std::size_t p = 0; p < store.size(); ++p) analytic.push_back(store[p].grad);
    auto eval = [&] {
        Tape<double> tape;
        return fn(tape, store).value()[0];
    };
    double worst = 0.0;
    for (std::size_t p = 0; p < store.size(); ++p) {
        auto& vals = store[p].value;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + opt.step;
            const double up = eval();
            vals[i] = orig - opt.step;
            const double down = eval();
            vals[i] = orig;
            worst = std::max(worst, relative_error(analytic[p][i], (up - down) / (2.0 * opt.step), opt.abs_floor));
        }
    }
    return worst;
}

}  // namespace tactile::nn
