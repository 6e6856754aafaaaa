#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mathonet/layout.hpp"
#include "mathonet/net.hpp"

namespace mathonet {

// Reverse pass over a recorded trace: grad += scale * dy/dw for every flat
// slot (biases included). Masked slots receive no contribution.
void accumulate_dydw(const MathONet& net, const EvalTrace& trace, const NetLayout& layout,
                     double scale, std::span<double> grad);

// Gradient of the per-sample energy (1 / (2 sigma^2)) * residual^2 with
// residual = Y - Net(x), i.e. (-residual / sigma^2) * dy/dw. Masked slots are
// exactly zero.
std::vector<double> backward(const MathONet& net, const EvalTrace& trace, double residual,
                             double sigma2);

// Diagonal Gauss-Newton surrogate of the energy Hessian:
// H_ii = (1 / sigma^2) * sum_k (dy_k/dw_i)^2. Non-negative by construction.
std::vector<double> gauss_newton_diag(const MathONet& net, std::span<const double> X,
                                      int n_inputs, double sigma2);

// Central finite differences of an arbitrary scalar function; test oracle.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> w0, double step);

// Central-difference estimate of the same per-sample energy backward()
// differentiates. Masked slots are held at zero.
std::vector<double> finite_diff_gradient(const MathONet& net, std::span<const double> x,
                                         double y_target, double sigma2, double step);

}  // namespace mathonet
