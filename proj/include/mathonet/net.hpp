#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mathonet {

enum class UnaryKind { Identity, Sin, Cos, Log, Exp };

inline constexpr double kLogEps = 1e-8;
inline constexpr double kExpClamp = 30.0;

// Safe evaluation rules: Log(z) = ln(|z| + eps), Exp clamps its argument to
// [-kExpClamp, kExpClamp]. Both stay finite for every finite input.
double unary_eval(UnaryKind op, double z);
// First derivative under the same conventions. d/dz ln(|z|+eps) uses
// sign(0) = 0; the clamped Exp has derivative 0 outside the clamp interval.
double unary_deriv(UnaryKind op, double z);

std::string_view unary_name(UnaryKind op);
std::optional<UnaryKind> unary_from_name(std::string_view name);

// Affine map over the system input plus one constant slot (stored last).
// mask entries are 0/1; group_mask = 0 removes the whole block.
struct PolyNet {
  std::vector<double> w;           // n input coefficients followed by the constant
  std::vector<std::uint8_t> mask;  // same length as w
  std::uint8_t group_mask = 1;
};

// Masked sum of unary functions applied to a scaled pre-activation.
struct OperNet {
  std::vector<double> w;           // one weight per unary in the configured set
  std::vector<std::uint8_t> mask;
  std::uint8_t group_mask = 1;
};

struct Neuron {
  std::vector<PolyNet> polys;  // one per incoming feature
  double bias = 0.0;
  OperNet oper;
};

struct Layer {
  std::vector<Neuron> neurons;
};

// Layered super-graph. Forward semantics:
//   h^l_k = sum_i p^l_ik(x) * in_i + b^l_k   (in = x for l=1, else previous a)
//   a^l_k = sum_o mask_o * f_o(w_o * h^l_k)
//   y     = sum_k q_k(x) * a^L_k             (q_k = output poly)
// PolyNets always read the system input x.
struct MathONet {
  int n_inputs = 0;
  std::vector<UnaryKind> unary_set;
  std::vector<Layer> layers;
  std::vector<PolyNet> output_polys;  // one per last-layer neuron
};

// All weights zero, all masks on.
MathONet make_net(int n_inputs, const std::vector<int>& hidden,
                  std::vector<UnaryKind> unary_set);

// Cached per-sample intermediates; replaying a trace reproduces the forward
// output bit-exactly and feeds the reverse pass.
struct EvalTrace {
  struct NeuronTrace {
    std::vector<double> poly_vals;  // p^l_ik(x)
    double h = 0.0;
    std::vector<double> z;  // w_o * h per unary slot
    double a = 0.0;
  };
  std::vector<double> input;
  std::vector<std::vector<NeuronTrace>> layers;
  std::vector<double> out_poly_vals;  // q_k(x)
  double output = 0.0;
};

double poly_eval(const PolyNet& poly, std::span<const double> x);
double oper_eval(const OperNet& oper, double h, std::span<const UnaryKind> unary_set);

// Pure function of (net, x); safe to call concurrently on a shared net.
// Fills *trace when given (buffers are reused across calls).
double forward(const MathONet& net, std::span<const double> x, EvalTrace* trace = nullptr);

// Number of mask bits set across PolyNets, OperNets and output polys.
// Biases carry no mask and are excluded.
long count_active_connections(const MathONet& net);

// 2^n as a decimal string (the size of the expression space reachable by
// keeping or dropping each of n connections).
std::string expression_space_size(int n_connections);

// Number of additive terms in the fully distributed expression, counted
// structurally from the masks: every active output-poly weight times every
// additive atom of the neuron's activation, where an Identity slot expands
// the pre-activation and any other unary counts as a single atom. Bias
// paths are excluded, mirroring the connection-count convention. Monotone
// under pruning.
long structural_term_count(const MathONet& net);

// Throws std::invalid_argument when vector lengths disagree with the
// declared shape or a group-masked block has live per-weight masks.
void validate(const MathONet& net);

}  // namespace mathonet
