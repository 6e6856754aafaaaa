#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mathonet/net.hpp"

namespace mathonet {

// Flat indexing over every trainable scalar of a net. Order: per layer, per
// neuron: the incoming PolyNets (input coefficients then constant), the bias,
// the OperNet; then the output PolyNets. Each PolyNet/OperNet block is one
// regularization group; biases are groupless single slots.
struct NetLayout {
  enum class BlockKind { HiddenPoly, Oper, OutputPoly };
  struct Block {
    BlockKind kind;
    int layer;   // -1 for output polys
    int neuron;
    int index;   // poly position within the neuron; -1 for oper
    int offset;
    int len;
  };
  std::vector<Block> blocks;       // block index == group id
  std::vector<int> bias_offsets;   // one per neuron, layer-major
  std::vector<int> group_of;       // flat slot -> block id, -1 for biases
  int total = 0;

  bool is_bias(int flat) const { return group_of[flat] < 0; }
};

NetLayout layout_of(const MathONet& net);

// Weight values (including biases) in layout order.
void pack_weights(const MathONet& net, std::vector<double>& flat);
void unpack_weights(std::span<const double> flat, MathONet& net);

// Effective per-slot activity: per-weight mask AND group mask; bias slots
// report 1 (the net carries no bias masks).
void pack_mask(const MathONet& net, std::vector<std::uint8_t>& flat);

// Writes mask decisions back into the net. c covers every flat slot (bias
// entries ignored), cg is indexed by block. Pruned weights are zeroed.
void apply_masks(MathONet& net, std::span<const std::uint8_t> c,
                 std::span<const std::uint8_t> cg);

// Masks away structurally dead regions: neurons with a fully masked OperNet
// or no live downstream path contribute nothing, so their blocks (and the
// blocks feeding them) are removed too. Mutates c/cg alongside the net so
// regularization state stays in sync. Iterates to a fixpoint.
void prune_unreachable(MathONet& net, std::span<std::uint8_t> c,
                       std::span<std::uint8_t> cg, const NetLayout& layout);

}  // namespace mathonet
