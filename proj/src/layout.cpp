#include "mathonet/layout.hpp"

#include <stdexcept>

namespace mathonet {

namespace {

struct BlockRef {
  std::vector<double>* w;
  std::vector<std::uint8_t>* mask;
  std::uint8_t* group_mask;
};

// Mutable block references in layout order.
std::vector<BlockRef> block_refs(MathONet& net) {
  std::vector<BlockRef> refs;
  for (Layer& layer : net.layers) {
    for (Neuron& neuron : layer.neurons) {
      for (PolyNet& p : neuron.polys) refs.push_back({&p.w, &p.mask, &p.group_mask});
      refs.push_back({&neuron.oper.w, &neuron.oper.mask, &neuron.oper.group_mask});
    }
  }
  for (PolyNet& q : net.output_polys) refs.push_back({&q.w, &q.mask, &q.group_mask});
  return refs;
}

}  // namespace

NetLayout layout_of(const MathONet& net) {
  NetLayout layout;
  int offset = 0;
  auto add_block = [&](NetLayout::BlockKind kind, int layer, int neuron, int index, int len) {
    const int id = static_cast<int>(layout.blocks.size());
    layout.blocks.push_back({kind, layer, neuron, index, offset, len});
    for (int i = 0; i < len; ++i) layout.group_of.push_back(id);
    offset += len;
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    for (std::size_t k = 0; k < layer.neurons.size(); ++k) {
      const Neuron& neuron = layer.neurons[k];
      for (std::size_t i = 0; i < neuron.polys.size(); ++i)
        add_block(NetLayout::BlockKind::HiddenPoly, static_cast<int>(l), static_cast<int>(k),
                  static_cast<int>(i), static_cast<int>(neuron.polys[i].w.size()));
      layout.bias_offsets.push_back(offset);
      layout.group_of.push_back(-1);
      ++offset;
      add_block(NetLayout::BlockKind::Oper, static_cast<int>(l), static_cast<int>(k), -1,
                static_cast<int>(neuron.oper.w.size()));
    }
  }
  for (std::size_t k = 0; k < net.output_polys.size(); ++k)
    add_block(NetLayout::BlockKind::OutputPoly, -1, static_cast<int>(k), -1,
              static_cast<int>(net.output_polys[k].w.size()));
  layout.total = offset;
  return layout;
}

void pack_weights(const MathONet& net, std::vector<double>& flat) {
  flat.clear();
  for (const Layer& layer : net.layers) {
    for (const Neuron& neuron : layer.neurons) {
      for (const PolyNet& p : neuron.polys) flat.insert(flat.end(), p.w.begin(), p.w.end());
      flat.push_back(neuron.bias);
      flat.insert(flat.end(), neuron.oper.w.begin(), neuron.oper.w.end());
    }
  }
  for (const PolyNet& q : net.output_polys) flat.insert(flat.end(), q.w.begin(), q.w.end());
}

void unpack_weights(std::span<const double> flat, MathONet& net) {
  std::size_t pos = 0;
  auto take = [&](std::vector<double>& dst) {
    for (double& v : dst) v = flat[pos++];
  };
  for (Layer& layer : net.layers) {
    for (Neuron& neuron : layer.neurons) {
      for (PolyNet& p : neuron.polys) take(p.w);
      neuron.bias = flat[pos++];
      take(neuron.oper.w);
    }
  }
  for (PolyNet& q : net.output_polys) take(q.w);
  if (pos != flat.size()) throw std::invalid_argument("unpack_weights: size mismatch");
}

void pack_mask(const MathONet& net, std::vector<std::uint8_t>& flat) {
  flat.clear();
  auto push_block = [&](const std::vector<std::uint8_t>& mask, std::uint8_t group) {
    for (std::uint8_t m : mask) flat.push_back(group ? m : 0);
  };
  for (const Layer& layer : net.layers) {
    for (const Neuron& neuron : layer.neurons) {
      for (const PolyNet& p : neuron.polys) push_block(p.mask, p.group_mask);
      flat.push_back(1);
      push_block(neuron.oper.mask, neuron.oper.group_mask);
    }
  }
  for (const PolyNet& q : net.output_polys) push_block(q.mask, q.group_mask);
}

void apply_masks(MathONet& net, std::span<const std::uint8_t> c,
                 std::span<const std::uint8_t> cg) {
  const NetLayout layout = layout_of(net);
  auto refs = block_refs(net);
  if (cg.size() != refs.size() || static_cast<int>(c.size()) != layout.total)
    throw std::invalid_argument("apply_masks: size mismatch");
  for (std::size_t b = 0; b < refs.size(); ++b) {
    const NetLayout::Block& info = layout.blocks[b];
    BlockRef& ref = refs[b];
    *ref.group_mask = cg[b] ? 1 : 0;
    for (int i = 0; i < info.len; ++i) {
      const std::uint8_t bit = (cg[b] && c[info.offset + i]) ? 1 : 0;
      (*ref.mask)[i] = bit;
      if (!bit) (*ref.w)[i] = 0.0;
    }
  }
}

void prune_unreachable(MathONet& net, std::span<std::uint8_t> c,
                       std::span<std::uint8_t> cg, const NetLayout& layout) {
  const std::size_t n_layers = net.layers.size();
  auto block_id = [&](NetLayout::BlockKind kind, int layer, int neuron, int index) {
    for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
      const auto& blk = layout.blocks[b];
      if (blk.kind == kind && blk.layer == layer && blk.neuron == neuron && blk.index == index)
        return static_cast<int>(b);
    }
    throw std::logic_error("prune_unreachable: block not found");
  };
  auto block_live = [&](int b) {
    if (!cg[b]) return false;
    const auto& blk = layout.blocks[b];
    for (int i = 0; i < blk.len; ++i)
      if (c[blk.offset + i]) return true;
    return false;
  };
  auto kill_block = [&](int b) {
    cg[b] = 0;
    const auto& blk = layout.blocks[b];
    for (int i = 0; i < blk.len; ++i) c[blk.offset + i] = 0;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    // alive = can produce output and is consumed downstream
    std::vector<std::vector<bool>> alive(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l)
      alive[l].assign(net.layers[l].neurons.size(), false);
    for (std::size_t lr = n_layers; lr-- > 0;) {
      for (std::size_t k = 0; k < net.layers[lr].neurons.size(); ++k) {
        const bool produces = block_live(block_id(NetLayout::BlockKind::Oper,
                                                  static_cast<int>(lr), static_cast<int>(k), -1));
        bool used = false;
        if (lr + 1 == n_layers) {
          used = block_live(block_id(NetLayout::BlockKind::OutputPoly, -1,
                                     static_cast<int>(k), -1));
        } else {
          for (std::size_t j = 0; j < net.layers[lr + 1].neurons.size() && !used; ++j) {
            if (!alive[lr + 1][j]) continue;
            used = block_live(block_id(NetLayout::BlockKind::HiddenPoly,
                                       static_cast<int>(lr + 1), static_cast<int>(j),
                                       static_cast<int>(k)));
          }
        }
        alive[lr][k] = produces && used;
      }
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
      for (std::size_t k = 0; k < net.layers[l].neurons.size(); ++k) {
        if (alive[l][k]) continue;
        const Neuron& neuron = net.layers[l].neurons[k];
        for (std::size_t i = 0; i < neuron.polys.size(); ++i) {
          const int b = block_id(NetLayout::BlockKind::HiddenPoly, static_cast<int>(l),
                                 static_cast<int>(k), static_cast<int>(i));
          if (block_live(b)) {
            kill_block(b);
            changed = true;
          }
        }
        const int ob = block_id(NetLayout::BlockKind::Oper, static_cast<int>(l),
                                static_cast<int>(k), -1);
        if (block_live(ob)) {
          kill_block(ob);
          changed = true;
        }
        if (l + 1 == n_layers) {
          const int qb = block_id(NetLayout::BlockKind::OutputPoly, -1, static_cast<int>(k), -1);
          if (block_live(qb)) {
            kill_block(qb);
            changed = true;
          }
        } else {
          for (std::size_t j = 0; j < net.layers[l + 1].neurons.size(); ++j) {
            const int pb = block_id(NetLayout::BlockKind::HiddenPoly, static_cast<int>(l + 1),
                                    static_cast<int>(j), static_cast<int>(k));
            if (block_live(pb)) {
              kill_block(pb);
              changed = true;
            }
          }
        }
      }
    }
  }
  apply_masks(net, {c.data(), c.size()}, {cg.data(), cg.size()});
}

}  // namespace mathonet
