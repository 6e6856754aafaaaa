#include "mathonet/symbolic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace mathonet {

ExprPtr make_const(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Const;
  e->value = v;
  return e;
}

ExprPtr make_var(int index) {
  if (index < 0) throw std::invalid_argument("make_var: negative index");
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Var;
  e->var = index;
  return e;
}

ExprPtr make_add(std::vector<ExprPtr> kids) {
  if (kids.empty()) return make_const(0.0);
  if (kids.size() == 1) return kids.front();
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Add;
  e->kids = std::move(kids);
  return e;
}

ExprPtr make_mul(std::vector<ExprPtr> kids) {
  if (kids.empty()) return make_const(1.0);
  if (kids.size() == 1) return kids.front();
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Mul;
  e->kids = std::move(kids);
  return e;
}

ExprPtr make_unary(UnaryKind op, ExprPtr child) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Unary;
  e->op = op;
  e->kids.push_back(std::move(child));
  return e;
}

double eval_expr(const Expr& e, std::span<const double> x) {
  switch (e.kind) {
    case Expr::Kind::Const:
      return e.value;
    case Expr::Kind::Var:
      if (e.var >= static_cast<int>(x.size()))
        throw std::invalid_argument("eval_expr: variable index out of range");
      return x[e.var];
    case Expr::Kind::Add: {
      double acc = 0.0;
      for (const ExprPtr& k : e.kids) acc += eval_expr(*k, x);
      return acc;
    }
    case Expr::Kind::Mul: {
      double acc = 1.0;
      for (const ExprPtr& k : e.kids) acc *= eval_expr(*k, x);
      return acc;
    }
    case Expr::Kind::Unary:
      return unary_eval(e.op, eval_expr(*e.kids.front(), x));
  }
  return 0.0;
}

namespace {

ExprPtr poly_expr(const PolyNet& poly, int n_inputs) {
  std::vector<ExprPtr> terms;
  if (poly.group_mask) {
    for (int i = 0; i < n_inputs; ++i) {
      if (!poly.mask[i] || poly.w[i] == 0.0) continue;
      terms.push_back(make_mul({make_const(poly.w[i]), make_var(i)}));
    }
    if (poly.mask[n_inputs] && poly.w[n_inputs] != 0.0)
      terms.push_back(make_const(poly.w[n_inputs]));
  }
  return make_add(std::move(terms));
}

}  // namespace

ExprPtr extract_expression(const MathONet& net) {
  validate(net);
  std::vector<ExprPtr> prev;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    std::vector<ExprPtr> current;
    current.reserve(layer.neurons.size());
    for (const Neuron& neuron : layer.neurons) {
      std::vector<ExprPtr> h_terms;
      for (std::size_t i = 0; i < neuron.polys.size(); ++i) {
        ExprPtr p = poly_expr(neuron.polys[i], net.n_inputs);
        ExprPtr feat = (l == 0) ? make_var(static_cast<int>(i)) : prev[i];
        h_terms.push_back(make_mul({std::move(p), std::move(feat)}));
      }
      if (neuron.bias != 0.0) h_terms.push_back(make_const(neuron.bias));
      ExprPtr h = make_add(std::move(h_terms));
      std::vector<ExprPtr> a_terms;
      const OperNet& oper = neuron.oper;
      for (std::size_t o = 0; o < net.unary_set.size(); ++o) {
        if (!oper.group_mask || !oper.mask[o]) continue;
        ExprPtr scaled = make_mul({make_const(oper.w[o]), h});
        if (net.unary_set[o] == UnaryKind::Identity)
          a_terms.push_back(std::move(scaled));
        else
          a_terms.push_back(make_unary(net.unary_set[o], std::move(scaled)));
      }
      current.push_back(make_add(std::move(a_terms)));
    }
    prev = std::move(current);
  }
  std::vector<ExprPtr> out_terms;
  for (std::size_t k = 0; k < net.output_polys.size(); ++k)
    out_terms.push_back(make_mul({poly_expr(net.output_polys[k], net.n_inputs), prev[k]}));
  return make_add(std::move(out_terms));
}

// ---------------------------------------------------------------------------
// Canonical polynomial-over-atoms form used by simplify / to_string.
// ---------------------------------------------------------------------------

namespace {

std::string double_key(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Canonizer {
  struct Atom {
    bool is_var = true;
    int var = -1;
    UnaryKind op = UnaryKind::Identity;
    ExprPtr arg;        // canonical expression of the argument
    std::string key;    // total-order key; vars sort before unary atoms
  };
  // factors: (atom id, power), sorted by atom id
  using Factors = std::vector<std::pair<int, int>>;
  struct Term {
    double coeff = 0.0;
    Factors factors;
  };
  using Poly = std::vector<Term>;

  std::vector<Atom> atoms;
  std::map<std::string, int> atom_ids;

  int intern_var(int var) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0:%08d", var);
    std::string key(buf);
    auto it = atom_ids.find(key);
    if (it != atom_ids.end()) return it->second;
    Atom a;
    a.is_var = true;
    a.var = var;
    a.key = key;
    atoms.push_back(std::move(a));
    const int id = static_cast<int>(atoms.size()) - 1;
    atom_ids.emplace(atoms[id].key, id);
    return id;
  }

  int intern_unary(UnaryKind op, const Poly& arg_poly) {
    std::string key = "1:";
    key += unary_name(op);
    key += '(';
    key += poly_key(arg_poly);
    key += ')';
    auto it = atom_ids.find(key);
    if (it != atom_ids.end()) return it->second;
    Atom a;
    a.is_var = false;
    a.op = op;
    a.arg = rebuild(arg_poly);
    a.key = std::move(key);
    atoms.push_back(std::move(a));
    const int id = static_cast<int>(atoms.size()) - 1;
    atom_ids.emplace(atoms[id].key, id);
    return id;
  }

  std::string poly_key(const Poly& p) const {
    Poly sorted = p;
    sort_terms(sorted);
    std::string out;
    for (const Term& t : sorted) {
      if (!out.empty()) out += '+';
      out += double_key(t.coeff);
      for (auto [atom, power] : t.factors) {
        out += '*';
        out += atoms[atom].key;
        if (power > 1) {
          out += '^';
          out += std::to_string(power);
        }
      }
    }
    return out.empty() ? "0" : out;
  }

  static void merge_into(std::map<Factors, double>& acc, const Term& t) {
    acc[t.factors] += t.coeff;
  }

  static Poly from_map(const std::map<Factors, double>& acc) {
    Poly p;
    for (const auto& [factors, coeff] : acc) {
      if (coeff == 0.0) continue;
      p.push_back({coeff, factors});
    }
    return p;
  }

  Poly mul(const Poly& a, const Poly& b) const {
    std::map<Factors, double> acc;
    for (const Term& ta : a) {
      for (const Term& tb : b) {
        Term prod;
        prod.coeff = ta.coeff * tb.coeff;
        prod.factors = ta.factors;
        for (auto [atom, power] : tb.factors) {
          auto it = std::find_if(prod.factors.begin(), prod.factors.end(),
                                 [atom](const auto& f) { return f.first == atom; });
          if (it == prod.factors.end())
            prod.factors.emplace_back(atom, power);
          else
            it->second += power;
        }
        std::sort(prod.factors.begin(), prod.factors.end());
        merge_into(acc, prod);
      }
    }
    return from_map(acc);
  }

  Poly canon(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Const:
        if (e.value == 0.0) return {};
        return {{e.value, {}}};
      case Expr::Kind::Var:
        return {{1.0, {{intern_var(e.var), 1}}}};
      case Expr::Kind::Add: {
        std::map<Factors, double> acc;
        for (const ExprPtr& k : e.kids)
          for (const Term& t : canon(*k)) merge_into(acc, t);
        return from_map(acc);
      }
      case Expr::Kind::Mul: {
        Poly p{{1.0, {}}};
        for (const ExprPtr& k : e.kids) {
          p = mul(p, canon(*k));
          if (p.empty()) return {};
        }
        return p;
      }
      case Expr::Kind::Unary: {
        Poly arg = canon(*e.kids.front());
        if (e.op == UnaryKind::Identity) return arg;
        if (arg.empty()) return {{unary_eval(e.op, 0.0), {}}};
        if (arg.size() == 1 && arg.front().factors.empty())
          return {{unary_eval(e.op, arg.front().coeff), {}}};
        return {{1.0, {{intern_unary(e.op, arg), 1}}}};
      }
    }
    return {};
  }

  // Term order: expand factors into the sequence of atom keys (respecting
  // powers) and compare lexicographically; the constant term sorts last.
  bool term_less(const Term& a, const Term& b) const {
    if (a.factors.empty() != b.factors.empty()) return b.factors.empty();
    auto expand = [this](const Term& t) {
      std::vector<const std::string*> seq;
      for (auto [atom, power] : t.factors)
        for (int i = 0; i < power; ++i) seq.push_back(&atoms[atom].key);
      std::sort(seq.begin(), seq.end(),
                [](const std::string* x, const std::string* y) { return *x < *y; });
      return seq;
    };
    const auto sa = expand(a);
    const auto sb = expand(b);
    return std::lexicographical_compare(
        sa.begin(), sa.end(), sb.begin(), sb.end(),
        [](const std::string* x, const std::string* y) { return *x < *y; });
  }

  void sort_terms(Poly& p) const {
    std::sort(p.begin(), p.end(), [this](const Term& a, const Term& b) {
      if (term_less(a, b)) return true;
      if (term_less(b, a)) return false;
      return a.coeff < b.coeff;  // unreachable post-merge; keeps the order total
    });
  }

  ExprPtr rebuild_term(const Term& t) const {
    // factors ordered by canonical atom key, not intern order
    std::vector<std::pair<int, int>> ordered = t.factors;
    std::sort(ordered.begin(), ordered.end(), [this](const auto& a, const auto& b) {
      return atoms[a.first].key < atoms[b.first].key;
    });
    std::vector<ExprPtr> factors;
    for (auto [atom, power] : ordered) {
      const Atom& a = atoms[atom];
      ExprPtr base = a.is_var ? make_var(a.var) : make_unary(a.op, a.arg);
      for (int i = 0; i < power; ++i) factors.push_back(base);
    }
    if (factors.empty()) return make_const(t.coeff);
    if (t.coeff != 1.0) factors.insert(factors.begin(), make_const(t.coeff));
    return make_mul(std::move(factors));
  }

  ExprPtr rebuild(const Poly& p) const {
    if (p.empty()) return make_const(0.0);
    Poly sorted = p;
    sort_terms(sorted);
    std::vector<ExprPtr> terms;
    terms.reserve(sorted.size());
    for (const Term& t : sorted) terms.push_back(rebuild_term(t));
    return make_add(std::move(terms));
  }
};

}  // namespace

ExprPtr simplify(const ExprPtr& e, double coeff_floor) {
  if (coeff_floor < 0.0) throw std::invalid_argument("simplify: negative coefficient floor");
  Canonizer cz;
  Canonizer::Poly p = cz.canon(*e);
  if (coeff_floor > 0.0) {
    Canonizer::Poly kept;
    for (const auto& t : p)
      if (std::fabs(t.coeff) >= coeff_floor) kept.push_back(t);
    p = std::move(kept);
  }
  return cz.rebuild(p);
}

int term_count(const Expr& e) {
  if (e.kind == Expr::Kind::Const && e.value == 0.0) return 0;
  if (e.kind == Expr::Kind::Add) return static_cast<int>(e.kids.size());
  return 1;
}

namespace {

std::string default_var_name(int index, int n_seen) {
  static const char* short_names[] = {"x", "y", "z"};
  if (n_seen <= 3 && index < 3) return short_names[index];
  return "x" + std::to_string(index + 1);
}

int max_var_index(const Expr& e) {
  int m = -1;
  if (e.kind == Expr::Kind::Var) m = e.var;
  for (const ExprPtr& k : e.kids) m = std::max(m, max_var_index(*k));
  return m;
}

double round_half_even(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::nearbyint(v * scale) / scale;
}

std::string format_coeff(double v, int decimals) {
  const double r = round_half_even(v, decimals);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, r == 0.0 ? 0.0 : r);
  return std::string(buf);
}

struct Printer {
  int decimals;
  std::span<const std::string> names;
  int n_vars;

  std::string var_name(int index) const {
    if (index < static_cast<int>(names.size())) return names[index];
    return default_var_name(index, n_vars);
  }

  // `term` is Mul(Const?, factors...) or Const or a single factor.
  void term_parts(const Expr& term, double& coeff, std::vector<const Expr*>& factors) const {
    coeff = 1.0;
    factors.clear();
    if (term.kind == Expr::Kind::Const) {
      coeff = term.value;
      return;
    }
    if (term.kind == Expr::Kind::Mul) {
      for (const ExprPtr& k : term.kids) {
        if (k->kind == Expr::Kind::Const)
          coeff *= k->value;
        else
          factors.push_back(k.get());
      }
      return;
    }
    factors.push_back(&term);
  }

  std::string factor_string(const std::vector<const Expr*>& factors) const {
    std::string out;
    for (std::size_t i = 0; i < factors.size();) {
      std::size_t run = i + 1;
      auto same = [&](const Expr* a, const Expr* b) {
        if (a->kind != b->kind) return false;
        if (a->kind == Expr::Kind::Var) return a->var == b->var;
        return a == b;  // unary atoms repeat as shared subtrees
      };
      while (run < factors.size() && same(factors[i], factors[run])) ++run;
      if (!out.empty()) out += "·";
      out += atom_string(*factors[i]);
      if (run - i > 1) out += "^" + std::to_string(run - i);
      i = run;
    }
    return out;
  }

  std::string atom_string(const Expr& e) const {
    switch (e.kind) {
      case Expr::Kind::Var:
        return var_name(e.var);
      case Expr::Kind::Unary:
        return std::string(unary_name(e.op)) + "(" + render(*e.kids.front()) + ")";
      default:
        return "(" + render(e) + ")";
    }
  }

  std::string render(const Expr& e) const {
    std::vector<const Expr*> terms;
    if (e.kind == Expr::Kind::Add)
      for (const ExprPtr& k : e.kids) terms.push_back(k.get());
    else
      terms.push_back(&e);

    std::string out;
    double coeff = 0.0;
    std::vector<const Expr*> factors;
    for (std::size_t t = 0; t < terms.size(); ++t) {
      term_parts(*terms[t], coeff, factors);
      const std::string mag = format_coeff(std::fabs(coeff), decimals);
      const bool neg = coeff < 0.0;
      if (t == 0) {
        if (neg) out += "-";
      } else {
        out += neg ? " - " : " + ";
      }
      out += mag;
      const std::string fs = factor_string(factors);
      if (!fs.empty()) out += "·" + fs;
    }
    return out;
  }
};

}  // namespace

std::string to_string(const Expr& e, int decimals, std::span<const std::string> var_names) {
  if (decimals < 1 || decimals > 12)
    throw std::invalid_argument("to_string: decimals out of range");
  // Canonical ordering first; no terms are dropped.
  ExprPtr canonical = simplify(std::make_shared<Expr>(e), 0.0);
  if (canonical->kind == Expr::Kind::Const && canonical->value == 0.0) return "0";
  Printer pr{decimals, var_names, max_var_index(*canonical) + 1};
  return pr.render(*canonical);
}

std::vector<TermView> term_views(const ExprPtr& simplified) {
  std::vector<TermView> views;
  std::vector<ExprPtr> terms;
  if (simplified->kind == Expr::Kind::Add)
    terms = simplified->kids;
  else if (!(simplified->kind == Expr::Kind::Const && simplified->value == 0.0))
    terms.push_back(simplified);
  for (const ExprPtr& term : terms) {
    TermView v;
    v.coeff = 1.0;
    std::vector<ExprPtr> unit_factors;
    if (term->kind == Expr::Kind::Const) {
      v.coeff = term->value;
    } else if (term->kind == Expr::Kind::Mul) {
      for (const ExprPtr& k : term->kids) {
        if (k->kind == Expr::Kind::Const)
          v.coeff *= k->value;
        else
          unit_factors.push_back(k);
      }
    } else {
      unit_factors.push_back(term);
    }
    v.unit = unit_factors.empty() ? make_const(1.0) : make_mul(std::move(unit_factors));
    views.push_back(std::move(v));
  }
  return views;
}

std::optional<std::vector<PolyTerm>> polynomial_terms(const Expr& simplified, int n_vars) {
  std::vector<PolyTerm> out;
  std::vector<const Expr*> terms;
  if (simplified.kind == Expr::Kind::Add)
    for (const ExprPtr& k : simplified.kids) terms.push_back(k.get());
  else
    terms.push_back(&simplified);
  for (const Expr* term : terms) {
    PolyTerm pt;
    pt.coeff = 1.0;
    pt.powers.assign(n_vars, 0);
    std::vector<const Expr*> factors;
    if (term->kind == Expr::Kind::Const) {
      pt.coeff = term->value;
    } else if (term->kind == Expr::Kind::Mul) {
      for (const ExprPtr& k : term->kids) factors.push_back(k.get());
    } else {
      factors.push_back(term);
    }
    for (const Expr* f : factors) {
      if (f->kind == Expr::Kind::Const) {
        pt.coeff *= f->value;
      } else if (f->kind == Expr::Kind::Var) {
        if (f->var >= n_vars) return std::nullopt;
        pt.powers[f->var] += 1;
      } else {
        return std::nullopt;
      }
    }
    if (pt.coeff == 0.0 && term->kind == Expr::Kind::Const && simplified.kind != Expr::Kind::Add)
      continue;  // the zero expression
    out.push_back(std::move(pt));
  }
  return out;
}

std::optional<std::vector<int>> monomial_powers(const Expr& unit, int n_vars) {
  std::vector<int> powers(n_vars, 0);
  std::vector<const Expr*> factors;
  if (unit.kind == Expr::Kind::Const) {
    if (unit.value != 1.0) return std::nullopt;
    return powers;
  }
  if (unit.kind == Expr::Kind::Mul)
    for (const ExprPtr& k : unit.kids) factors.push_back(k.get());
  else
    factors.push_back(&unit);
  for (const Expr* f : factors) {
    if (f->kind != Expr::Kind::Var || f->var >= n_vars) return std::nullopt;
    powers[f->var] += 1;
  }
  return powers;
}

std::optional<double> monomial_coeff(const Expr& simplified, std::span<const int> powers) {
  auto terms = polynomial_terms(simplified, static_cast<int>(powers.size()));
  if (!terms) return std::nullopt;
  for (const PolyTerm& t : *terms) {
    bool match = true;
    for (std::size_t i = 0; i < powers.size(); ++i)
      if (t.powers[i] != powers[i]) {
        match = false;
        break;
      }
    if (match) return t.coeff;
  }
  return std::nullopt;
}

}  // namespace mathonet
