#include "strata/eval.hpp"

#include "strata/scope.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>
#include <unordered_set>

namespace strata {

namespace {

using Rep = Number::Rep;

const std::vector<Dependency> kNoDeps;

struct Coerced {
  Number number;
  std::optional<Value> error;
};

Coerced to_number(const Value& v) {
  if (v.is_number()) return {v.number(), std::nullopt};
  if (v.is_empty()) return {Number(0), std::nullopt};
  if (v.is_bool()) return {Number(v.boolean() ? 1 : 0), std::nullopt};
  if (v.is_error()) return {Number(0), v};
  return {Number(0), Value(ErrorCode::Type)};
}

Value checked(const Number& n) {
  if (!n.is_finite()) return ErrorCode::Type;
  return n;
}

Value power(const Number& base, const Number& exponent) {
  if (exponent.is_integer() && boost::multiprecision::abs(exponent.rep()) <= Rep(100000)) {
    long long e = exponent.rep().convert_to<long long>();
    const bool negative = e < 0;
    if (negative) e = -e;
    if (negative && base.is_zero()) return ErrorCode::Div0;
    Rep result(1);
    Rep b = base.rep();
    while (e > 0) {
      if (e & 1) result *= b;
      b *= b;
      e >>= 1;
    }
    if (negative) result = Rep(1) / result;
    return checked(Number(result));
  }
  if (base.rep() < 0) return ErrorCode::Type;
  if (base.is_zero()) {
    if (exponent.rep() < 0) return ErrorCode::Div0;
    return Number(0);
  }
  // exp/log lose the last few digits; trim them so 4^0.5 is exactly 2.
  const Rep raw = boost::multiprecision::pow(base.rep(), exponent.rep());
  if (!boost::multiprecision::isfinite(raw)) return ErrorCode::Type;
  return checked(Number(Rep(raw.str(44, std::ios_base::scientific))));
}

// -1, 0, 1 or an error value for incomparable types.
std::variant<int, Value> compare(Value a, Value b) {
  if (a.is_error()) return a;
  if (b.is_error()) return b;
  auto blank_for = [](const Value& other) -> Value {
    if (other.is_text()) return std::string();
    if (other.is_bool()) return false;
    return Number(0);
  };
  if (a.is_empty()) a = blank_for(b);
  if (b.is_empty()) b = blank_for(a);
  auto sign = [](auto x, auto y) { return x < y ? -1 : (y < x ? 1 : 0); };
  if (a.is_number() && b.is_number()) return sign(a.number().rep(), b.number().rep());
  if (a.is_text() && b.is_text()) return sign(a.text(), b.text());
  if (a.is_bool() && b.is_bool()) return sign(a.boolean(), b.boolean());
  return Value(ErrorCode::Type);
}

bool is_reference(const Expr& e) {
  return std::holds_alternative<LocalRef>(e.node) || std::holds_alternative<CrossRef>(e.node);
}

class Evaluator {
 public:
  Evaluator(const Workbook& wb, const CellAddress& origin) : wb_(wb), origin_(origin) {}

  Value eval(const Expr& e) {
    return std::visit([&](const auto& n) { return eval_node(n); }, e.node);
  }

 private:
  Value eval_node(const NumberLit& n) { return n.value; }
  Value eval_node(const TextLit& n) { return n.value; }
  Value eval_node(const BoolLit& n) { return n.value; }
  Value eval_node(const LocalRef& r) { return eval_ref(r); }
  Value eval_node(const CrossRef& r) { return eval_ref(r); }

  Value eval_node(const Unary& n) {
    const Value v = eval(*n.operand);
    const Coerced c = to_number(v);
    if (c.error) return *c.error;
    return -c.number;
  }

  Value eval_node(const Binary& n) {
    const Value l = eval(*n.lhs);
    if (l.is_error()) return l;
    const Value r = eval(*n.rhs);
    if (r.is_error()) return r;
    switch (n.op) {
      case BinaryOp::Eq:
      case BinaryOp::Ne:
      case BinaryOp::Lt:
      case BinaryOp::Le:
      case BinaryOp::Gt:
      case BinaryOp::Ge: {
        auto c = compare(l, r);
        if (auto* err = std::get_if<Value>(&c)) return *err;
        const int s = std::get<int>(c);
        switch (n.op) {
          case BinaryOp::Eq: return s == 0;
          case BinaryOp::Ne: return s != 0;
          case BinaryOp::Lt: return s < 0;
          case BinaryOp::Le: return s <= 0;
          case BinaryOp::Gt: return s > 0;
          default: return s >= 0;
        }
      }
      default: break;
    }
    const Coerced a = to_number(l);
    if (a.error) return *a.error;
    const Coerced b = to_number(r);
    if (b.error) return *b.error;
    switch (n.op) {
      case BinaryOp::Add: return checked(a.number + b.number);
      case BinaryOp::Sub: return checked(a.number - b.number);
      case BinaryOp::Mul: return checked(a.number * b.number);
      case BinaryOp::Div:
        if (b.number.is_zero()) return ErrorCode::Div0;
        return checked(a.number / b.number);
      case BinaryOp::Pow: return power(a.number, b.number);
      default: return ErrorCode::Type;
    }
  }

  Value eval_node(const Call& n) {
    if (is_aggregate(n.fn)) return aggregate(n);
    if (n.fn == Function::If) {
      const Value cond = eval(*n.args[0]);
      if (cond.is_error()) return cond;
      bool truth = false;
      if (cond.is_bool()) {
        truth = cond.boolean();
      } else if (cond.is_number()) {
        truth = !cond.number().is_zero();
      } else if (cond.is_text()) {
        return ErrorCode::Type;
      }
      return eval(*n.args[truth ? 1 : 2]);
    }
    // ROUND
    const Value x = eval(*n.args[0]);
    const Coerced cx = to_number(x);
    if (cx.error) return *cx.error;
    const Value d = eval(*n.args[1]);
    const Coerced cd = to_number(d);
    if (cd.error) return *cd.error;
    const Rep digits = boost::multiprecision::trunc(cd.number.rep());
    if (digits > Rep(30) || digits < Rep(-30)) return ErrorCode::Type;
    return cx.number.round_half_even(digits.convert_to<int>());
  }

  template <typename Ref>
  Value eval_ref(const Ref& ref) {
    Resolution res = resolve(ref);
    if (auto* err = std::get_if<ScopeError>(&res)) return err->code;
    const CellSet& set = std::get<CellSet>(res);
    if (set.rows.empty()) return ErrorCode::NoMatch;
    if (set.rows.size() > 1) return ErrorCode::Multi;
    return wb_.table(set.table).cell(set.rows.front(), set.field);
  }

  Resolution resolve(const LocalRef& r) { return resolve_local(wb_, r.field, origin_); }
  Resolution resolve(const CrossRef& r) { return resolve_cross(wb_, r.table, r.field, origin_); }

  Value aggregate(const Call& n) {
    std::vector<Value> values;
    for (const auto& arg : n.args) {
      if (!is_reference(*arg)) {
        values.push_back(eval(*arg));
        continue;
      }
      Resolution res = std::holds_alternative<LocalRef>(arg->node)
                           ? resolve(std::get<LocalRef>(arg->node))
                           : resolve(std::get<CrossRef>(arg->node));
      if (auto* err = std::get_if<ScopeError>(&res)) {
        values.emplace_back(err->code);
        continue;
      }
      const CellSet& set = std::get<CellSet>(res);
      const Table& t = wb_.table(set.table);
      for (RowId r : set.rows) values.push_back(t.cell(r, set.field));
    }
    for (const auto& v : values) {
      if (v.is_error()) return v;
    }

    switch (n.fn) {
      case Function::Count: {
        long long count = 0;
        for (const auto& v : values) count += v.is_empty() ? 0 : 1;
        return Number(count);
      }
      case Function::Sum:
      case Function::Avg: {
        Number total(0);
        long long count = 0;
        for (const auto& v : values) {
          if (v.is_empty()) continue;
          const Coerced c = to_number(v);
          if (c.error) return *c.error;
          total += c.number;
          ++count;
        }
        if (!total.is_finite()) return ErrorCode::Type;
        if (n.fn == Function::Sum) return total;
        if (count == 0) return ErrorCode::Div0;
        return checked(total / Number(count));
      }
      default: {
        std::optional<Value> best;
        for (const auto& v : values) {
          if (v.is_empty()) continue;
          if (!best) {
            best = v;
            continue;
          }
          auto c = compare(v, *best);
          if (auto* err = std::get_if<Value>(&c)) return *err;
          const int s = std::get<int>(c);
          if ((n.fn == Function::Min && s < 0) || (n.fn == Function::Max && s > 0)) best = v;
        }
        return best ? *best : Value(Empty{});
      }
    }
  }

  const Workbook& wb_;
  const CellAddress& origin_;
};

}  // namespace

Value evaluate(const Workbook& wb, const Expr& expr, const CellAddress& origin) {
  Evaluator ev(wb, origin);
  return ev.eval(expr);
}

const std::vector<Dependency>& DependencyGraph::depends_on(const FieldRef& f) const {
  auto it = out_.find(f);
  return it == out_.end() ? kNoDeps : it->second;
}

const std::vector<Dependency>& DependencyGraph::dependents(const FieldRef& f) const {
  auto it = in_.find(f);
  return it == in_.end() ? kNoDeps : it->second;
}

std::size_t DependencyGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& [_, deps] : out_) n += deps.size();
  return n;
}

DependencyGraph rebuild_dependencies(const Workbook& wb) {
  DependencyGraph g;
  auto add_edge = [&](const FieldRef& from, const FieldRef& to, EdgeKind kind) {
    auto& deps = g.out_[from];
    const Dependency d{to, kind};
    if (std::find(deps.begin(), deps.end(), d) != deps.end()) return;
    deps.push_back(d);
    g.in_[to].push_back({from, kind});
  };
  auto has_field = [&](const std::string& table, const std::string& field) {
    const Table* t = wb.find_table(table);
    return t && t->find_field(field);
  };

  std::vector<FieldRef> vertices;
  for (const auto& t : wb.tables()) {
    for (const auto& f : t.fields()) {
      const FieldRef self{t.name(), f.name};
      vertices.push_back(self);
      if (f.kind == FieldKind::Borrowed && f.borrow_source &&
          has_field(f.borrow_source->table, f.borrow_source->field)) {
        add_edge(self, *f.borrow_source, EdgeKind::Cross);
      }
      if (f.kind != FieldKind::Formula || !f.formula) continue;
      for (const auto& ref : collect_refs(*f.formula)) {
        if (!ref.table || *ref.table == t.name()) {
          if (has_field(t.name(), ref.field)) add_edge(self, {t.name(), ref.field}, EdgeKind::Local);
          continue;
        }
        if (!has_field(*ref.table, ref.field)) continue;
        add_edge(self, {*ref.table, ref.field}, EdgeKind::Cross);
        for (const auto& c : join_constraints(wb, t.name(), *ref.table)) {
          if (has_field(t.name(), c.local_field)) {
            add_edge(self, {t.name(), c.local_field}, EdgeKind::Local);
          }
          if (has_field(*ref.table, c.foreign_field)) {
            add_edge(self, {*ref.table, c.foreign_field}, EdgeKind::Cross);
          }
        }
      }
    }
  }

  // Tarjan's strongly connected components; components come out with
  // their dependencies first.
  std::map<FieldRef, int> index;
  std::map<FieldRef, int> low;
  std::set<FieldRef> on_stack;
  std::vector<FieldRef> stack;
  int counter = 0;
  std::function<void(const FieldRef&)> connect = [&](const FieldRef& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack.insert(v);
    for (const auto& d : g.depends_on(v)) {
      if (!index.count(d.target)) {
        connect(d.target);
        low[v] = std::min(low[v], low[d.target]);
      } else if (on_stack.count(d.target)) {
        low[v] = std::min(low[v], index[d.target]);
      }
    }
    if (low[v] != index[v]) return;
    std::vector<FieldRef> component;
    FieldRef w;
    do {
      w = stack.back();
      stack.pop_back();
      on_stack.erase(w);
      component.push_back(w);
    } while (!(w == v));
    bool cyclic = component.size() > 1;
    if (!cyclic) {
      const auto& deps = g.depends_on(v);
      cyclic = std::any_of(deps.begin(), deps.end(), [&](const Dependency& d) { return d.target == v; });
    }
    std::reverse(component.begin(), component.end());
    for (const auto& f : component) {
      if (cyclic) g.cyclic_.insert(f);
      const Table* t = wb.find_table(f.table);
      const Field* field = t ? t->find_field(f.field) : nullptr;
      if (field && field->kind == FieldKind::Formula) g.order_.push_back(f);
    }
  };
  for (const auto& v : vertices) {
    if (!index.count(v)) connect(v);
  }
  return g;
}

namespace {

class Recalculator {
 public:
  Recalculator(Workbook& wb, const DependencyGraph& graph) : wb_(wb), graph_(graph) {}

  void mark_all() {
    for (const auto& f : graph_.evaluation_order()) {
      const Table& t = wb_.table(f.table);
      const Field* field = t.find_field(f.field);
      for (RowId r : t.rows_at_level(field->level)) dirty_[f].insert(r);
    }
  }

  void mark(const CellAddress& cell) { dirty_[FieldRef{cell.table, cell.field}].insert(cell.row); }

  // Invalidates the dependents of a changed (table, field, anchor).
  void expand(const ChangeEvent& e) {
    const FieldRef changed{e.table, e.field};
    const Table& source = wb_.table(e.table);
    const bool anchored = e.anchor != kRoot && source.has_row(e.anchor);
    for (const auto& d : graph_.dependents(changed)) {
      const Table* t = wb_.find_table(d.target.table);
      const Field* f = t ? t->find_field(d.target.field) : nullptr;
      if (!f || f->kind != FieldKind::Formula) continue;
      auto& rows = dirty_[d.target];
      if (d.kind == EdgeKind::Local && d.target.table == e.table && anchored) {
        const int anchor_level = source.row(e.anchor).level;
        if (f->level <= anchor_level) {
          rows.insert(source.ancestor_at(e.anchor, f->level));
        } else {
          for (RowId r : source.descendants_at(e.anchor, f->level)) rows.insert(r);
        }
      } else {
        for (RowId r : t->rows_at_level(f->level)) rows.insert(r);
      }
    }
  }

  CalcResult run() {
    CalcResult result;
    for (const auto& key : graph_.evaluation_order()) {
      auto it = dirty_.find(key);
      if (it == dirty_.end() || it->second.empty()) continue;
      Table& t = wb_.table(key.table);
      const Field& field = *t.find_field(key.field);
      const auto& position = document_positions(t);
      std::vector<RowId> rows;
      for (RowId r : it->second) {
        const RowNode* n = t.find_row(r);
        if (n && n->level == field.level) rows.push_back(r);
      }
      std::sort(rows.begin(), rows.end(),
                [&](RowId a, RowId b) { return position.at(a) < position.at(b); });
      const bool cyclic = graph_.is_cyclic(key);
      for (RowId r : rows) {
        const CellAddress address{key.table, r, key.field};
        Value next;
        if (cyclic) {
          next = ErrorCode::Cycle;
        } else if (!field.formula) {
          next = ErrorCode::Parse;
          ++result.evaluated_count;
        } else {
          next = evaluate(wb_, *field.formula, address);
          ++result.evaluated_count;
        }
        Value previous = t.cell(r, key.field);
        if (previous == next) continue;
        t.write_cell(r, key.field, next);
        result.changed.push_back({address, std::move(previous), std::move(next)});
        expand({key.table, key.field, r});
      }
      dirty_.erase(key);
    }
    return result;
  }

 private:
  const std::unordered_map<RowId, std::size_t, RowIdHash>& document_positions(const Table& t) {
    auto& pos = positions_[t.name()];
    if (pos.empty()) {
      std::size_t i = 0;
      t.walk([&](const RowNode& n) { pos[n.id] = i++; });
    }
    return pos;
  }

  Workbook& wb_;
  const DependencyGraph& graph_;
  std::map<FieldRef, std::set<RowId>> dirty_;
  std::map<std::string, std::unordered_map<RowId, std::size_t, RowIdHash>> positions_;
};

}  // namespace

CalcResult recalculate(Workbook& wb, RecalcMode mode) {
  RowDiff rows = sync_borrows(wb);
  PendingChanges& pending = wb.pending();
  bool full = mode == RecalcMode::All;
  if (!wb.graph() || pending.schema_changed) {
    wb.set_graph(std::make_shared<const DependencyGraph>(rebuild_dependencies(wb)));
    full = true;
  }
  const auto graph = wb.graph();
  Recalculator calc(wb, *graph);
  if (full) {
    calc.mark_all();
  } else {
    for (const auto& cell : pending.new_cells) {
      const Table* t = wb.find_table(cell.table);
      if (t && t->has_row(cell.row)) calc.mark(cell);
    }
    for (const auto& e : pending.events) calc.expand(e);
  }
  pending.clear();
  CalcResult result = calc.run();
  result.rows = std::move(rows);
  return result;
}

}  // namespace strata
