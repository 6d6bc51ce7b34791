#pragma once

// Formula evaluation and dependency-driven recalculation.

#include "strata/model.hpp"
#include "strata/relations.hpp"

#include <map>
#include <set>
#include <vector>

namespace strata {

/// Evaluates `expr` for the cell at `origin`. Formula cells it reads must
/// already hold their current values.
Value evaluate(const Workbook& wb, const Expr& expr, const CellAddress& origin);

enum class EdgeKind { Local, Cross };

struct Dependency {
  FieldRef target;
  EdgeKind kind;
  friend bool operator==(const Dependency&, const Dependency&) = default;
};

/// Field-level dependency graph.
class DependencyGraph {
 public:
  /// Outgoing edges of a formula or borrowed field.
  [[nodiscard]] const std::vector<Dependency>& depends_on(const FieldRef& f) const;
  /// Reverse edges: fields that read `f`.
  [[nodiscard]] const std::vector<Dependency>& dependents(const FieldRef& f) const;
  [[nodiscard]] bool is_cyclic(const FieldRef& f) const { return cyclic_.count(f) != 0; }
  [[nodiscard]] const std::set<FieldRef>& cyclic() const { return cyclic_; }
  /// Formula fields, dependencies before dependents; fields of one cycle
  /// are adjacent.
  [[nodiscard]] const std::vector<FieldRef>& evaluation_order() const { return order_; }
  [[nodiscard]] std::size_t edge_count() const;

 private:
  friend DependencyGraph rebuild_dependencies(const Workbook& wb);

  std::map<FieldRef, std::vector<Dependency>> out_;
  std::map<FieldRef, std::vector<Dependency>> in_;
  std::set<FieldRef> cyclic_;
  std::vector<FieldRef> order_;
};

DependencyGraph rebuild_dependencies(const Workbook& wb);

struct CellChange {
  CellAddress address;
  Value old_value;
  Value new_value;
};

struct CalcResult {
  std::vector<CellChange> changed;
  std::size_t evaluated_count = 0;
  RowDiff rows;
};

enum class RecalcMode { Incremental, All };

/// Synchronizes borrows, then evaluates the formula cells invalidated by
/// pending edits (or every formula cell with RecalcMode::All) in
/// dependency order.
CalcResult recalculate(Workbook& wb, RecalcMode mode = RecalcMode::Incremental);

}  // namespace strata
