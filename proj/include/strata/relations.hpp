#pragma once

// Borrow and link relationships between tables.
//
// A borrowed field turns its level into machine-managed rows: one row per
// distinct source value (under the parent chain's constraints), kept in
// step with the source table by sync_borrows. A link narrows every lookup
// from the local table into the foreign table to rows whose keys match.

#include "strata/model.hpp"

#include <vector>

namespace strata {

struct RowDiff {
  /// (table, row) pairs.
  std::vector<std::pair<std::string, RowId>> inserted;
  /// Includes every row of each removed subtree.
  std::vector<std::pair<std::string, RowId>> deleted;

  [[nodiscard]] bool empty() const { return inserted.empty() && deleted.empty(); }
};

/// Registers the borrow for an existing kind=borrowed field and synchronizes.
/// Throws EngineError on a duplicate borrow, dangling source, level-order
/// violation, mixed source tables, or a borrow cycle between tables.
RowDiff declare_borrow(Workbook& wb, const FieldRef& target, const FieldRef& source);

/// Validates and records a borrow without synchronizing. Used when a
/// whole document is assembled before one final sync.
void register_borrow(Workbook& wb, const FieldRef& target, const FieldRef& source);

/// Throws EngineError(#REF) on dangling endpoints; local must be kind=data.
void declare_link(Workbook& wb, const FieldRef& local, const FieldRef& foreign);

/// Brings every borrowed level in line with its source, tables in borrow
/// dependency order. Rows whose value persists keep their ids.
RowDiff sync_borrows(Workbook& wb);

/// Distinct non-Empty foreign values in document order.
std::vector<Value> valid_values(const Workbook& wb, const LinkSpec& link);

/// Links whose local side is `local`.
std::vector<LinkSpec> links_from(const Workbook& wb, const FieldRef& local);

/// True when the cell is the local side of a link and holds a non-Empty
/// value missing from the foreign key set.
bool is_unmatched(const Workbook& wb, const std::string& table, RowId row,
                  const std::string& field);

/// Borrowed fields of `table`, ordered by level (levels 0..k).
std::vector<const Field*> borrow_chain(const Table& table);

}  // namespace strata
