#pragma once

// Reference resolution: from the vantage of an origin cell, which cells
// does a field name denote?
//
//  - a deeper field: every descendant of the origin row at that level
//  - the same level: the origin row itself
//  - a shallower field: the single ancestor at that level
//  - another table: every row at the field's level, narrowed by the join
//    constraints that borrows and links establish between the tables

#include "strata/model.hpp"

#include <variant>
#include <vector>

namespace strata {

struct CellSet {
  std::string table;
  std::string field;
  /// Document order.
  std::vector<RowId> rows;
  CellAddress origin;
};

enum class ConstraintSource { Borrow, Link };

struct JoinConstraint {
  std::string local_field;    // in the origin table
  std::string foreign_field;  // in the target table
  ConstraintSource source;
  friend bool operator==(const JoinConstraint&, const JoinConstraint&) = default;
};

/// Resolution failure; the reference evaluates to this error (#REF).
struct ScopeError {
  ErrorCode code;
  std::string message;
};

using Resolution = std::variant<CellSet, ScopeError>;

Resolution resolve_local(const Workbook& wb, const std::string& field, const CellAddress& origin);

/// One constraint per borrowed field of `origin_table` sourced from
/// `target_table`, then one per link from `origin_table` to `target_table`.
std::vector<JoinConstraint> join_constraints(const Workbook& wb, const std::string& origin_table,
                                             const std::string& target_table);

/// Constraints whose local field sits deeper than the origin row are not
/// applicable and are skipped. A foreign field deeper than the target
/// field matches when any descendant carries the value. Qualifying a
/// field with the origin's own table is the same as resolve_local.
Resolution resolve_cross(const Workbook& wb, const std::string& table, const std::string& field,
                         const CellAddress& origin);

/// Same as resolve_cross with an explicit constraint list.
Resolution resolve_cross_with(const Workbook& wb, const std::string& table,
                              const std::string& field, const CellAddress& origin,
                              const std::vector<JoinConstraint>& constraints);

}  // namespace strata
