#pragma once

// Workbook document: tables, hierarchy levels, fields, the row tree and
// raw cell storage.

#include "strata/formula.hpp"
#include "strata/relation_set.hpp"
#include "strata/value.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace strata {

/// Stable opaque row identifier. Never reused within a workbook.
struct RowId {
  std::uint64_t value = 0;
  friend auto operator<=>(const RowId&, const RowId&) = default;
  friend bool operator==(const RowId&, const RowId&) = default;
};

/// The virtual root that owns every level-0 row.
inline constexpr RowId kRoot{0};

struct RowIdHash {
  std::size_t operator()(RowId id) const noexcept { return std::hash<std::uint64_t>{}(id.value); }
};

/// Thrown by mutating operations that reject their input. `code` is the
/// error value a caller would see for the same problem in a cell.
class EngineError : public std::runtime_error {
 public:
  EngineError(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  [[nodiscard]] ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

enum class FieldKind { Data, Formula, Borrowed };

std::string_view field_kind_name(FieldKind kind);
std::optional<FieldKind> field_kind_from_name(std::string_view name);

struct Field {
  std::string name;
  int level = 0;
  FieldKind kind = FieldKind::Data;
  /// Formula text as entered (kind=Formula).
  std::string formula_text;
  /// Parsed formula; null when the text failed to parse.
  ExprPtr formula;
  std::string parse_error;
  std::optional<FieldRef> borrow_source;
  DisplayFormat format;
};

/// Options for Workbook::add_field.
struct FieldSpec {
  std::string name;
  int level = 0;
  FieldKind kind = FieldKind::Data;
  std::optional<std::string> formula;
  std::optional<FieldRef> borrow_source;
  std::optional<std::string> format;
};

struct RowNode {
  RowId id;
  int level = 0;
  RowId parent = kRoot;
  std::vector<RowId> children;
  /// Only fields bound to this row's level. Empty values are not stored.
  std::map<std::string, Value> cells;
};

struct CellAddress {
  std::string table;
  RowId row;
  std::string field;
  friend auto operator<=>(const CellAddress&, const CellAddress&) = default;
  friend bool operator==(const CellAddress&, const CellAddress&) = default;
};

class Table {
 public:
  Table(std::string name, std::vector<std::string> levels);

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const std::vector<std::string>& levels() const { return levels_; }
  [[nodiscard]] int depth() const { return static_cast<int>(levels_.size()); }

  [[nodiscard]] const std::vector<Field>& fields() const { return fields_; }
  [[nodiscard]] const Field* find_field(std::string_view name) const;
  Field* find_field(std::string_view name);
  /// Fields ordered by level, then declaration order.
  [[nodiscard]] std::vector<const Field*> fields_outer_to_inner() const;
  [[nodiscard]] std::vector<const Field*> fields_at(int level) const;
  [[nodiscard]] const Field* borrowed_field_at(int level) const;

  [[nodiscard]] bool has_row(RowId id) const { return rows_.count(id) != 0; }
  [[nodiscard]] const RowNode* find_row(RowId id) const;
  [[nodiscard]] const RowNode& row(RowId id) const;
  RowNode& row(RowId id);
  [[nodiscard]] std::size_t row_count() const { return rows_.size(); }

  /// kRoot yields the level-0 rows.
  [[nodiscard]] const std::vector<RowId>& children_of(RowId parent) const;
  /// Level of a row; -1 for kRoot.
  [[nodiscard]] int level_of(RowId id) const;

  /// Pre-order walk from the root (document order).
  void walk(const std::function<void(const RowNode&)>& visit) const;
  [[nodiscard]] std::vector<RowId> rows_at_level(int level) const;
  /// Row itself when it sits at `level`, else its ancestor there.
  [[nodiscard]] RowId ancestor_at(RowId row, int level) const;
  /// Descendants of `row` (kRoot = whole table) at `level`, document order.
  [[nodiscard]] std::vector<RowId> descendants_at(RowId row, int level) const;

  /// Stored cell value; Empty when unset.
  [[nodiscard]] const Value& cell(RowId row, std::string_view field) const;
  /// Reads `field` from `row` or from its ancestor at the field's level.
  /// Empty when the field is deeper than the row or unknown.
  [[nodiscard]] const Value& inherited_cell(RowId row, std::string_view field) const;

  // Machine-level operations. They keep the tree consistent but enforce no
  // schema rules; Workbook wraps them with validation and change tracking.
  void push_field(Field field) { fields_.push_back(std::move(field)); }
  void pop_field() { fields_.pop_back(); }
  RowNode& attach_row(RowId id, RowId parent, std::optional<std::size_t> index);
  /// Removes a row and its subtree; returns the removed ids, root first.
  std::vector<RowId> detach_subtree(RowId id);
  void write_cell(RowId row, const std::string& field, Value v);
  void reorder_children(RowId parent, std::vector<RowId> order);

 private:
  std::vector<RowId>& children_mut(RowId parent);

  std::string name_;
  std::vector<std::string> levels_;
  std::vector<Field> fields_;
  std::unordered_map<RowId, RowNode, RowIdHash> rows_;
  std::vector<RowId> roots_;
};

/// A change that may invalidate formula cells. `anchor` is the row whose
/// cell changed, or the surviving parent of a deleted subtree; kRoot means
/// "anywhere in the table".
struct ChangeEvent {
  std::string table;
  std::string field;
  RowId anchor;
};

struct PendingChanges {
  std::vector<ChangeEvent> events;
  /// Formula cells of newly inserted rows.
  std::vector<CellAddress> new_cells;
  /// Fields, formulas or relations changed: rebuild and evaluate everything.
  bool schema_changed = false;

  [[nodiscard]] bool empty() const { return events.empty() && new_cells.empty() && !schema_changed; }
  void clear() {
    events.clear();
    new_cells.clear();
    schema_changed = false;
  }
};

class DependencyGraph;

enum class SetCellOutcome { Accepted, Unmatched };

class Workbook {
 public:
  explicit Workbook(std::string name = "");

  [[nodiscard]] const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  [[nodiscard]] std::uint64_t version() const { return version_; }

  [[nodiscard]] const std::deque<Table>& tables() const { return tables_; }
  [[nodiscard]] const Table* find_table(std::string_view name) const;
  Table* find_table(std::string_view name);
  /// Throws EngineError(#REF) when missing.
  [[nodiscard]] const Table& table(std::string_view name) const;
  Table& table(std::string_view name);

  [[nodiscard]] const RelationSet& relations() const { return relations_; }
  RelationSet& relations_mut() { return relations_; }

  Table& add_table(const std::string& name, const std::vector<std::string>& level_names);
  const Field& add_field(const std::string& table, const FieldSpec& spec);
  /// Replaces the formula of a kind=formula field.
  void set_formula(const std::string& table, const std::string& field, const std::string& text);
  RowId insert_row(const std::string& table, RowId parent,
                   std::optional<std::size_t> index = std::nullopt);
  /// Returns the number of removed rows (the row plus its subtree).
  std::size_t delete_row(const std::string& table, RowId row);
  SetCellOutcome set_cell(const std::string& table, RowId row, const std::string& field,
                          const Value& value);

  /// Current value; recalculates first when edits are pending. Bad
  /// addresses yield #REF.
  Value get_cell(const std::string& table, RowId row, const std::string& field);
  /// Stored value without recalculating.
  [[nodiscard]] Value peek_cell(const std::string& table, RowId row, const std::string& field) const;

  // Change tracking, consumed by recalculate().
  PendingChanges& pending() { return pending_; }
  [[nodiscard]] const PendingChanges& pending() const { return pending_; }
  [[nodiscard]] const std::shared_ptr<const DependencyGraph>& graph() const { return graph_; }
  void set_graph(std::shared_ptr<const DependencyGraph> g) { graph_ = std::move(g); }
  [[nodiscard]] bool needs_recalc() const { return !graph_ || !pending_.empty(); }

  RowId next_row_id() { return RowId{++last_row_id_}; }
  void bump_version() { ++version_; }

  /// Records the events for a row that just appeared in `table`.
  void note_inserted(const Table& table, RowId row);
  /// Records the events for a subtree of `level` removed from under `parent`.
  void note_removed(const Table& table, RowId parent, int level);
  void note_cell(const std::string& table, const std::string& field, RowId row);

 private:
  std::string name_;
  std::uint64_t version_ = 0;
  std::uint64_t last_row_id_ = 0;
  std::deque<Table> tables_;
  RelationSet relations_;
  PendingChanges pending_;
  std::shared_ptr<const DependencyGraph> graph_;
};

}  // namespace strata
