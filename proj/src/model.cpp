#include "strata/model.hpp"

#include "strata/eval.hpp"
#include "strata/relations.hpp"

#include <algorithm>
#include <set>

namespace strata {

namespace {

const Value kEmptyValue{};
const std::vector<RowId> kNoRows;

[[noreturn]] void fail(ErrorCode code, const std::string& message) {
  throw EngineError(code, message);
}

// Formulas write awkward names as [name], so brackets cannot appear inside.
void check_referable(const std::string& name) {
  if (name.find_first_of("[]") != std::string::npos) {
    fail(ErrorCode::Ref, "name '" + name + "' must not contain '[' or ']'");
  }
}

}  // namespace

std::string_view field_kind_name(FieldKind kind) {
  switch (kind) {
    case FieldKind::Data: return "data";
    case FieldKind::Formula: return "formula";
    case FieldKind::Borrowed: return "borrowed";
  }
  return "data";
}

std::optional<FieldKind> field_kind_from_name(std::string_view name) {
  if (name == "data") return FieldKind::Data;
  if (name == "formula") return FieldKind::Formula;
  if (name == "borrowed") return FieldKind::Borrowed;
  return std::nullopt;
}

// ---------------------------------------------------------------- Table

Table::Table(std::string name, std::vector<std::string> levels)
    : name_(std::move(name)), levels_(std::move(levels)) {}

const Field* Table::find_field(std::string_view name) const {
  for (const auto& f : fields_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Field* Table::find_field(std::string_view name) {
  for (auto& f : fields_) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<const Field*> Table::fields_outer_to_inner() const {
  std::vector<const Field*> out;
  for (int level = 0; level < depth(); ++level) {
    for (const auto& f : fields_) {
      if (f.level == level) out.push_back(&f);
    }
  }
  return out;
}

std::vector<const Field*> Table::fields_at(int level) const {
  std::vector<const Field*> out;
  for (const auto& f : fields_) {
    if (f.level == level) out.push_back(&f);
  }
  return out;
}

const Field* Table::borrowed_field_at(int level) const {
  for (const auto& f : fields_) {
    if (f.level == level && f.kind == FieldKind::Borrowed) return &f;
  }
  return nullptr;
}

const RowNode* Table::find_row(RowId id) const {
  auto it = rows_.find(id);
  return it == rows_.end() ? nullptr : &it->second;
}

const RowNode& Table::row(RowId id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) fail(ErrorCode::Ref, "no row " + std::to_string(id.value) + " in " + name_);
  return it->second;
}

RowNode& Table::row(RowId id) {
  auto it = rows_.find(id);
  if (it == rows_.end()) fail(ErrorCode::Ref, "no row " + std::to_string(id.value) + " in " + name_);
  return it->second;
}

const std::vector<RowId>& Table::children_of(RowId parent) const {
  if (parent == kRoot) return roots_;
  auto it = rows_.find(parent);
  return it == rows_.end() ? kNoRows : it->second.children;
}

std::vector<RowId>& Table::children_mut(RowId parent) {
  if (parent == kRoot) return roots_;
  return row(parent).children;
}

int Table::level_of(RowId id) const {
  if (id == kRoot) return -1;
  return row(id).level;
}

void Table::walk(const std::function<void(const RowNode&)>& visit) const {
  std::vector<RowId> stack(roots_.rbegin(), roots_.rend());
  while (!stack.empty()) {
    const RowNode& node = rows_.at(stack.back());
    stack.pop_back();
    visit(node);
    stack.insert(stack.end(), node.children.rbegin(), node.children.rend());
  }
}

std::vector<RowId> Table::rows_at_level(int level) const { return descendants_at(kRoot, level); }

RowId Table::ancestor_at(RowId row_id, int level) const {
  RowId cur = row_id;
  while (cur != kRoot) {
    const RowNode& n = row(cur);
    if (n.level == level) return cur;
    if (n.level < level) break;
    cur = n.parent;
  }
  return kRoot;
}

std::vector<RowId> Table::descendants_at(RowId row_id, int level) const {
  std::vector<RowId> out;
  const int start_level = level_of(row_id);
  if (level < start_level) return out;
  std::vector<RowId> stack{row_id};
  while (!stack.empty()) {
    const RowId cur = stack.back();
    stack.pop_back();
    const int cur_level = level_of(cur);
    if (cur_level == level) {
      out.push_back(cur);
      continue;
    }
    const auto& kids = children_of(cur);
    stack.insert(stack.end(), kids.rbegin(), kids.rend());
  }
  return out;
}

const Value& Table::cell(RowId row_id, std::string_view field) const {
  const RowNode* n = find_row(row_id);
  if (!n) return kEmptyValue;
  auto it = n->cells.find(std::string(field));
  return it == n->cells.end() ? kEmptyValue : it->second;
}

const Value& Table::inherited_cell(RowId row_id, std::string_view field) const {
  const Field* f = find_field(field);
  if (!f || row_id == kRoot) return kEmptyValue;
  const RowId holder = ancestor_at(row_id, f->level);
  if (holder == kRoot) return kEmptyValue;
  return cell(holder, field);
}

RowNode& Table::attach_row(RowId id, RowId parent, std::optional<std::size_t> index) {
  const int level = parent == kRoot ? 0 : row(parent).level + 1;
  auto& siblings = children_mut(parent);
  const std::size_t at = index ? std::min(*index, siblings.size()) : siblings.size();
  siblings.insert(siblings.begin() + static_cast<std::ptrdiff_t>(at), id);
  RowNode& node = rows_[id];
  node.id = id;
  node.level = level;
  node.parent = parent;
  return node;
}

std::vector<RowId> Table::detach_subtree(RowId id) {
  const RowNode& top = row(id);
  auto& siblings = children_mut(top.parent);
  siblings.erase(std::find(siblings.begin(), siblings.end(), id));
  std::vector<RowId> removed;
  std::vector<RowId> stack{id};
  while (!stack.empty()) {
    const RowId cur = stack.back();
    stack.pop_back();
    removed.push_back(cur);
    const auto& kids = rows_.at(cur).children;
    stack.insert(stack.end(), kids.rbegin(), kids.rend());
  }
  for (RowId r : removed) rows_.erase(r);
  return removed;
}

void Table::write_cell(RowId row_id, const std::string& field, Value v) {
  RowNode& n = row(row_id);
  if (v.is_empty()) {
    n.cells.erase(field);
  } else {
    n.cells[field] = std::move(v);
  }
}

void Table::reorder_children(RowId parent, std::vector<RowId> order) {
  auto& kids = children_mut(parent);
  auto sorted_old = kids;
  auto sorted_new = order;
  std::sort(sorted_old.begin(), sorted_old.end());
  std::sort(sorted_new.begin(), sorted_new.end());
  if (sorted_old != sorted_new) fail(ErrorCode::Ref, "reorder must permute the existing children");
  kids = std::move(order);
}

// ------------------------------------------------------------- Workbook

Workbook::Workbook(std::string name) : name_(std::move(name)) {}

const Table* Workbook::find_table(std::string_view name) const {
  for (const auto& t : tables_) {
    if (t.name() == name) return &t;
  }
  return nullptr;
}

Table* Workbook::find_table(std::string_view name) {
  for (auto& t : tables_) {
    if (t.name() == name) return &t;
  }
  return nullptr;
}

const Table& Workbook::table(std::string_view name) const {
  const Table* t = find_table(name);
  if (!t) fail(ErrorCode::Ref, "no table '" + std::string(name) + "'");
  return *t;
}

Table& Workbook::table(std::string_view name) {
  Table* t = find_table(name);
  if (!t) fail(ErrorCode::Ref, "no table '" + std::string(name) + "'");
  return *t;
}

Table& Workbook::add_table(const std::string& name, const std::vector<std::string>& level_names) {
  if (name.empty()) fail(ErrorCode::Ref, "table name must not be empty");
  check_referable(name);
  if (find_table(name)) fail(ErrorCode::Ref, "duplicate table name '" + name + "'");
  if (level_names.empty()) fail(ErrorCode::Ref, "table '" + name + "' needs at least one level");
  std::set<std::string> seen;
  for (const auto& l : level_names) {
    if (l.empty()) fail(ErrorCode::Ref, "empty level name in table '" + name + "'");
    if (!seen.insert(l).second) fail(ErrorCode::Ref, "duplicate level name '" + l + "'");
  }
  tables_.emplace_back(name, level_names);
  pending_.schema_changed = true;
  bump_version();
  return tables_.back();
}

const Field& Workbook::add_field(const std::string& table_name, const FieldSpec& spec) {
  Table& t = table(table_name);
  if (spec.name.empty()) fail(ErrorCode::Ref, "field name must not be empty");
  check_referable(spec.name);
  if (t.find_field(spec.name)) {
    fail(ErrorCode::Ref, "duplicate field name '" + spec.name + "' in table '" + table_name + "'");
  }
  if (spec.level < 0 || spec.level >= t.depth()) {
    fail(ErrorCode::Ref, "level " + std::to_string(spec.level) + " out of range for table '" +
                             table_name + "' (depth " + std::to_string(t.depth()) + ")");
  }
  const bool has_formula = spec.formula.has_value();
  const bool has_source = spec.borrow_source.has_value();
  switch (spec.kind) {
    case FieldKind::Data:
      if (has_formula || has_source) fail(ErrorCode::Type, "data field takes no formula or source");
      break;
    case FieldKind::Formula:
      if (!has_formula || has_source) fail(ErrorCode::Type, "formula field needs a formula only");
      break;
    case FieldKind::Borrowed:
      if (!has_source || has_formula) fail(ErrorCode::Type, "borrowed field needs a source only");
      break;
  }

  Field f;
  f.name = spec.name;
  f.level = spec.level;
  f.kind = spec.kind;
  if (spec.format) {
    auto fmt = DisplayFormat::parse(*spec.format);
    if (!fmt) fail(ErrorCode::Type, "unknown display format '" + *spec.format + "'");
    f.format = *fmt;
  }
  if (spec.kind == FieldKind::Formula) {
    f.formula_text = *spec.formula;
    try {
      f.formula = parse_formula(*spec.formula);
    } catch (const ParseError& e) {
      f.parse_error = e.what();
    }
  }
  if (spec.kind == FieldKind::Borrowed) f.borrow_source = spec.borrow_source;

  t.push_field(std::move(f));
  if (spec.kind == FieldKind::Borrowed) {
    try {
      declare_borrow(*this, FieldRef{table_name, spec.name}, *spec.borrow_source);
    } catch (...) {
      table(table_name).pop_field();
      throw;
    }
  }
  pending_.schema_changed = true;
  bump_version();
  return *table(table_name).find_field(spec.name);
}

void Workbook::set_formula(const std::string& table_name, const std::string& field,
                           const std::string& text) {
  Table& t = table(table_name);
  Field* f = t.find_field(field);
  if (!f) fail(ErrorCode::Ref, "no field '" + field + "' in table '" + table_name + "'");
  if (f->kind != FieldKind::Formula) fail(ErrorCode::Type, "field '" + field + "' is not a formula field");
  f->formula_text = text;
  f->parse_error.clear();
  f->formula.reset();
  try {
    f->formula = parse_formula(text);
  } catch (const ParseError& e) {
    f->parse_error = e.what();
  }
  pending_.schema_changed = true;
  bump_version();
}

RowId Workbook::insert_row(const std::string& table_name, RowId parent,
                           std::optional<std::size_t> index) {
  Table& t = table(table_name);
  int level = 0;
  if (parent != kRoot) {
    const RowNode* p = t.find_row(parent);
    if (!p) fail(ErrorCode::Ref, "parent row " + std::to_string(parent.value) + " not found");
    level = p->level + 1;
  }
  if (level >= t.depth()) fail(ErrorCode::Ref, "parent row is at the deepest level");
  if (const Field* b = t.borrowed_field_at(level)) {
    fail(ErrorCode::Ref, "level '" + t.levels()[static_cast<std::size_t>(level)] +
                             "' is managed by borrowed field '" + b->name + "'");
  }
  if (index && *index > t.children_of(parent).size()) {
    fail(ErrorCode::Ref, "position " + std::to_string(*index) + " is past the end of the parent's rows");
  }
  const RowId id = next_row_id();
  t.attach_row(id, parent, index);
  note_inserted(t, id);
  bump_version();
  return id;
}

std::size_t Workbook::delete_row(const std::string& table_name, RowId row_id) {
  Table& t = table(table_name);
  const RowNode* n = t.find_row(row_id);
  if (!n || row_id == kRoot) fail(ErrorCode::Ref, "row " + std::to_string(row_id.value) + " not found");
  if (const Field* b = t.borrowed_field_at(n->level)) {
    fail(ErrorCode::Ref, "row belongs to a level managed by borrowed field '" + b->name + "'");
  }
  const RowId parent = n->parent;
  const int level = n->level;
  const auto removed = t.detach_subtree(row_id);
  note_removed(t, parent, level);
  bump_version();
  return removed.size();
}

SetCellOutcome Workbook::set_cell(const std::string& table_name, RowId row_id,
                                  const std::string& field, const Value& value) {
  Table& t = table(table_name);
  const Field* f = t.find_field(field);
  if (!f) fail(ErrorCode::Ref, "no field '" + field + "' in table '" + table_name + "'");
  if (f->kind != FieldKind::Data) {
    fail(ErrorCode::Ref, "field '" + field + "' is " + std::string(field_kind_name(f->kind)) +
                             " and cannot be written");
  }
  const RowNode* n = t.find_row(row_id);
  if (!n) fail(ErrorCode::Ref, "row " + std::to_string(row_id.value) + " not found");
  if (n->level != f->level) {
    fail(ErrorCode::Ref, "field '" + field + "' is bound to level '" +
                             t.levels()[static_cast<std::size_t>(f->level)] + "'");
  }
  if (value.is_error()) fail(ErrorCode::Type, "error values cannot be stored in data cells");
  t.write_cell(row_id, field, value);
  note_cell(table_name, field, row_id);
  bump_version();
  return is_unmatched(*this, table_name, row_id, field) ? SetCellOutcome::Unmatched
                                                         : SetCellOutcome::Accepted;
}

Value Workbook::get_cell(const std::string& table_name, RowId row_id, const std::string& field) {
  const Table* t = find_table(table_name);
  if (!t || !t->find_row(row_id)) return ErrorCode::Ref;
  const Field* f = t->find_field(field);
  if (!f || f->level != t->row(row_id).level) return ErrorCode::Ref;
  if (needs_recalc()) recalculate(*this);
  return peek_cell(table_name, row_id, field);
}

Value Workbook::peek_cell(const std::string& table_name, RowId row_id, const std::string& field) const {
  const Table* t = find_table(table_name);
  if (!t || !t->find_row(row_id)) return ErrorCode::Ref;
  const Field* f = t->find_field(field);
  if (!f || f->level != t->row(row_id).level) return ErrorCode::Ref;
  return t->cell(row_id, field);
}

void Workbook::note_inserted(const Table& t, RowId row_id) {
  const int level = t.row(row_id).level;
  for (const Field* f : t.fields_at(level)) {
    pending_.events.push_back({t.name(), f->name, row_id});
    if (f->kind == FieldKind::Formula) pending_.new_cells.push_back({t.name(), row_id, f->name});
  }
}

void Workbook::note_removed(const Table& t, RowId parent, int level) {
  for (const auto& f : t.fields()) {
    if (f.level >= level) pending_.events.push_back({t.name(), f.name, parent});
  }
}

void Workbook::note_cell(const std::string& table_name, const std::string& field, RowId row_id) {
  pending_.events.push_back({table_name, field, row_id});
}

}  // namespace strata
