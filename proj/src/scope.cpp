#include "strata/scope.hpp"

namespace strata {

namespace {

ScopeError ref_error(std::string message) { return {ErrorCode::Ref, std::move(message)}; }

bool any_descendant_matches(const Table& t, RowId row, const Field& f, const Value& wanted) {
  for (RowId d : t.descendants_at(row, f.level)) {
    if (t.cell(d, f.name) == wanted) return true;
  }
  return false;
}

}  // namespace

Resolution resolve_local(const Workbook& wb, const std::string& field, const CellAddress& origin) {
  const Table* t = wb.find_table(origin.table);
  if (!t) return ref_error("no table '" + origin.table + "'");
  const RowNode* o = t->find_row(origin.row);
  if (!o) return ref_error("origin row does not exist");
  const Field* f = t->find_field(field);
  if (!f) return ref_error("no field '" + field + "' in table '" + origin.table + "'");

  CellSet out{origin.table, field, {}, origin};
  if (f->level > o->level) {
    out.rows = t->descendants_at(origin.row, f->level);
  } else if (f->level == o->level) {
    out.rows.push_back(origin.row);
  } else {
    out.rows.push_back(t->ancestor_at(origin.row, f->level));
  }
  return out;
}

std::vector<JoinConstraint> join_constraints(const Workbook& wb, const std::string& origin_table,
                                             const std::string& target_table) {
  std::vector<JoinConstraint> out;
  const Table* ot = wb.find_table(origin_table);
  if (!ot || !wb.find_table(target_table)) return out;
  for (const Field* f : ot->fields_outer_to_inner()) {
    if (f->kind == FieldKind::Borrowed && f->borrow_source &&
        f->borrow_source->table == target_table) {
      out.push_back({f->name, f->borrow_source->field, ConstraintSource::Borrow});
    }
  }
  for (const auto& l : wb.relations().links) {
    if (l.local.table == origin_table && l.foreign.table == target_table) {
      out.push_back({l.local.field, l.foreign.field, ConstraintSource::Link});
    }
  }
  return out;
}

Resolution resolve_cross(const Workbook& wb, const std::string& table, const std::string& field,
                         const CellAddress& origin) {
  if (table == origin.table) return resolve_local(wb, field, origin);
  return resolve_cross_with(wb, table, field, origin, join_constraints(wb, origin.table, table));
}

Resolution resolve_cross_with(const Workbook& wb, const std::string& table,
                              const std::string& field, const CellAddress& origin,
                              const std::vector<JoinConstraint>& constraints) {
  const Table* target = wb.find_table(table);
  if (!target) return ref_error("no table '" + table + "'");
  const Field* tf = target->find_field(field);
  if (!tf) return ref_error("no field '" + field + "' in table '" + table + "'");
  const Table* ot = wb.find_table(origin.table);
  if (!ot) return ref_error("no table '" + origin.table + "'");
  const RowNode* o = ot->find_row(origin.row);
  if (!o) return ref_error("origin row does not exist");

  struct Active {
    const Field* foreign;
    const Value* wanted;
  };
  std::vector<Active> active;
  for (const auto& c : constraints) {
    const Field* lf = ot->find_field(c.local_field);
    const Field* ff = target->find_field(c.foreign_field);
    if (!lf || !ff) return ref_error("join constraint names a missing field");
    if (lf->level > o->level) continue;
    const Value& local = ot->inherited_cell(origin.row, lf->name);
    // An empty key identifies nothing.
    if (local.is_empty()) return CellSet{table, field, {}, origin};
    active.push_back({ff, &local});
  }

  CellSet out{table, field, {}, origin};
  for (RowId r : target->rows_at_level(tf->level)) {
    bool keep = true;
    for (const auto& a : active) {
      if (a.foreign->level <= tf->level) {
        keep = target->inherited_cell(r, a.foreign->name) == *a.wanted;
      } else {
        keep = any_descendant_matches(*target, r, *a.foreign, *a.wanted);
      }
      if (!keep) break;
    }
    if (keep) out.rows.push_back(r);
  }
  return out;
}

}  // namespace strata
