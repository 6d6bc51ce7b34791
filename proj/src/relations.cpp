#include "strata/relations.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace strata {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& message) {
  throw EngineError(code, message);
}

bool contains(const std::vector<Value>& values, const Value& v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

// Source table each table borrows from (at most one by construction).
std::map<std::string, std::string> borrow_sources(const RelationSet& rel) {
  std::map<std::string, std::string> out;
  for (const auto& b : rel.borrows) out[b.target.table] = b.source.table;
  return out;
}

bool borrows_transitively(const std::map<std::string, std::string>& sources, std::string from,
                          const std::string& to) {
  std::set<std::string> seen;
  while (true) {
    if (from == to) return true;
    if (!seen.insert(from).second) return false;
    auto it = sources.find(from);
    if (it == sources.end()) return false;
    from = it->second;
  }
}

struct ChainLink {
  std::string target_field;
  std::string source_field;
  int source_level;
};

class Synchronizer {
 public:
  Synchronizer(Workbook& wb, RowDiff& diff) : wb_(wb), diff_(diff) {}

  void sync_table(const std::string& table_name) {
    Table& t = wb_.table(table_name);
    std::vector<ChainLink> chain;
    std::string source_table;
    for (const Field* f : borrow_chain(t)) {
      const auto& src = *f->borrow_source;
      const Table* s = wb_.find_table(src.table);
      const Field* sf = s ? s->find_field(src.field) : nullptr;
      if (!sf) return;  // dangling after a schema edit; declare-time checks prevent this
      source_table = src.table;
      chain.push_back({f->name, src.field, sf->level});
    }
    if (chain.empty()) return;
    const Table& source = wb_.table(source_table);
    std::vector<Value> constraint;
    sync_level(t, source, chain, 0, kRoot, constraint);
  }

 private:
  std::vector<Value> required_values(const Table& source, const std::vector<ChainLink>& chain,
                                     std::size_t level, const std::vector<Value>& constraint) {
    int scan_level = 0;
    for (std::size_t j = 0; j <= level; ++j) scan_level = std::max(scan_level, chain[j].source_level);
    std::vector<Value> out;
    for (RowId r : source.rows_at_level(scan_level)) {
      bool ok = true;
      for (std::size_t j = 0; j < level && ok; ++j) {
        ok = source.inherited_cell(r, chain[j].source_field) == constraint[j];
      }
      if (!ok) continue;
      const Value& v = source.inherited_cell(r, chain[level].source_field);
      if (v.is_empty() || contains(out, v)) continue;
      out.push_back(v);
    }
    return out;
  }

  void sync_level(Table& t, const Table& source, const std::vector<ChainLink>& chain,
                  std::size_t level, RowId parent, std::vector<Value>& constraint) {
    const std::vector<Value> required = required_values(source, chain, level, constraint);
    const std::string& field = chain[level].target_field;
    const int lvl = static_cast<int>(level);

    std::vector<Value> kept_values;
    std::vector<RowId> kept_rows;
    std::vector<RowId> doomed;
    for (RowId child : t.children_of(parent)) {
      const Value& v = t.cell(child, field);
      if (!v.is_empty() && contains(required, v) && !contains(kept_values, v)) {
        kept_values.push_back(v);
        kept_rows.push_back(child);
      } else {
        doomed.push_back(child);
      }
    }
    for (RowId d : doomed) {
      for (RowId gone : t.detach_subtree(d)) diff_.deleted.emplace_back(t.name(), gone);
    }
    if (!doomed.empty()) wb_.note_removed(t, parent, lvl);

    std::vector<RowId> order;
    for (const Value& v : required) {
      auto it = std::find(kept_values.begin(), kept_values.end(), v);
      if (it != kept_values.end()) {
        order.push_back(kept_rows[static_cast<std::size_t>(it - kept_values.begin())]);
        continue;
      }
      const RowId id = wb_.next_row_id();
      t.attach_row(id, parent, std::nullopt);
      t.write_cell(id, field, v);
      wb_.note_inserted(t, id);
      diff_.inserted.emplace_back(t.name(), id);
      order.push_back(id);
    }
    if (order != t.children_of(parent)) {
      t.reorder_children(parent, order);
      wb_.note_removed(t, parent, lvl);
    }

    if (level + 1 >= chain.size()) return;
    for (RowId child : order) {
      constraint.push_back(t.cell(child, field));
      sync_level(t, source, chain, level + 1, child, constraint);
      constraint.pop_back();
    }
  }

  Workbook& wb_;
  RowDiff& diff_;
};

}  // namespace

std::vector<const Field*> borrow_chain(const Table& table) {
  std::vector<const Field*> out;
  for (int level = 0; level < table.depth(); ++level) {
    const Field* f = table.borrowed_field_at(level);
    if (!f || !f->borrow_source) break;
    out.push_back(f);
  }
  return out;
}

void register_borrow(Workbook& wb, const FieldRef& target, const FieldRef& source) {
  Table* t = wb.find_table(target.table);
  Field* tf = t ? t->find_field(target.field) : nullptr;
  if (!tf) fail(ErrorCode::Ref, "borrow target " + target.to_string() + " does not exist");
  if (tf->kind != FieldKind::Borrowed) {
    fail(ErrorCode::Type, "borrow target " + target.to_string() + " is not a borrowed field");
  }
  auto& rel = wb.relations_mut();
  for (const auto& b : rel.borrows) {
    if (b.target == target) fail(ErrorCode::Ref, "field " + target.to_string() + " already borrows");
  }
  const Table* s = wb.find_table(source.table);
  const Field* sf = s ? s->find_field(source.field) : nullptr;
  if (!sf) fail(ErrorCode::Ref, "borrow source " + source.to_string() + " does not exist");
  if (sf->kind == FieldKind::Formula) {
    fail(ErrorCode::Type, "borrow source " + source.to_string() + " is a formula field");
  }
  if (source.table == target.table) fail(ErrorCode::Ref, "a table cannot borrow from itself");

  for (const auto& f : t->fields()) {
    if (&f == tf || f.kind != FieldKind::Borrowed) continue;
    if (f.level == tf->level) {
      fail(ErrorCode::Ref, "level " + std::to_string(tf->level) + " of " + target.table +
                               " already has borrowed field '" + f.name + "'");
    }
  }
  for (int level = 0; level < tf->level; ++level) {
    const Field* outer = t->borrowed_field_at(level);
    if (!outer) {
      fail(ErrorCode::Ref, "borrowed fields must fill levels from the top: level " +
                               std::to_string(level) + " of " + target.table + " has none");
    }
    if (outer->borrow_source && outer->borrow_source->table != source.table) {
      fail(ErrorCode::Ref, "all borrowed fields of " + target.table + " must draw from " +
                               outer->borrow_source->table);
    }
  }
  if (borrows_transitively(borrow_sources(rel), source.table, target.table)) {
    fail(ErrorCode::Cycle, "borrowing " + source.to_string() + " into " + target.table +
                               " would create a borrow cycle");
  }

  tf->borrow_source = source;
  rel.borrows.push_back({target, source});
  wb.pending().schema_changed = true;
  wb.bump_version();
}

RowDiff declare_borrow(Workbook& wb, const FieldRef& target, const FieldRef& source) {
  register_borrow(wb, target, source);
  return sync_borrows(wb);
}

void declare_link(Workbook& wb, const FieldRef& local, const FieldRef& foreign) {
  const Table* lt = wb.find_table(local.table);
  const Field* lf = lt ? lt->find_field(local.field) : nullptr;
  if (!lf) fail(ErrorCode::Ref, "link endpoint " + local.to_string() + " does not exist");
  const Table* ft = wb.find_table(foreign.table);
  const Field* ff = ft ? ft->find_field(foreign.field) : nullptr;
  if (!ff) fail(ErrorCode::Ref, "link endpoint " + foreign.to_string() + " does not exist");
  if (lf->kind != FieldKind::Data) {
    fail(ErrorCode::Type, "link local field " + local.to_string() + " must be a data field");
  }
  auto& rel = wb.relations_mut();
  for (const auto& l : rel.links) {
    if (l.local == local && l.foreign == foreign) {
      fail(ErrorCode::Ref, "link " + local.to_string() + " -> " + foreign.to_string() + " exists");
    }
  }
  rel.links.push_back({local, foreign});
  wb.pending().schema_changed = true;
  wb.bump_version();
}

RowDiff sync_borrows(Workbook& wb) {
  const auto sources = borrow_sources(wb.relations());
  std::vector<std::string> order;
  std::set<std::string> done;
  std::function<void(const std::string&)> visit = [&](const std::string& name) {
    if (!done.insert(name).second) return;
    auto it = sources.find(name);
    if (it != sources.end()) visit(it->second);
    order.push_back(name);
  };
  for (const auto& t : wb.tables()) visit(t.name());

  RowDiff diff;
  Synchronizer sync(wb, diff);
  for (const auto& name : order) {
    if (sources.count(name)) sync.sync_table(name);
  }
  return diff;
}

std::vector<Value> valid_values(const Workbook& wb, const LinkSpec& link) {
  std::vector<Value> out;
  const Table* ft = wb.find_table(link.foreign.table);
  const Field* ff = ft ? ft->find_field(link.foreign.field) : nullptr;
  if (!ff) return out;
  for (RowId r : ft->rows_at_level(ff->level)) {
    const Value& v = ft->cell(r, ff->name);
    if (!v.is_empty() && !contains(out, v)) out.push_back(v);
  }
  return out;
}

std::vector<LinkSpec> links_from(const Workbook& wb, const FieldRef& local) {
  std::vector<LinkSpec> out;
  for (const auto& l : wb.relations().links) {
    if (l.local == local) out.push_back(l);
  }
  return out;
}

bool is_unmatched(const Workbook& wb, const std::string& table, RowId row, const std::string& field) {
  const Table* t = wb.find_table(table);
  if (!t) return false;
  const Value& v = t->cell(row, field);
  if (v.is_empty()) return false;
  for (const auto& link : links_from(wb, FieldRef{table, field})) {
    if (!contains(valid_values(wb, link), v)) return true;
  }
  return false;
}

}  // namespace strata
