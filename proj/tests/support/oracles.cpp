#include "oracles.hpp"

#include "strata/relations.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace strata::oracle {

namespace {

RowId parent_of(const Table& t, RowId r) { return t.row(r).parent; }

bool is_ancestor_or_self(const Table& t, RowId ancestor, RowId row) {
  for (RowId cur = row;; cur = parent_of(t, cur)) {
    if (cur == ancestor) return true;
    if (cur == kRoot) return false;
  }
}

RowId climb_to(const Table& t, RowId row, int level) {
  RowId cur = row;
  while (cur != kRoot && t.row(cur).level > level) cur = parent_of(t, cur);
  return cur;
}

std::vector<RowId> all_rows(const Table& t) {
  std::vector<RowId> out;
  t.walk([&](const RowNode& n) { out.push_back(n.id); });
  return out;
}

Value value_above(const Table& t, RowId row, const Field& f) {
  const RowId a = climb_to(t, row, f.level);
  if (a == kRoot || t.row(a).level != f.level) return Empty{};
  auto it = t.row(a).cells.find(f.name);
  return it == t.row(a).cells.end() ? Value(Empty{}) : it->second;
}

}  // namespace

std::optional<std::vector<RowId>> naive_scope(const Workbook& wb, const std::optional<std::string>& table,
                                              const std::string& field, const CellAddress& origin) {
  const Table* ot = wb.find_table(origin.table);
  if (!ot || !ot->has_row(origin.row)) return std::nullopt;
  const int origin_level = ot->row(origin.row).level;
  const bool local = !table || *table == origin.table;
  const Table* tt = local ? ot : wb.find_table(*table);
  if (!tt) return std::nullopt;
  const Field* tf = tt->find_field(field);
  if (!tf) return std::nullopt;

  std::vector<RowId> out;
  if (local) {
    for (RowId r : all_rows(*tt)) {
      if (tt->row(r).level != tf->level) continue;
      if (is_ancestor_or_self(*tt, r, origin.row) || is_ancestor_or_self(*tt, origin.row, r)) {
        out.push_back(r);
      }
    }
    return out;
  }

  std::vector<std::pair<const Field*, const Field*>> pairs;
  for (const auto& f : ot->fields()) {
    if (f.kind == FieldKind::Borrowed && f.borrow_source && f.borrow_source->table == *table) {
      const Field* ff = tt->find_field(f.borrow_source->field);
      if (!ff) return std::nullopt;
      pairs.emplace_back(&f, ff);
    }
  }
  for (const auto& l : wb.relations().links) {
    if (l.local.table != origin.table || l.foreign.table != *table) continue;
    const Field* lf = ot->find_field(l.local.field);
    const Field* ff = tt->find_field(l.foreign.field);
    if (!lf || !ff) return std::nullopt;
    pairs.emplace_back(lf, ff);
  }

  std::vector<std::pair<const Field*, Value>> wanted;
  for (const auto& [lf, ff] : pairs) {
    if (lf->level > origin_level) continue;
    Value v = value_above(*ot, origin.row, *lf);
    if (v.is_empty()) return out;
    wanted.emplace_back(ff, v);
  }

  const std::vector<RowId> rows = all_rows(*tt);
  for (RowId r : rows) {
    if (tt->row(r).level != tf->level) continue;
    bool keep = true;
    for (const auto& [ff, v] : wanted) {
      if (ff->level <= tf->level) {
        keep = value_above(*tt, r, *ff) == v;
      } else {
        keep = false;
        for (RowId d : rows) {
          if (tt->row(d).level == ff->level && is_ancestor_or_self(*tt, r, d) &&
              value_above(*tt, d, *ff) == v) {
            keep = true;
            break;
          }
        }
      }
      if (!keep) break;
    }
    if (keep) out.push_back(r);
  }
  return out;
}

std::vector<std::vector<Value>> expected_borrow_paths(const Workbook& wb, const std::string& table) {
  const Table& t = wb.table(table);
  std::vector<const Field*> target_chain;
  std::vector<const Field*> source_chain;
  const Table* source = nullptr;
  for (int level = 0; level < t.depth(); ++level) {
    const Field* b = nullptr;
    for (const auto& f : t.fields()) {
      if (f.level == level && f.kind == FieldKind::Borrowed) b = &f;
    }
    if (!b || !b->borrow_source) break;
    source = &wb.table(b->borrow_source->table);
    target_chain.push_back(b);
    source_chain.push_back(source->find_field(b->borrow_source->field));
  }
  if (target_chain.empty()) return {};

  // prefixes[k] = distinct non-empty value tuples of length k+1, in order
  // of first appearance among the source rows deep enough to carry them.
  std::vector<std::vector<std::vector<Value>>> prefixes(source_chain.size());
  for (std::size_t k = 0; k < source_chain.size(); ++k) {
    int scan = 0;
    for (std::size_t j = 0; j <= k; ++j) scan = std::max(scan, source_chain[j]->level);
    for (RowId r : all_rows(*source)) {
      if (source->row(r).level != scan) continue;
      std::vector<Value> tuple;
      bool blank = false;
      for (std::size_t j = 0; j <= k; ++j) {
        tuple.push_back(value_above(*source, r, *source_chain[j]));
        blank = blank || tuple.back().is_empty();
      }
      if (blank) continue;
      if (std::find(prefixes[k].begin(), prefixes[k].end(), tuple) == prefixes[k].end()) {
        prefixes[k].push_back(tuple);
      }
    }
  }

  std::vector<std::vector<Value>> out;
  std::function<void(const std::vector<Value>&)> expand = [&](const std::vector<Value>& prefix) {
    const std::size_t k = prefix.size();
    if (k >= prefixes.size()) return;
    for (const auto& tuple : prefixes[k]) {
      if (!std::equal(prefix.begin(), prefix.end(), tuple.begin())) continue;
      out.push_back(tuple);
      expand(tuple);
    }
  };
  expand({});
  return out;
}

std::vector<std::vector<Value>> actual_borrow_paths(const Workbook& wb, const std::string& table) {
  const Table& t = wb.table(table);
  std::vector<const Field*> chain;
  for (int level = 0; level < t.depth(); ++level) {
    const Field* b = nullptr;
    for (const auto& f : t.fields()) {
      if (f.level == level && f.kind == FieldKind::Borrowed) b = &f;
    }
    if (!b) break;
    chain.push_back(b);
  }
  std::vector<std::vector<Value>> out;
  t.walk([&](const RowNode& n) {
    if (n.level >= static_cast<int>(chain.size())) return;
    std::vector<Value> path;
    for (int j = 0; j <= n.level; ++j) path.push_back(value_above(t, n.id, *chain[static_cast<std::size_t>(j)]));
    out.push_back(path);
  });
  return out;
}

std::size_t subtree_size(const Table& t, RowId row) {
  std::size_t n = 0;
  for (RowId r : all_rows(t)) {
    if (is_ancestor_or_self(t, row, r)) ++n;
  }
  return n;
}

std::string check_tree(const Table& t) {
  std::size_t walked = 0;
  std::string problem;
  t.walk([&](const RowNode& n) {
    ++walked;
    if (!problem.empty()) return;
    const int parent_level = n.parent == kRoot ? -1 : t.row(n.parent).level;
    if (parent_level != n.level - 1) problem = "row " + std::to_string(n.id.value) + " has a parent at the wrong level";
    const auto& siblings = t.children_of(n.parent);
    if (std::count(siblings.begin(), siblings.end(), n.id) != 1) {
      problem = "row " + std::to_string(n.id.value) + " is not listed exactly once by its parent";
    }
    for (const auto& [name, value] : n.cells) {
      const Field* f = t.find_field(name);
      if (!f || f->level != n.level) problem = "row " + std::to_string(n.id.value) + " stores foreign field " + name;
      if (value.is_empty()) problem = "row " + std::to_string(n.id.value) + " stores an Empty value";
    }
  });
  if (problem.empty() && walked != t.row_count()) problem = "unreachable rows present";
  return problem;
}

std::vector<Mismatch> compare_cells(const Workbook& got, const Workbook& want, double tolerance) {
  std::vector<Mismatch> out;
  for (const auto& wt : want.tables()) {
    const Table* gt = got.find_table(wt.name());
    if (!gt) {
      out.push_back({{wt.name(), kRoot, ""}, Value(ErrorCode::Ref), Value(Empty{})});
      continue;
    }
    const auto want_rows = all_rows(wt);
    if (want_rows != all_rows(*gt)) {
      out.push_back({{wt.name(), kRoot, "<row set>"}, Value(Empty{}), Value(Empty{})});
      continue;
    }
    for (RowId r : want_rows) {
      for (const Field* f : wt.fields_at(wt.row(r).level)) {
        const Value& a = gt->cell(r, f->name);
        const Value& b = wt.cell(r, f->name);
        if (a == b) continue;
        if (a.is_number() && b.is_number() &&
            std::fabs(a.number().to_double() - b.number().to_double()) <= tolerance) {
          continue;
        }
        out.push_back({{wt.name(), r, f->name}, a, b});
      }
    }
  }
  return out;
}

Workbook recompute_from_scratch(const Workbook& wb) {
  Workbook copy = wb;
  for (const auto& t : wb.tables()) {
    Table& ct = copy.table(t.name());
    for (RowId r : all_rows(t)) {
      for (const Field* f : t.fields_at(t.row(r).level)) {
        if (f->kind == FieldKind::Formula) ct.write_cell(r, f->name, Empty{});
      }
    }
  }
  copy.set_graph(nullptr);
  copy.pending().clear();
  copy.pending().schema_changed = true;
  recalculate(copy, RecalcMode::All);
  return copy;
}

// ------------------------------------------------------------ generators

namespace {

const std::vector<std::string> kRegions = {"North", "South", "East"};
const std::vector<std::string> kCustomers = {"Ann", "Bob", "Cy", "Di"};
const std::vector<std::string> kItems = {"Goldfish", "Rodents", "Frog", "Unicorn"};

Value random_number(std::mt19937& rng) {
  static const std::vector<std::string> pool = {"0", "1", "2", "3", "0.5", "1.25", "10", "-2", "7.1", "100"};
  return Value(*Number::parse(pick(pool, rng)));
}

int roll(std::mt19937& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

Value random_value_for(const std::string& field, std::mt19937& rng) {
  if (roll(rng, 12) == 0) return Empty{};
  if (field == "Region") return Value(pick(kRegions, rng));
  if (field == "Customer") return Value(pick(kCustomers, rng));
  if (field == "Item") return Value(roll(rng, 8) == 0 ? std::string("Unicorn") : pick(kItems, rng));
  if (field == "Disc") return Value(*Number::parse(roll(rng, 2) ? "0.1" : "0"));
  if (field == "Note") return Value(roll(rng, 2) ? std::string("vip") : std::string("new"));
  if (roll(rng, 20) == 0) return Value(std::string("n/a"));  // text in arithmetic
  return random_number(rng);
}

void maybe_formula(Workbook& wb, std::mt19937& rng, const std::string& table, const std::string& name,
                   int level, const std::string& text, int keep_in = 4) {
  if (roll(rng, keep_in) == 0) return;
  wb.add_field(table, {name, level, FieldKind::Formula, text, {}, {}});
}

}  // namespace

Workbook random_workbook(std::mt19937& rng, int tables) {
  Workbook wb("random");
  const bool catalog = tables >= 2;
  const bool summary = tables >= 3;

  if (catalog) {
    wb.add_table("Catalog", {"Item"});
    wb.add_field("Catalog", {"Item", 0, FieldKind::Data, {}, {}, {}});
    wb.add_field("Catalog", {"Price", 0, FieldKind::Data, {}, {}, {}});
    for (int i = 0; i < 3; ++i) {
      RowId r = wb.insert_row("Catalog", kRoot);
      wb.set_cell("Catalog", r, "Item", Value(kItems[static_cast<std::size_t>(i)]));
      wb.set_cell("Catalog", r, "Price", random_number(rng));
    }
  }

  wb.add_table("Orders", {"Region", "Customer", "Line"});
  wb.add_field("Orders", {"Region", 0, FieldKind::Data, {}, {}, {}});
  wb.add_field("Orders", {"Customer", 1, FieldKind::Data, {}, {}, {}});
  wb.add_field("Orders", {"Disc", 1, FieldKind::Data, {}, {}, {}});
  wb.add_field("Orders", {"Item", 2, FieldKind::Data, {}, {}, {}});
  wb.add_field("Orders", {"Qty", 2, FieldKind::Data, {}, {}, {}});
  if (catalog) declare_link(wb, {"Orders", "Item"}, {"Catalog", "Item"});

  const int regions = 1 + roll(rng, 3);
  for (int i = 0; i < regions; ++i) {
    RowId reg = wb.insert_row("Orders", kRoot);
    wb.set_cell("Orders", reg, "Region", random_value_for("Region", rng));
    const int customers = roll(rng, 3);
    for (int j = 0; j < customers; ++j) {
      RowId cust = wb.insert_row("Orders", reg);
      wb.set_cell("Orders", cust, "Customer", random_value_for("Customer", rng));
      wb.set_cell("Orders", cust, "Disc", random_value_for("Disc", rng));
      const int lines = roll(rng, 4);
      for (int k = 0; k < lines; ++k) {
        RowId line = wb.insert_row("Orders", cust);
        wb.set_cell("Orders", line, "Item", random_value_for("Item", rng));
        wb.set_cell("Orders", line, "Qty", random_value_for("Qty", rng));
      }
    }
  }

  wb.add_field("Orders", {"Net", 2, FieldKind::Formula, catalog ? "=Qty*Catalog!Price" : "=Qty*2", {}, {}});
  maybe_formula(wb, rng, "Orders", "LineTotal", 2, "=Net*(1-Disc)", 8);
  if (wb.table("Orders").find_field("LineTotal")) {
    maybe_formula(wb, rng, "Orders", "CustTotal", 1, "=SUM(LineTotal)", 8);
  }
  maybe_formula(wb, rng, "Orders", "CustCount", 1, "=COUNT(Qty)");
  maybe_formula(wb, rng, "Orders", "RegionNet", 0, "=SUM(Net)+0", 8);
  maybe_formula(wb, rng, "Orders", "RegionMax", 0, "=MAX(Qty)");
  if (wb.table("Orders").find_field("RegionNet")) {
    maybe_formula(wb, rng, "Orders", "Share", 2, "=IF(RegionNet=0,0,ROUND(Net/RegionNet,4))");
  }
  maybe_formula(wb, rng, "Orders", "Label", 1, "=IF(Disc>0,\"disc\",\"full\")");
  if (catalog) {
    maybe_formula(wb, rng, "Catalog", "Sold", 0, "=SUM(Orders!Qty)");
    maybe_formula(wb, rng, "Catalog", "Dear", 0, "=Price>=3");
  }

  if (summary) {
    wb.add_table("Summary", {"Region", "Customer"});
    wb.add_field("Summary", {"Region", 0, FieldKind::Borrowed, {}, FieldRef{"Orders", "Region"}, {}});
    if (roll(rng, 4) != 0) {
      wb.add_field("Summary", {"Customer", 1, FieldKind::Borrowed, {}, FieldRef{"Orders", "Customer"}, {}});
      wb.add_field("Summary", {"Note", 1, FieldKind::Data, {}, {}, {}});
      maybe_formula(wb, rng, "Summary", "Total", 1, "=SUM(Orders!Net)", 8);
      maybe_formula(wb, rng, "Summary", "Lines", 1, "=COUNT(Orders!Item)");
    }
    maybe_formula(wb, rng, "Summary", "RegionQty", 0, "=SUM(Orders!Qty)", 8);
    maybe_formula(wb, rng, "Summary", "Top", 0, "=MAX(Orders!Disc)");
  }
  recalculate(wb, RecalcMode::All);
  return wb;
}

std::string random_edit(Workbook& wb, std::mt19937& rng) {
  std::vector<std::string> tables;
  for (const auto& t : wb.tables()) {
    if (t.name() != "Summary" || t.find_field("Note")) tables.push_back(t.name());
  }
  for (int attempt = 0; attempt < 50; ++attempt) {
    const std::string table = pick(tables, rng);
    const Table& t = wb.table(table);
    std::vector<RowId> rows;
    t.walk([&](const RowNode& n) { rows.push_back(n.id); });
    const int op = roll(rng, 10);
    try {
      if (table == "Summary") {
        if (rows.empty()) continue;
        const RowId r = pick(rows, rng);
        if (t.row(r).level != 1) continue;
        wb.set_cell(table, r, "Note", random_value_for("Note", rng));
        return "set Summary.Note";
      }
      if (op < 3) {
        // insert under a random parent one level up
        std::vector<RowId> parents{kRoot};
        for (RowId r : rows) {
          if (t.row(r).level + 1 < t.depth()) parents.push_back(r);
        }
        const RowId parent = pick(parents, rng);
        const RowId id = wb.insert_row(table, parent);
        const int level = t.level_of(id);
        for (const Field* f : t.fields_at(level)) {
          if (f->kind == FieldKind::Data && roll(rng, 3) != 0) wb.set_cell(table, id, f->name, random_value_for(f->name, rng));
        }
        return "insert " + table;
      }
      if (op < 5) {
        if (rows.empty()) continue;
        wb.delete_row(table, pick(rows, rng));
        return "delete " + table;
      }
      if (rows.empty()) continue;
      const RowId r = pick(rows, rng);
      std::vector<const Field*> data;
      for (const Field* f : t.fields_at(t.row(r).level)) {
        if (f->kind == FieldKind::Data) data.push_back(f);
      }
      if (data.empty()) continue;
      const Field* f = pick(data, rng);
      wb.set_cell(table, r, f->name, random_value_for(f->name, rng));
      return "set " + table + "." + f->name;
    } catch (const EngineError&) {
      continue;
    }
  }
  return "noop";
}

RandomRef random_reference(const Workbook& wb, const std::string& origin_table, std::mt19937& rng) {
  std::vector<RandomRef> refs;
  for (const auto& t : wb.tables()) {
    for (const auto& f : t.fields()) {
      if (t.name() == origin_table) {
        refs.push_back({std::nullopt, f.name});
      } else {
        refs.push_back({t.name(), f.name});
      }
    }
  }
  refs.push_back({std::nullopt, "Missing"});
  return pick(refs, rng);
}

}  // namespace strata::oracle
