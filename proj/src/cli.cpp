#include "strata/cli.hpp"

#include "strata/eval.hpp"
#include "strata/formula.hpp"
#include "strata/io.hpp"
#include "strata/json_codec.hpp"
#include "strata/relations.hpp"
#include "strata/service.hpp"

#include <CLI11.hpp>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace strata {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad arguments or a selector that names the wrong kind of thing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// flock on "<file>.lock" for the life of the command.
class FileLock {
 public:
  FileLock(const fs::path& file, bool exclusive) {
    const std::string path = file.string() + ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw UsageError("cannot open lock file '" + path + "'");
    if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
      ::close(fd_);
      throw UsageError("cannot lock '" + file.string() + "'");
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

std::string strip_brackets(std::string name) {
  if (name.size() >= 2 && name.front() == '[' && name.back() == ']') return name.substr(1, name.size() - 2);
  return name;
}

struct Assignment {
  std::string field;
  std::string text;
};

Assignment split_pair(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("expected field=value, got '" + arg + "'");
  return {strip_brackets(arg.substr(0, eq)), arg.substr(eq + 1)};
}

std::vector<Assignment> split_pairs(const std::vector<std::string>& args) {
  std::vector<Assignment> out;
  for (const auto& a : args) out.push_back(split_pair(a));
  return out;
}

Workbook open_workbook(const fs::path& file) {
  if (!fs::exists(file)) throw UsageError("no such workbook '" + file.string() + "'");
  return load(file).workbook;
}

const Table& table_of(const Workbook& wb, const std::string& name) {
  const Table* t = wb.find_table(strip_brackets(name));
  if (!t) throw UsageError("no table '" + name + "'");
  return *t;
}

const Field& field_of(const Table& t, const std::string& name) {
  const Field* f = t.find_field(strip_brackets(name));
  if (!f) throw UsageError("table '" + t.name() + "' has no field '" + name + "'");
  return *f;
}

int level_of(const Table& t, const std::string& spec) {
  for (int i = 0; i < t.depth(); ++i) {
    if (t.levels()[i] == spec) return i;
  }
  try {
    std::size_t used = 0;
    const int n = std::stoi(spec, &used);
    if (used == spec.size() && n >= 0 && n < t.depth()) return n;
  } catch (const std::exception&) {
  }
  throw UsageError("table '" + t.name() + "' has no level '" + spec + "'");
}

/// 1-based position across all tables in document order.
std::uint64_t file_row_id(const Workbook& wb, const std::string& table, RowId row) {
  std::uint64_t base = 0;
  for (const auto& t : wb.tables()) {
    if (t.name() != table) {
      base += t.row_count();
      continue;
    }
    std::uint64_t pos = 0;
    std::uint64_t found = 0;
    t.walk([&](const RowNode& n) {
      ++pos;
      if (n.id == row) found = pos;
    });
    return base + found;
  }
  return 0;
}

RowId row_for_file_id(const Workbook& wb, const Table& table, std::uint64_t id) {
  std::uint64_t base = 0;
  for (const auto& t : wb.tables()) {
    if (&t == &table) break;
    base += t.row_count();
  }
  std::uint64_t pos = base;
  std::optional<RowId> found;
  table.walk([&](const RowNode& n) {
    if (++pos == id) found = n.id;
  });
  if (!found) throw EngineError(ErrorCode::Ref, "table '" + table.name() + "' has no row " + std::to_string(id));
  return *found;
}

std::string describe(const std::vector<Assignment>& where) {
  std::string out;
  for (const auto& w : where) out += (out.empty() ? "" : ", ") + w.field + "=" + w.text;
  return out.empty() ? "(no selector)" : out;
}

/// Rows at `level` whose inherited values equal every selector value.
std::vector<RowId> select_rows(const Table& t, int level, const std::vector<Assignment>& where) {
  std::vector<std::pair<const Field*, Value>> tests;
  for (const auto& w : where) {
    const Field& f = field_of(t, w.field);
    if (f.kind == FieldKind::Formula) throw UsageError("--where cannot select on formula field '" + f.name + "'");
    if (f.level > level) {
      throw UsageError("--where field '" + f.name + "' lies below level '" + t.levels()[level] + "'");
    }
    tests.emplace_back(&f, Value::from_literal(w.text));
  }
  std::vector<RowId> out;
  for (RowId r : t.rows_at_level(level)) {
    bool ok = true;
    for (const auto& [f, v] : tests) ok = ok && t.inherited_cell(r, f->name) == v;
    if (ok) out.push_back(r);
  }
  return out;
}

std::vector<RowId> target_rows(const Workbook& wb, const Table& t, int level, const std::vector<Assignment>& where,
                               const std::vector<std::uint64_t>& ids, bool all, const std::string& what) {
  std::vector<RowId> rows;
  if (!ids.empty()) {
    if (!where.empty()) throw UsageError("use either --row or --where");
    for (auto id : ids) {
      const RowId r = row_for_file_id(wb, t, id);
      if (t.level_of(r) < level) {
        throw UsageError("row " + std::to_string(id) + " lies above the level of " + what);
      }
      rows.push_back(t.ancestor_at(r, level));
    }
    return rows;
  }
  rows = select_rows(t, level, where);
  const std::string address = t.name() + "!" + what;
  if (rows.empty()) throw EngineError(ErrorCode::Ref, address + ": no row matches " + describe(where));
  if (rows.size() > 1 && !all) {
    throw EngineError(ErrorCode::Multi,
                      address + ": " + std::to_string(rows.size()) + " rows match " + describe(where) +
                          " (pass --all to address every one)");
  }
  return rows;
}

std::string render(const Value& v) { return v.to_string(); }

std::optional<FieldRef> parse_field_ref(const std::string& text) {
  try {
    const ExprPtr e = parse_formula("=" + text);
    if (const auto* c = std::get_if<CrossRef>(&e->node)) return FieldRef{c->table, c->field};
  } catch (const ParseError&) {
  }
  return std::nullopt;
}

FieldRef require_field_ref(const std::string& text) {
  auto r = parse_field_ref(text);
  if (!r) throw UsageError("expected Table!Field, got '" + text + "'");
  return *r;
}

// ----------------------------------------------------------------- info

json info_json(Workbook& wb) {
  if (wb.needs_recalc()) recalculate(wb);
  json out = json::object();
  out["name"] = wb.name();
  out["version"] = kDocumentVersion;
  json tables = json::array();
  for (const auto& t : wb.tables()) {
    json fields = json::array();
    for (const auto& f : t.fields()) {
      json fj{{"name", f.name}, {"level", f.level}, {"kind", field_kind_name(f.kind)}};
      if (f.kind == FieldKind::Formula) fj["formula"] = f.formula_text;
      if (!f.parse_error.empty()) fj["parse_error"] = f.parse_error;
      if (f.borrow_source) fj["source"] = field_ref_to_json(*f.borrow_source);
      if (!f.format.is_general()) fj["format"] = f.format.descriptor();
      fields.push_back(std::move(fj));
    }
    tables.push_back({{"name", t.name()}, {"levels", t.levels()}, {"rows", t.row_count()}, {"fields", fields}});
  }
  out["tables"] = std::move(tables);
  json borrows = json::array();
  for (const auto& b : wb.relations().borrows) {
    borrows.push_back({{"target", field_ref_to_json(b.target)}, {"source", field_ref_to_json(b.source)}});
  }
  out["borrows"] = std::move(borrows);
  json links = json::array();
  for (const auto& l : wb.relations().links) {
    links.push_back({{"local", field_ref_to_json(l.local)}, {"foreign", field_ref_to_json(l.foreign)}});
  }
  out["links"] = std::move(links);
  json cycles = json::array();
  if (wb.graph()) {
    for (const auto& f : wb.graph()->cyclic()) cycles.push_back(field_ref_to_json(f));
  }
  out["cycles"] = std::move(cycles);
  return out;
}

void print_info(const json& info, std::ostream& out) {
  out << "workbook " << info["name"].get<std::string>() << "\n";
  for (const auto& t : info["tables"]) {
    std::string levels;
    for (const auto& l : t["levels"]) levels += (levels.empty() ? "" : " > ") + l.get<std::string>();
    out << "table " << t["name"].get<std::string>() << " (" << levels << "), " << t["rows"].get<std::size_t>()
        << " rows\n";
    for (const auto& f : t["fields"]) {
      out << "  " << f["name"].get<std::string>() << ": level " << f["level"].get<int>() << ", "
          << f["kind"].get<std::string>();
      if (f.contains("formula")) out << " " << f["formula"].get<std::string>();
      if (f.contains("source")) {
        out << " from " << f["source"]["table"].get<std::string>() << "!" << f["source"]["field"].get<std::string>();
      }
      if (f.contains("format")) out << " [" << f["format"].get<std::string>() << "]";
      if (f.contains("parse_error")) out << " (#PARSE: " << f["parse_error"].get<std::string>() << ")";
      out << "\n";
    }
  }
  auto ref = [](const json& r) { return r["table"].get<std::string>() + "!" + r["field"].get<std::string>(); };
  for (const auto& b : info["borrows"]) out << "borrow " << ref(b["target"]) << " <- " << ref(b["source"]) << "\n";
  for (const auto& l : info["links"]) out << "link " << ref(l["local"]) << " -> " << ref(l["foreign"]) << "\n";
  if (info["cycles"].empty()) {
    out << "cycles: none\n";
  } else {
    std::string names;
    for (const auto& c : info["cycles"]) names += (names.empty() ? "" : ", ") + ref(c);
    out << "cycles: " << names << "\n";
  }
}

// -------------------------------------------------------------- commands

struct Args {
  std::string file;
  std::string table;
  std::string field;
  std::string name;
  std::string levels_text;
  std::vector<std::string> levels;
  std::vector<std::string> where;
  std::vector<std::string> parent;
  std::vector<std::string> set;
  std::vector<std::string> assign;
  std::vector<std::uint64_t> rows;
  std::string level;
  std::string formula;
  std::string format;
  std::string source;
  std::string csv;
  std::string output;
  std::string output_format = "text";
  std::string bind = "127.0.0.1:8080";
  bool all = false;
  bool append = false;
  bool force = false;
};

void cmd_new(const Args& a, std::ostream& out) {
  const fs::path file = a.file;
  FileLock lock(file, true);
  if (fs::exists(file) && !a.force) throw UsageError("'" + a.file + "' exists (pass --force to replace it)");
  Workbook wb(a.name.empty() ? file.stem().string() : a.name);
  if (!a.table.empty()) {
    if (a.levels.empty()) throw UsageError("--table needs --levels");
    wb.add_table(a.table, a.levels);
  }
  save(wb, file);
  out << "created " << a.file << "\n";
}

void cmd_table(const Args& a, std::ostream& out) {
  FileLock lock(a.file, true);
  Workbook wb = open_workbook(a.file);
  wb.add_table(a.table, a.levels);
  save(wb, a.file);
  out << "added table " << a.table << "\n";
}

void cmd_info(const Args& a, std::ostream& out) {
  FileLock lock(a.file, false);
  Workbook wb = open_workbook(a.file);
  const json info = info_json(wb);
  if (a.output_format == "json") {
    out << info.dump(2) << "\n";
  } else {
    print_info(info, out);
  }
}

void cmd_field(const Args& a, std::ostream& out) {
  FileLock lock(a.file, true);
  Workbook wb = open_workbook(a.file);
  const Table& t = table_of(wb, a.table);
  const std::string name = strip_brackets(a.name);
  if (const Field* existing = t.find_field(name)) {
    if (existing->kind != FieldKind::Formula || a.formula.empty() || !a.level.empty()) {
      throw UsageError("table '" + t.name() + "' already has a field '" + name + "'");
    }
    wb.set_formula(t.name(), name, a.formula);
    recalculate(wb);
    save(wb, a.file);
    out << "formula of " << name << " set\n";
    return;
  }
  if (a.level.empty()) throw UsageError("a new field needs --level");
  FieldSpec spec;
  spec.name = name;
  spec.level = level_of(t, a.level);
  spec.kind = a.formula.empty() ? FieldKind::Data : FieldKind::Formula;
  if (!a.formula.empty()) spec.formula = a.formula;
  if (!a.format.empty()) spec.format = a.format;
  const std::string table = t.name();
  wb.add_field(table, spec);
  recalculate(wb);
  save(wb, a.file);
  out << "added " << field_kind_name(spec.kind) << " field " << name << "\n";
}

void cmd_borrow(const Args& a, std::ostream& out) {
  FileLock lock(a.file, true);
  Workbook wb = open_workbook(a.file);
  const Table& t = table_of(wb, a.table);
  FieldSpec spec;
  spec.name = strip_brackets(a.name);
  spec.level = level_of(t, a.level);
  spec.kind = FieldKind::Borrowed;
  spec.borrow_source = require_field_ref(a.source);
  if (!a.format.empty()) spec.format = a.format;
  const std::string table = t.name();
  wb.add_field(table, spec);
  recalculate(wb);
  save(wb, a.file);
  out << "added borrowed field " << spec.name << " (" << wb.table(table).row_count() << " rows)\n";
}

void cmd_link(const Args& a, std::ostream& out) {
  FileLock lock(a.file, true);
  Workbook wb = open_workbook(a.file);
  const Table& t = table_of(wb, a.table);
  const FieldRef local{t.name(), field_of(t, a.field).name};
  declare_link(wb, local, require_field_ref(a.source));
  recalculate(wb);
  save(wb, a.file);
  out << "linked " << local.table << "!" << local.field << " -> " << a.source << "\n";
}

void cmd_set(const Args& a, std::ostream& out) {
  FileLock lock(a.file, true);
  Workbook wb = open_workbook(a.file);
  const Table& t = table_of(wb, a.table);
  std::vector<Assignment> where = split_pairs(a.where);
  std::vector<Assignment> assign = split_pairs(a.assign);
  // `--where` swallows the trailing assignment; take the last pair back.
  if (assign.empty()) {
    if (where.empty()) throw UsageError("set needs field=value");
    assign.push_back(where.back());
    where.pop_back();
  }
  int level = -1;
  for (const auto& as : assign) {
    const Field& f = field_of(t, as.field);
    if (level >= 0 && f.level != level) throw UsageError("assigned fields must share one level");
    level = f.level;
  }
  const std::string table = t.name();
  const auto rows = target_rows(wb, t, level, where, a.rows, a.all, assign.front().field);
  std::size_t unmatched = 0;
  for (RowId r : rows) {
    for (const auto& as : assign) {
      if (wb.set_cell(table, r, field_of(wb.table(table), as.field).name, Value::from_literal(as.text)) ==
          SetCellOutcome::Unmatched) {
        ++unmatched;
      }
    }
  }
  recalculate(wb);
  save(wb, a.file);
  const std::size_t n = rows.size() * assign.size();
  out << n << (n == 1 ? " cell set" : " cells set");
  if (unmatched) out << ", " << unmatched << " unmatched by links";
  out << "\n";
}

void cmd_add_row(const Args& a, std::ostream& out) {
  FileLock lock(a.file, true);
  Workbook wb = open_workbook(a.file);
  const Table& t = table_of(wb, a.table);
  const std::string table = t.name();
  const auto parent_sel = split_pairs(a.parent);
  RowId parent = kRoot;
  int level = 0;
  if (!parent_sel.empty() || !a.rows.empty()) {
    int parent_level = 0;
    for (const auto& p : parent_sel) parent_level = std::max(parent_level, field_of(t, p.field).level);
    if (!a.rows.empty()) parent_level = t.level_of(row_for_file_id(wb, t, a.rows.front()));
    parent = target_rows(wb, t, parent_level, parent_sel, a.rows, false, t.levels()[parent_level]).front();
    level = parent_level + 1;
  }
  if (level >= t.depth()) throw UsageError("rows at the deepest level have no children");
  const auto values = split_pairs(a.set);
  for (const auto& v : values) {
    const Field& f = field_of(t, v.field);
    if (f.level != level) throw UsageError("--set field '" + f.name + "' is not on level '" + t.levels()[level] + "'");
  }
  const RowId row = wb.insert_row(table, parent);
  for (const auto& v : values) wb.set_cell(table, row, field_of(wb.table(table), v.field).name, Value::from_literal(v.text));
  recalculate(wb);
  save(wb, a.file);
  out << file_row_id(wb, table, row) << "\n";
}

void cmd_recalc(const Args& a, std::ostream& out) {
  FileLock lock(a.file, true);
  Workbook wb = open_workbook(a.file);
  const CalcResult res = recalculate(wb, RecalcMode::All);
  save(wb, a.file);
  out << res.changed.size() << " changed\n";
}

void cmd_import(const Args& a, std::ostream& out) {
  FileLock lock(a.file, true);
  Workbook wb = open_workbook(a.file);
  std::ifstream in(a.csv, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + a.csv + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::size_t n = import_csv(wb, table_of(wb, a.table).name(), buf.str(), {.append_leaves = a.append});
  recalculate(wb);
  save(wb, a.file);
  out << n << " rows inserted\n";
}

void cmd_export(const Args& a, std::ostream& out) {
  FileLock lock(a.file, false);
  Workbook wb = open_workbook(a.file);
  const Table& t = table_of(wb, a.table);
  std::optional<int> level;
  if (!a.level.empty()) level = level_of(t, a.level);
  const std::string text = export_csv(wb, t.name(), level);
  if (a.output.empty() || a.output == "-") {
    out << text;
    return;
  }
  std::ofstream file(a.output, std::ios::binary | std::ios::trunc);
  if (!file) throw UsageError("cannot write '" + a.output + "'");
  file << text;
}

void cmd_get(const Args& a, std::ostream& out) {
  FileLock lock(a.file, false);
  Workbook wb = open_workbook(a.file);
  const Table& t = table_of(wb, a.table);
  const Field& f = field_of(t, a.field);
  const auto rows = target_rows(wb, t, f.level, split_pairs(a.where), a.rows, a.all, f.name);
  const std::string table = t.name();
  const std::string field = f.name;
  const DisplayFormat format = f.format;
  if (a.output_format == "json") {
    json values = json::array();
    for (RowId r : rows) {
      const Value v = wb.get_cell(table, r, field);
      values.push_back({{"row", file_row_id(wb, table, r)}, {"value", value_to_json(v)}, {"display", format.render(v)}});
    }
    out << json{{"table", table}, {"field", field}, {"values", values}}.dump() << "\n";
    return;
  }
  for (RowId r : rows) out << render(wb.get_cell(table, r, field)) << "\n";
}

void cmd_serve(const Args& a, std::ostream& out) {
  const auto colon = a.bind.rfind(':');
  if (colon == std::string::npos) throw UsageError("--bind expects host:port");
  ServeOptions options;
  options.host = a.bind.substr(0, colon);
  try {
    options.port = std::stoi(a.bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--bind expects host:port");
  }
  FileLock lock(a.file, true);
  if (!fs::exists(a.file)) throw UsageError("no such workbook '" + a.file + "'");
  serve(a.file, options, out);
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical table workbooks from the command line", "strata"};
  app.require_subcommand(1);
  Args a;

  auto file_arg = [&](CLI::App* sub) { sub->add_option("file", a.file, "Workbook file (.mtab)")->required(); };
  auto table_arg = [&](CLI::App* sub) { sub->add_option("table", a.table, "Table name")->required(); };
  auto where_opt = [&](CLI::App* sub) {
    sub->add_option("--where", a.where, "field=value selectors");
    sub->add_option("--row", a.rows, "Row ids");
    sub->add_flag("--all", a.all, "Address every matching row");
  };

  auto* c_new = app.add_subcommand("new", "Create a workbook");
  file_arg(c_new);
  c_new->add_option("--table", a.table, "First table");
  c_new->add_option("--levels", a.levels, "Level names, outermost first")->delimiter(',');
  c_new->add_option("--name", a.name, "Workbook name (default: file stem)");
  c_new->add_flag("--force", a.force, "Replace an existing file");

  auto* c_table = app.add_subcommand("table", "Add a table");
  file_arg(c_table);
  c_table->add_option("name", a.table, "Table name")->required();
  c_table->add_option("--levels", a.levels, "Level names, outermost first")->delimiter(',')->required();

  auto* c_info = app.add_subcommand("info", "Describe tables, fields, relations and cycles");
  file_arg(c_info);
  c_info->add_option("--format", a.output_format)->check(CLI::IsMember({"text", "json"}));

  auto* c_field = app.add_subcommand("field", "Add a data or formula field, or replace a formula");
  file_arg(c_field);
  table_arg(c_field);
  c_field->add_option("name", a.name, "Field name")->required();
  c_field->add_option("--level", a.level, "Level name or index");
  c_field->add_option("--formula", a.formula, "Formula text, e.g. =SUM(Total)");
  c_field->add_option("--format", a.format, "Display format, e.g. currency-2dp");

  auto* c_borrow = app.add_subcommand("borrow", "Add a field borrowed from another table");
  file_arg(c_borrow);
  table_arg(c_borrow);
  c_borrow->add_option("name", a.name, "Field name")->required();
  c_borrow->add_option("--level", a.level, "Level name or index")->required();
  c_borrow->add_option("--from", a.source, "Source as Table!Field")->required();
  c_borrow->add_option("--format", a.format, "Display format");

  auto* c_link = app.add_subcommand("link", "Link a data field to a key in another table");
  file_arg(c_link);
  table_arg(c_link);
  c_link->add_option("field", a.field, "Local data field")->required();
  c_link->add_option("--to", a.source, "Foreign key as Table!Field")->required();

  auto* c_set = app.add_subcommand("set", "Set data cells");
  file_arg(c_set);
  table_arg(c_set);
  c_set->add_option("assignment", a.assign, "field=value");
  where_opt(c_set);

  auto* c_add = app.add_subcommand("add-row", "Insert a row and print its id");
  file_arg(c_add);
  table_arg(c_add);
  c_add->add_option("--parent", a.parent, "field=value selectors for the parent row");
  c_add->add_option("--parent-row", a.rows, "Parent row id");
  c_add->add_option("--set", a.set, "field=value for the new row");

  auto* c_recalc = app.add_subcommand("recalc", "Recompute every formula cell");
  file_arg(c_recalc);

  auto* c_import = app.add_subcommand("import", "Import CSV records");
  file_arg(c_import);
  table_arg(c_import);
  c_import->add_option("csv", a.csv, "CSV file")->required();
  c_import->add_flag("--append", a.append, "Always add a new row at the deepest level");

  auto* c_export = app.add_subcommand("export", "Export a table level as CSV");
  file_arg(c_export);
  table_arg(c_export);
  c_export->add_option("--level", a.level, "Level name or index (default: deepest)");
  c_export->add_option("-o,--output", a.output, "Destination (default: stdout)");

  auto* c_get = app.add_subcommand("get", "Print cell values");
  file_arg(c_get);
  table_arg(c_get);
  c_get->add_option("field", a.field, "Field name")->required();
  where_opt(c_get);
  c_get->add_option("--format", a.output_format)->check(CLI::IsMember({"text", "json"}));

  auto* c_serve = app.add_subcommand("serve", "Serve the workbook over HTTP");
  file_arg(c_serve);
  c_serve->add_option("--bind", a.bind, "host:port");

  std::vector<std::string> reversed(argv.rbegin(), argv.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const std::vector<std::pair<CLI::App*, void (*)(const Args&, std::ostream&)>> commands{
      {c_new, cmd_new},     {c_table, cmd_table},   {c_info, cmd_info},     {c_field, cmd_field},
      {c_borrow, cmd_borrow}, {c_link, cmd_link},   {c_set, cmd_set},       {c_add, cmd_add_row},
      {c_recalc, cmd_recalc}, {c_import, cmd_import}, {c_export, cmd_export}, {c_get, cmd_get},
      {c_serve, cmd_serve}};
  try {
    for (const auto& [sub, fn] : commands) {
      if (sub->parsed()) fn(a, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const EngineError& e) {
    err << "error: " << error_code_name(e.code()) << " " << e.what() << "\n";
    return 2;
  } catch (const DocumentError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace strata
