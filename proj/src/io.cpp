#include "strata/io.hpp"

#include "strata/json_codec.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>
#include <sstream>

namespace strata {

using nlohmann::json;

namespace {

json row_json(const Table& t, const RowNode& n) {
  json row = json::object();
  json cells = json::object();
  for (const auto& [name, value] : n.cells) {
    const Field* f = t.find_field(name);
    if (!f || f->kind == FieldKind::Formula || value.is_empty()) continue;
    cells[name] = value_to_json(value);
  }
  if (!cells.empty()) row["cells"] = std::move(cells);
  if (!n.children.empty()) {
    json kids = json::array();
    for (RowId c : n.children) kids.push_back(row_json(t, t.row(c)));
    row["children"] = std::move(kids);
  }
  return row;
}

[[noreturn]] void invalid(const std::string& invariant, const std::string& detail) {
  throw DocumentError(invariant + ": " + detail);
}

const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) invalid("malformed-document", where + " is not an object");
  auto it = obj.find(key);
  if (it == obj.end()) invalid("malformed-document", where + " lacks \"" + key + "\"");
  return *it;
}

std::string string_member(const json& obj, const char* key, const std::string& where) {
  const json& v = member(obj, key, where);
  if (!v.is_string()) invalid("malformed-document", where + "." + key + " must be a string");
  return v.get<std::string>();
}

FieldRef field_ref_from(const json& j, const std::string& where) {
  return {string_member(j, "table", where), string_member(j, "field", where)};
}

Value value_from(const json& j, const std::string& where) {
  if (j.is_object() || j.is_array()) invalid("malformed-document", where + " holds a non-scalar cell value");
  return value_from_json(j);
}

class DocumentReader {
 public:
  explicit DocumentReader(Workbook& wb) : wb_(wb) {}

  void read(const json& doc) {
    if (!doc.is_object()) invalid("malformed-document", "top level is not an object");
    if (string_member(doc, "format", "document") != kDocumentFormat) {
      invalid("unknown-format", "format marker is not \"" + std::string(kDocumentFormat) + "\"");
    }
    const json& version = member(doc, "version", "document");
    if (!version.is_number_integer() || version.get<int>() != kDocumentVersion) {
      invalid("unknown-version", "unsupported document version " + version.dump());
    }
    if (auto it = doc.find("name"); it != doc.end() && it->is_string()) wb_.set_name(it->get<std::string>());

    const json& tables = member(doc, "tables", "document");
    if (!tables.is_array()) invalid("malformed-document", "tables must be an array");
    for (const auto& t : tables) read_table_shape(t);
    for (const auto& t : tables) read_fields(t);
    for (const auto& t : tables) read_rows(t);
    for (const auto& [target, source] : borrows_) {
      guarded("invalid-borrow", [&] { register_borrow(wb_, target, source); });
    }
    if (auto it = doc.find("links"); it != doc.end()) {
      if (!it->is_array()) invalid("malformed-document", "links must be an array");
      for (const auto& l : *it) {
        const FieldRef local = field_ref_from(member(l, "local", "link"), "link.local");
        const FieldRef foreign = field_ref_from(member(l, "foreign", "link"), "link.foreign");
        guarded("invalid-link", [&] { declare_link(wb_, local, foreign); });
      }
    }
  }

 private:
  template <typename Fn>
  void guarded(const std::string& invariant, Fn&& fn) {
    try {
      fn();
    } catch (const EngineError& e) {
      invalid(invariant, e.what());
    }
  }

  void read_table_shape(const json& t) {
    const std::string name = string_member(t, "name", "table");
    const json& levels = member(t, "levels", "table " + name);
    if (!levels.is_array()) invalid("malformed-document", "levels of " + name + " must be an array");
    std::vector<std::string> names;
    for (const auto& l : levels) {
      if (!l.is_string()) invalid("malformed-document", "level names must be strings");
      names.push_back(l.get<std::string>());
    }
    std::string invariant = wb_.find_table(name) ? "duplicate-table-name" : "invalid-table";
    guarded(invariant, [&] { wb_.add_table(name, names); });
  }

  void read_fields(const json& t) {
    Table& table = wb_.table(string_member(t, "name", "table"));
    auto it = t.find("fields");
    if (it == t.end()) return;
    if (!it->is_array()) invalid("malformed-document", "fields of " + table.name() + " must be an array");
    for (const auto& f : *it) {
      const std::string where = table.name() + " field";
      FieldSpec spec;
      spec.name = string_member(f, "name", where);
      const json& level = member(f, "level", where);
      if (!level.is_number_integer()) invalid("malformed-document", where + " level must be an integer");
      spec.level = level.get<int>();
      auto kind = field_kind_from_name(string_member(f, "kind", where));
      if (!kind) invalid("malformed-document", where + " '" + spec.name + "' has an unknown kind");
      spec.kind = *kind;
      if (auto fm = f.find("formula"); fm != f.end()) spec.formula = fm->get<std::string>();
      if (auto fmt = f.find("format"); fmt != f.end()) spec.format = fmt->get<std::string>();
      if (auto src = f.find("source"); src != f.end()) spec.borrow_source = field_ref_from(*src, where);

      if (table.find_field(spec.name)) {
        invalid("duplicate-field-name", "field '" + spec.name + "' appears twice in table '" + table.name() + "'");
      }
      if (spec.kind != FieldKind::Borrowed) {
        guarded("invalid-field", [&] { wb_.add_field(table.name(), spec); });
        continue;
      }
      if (!spec.borrow_source || spec.formula) {
        invalid("invalid-field", "borrowed field '" + spec.name + "' needs exactly a source");
      }
      if (spec.level < 0 || spec.level >= table.depth()) {
        invalid("invalid-field", "field '" + spec.name + "' level out of range");
      }
      Field field;
      field.name = spec.name;
      field.level = spec.level;
      field.kind = FieldKind::Borrowed;
      field.borrow_source = spec.borrow_source;
      if (spec.format) {
        auto fmt = DisplayFormat::parse(*spec.format);
        if (!fmt) invalid("invalid-field", "unknown display format '" + *spec.format + "'");
        field.format = *fmt;
      }
      table.push_field(std::move(field));
      borrows_.emplace_back(FieldRef{table.name(), spec.name}, *spec.borrow_source);
    }
  }

  void read_rows(const json& t) {
    Table& table = wb_.table(string_member(t, "name", "table"));
    auto it = t.find("rows");
    if (it == t.end()) return;
    read_children(table, *it, kRoot, 0);
  }

  void read_children(Table& table, const json& rows, RowId parent, int level) {
    if (!rows.is_array()) invalid("malformed-document", "rows of " + table.name() + " must be an array");
    if (level >= table.depth()) {
      if (rows.empty()) return;
      invalid("row-depth", "table '" + table.name() + "' has rows below its deepest level");
    }
    for (const auto& r : rows) {
      if (!r.is_object()) invalid("malformed-document", "row of " + table.name() + " is not an object");
      const RowId id = wb_.next_row_id();
      table.attach_row(id, parent, std::nullopt);
      if (auto cells = r.find("cells"); cells != r.end()) {
        if (!cells->is_object()) invalid("malformed-document", "cells must be an object");
        for (const auto& [name, value] : cells->items()) {
          const Field* f = table.find_field(name);
          if (!f) invalid("unknown-field", "row cell names unknown field '" + name + "' in " + table.name());
          if (f->level != level) {
            invalid("cell-locality", "field '" + name + "' is not bound to level " + std::to_string(level));
          }
          if (f->kind == FieldKind::Formula) {
            invalid("computed-cell", "formula field '" + name + "' must not be stored");
          }
          table.write_cell(id, name, value_from(value, table.name() + "." + name));
        }
      }
      if (auto kids = r.find("children"); kids != r.end()) read_children(table, *kids, id, level + 1);
    }
  }

  Workbook& wb_;
  std::vector<std::pair<FieldRef, FieldRef>> borrows_;
};

std::string render_for_csv(const Field& f, const Value& v) { return f.format.render(v); }

}  // namespace

json value_to_json(const Value& v) {
  if (v.is_bool()) return v.boolean();
  if (v.is_text()) return v.text();
  if (v.is_number()) {
    const Number& n = v.number();
    if (n.is_integer() && boost::multiprecision::abs(n.rep()) <= Number::Rep(std::numeric_limits<std::int64_t>::max())) {
      return n.rep().convert_to<std::int64_t>();
    }
    return n.to_double();
  }
  if (v.is_error()) return json{{"error", error_code_name(v.error())}};
  return nullptr;
}

Value value_from_json(const json& j) {
  switch (j.type()) {
    case json::value_t::boolean: return j.get<bool>();
    case json::value_t::string: return j.get<std::string>();
    case json::value_t::number_integer: return Number(static_cast<long long>(j.get<std::int64_t>()));
    case json::value_t::number_unsigned: return *Number::parse(std::to_string(j.get<std::uint64_t>()));
    case json::value_t::number_float: return Number::from_double(j.get<double>());
    case json::value_t::null: return Empty{};
    case json::value_t::object:
      if (auto it = j.find("error"); it != j.end() && j.size() == 1 && it->is_string()) {
        if (auto code = error_code_from_name(it->get<std::string>())) return *code;
      }
      [[fallthrough]];
    default: throw std::invalid_argument("not a cell value: " + j.dump());
  }
}

json field_ref_to_json(const FieldRef& r) { return json{{"field", r.field}, {"table", r.table}}; }

std::string to_document(const Workbook& wb) { return document_to_json(wb).dump(2) + "\n"; }

json document_to_json(const Workbook& wb) {
  json doc = json::object();
  doc["format"] = kDocumentFormat;
  doc["version"] = kDocumentVersion;
  doc["name"] = wb.name();
  json tables = json::array();
  for (const auto& t : wb.tables()) {
    json tj = json::object();
    tj["name"] = t.name();
    tj["levels"] = t.levels();
    json fields = json::array();
    for (const auto& f : t.fields()) {
      json fj = json::object();
      fj["name"] = f.name;
      fj["level"] = f.level;
      fj["kind"] = field_kind_name(f.kind);
      if (f.kind == FieldKind::Formula) fj["formula"] = f.formula_text;
      if (f.borrow_source) fj["source"] = field_ref_to_json(*f.borrow_source);
      if (!f.format.is_general()) fj["format"] = f.format.descriptor();
      fields.push_back(std::move(fj));
    }
    tj["fields"] = std::move(fields);
    json rows = json::array();
    for (RowId r : t.children_of(kRoot)) rows.push_back(row_json(t, t.row(r)));
    tj["rows"] = std::move(rows);
    tables.push_back(std::move(tj));
  }
  doc["tables"] = std::move(tables);
  json links = json::array();
  for (const auto& l : wb.relations().links) {
    links.push_back(json{{"foreign", field_ref_to_json(l.foreign)}, {"local", field_ref_to_json(l.local)}});
  }
  doc["links"] = std::move(links);
  return doc;
}

LoadResult from_document(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DocumentError("malformed-document: byte " + std::to_string(e.byte) + ": " + e.what());
  }
  LoadResult out{Workbook{}, {}};
  DocumentReader reader(out.workbook);
  try {
    reader.read(doc);
  } catch (const json::exception& e) {
    throw DocumentError(std::string("malformed-document: ") + e.what());
  }
  out.repairs = sync_borrows(out.workbook);
  recalculate(out.workbook, RecalcMode::All);
  return out;
}

std::size_t save(const Workbook& wb, const std::filesystem::path& destination) {
  const std::string text = to_document(wb);
  const auto tmp = destination.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DocumentError("cannot write '" + destination.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DocumentError("cannot write '" + destination.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, destination, ec);
  if (ec) throw DocumentError("cannot write '" + destination.string() + "': " + ec.message());
  return text.size();
}

LoadResult load(const std::filesystem::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw DocumentError("cannot read '" + source.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_document(buf.str());
}

// ------------------------------------------------------------------ CSV

std::vector<CsvRecord> parse_csv(std::string_view text) {
  std::vector<CsvRecord> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  while (i < n) {
    CsvRecord record;
    std::string field;
    bool end_of_record = false;
    while (!end_of_record) {
      field.clear();
      if (i < n && text[i] == '"') {
        const std::size_t start = i++;
        bool closed = false;
        while (i < n) {
          if (text[i] == '"') {
            if (i + 1 < n && text[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            closed = true;
            break;
          }
          field.push_back(text[i++]);
        }
        if (!closed) throw DocumentError("csv: unterminated quoted field at byte " + std::to_string(start));
        while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') field.push_back(text[i++]);
      } else {
        while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') field.push_back(text[i++]);
      }
      record.push_back(field);
      if (i < n && text[i] == ',') {
        ++i;
        continue;
      }
      if (i < n && text[i] == '\r') ++i;
      if (i < n && text[i] == '\n') ++i;
      end_of_record = true;
    }
    out.push_back(std::move(record));
  }
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_csv(const std::vector<CsvRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out.push_back(',');
      out += csv_escape(r[i]);
    }
    out.push_back('\n');
  }
  return out;
}

std::size_t import_csv(Workbook& wb, const std::string& table_name, std::string_view csv,
                       const CsvImportOptions& options) {
  const auto records = parse_csv(csv);
  if (records.empty()) return 0;
  const Table& t = wb.table(table_name);
  for (int level = 0; level < t.depth(); ++level) {
    if (t.borrowed_field_at(level)) {
      throw EngineError(ErrorCode::Ref, "cannot import into '" + table_name + "': it has borrowed levels");
    }
  }
  const CsvRecord& header = records.front();
  std::vector<const Field*> columns;
  int deepest = -1;
  for (const auto& name : header) {
    const Field* f = t.find_field(name);
    if (!f) throw EngineError(ErrorCode::Ref, "csv header names unknown field '" + name + "'");
    if (f->kind != FieldKind::Data) {
      throw EngineError(ErrorCode::Ref, "csv header maps to " + std::string(field_kind_name(f->kind)) +
                                            " field '" + name + "'");
    }
    for (const Field* c : columns) {
      if (c == f) throw EngineError(ErrorCode::Ref, "csv header repeats field '" + name + "'");
    }
    columns.push_back(f);
    deepest = std::max(deepest, f->level);
  }

  std::size_t inserted = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const CsvRecord& rec = records[r];
    if (rec.size() == 1 && rec[0].empty() && header.size() > 1) continue;
    if (rec.size() != header.size()) {
      throw EngineError(ErrorCode::Ref, "csv record " + std::to_string(r + 1) + " has " +
                                            std::to_string(rec.size()) + " fields, header has " +
                                            std::to_string(header.size()));
    }
    std::vector<Value> values;
    values.reserve(rec.size());
    for (const auto& cell : rec) values.push_back(Value::from_literal(cell));

    RowId parent = kRoot;
    for (int level = 0; level <= deepest; ++level) {
      std::vector<std::size_t> at_level;
      for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c]->level == level) at_level.push_back(c);
      }
      const Table& cur = wb.table(table_name);
      std::optional<RowId> match;
      if (!(options.append_leaves && level == deepest)) {
        for (RowId child : cur.children_of(parent)) {
          bool equal = true;
          for (std::size_t c : at_level) {
            if (!(cur.cell(child, columns[c]->name) == values[c])) {
              equal = false;
              break;
            }
          }
          if (equal) {
            match = child;
            break;
          }
        }
      }
      if (!match) {
        match = wb.insert_row(table_name, parent);
        ++inserted;
        for (std::size_t c : at_level) {
          if (!values[c].is_empty()) wb.set_cell(table_name, *match, columns[c]->name, values[c]);
        }
      }
      parent = *match;
    }
  }
  return inserted;
}

std::string export_csv(Workbook& wb, const std::string& table_name, std::optional<int> level) {
  if (wb.needs_recalc()) recalculate(wb);
  const Table& t = wb.table(table_name);
  const int target = level.value_or(t.depth() - 1);
  if (target < 0 || target >= t.depth()) {
    throw EngineError(ErrorCode::Ref, "level " + std::to_string(target) + " out of range");
  }
  std::vector<const Field*> columns;
  for (const Field* f : t.fields_outer_to_inner()) {
    if (f->level <= target) columns.push_back(f);
  }
  std::vector<CsvRecord> records;
  CsvRecord header;
  for (const Field* f : columns) header.push_back(f->name);
  records.push_back(std::move(header));
  for (RowId r : t.rows_at_level(target)) {
    CsvRecord rec;
    for (const Field* f : columns) rec.push_back(render_for_csv(*f, t.inherited_cell(r, f->name)));
    records.push_back(std::move(rec));
  }
  return format_csv(records);
}

}  // namespace strata
