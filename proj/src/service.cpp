#include "strata/service.hpp"

#include "strata/eval.hpp"
#include "strata/formula.hpp"
#include "strata/io.hpp"
#include "strata/json_codec.hpp"
#include "strata/relations.hpp"

#include <httplib.h>

#include <csignal>
#include <map>
#include <ostream>
#include <set>
#include <thread>

namespace strata {

using nlohmann::json;

namespace {

class BadRequest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json field_json(const Field& f) {
  json j{{"name", f.name}, {"level", f.level}, {"kind", field_kind_name(f.kind)}};
  if (f.kind == FieldKind::Formula) j["formula"] = f.formula_text;
  if (!f.parse_error.empty()) j["parse_error"] = f.parse_error;
  if (f.borrow_source) j["source"] = field_ref_to_json(*f.borrow_source);
  if (!f.format.is_general()) j["format"] = f.format.descriptor();
  return j;
}

json error_body(const std::string& code, const std::string& message) {
  return json{{"error", {{"code", code}, {"message", message}}}};
}

// ------------------------------------------------------- command decoding

const json& need(const json& cmd, const char* key) {
  auto it = cmd.find(key);
  if (it == cmd.end()) throw BadRequest(std::string("missing \"") + key + "\"");
  return *it;
}

std::string need_string(const json& cmd, const char* key) {
  const json& v = need(cmd, key);
  if (!v.is_string()) throw BadRequest(std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

bool is_count(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

RowId need_row(const json& cmd, const char* key) {
  const json& v = need(cmd, key);
  if (!is_count(v)) throw BadRequest(std::string("\"") + key + "\" must be a row id");
  return RowId{v.get<std::uint64_t>()};
}

FieldRef need_ref(const json& cmd, const char* key) {
  const json& v = need(cmd, key);
  if (!v.is_object()) throw BadRequest(std::string("\"") + key + "\" must be {table, field}");
  return {need_string(v, "table"), need_string(v, "field")};
}

Value cell_value(const json& cmd) {
  if (auto lit = cmd.find("literal"); lit != cmd.end()) {
    if (!lit->is_string()) throw BadRequest("\"literal\" must be a string");
    return Value::from_literal(lit->get<std::string>());
  }
  try {
    return value_from_json(need(cmd, "value"));
  } catch (const std::invalid_argument& e) {
    throw BadRequest(e.what());
  }
}

int need_level(const Workbook& wb, const std::string& table, const json& cmd) {
  const json& v = need(cmd, "level");
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) {
    const auto& levels = wb.table(table).levels();
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] == v.get<std::string>()) return static_cast<int>(i);
    }
    throw EngineError(ErrorCode::Ref, "table '" + table + "' has no level '" + v.get<std::string>() + "'");
  }
  throw BadRequest("\"level\" must be an index or a level name");
}

/// Rejects unparseable formulas before they reach the workbook.
void check_formula(const std::string& text) { parse_formula(text); }

void apply(Workbook& wb, const json& cmd) {
  const std::string type = need_string(cmd, "type");
  if (type == "set_cell") {
    const std::string table = need_string(cmd, "table");
    wb.set_cell(table, need_row(cmd, "row"), need_string(cmd, "field"), cell_value(cmd));
  } else if (type == "insert_row") {
    const std::string table = need_string(cmd, "table");
    const RowId parent = cmd.contains("parent") ? need_row(cmd, "parent") : kRoot;
    std::optional<std::size_t> index;
    if (auto it = cmd.find("index"); it != cmd.end()) {
      if (!is_count(*it)) throw BadRequest("\"index\" must be a non-negative integer");
      index = it->get<std::size_t>();
    }
    const RowId row = wb.insert_row(table, parent, index);
    if (auto cells = cmd.find("cells"); cells != cmd.end()) {
      if (!cells->is_object()) throw BadRequest("\"cells\" must be an object");
      for (const auto& [field, value] : cells->items()) {
        try {
          wb.set_cell(table, row, field, value_from_json(value));
        } catch (const std::invalid_argument& e) {
          throw BadRequest(e.what());
        }
      }
    }
  } else if (type == "delete_row") {
    wb.delete_row(need_string(cmd, "table"), need_row(cmd, "row"));
  } else if (type == "add_field" || type == "declare_borrow") {
    const std::string table = need_string(cmd, "table");
    FieldSpec spec;
    spec.name = need_string(cmd, "name");
    spec.level = need_level(wb, table, cmd);
    if (type == "declare_borrow") {
      spec.kind = FieldKind::Borrowed;
    } else {
      auto kind = field_kind_from_name(cmd.contains("kind") ? need_string(cmd, "kind") : "data");
      if (!kind) throw BadRequest("unknown field kind");
      spec.kind = *kind;
    }
    if (cmd.contains("formula")) {
      spec.formula = need_string(cmd, "formula");
      check_formula(*spec.formula);
    }
    if (cmd.contains("format")) spec.format = need_string(cmd, "format");
    if (cmd.contains("source")) spec.borrow_source = need_ref(cmd, "source");
    wb.add_field(table, spec);
  } else if (type == "set_formula") {
    const std::string formula = need_string(cmd, "formula");
    check_formula(formula);
    wb.set_formula(need_string(cmd, "table"), need_string(cmd, "field"), formula);
  } else if (type == "declare_link") {
    declare_link(wb, need_ref(cmd, "local"), need_ref(cmd, "foreign"));
  } else {
    throw BadRequest("unknown command type '" + type + "'");
  }
}

json all_views(const Workbook& wb) {
  json out = json::array();
  for (const auto& t : wb.tables()) out.push_back(table_view(wb, t));
  return out;
}

// ------------------------------------------------------------------ diff

using ChildLists = std::map<std::uint64_t, std::vector<std::uint64_t>>;

ChildLists child_lists(const json& rows) {
  ChildLists out;
  out[0];
  for (const auto& r : rows) out[r["parent"].get<std::uint64_t>()].push_back(r["id"].get<std::uint64_t>());
  return out;
}

std::map<std::uint64_t, const json*> rows_by_id(const json& rows) {
  std::map<std::uint64_t, const json*> out;
  for (const auto& r : rows) out[r["id"].get<std::uint64_t>()] = &r;
  return out;
}

const json* find_named(const json& list, const char* key, const json& name) {
  for (const auto& item : list) {
    if (item[key] == name) return &item;
  }
  return nullptr;
}

void diff_table(const std::string& name, const json& before, const json& after, json& patch) {
  for (const auto& f : after["fields"]) {
    const json* old = find_named(before["fields"], "name", f["name"]);
    if (!old || *old != f) patch["fields"].push_back({{"table", name}, {"field", f}});
  }
  for (const auto& l : after["links"]) {
    const json* old = find_named(before["links"], "field", l["field"]);
    if (!old || *old != l) {
      json entry = l;
      entry["table"] = name;
      patch["links"].push_back(std::move(entry));
    }
  }

  const auto old_rows = rows_by_id(before["rows"]);
  const auto new_rows = rows_by_id(after["rows"]);
  for (const auto& r : before["rows"]) {
    const auto id = r["id"].get<std::uint64_t>();
    if (!new_rows.count(id)) patch["rows_deleted"].push_back({{"table", name}, {"row", id}});
  }
  const ChildLists old_children = child_lists(before["rows"]);
  const ChildLists new_children = child_lists(after["rows"]);
  for (const auto& r : after["rows"]) {
    const auto id = r["id"].get<std::uint64_t>();
    if (old_rows.count(id)) continue;
    const auto parent = r["parent"].get<std::uint64_t>();
    const auto& siblings = new_children.at(parent);
    const auto index = std::find(siblings.begin(), siblings.end(), id) - siblings.begin();
    patch["rows_inserted"].push_back(
        {{"table", name}, {"row", id}, {"parent", parent}, {"level", r["level"]}, {"index", index}});
  }
  std::set<std::uint64_t> parents;
  for (const auto& [p, _] : old_children) parents.insert(p);
  for (const auto& [p, _] : new_children) parents.insert(p);
  static const std::vector<std::uint64_t> none;
  for (auto p : parents) {
    if (p != 0 && !new_rows.count(p)) continue;
    auto o = old_children.find(p);
    auto n = new_children.find(p);
    const auto& ol = o == old_children.end() ? none : o->second;
    const auto& nl = n == new_children.end() ? none : n->second;
    // Children that are new are placed by their insert entries already,
    // but only a full list pins the final order.
    if (ol != nl) patch["child_orders"].push_back({{"table", name}, {"parent", p}, {"children", nl}});
  }

  static const json no_cells = json::object();
  for (const auto& r : after["rows"]) {
    const auto id = r["id"].get<std::uint64_t>();
    auto old = old_rows.find(id);
    const json& old_cells = old == old_rows.end() ? no_cells : (*old->second)["cells"];
    const json& new_cells = r["cells"];
    for (const auto& [field, cell] : new_cells.items()) {
      auto it = old_cells.find(field);
      if (it != old_cells.end() && *it == cell) continue;
      json entry = cell;
      entry["table"] = name;
      entry["row"] = id;
      entry["field"] = field;
      patch["cells"].push_back(std::move(entry));
    }
    for (const auto& [field, _] : old_cells.items()) {
      if (new_cells.contains(field)) continue;
      patch["cells"].push_back({{"table", name}, {"row", id}, {"field", field}, {"value", nullptr}, {"display", ""}});
    }
  }
}

}  // namespace

// ------------------------------------------------------------------ views

json table_view(const Workbook& wb, const Table& t) {
  json fields = json::array();
  for (const auto& f : t.fields()) fields.push_back(field_json(f));

  json rows = json::array();
  t.walk([&](const RowNode& n) {
    json cells = json::object();
    for (const Field* f : t.fields_at(n.level)) {
      const Value v = wb.peek_cell(t.name(), n.id, f->name);
      const bool unmatched = is_unmatched(wb, t.name(), n.id, f->name);
      if (v.is_empty() && !unmatched) continue;
      json c{{"value", value_to_json(v)}, {"display", f->format.render(v)}};
      if (v.is_error()) c["error"] = error_code_name(v.error());
      if (unmatched) c["unmatched"] = true;
      cells[f->name] = std::move(c);
    }
    rows.push_back({{"id", n.id.value}, {"parent", n.parent.value}, {"level", n.level}, {"cells", std::move(cells)}});
  });

  json links = json::array();
  for (const auto& l : wb.relations().links) {
    if (l.local.table != t.name()) continue;
    json valid = json::array();
    for (const auto& v : valid_values(wb, l)) valid.push_back(value_to_json(v));
    links.push_back({{"field", l.local.field}, {"foreign", field_ref_to_json(l.foreign)}, {"valid_values", valid}});
  }
  return json{{"name", t.name()}, {"levels", t.levels()}, {"fields", fields}, {"rows", rows}, {"links", links}};
}

json diff_views(const json& before, const json& after) {
  json patch{{"tables_added", json::array()}, {"fields", json::array()},        {"links", json::array()},
             {"rows_deleted", json::array()}, {"rows_inserted", json::array()}, {"child_orders", json::array()},
             {"cells", json::array()}};
  static const json empty_table{{"fields", json::array()}, {"links", json::array()}, {"rows", json::array()}};
  for (const auto& t : after) {
    const json* old = find_named(before, "name", t["name"]);
    if (!old) patch["tables_added"].push_back({{"name", t["name"]}, {"levels", t["levels"]}});
    diff_table(t["name"].get<std::string>(), old ? *old : empty_table, t, patch);
  }
  return patch;
}

// ---------------------------------------------------------------- service

WorkbookService::WorkbookService(Workbook wb, std::optional<std::filesystem::path> file)
    : wb_(std::move(wb)), file_(std::move(file)) {
  if (wb_.needs_recalc()) recalculate(wb_);
  views_ = all_views(wb_);
}

std::uint64_t WorkbookService::version() const {
  std::shared_lock lock(mutex_);
  return version_;
}

json WorkbookService::workbook_view() const {
  std::shared_lock lock(mutex_);
  return json{{"version", version_}, {"document", document_to_json(wb_)}, {"tables", views_}};
}

ServiceResponse WorkbookService::table(const std::string& name) const {
  std::shared_lock lock(mutex_);
  const json* view = find_named(views_, "name", name);
  if (!view) return {404, error_body("not-found", "no table '" + name + "'")};
  json body = *view;
  body["version"] = version_;
  return {200, std::move(body)};
}

ServiceResponse WorkbookService::edit(const json& command) {
  std::unique_lock lock(mutex_);
  try {
    if (!command.is_object()) throw BadRequest("an edit command must be an object");
    const json& expected = need(command, "expected_version");
    if (!is_count(expected)) throw BadRequest("\"expected_version\" must be a non-negative integer");
    if (expected.get<std::uint64_t>() != version_) {
      return {409, json{{"error", {{"code", "stale"}, {"current_version", version_}}}}};
    }
    Workbook next = wb_;
    apply(next, command);
    recalculate(next);
    json after = all_views(next);
    json patch = diff_views(views_, after);
    patch["version"] = version_ + 1;
    patch["command_id"] = command.contains("command_id") ? command["command_id"] : json(nullptr);
    if (file_) save(next, *file_);

    wb_ = std::move(next);
    views_ = std::move(after);
    ++version_;
    {
      std::lock_guard log_lock(log_mutex_);
      log_.push_back(patch);
    }
    log_cv_.notify_all();
    return {200, std::move(patch)};
  } catch (const BadRequest& e) {
    return {400, error_body("bad-request", e.what())};
  } catch (const json::exception& e) {
    return {400, error_body("bad-request", e.what())};
  } catch (const ParseError& e) {
    json body = error_body(std::string(error_code_name(ErrorCode::Parse)), e.what());
    body["error"]["position"] = e.position();
    return {422, std::move(body)};
  } catch (const EngineError& e) {
    return {422, error_body(std::string(error_code_name(e.code())), e.what())};
  } catch (const DocumentError& e) {
    return {500, error_body("save-failed", e.what())};
  }
}

ServiceResponse WorkbookService::edit_text(const std::string& body) {
  json command;
  try {
    command = json::parse(body);
  } catch (const json::parse_error& e) {
    return {400, error_body("bad-request", e.what())};
  }
  return edit(command);
}

std::vector<json> WorkbookService::patches_since(std::uint64_t version) const {
  std::lock_guard lock(log_mutex_);
  // log_[i] carries version i + 1
  if (version >= log_.size()) return {};
  return {log_.begin() + static_cast<std::ptrdiff_t>(version), log_.end()};
}

std::vector<json> WorkbookService::wait_for_patches(std::uint64_t version, std::chrono::milliseconds timeout) const {
  {
    std::unique_lock lock(log_mutex_);
    log_cv_.wait_for(lock, timeout, [&] { return stopped_ || log_.size() > version; });
  }
  return patches_since(version);
}

void WorkbookService::stop() {
  {
    std::lock_guard lock(log_mutex_);
    stopped_ = true;
  }
  log_cv_.notify_all();
}

bool WorkbookService::stopped() const {
  std::lock_guard lock(log_mutex_);
  return stopped_;
}

Workbook WorkbookService::snapshot() const {
  std::shared_lock lock(mutex_);
  return wb_;
}

// ------------------------------------------------------------------- http

struct HttpServer::Impl {
  explicit Impl(WorkbookService& s) : service(s) {}
  WorkbookService& service;
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, const ServiceResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

std::string sse_event(const json& patch) {
  return "id: " + patch["version"].dump() + "\nevent: patch\ndata: " + patch.dump() + "\n\n";
}

}  // namespace

HttpServer::HttpServer(WorkbookService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svr = impl_->server;
  // Each push subscriber holds a worker for the life of its stream.
  svr.new_task_queue = [] { return new httplib::ThreadPool(32); };
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  // Without SO_REUSEPORT, so a second server on a busy port fails to bind.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });

  svr.Get("/api/workbook", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, {200, impl_->service.workbook_view()});
  });
  svr.Get(R"(/api/table/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl_->service.table(req.matches[1]));
  });
  svr.Post("/api/edit", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl_->service.edit_text(req.body));
  });
  svr.Options("/api/edit", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "POST");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  svr.Get("/api/updates", [this](const httplib::Request& req, httplib::Response& res) {
    std::uint64_t since = impl_->service.version();
    try {
      if (req.has_header("Last-Event-ID")) since = std::stoull(req.get_header_value("Last-Event-ID"));
      if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
    } catch (const std::exception&) {
      reply(res, {400, error_body("bad-request", "since must be a version number")});
      return;
    }
    res.set_header("Cache-Control", "no-cache");
    auto cursor = std::make_shared<std::uint64_t>(since);
    res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
      WorkbookService& service = impl_->service;
      const auto patches = service.wait_for_patches(*cursor, std::chrono::seconds(10));
      if (service.stopped()) {
        sink.done();
        return true;
      }
      if (patches.empty()) {
        static const std::string keepalive = ": keepalive\n\n";
        return sink.write(keepalive.data(), keepalive.size());
      }
      for (const auto& p : patches) {
        const std::string event = sse_event(p);
        if (!sink.write(event.data(), event.size())) return false;
        *cursor = p["version"].get<std::uint64_t>();
      }
      return true;
    });
  });
  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(error_body("http-" + std::to_string(res.status), "").dump(), "application/json");
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  auto& svr = impl_->server;
  if (port == 0) {
    const int bound = svr.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!svr.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  impl_->service.stop();
  impl_->server.stop();
}

void serve(const std::filesystem::path& file, const ServeOptions& options, std::ostream& log) {
  LoadResult loaded = load(file);
  if (!loaded.repairs.empty()) {
    log << "repaired " << loaded.repairs.inserted.size() << " missing and " << loaded.repairs.deleted.size()
        << " stale borrowed rows\n";
  }
  WorkbookService service(std::move(loaded.workbook), file);
  HttpServer http(service);
  const int port = http.bind(options.host, options.port);

  // Signals go to sigwait below, not to the server threads.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::thread worker([&] { http.listen(); });
  log << "serving " << file.string() << " on http://" << options.host << ":" << port << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  log << "stopping\n";
  http.stop();
  worker.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
}

}  // namespace strata
