#pragma once

// HTTP access to one workbook, for the browser editor.
//
//   GET  /api/workbook           document, computed values, version
//   GET  /api/table/{name}       one table view
//   POST /api/edit               one edit command -> change patch
//   GET  /api/updates?since=N    server-sent events, one patch per event
//
// Edits run one at a time against a copy of the workbook, which replaces
// the live one only after recalculation and save succeed. Each successful
// edit bumps the service version by one and appends its patch to the log
// that feeds /api/updates.
//
// Edit command:
//   {"type": "set_cell", "expected_version": 3, "command_id": "c7",
//    "table": "Invoices", "row": 5, "field": "Quantity", "value": 4}
// Other types: insert_row (table, parent, index?, cells?), delete_row
// (table, row), add_field (table, name, level, kind, formula?, format?),
// set_formula (table, field, formula), declare_borrow (table, name, level,
// source), declare_link (local, foreign). `value` takes the JSON cell
// encoding; `literal` instead takes text typed by a user.
//
// Patch:
//   {"version", "command_id", "fields", "links", "rows_deleted",
//    "rows_inserted", "child_orders", "cells"}
// Replaying patches in order onto a table view reproduces the live view:
// drop deleted rows, add inserted rows, apply child orders, then cells.

#include "strata/model.hpp"

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace strata {

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

/// Table structure, rows in document order with ids, rendered values and
/// link valid-value lists.
nlohmann::json table_view(const Workbook& wb, const Table& table);

/// Differences between two lists of table views, as a patch body without
/// version or command id.
nlohmann::json diff_views(const nlohmann::json& before, const nlohmann::json& after);

class WorkbookService {
 public:
  /// `file`, when given, is rewritten after every successful edit.
  explicit WorkbookService(Workbook wb, std::optional<std::filesystem::path> file = std::nullopt);

  [[nodiscard]] std::uint64_t version() const;
  [[nodiscard]] nlohmann::json workbook_view() const;
  [[nodiscard]] ServiceResponse table(const std::string& name) const;
  ServiceResponse edit(const nlohmann::json& command);
  /// Parses the body first; malformed JSON is a 400.
  ServiceResponse edit_text(const std::string& body);

  /// Patches with version greater than `version`, oldest first.
  [[nodiscard]] std::vector<nlohmann::json> patches_since(std::uint64_t version) const;
  /// Like patches_since, but waits up to `timeout` for one to arrive.
  std::vector<nlohmann::json> wait_for_patches(std::uint64_t version, std::chrono::milliseconds timeout) const;

  /// Wakes every waiter; later waits return immediately.
  void stop();
  [[nodiscard]] bool stopped() const;

  /// Copy of the live workbook.
  [[nodiscard]] Workbook snapshot() const;

 private:
  mutable std::shared_mutex mutex_;
  Workbook wb_;
  std::optional<std::filesystem::path> file_;
  std::uint64_t version_ = 0;
  /// Table views of wb_, refreshed after each edit.
  nlohmann::json views_;

  mutable std::mutex log_mutex_;
  mutable std::condition_variable log_cv_;
  std::vector<nlohmann::json> log_;
  bool stopped_ = false;
};

/// cpp-httplib front end for a WorkbookService.
class HttpServer {
 public:
  explicit HttpServer(WorkbookService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws
  /// std::runtime_error when the address is unavailable.
  int bind(const std::string& host, int port);
  /// Serves until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Loads `file` and serves it until SIGINT or SIGTERM.
void serve(const std::filesystem::path& file, const ServeOptions& options, std::ostream& log);

}  // namespace strata
