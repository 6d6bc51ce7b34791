#pragma once

// Workbook persistence (.mtab) and CSV exchange.
//
// A .mtab file is UTF-8 JSON with sorted keys, two-space indentation and
// LF line endings. Only inputs are stored: data cells and the values of
// borrowed rows. Formula results are recomputed on load.

#include "strata/eval.hpp"
#include "strata/model.hpp"
#include "strata/relations.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace strata {

inline constexpr std::string_view kDocumentFormat = "strata-workbook";
inline constexpr int kDocumentVersion = 1;

/// Malformed document, invariant violation, or I/O failure. Invariant
/// violations start with the invariant's name, e.g. "duplicate-field-name".
class DocumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Canonical document text.
std::string to_document(const Workbook& wb);

struct LoadResult {
  Workbook workbook;
  /// Borrowed rows the final sync had to insert or delete.
  RowDiff repairs;
};

/// Parses, validates, registers relations, synchronizes borrows and runs a
/// full recalculation.
LoadResult from_document(std::string_view text);

/// Writes the canonical document; returns the byte count.
std::size_t save(const Workbook& wb, const std::filesystem::path& destination);
LoadResult load(const std::filesystem::path& source);

// ------------------------------------------------------------------ CSV

using CsvRecord = std::vector<std::string>;

/// RFC 4180 reader. Accepts LF or CRLF record separators and a UTF-8 BOM.
/// Throws DocumentError on an unterminated quoted field.
std::vector<CsvRecord> parse_csv(std::string_view text);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);
std::string format_csv(const std::vector<CsvRecord>& records);

struct CsvImportOptions {
  /// Always create a new row at the deepest mapped level instead of
  /// matching an existing one with equal values.
  bool append_leaves = false;
};

/// Maps header names to fields and files each record into the hierarchy,
/// reusing rows whose level values already match. Returns rows inserted.
std::size_t import_csv(Workbook& wb, const std::string& table, std::string_view csv,
                       const CsvImportOptions& options = {});

/// One record per row at `level` (default deepest), ancestor fields
/// repeated, values rendered with each field's display format.
std::string export_csv(Workbook& wb, const std::string& table, std::optional<int> level = std::nullopt);

}  // namespace strata
