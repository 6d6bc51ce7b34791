#pragma once

#include <compare>
#include <string>
#include <vector>

namespace strata {

/// Table-qualified field name.
struct FieldRef {
  std::string table;
  std::string field;

  friend auto operator<=>(const FieldRef&, const FieldRef&) = default;
  friend bool operator==(const FieldRef&, const FieldRef&) = default;

  [[nodiscard]] std::string to_string() const { return table + "." + field; }
};

/// A borrowed field pulls the distinct values of `source` into `target`.
struct BorrowSpec {
  FieldRef target;
  FieldRef source;
  friend bool operator==(const BorrowSpec&, const BorrowSpec&) = default;
};

/// Lookups from `local`'s table into `foreign`'s table only see rows whose
/// foreign value equals the local value.
struct LinkSpec {
  FieldRef local;
  FieldRef foreign;
  friend bool operator==(const LinkSpec&, const LinkSpec&) = default;
};

struct RelationSet {
  std::vector<BorrowSpec> borrows;
  std::vector<LinkSpec> links;
};

}  // namespace strata
