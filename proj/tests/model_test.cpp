#include "fixtures.hpp"
#include "oracles.hpp"

#include "strata/model.hpp"
#include "strata/relations.hpp"

#include <gtest/gtest.h>

using namespace strata;
namespace fx = strata::fixtures;

namespace {

Value num(const char* s) { return Value(*Number::parse(s)); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const EngineError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no EngineError thrown";
  return ErrorCode::Parse;
}

}  // namespace

TEST(AddTable, ValidatesNamesAndLevels) {
  Workbook wb;
  EXPECT_EQ(wb.add_table("Sales", {"Year", "Month", "Sale"}).depth(), 3);
  EXPECT_EQ(wb.add_table("Animals", {"Animal"}).depth(), 1);
  EXPECT_THROW(wb.add_table("T", {}), EngineError);
  EXPECT_THROW(wb.add_table("Sales", {"x"}), EngineError);
  EXPECT_THROW(wb.add_table("U", {"a", "a"}), EngineError);
  EXPECT_THROW(wb.add_table("V", {"a", ""}), EngineError);
  EXPECT_THROW(wb.add_table("", {"a"}), EngineError);
  EXPECT_THROW(wb.add_table("W[1]", {"a"}), EngineError);
  EXPECT_NO_THROW(wb.add_table("sales", {"a"}));  // case-sensitive
}

TEST(AddField, ValidatesKindOptionsAndLevel) {
  Workbook wb;
  wb.add_table("Sales", {"Year", "Month", "Sale"});
  wb.add_field("Sales", {"Total", 2, FieldKind::Data, {}, {}, {}});
  EXPECT_THROW(wb.add_field("Sales", {"X", 5, FieldKind::Data, {}, {}, {}}), EngineError);
  EXPECT_THROW(wb.add_field("Sales", {"X", -1, FieldKind::Data, {}, {}, {}}), EngineError);
  EXPECT_THROW(wb.add_field("Sales", {"Total", 1, FieldKind::Data, {}, {}, {}}), EngineError);
  EXPECT_THROW(wb.add_field("Sales", {"F", 1, FieldKind::Formula, {}, {}, {}}), EngineError);
  EXPECT_THROW(wb.add_field("Sales", {"D", 1, FieldKind::Data, "=1", {}, {}}), EngineError);
  EXPECT_THROW(wb.add_field("Sales", {"D", 1, FieldKind::Data, {}, FieldRef{"Sales", "Total"}, {}}),
               EngineError);
  EXPECT_THROW(wb.add_field("Sales", {"D", 1, FieldKind::Data, {}, {}, "currency"}), EngineError);
  EXPECT_THROW(wb.add_field("Sales", {"B", 0, FieldKind::Borrowed, {}, {}, {}}), EngineError);
  EXPECT_EQ(code_of([&] {
              wb.add_table("S2", {"Code"});
              wb.add_field("S2", {"Code", 0, FieldKind::Borrowed, {}, FieldRef{"Sales", "Nope"}, {}});
            }),
            ErrorCode::Ref);
  EXPECT_EQ(wb.table("S2").fields().size(), 0u);
  EXPECT_THROW(wb.add_field("Missing", {"X", 0, FieldKind::Data, {}, {}, {}}), EngineError);
}

TEST(AddField, ParseFailureStoresFieldWithParseErrors) {
  Workbook wb = fx::pet_shop();
  const Field& f = wb.add_field("Sales", {"Broken", 1, FieldKind::Formula, "=SUM(A1:B2;A12:B13)", {}, {}});
  EXPECT_FALSE(f.formula);
  EXPECT_FALSE(f.parse_error.empty());
  const RowId jan = fx::find_row(wb, "Sales", 1, {{"Month", "January"}});
  EXPECT_EQ(wb.get_cell("Sales", jan, "Broken"), Value(ErrorCode::Parse));
  // Other cells are unaffected.
  EXPECT_EQ(wb.get_cell("Sales", jan, "Monthly Total"), num("13942.43"));
}

TEST(GetCell, PetShopJanuaryMonthlyTotal) {
  Workbook wb = fx::pet_shop();
  const RowId jan = fx::find_row(wb, "Sales", 1, {{"Year", Number(2009)}, {"Month", "January"}});
  const Value v = wb.get_cell("Sales", jan, "Monthly Total");
  EXPECT_EQ(v, num("13942.43"));
  EXPECT_EQ(wb.table("Sales").find_field("Monthly Total")->format.render(v), "£13,942.43");
}

TEST(GetCell, MonthlyTotalsMatchRowSums) {
  Workbook wb = fx::pet_shop();
  const std::vector<std::pair<const char*, const char*>> expected = {
      {"January", "13942.43"}, {"February", "13240.15"}, {"March", "16236.76"}, {"April", "15248.34"},
      {"May", "7502.31"},      {"June", "8265.75"},      {"July", "18990.46"},  {"August", "11632.78"}};
  for (const auto& [month, total] : expected) {
    const RowId r = fx::find_row(wb, "Sales", 1, {{"Month", month}});
    EXPECT_EQ(wb.get_cell("Sales", r, "Monthly Total"), num(total)) << month;
  }
  // 13942.43+13240.15+16236.76+15248.34+7502.31+8265.75+18990.46+11632.78
  const RowId y = fx::find_row(wb, "Sales", 0, {{"Year", Number(2009)}});
  EXPECT_EQ(wb.get_cell("Sales", y, "Yearly Total"), num("105058.98"));
}

TEST(GetCell, BadAddressIsRef) {
  Workbook wb = fx::pet_shop();
  EXPECT_EQ(wb.get_cell("Nope", RowId{1}, "Total"), Value(ErrorCode::Ref));
  EXPECT_EQ(wb.get_cell("Sales", RowId{999999}, "Total"), Value(ErrorCode::Ref));
  const RowId jan = fx::find_row(wb, "Sales", 1, {{"Month", "January"}});
  EXPECT_EQ(wb.get_cell("Sales", jan, "Nope"), Value(ErrorCode::Ref));
  EXPECT_EQ(wb.get_cell("Sales", jan, "Total"), Value(ErrorCode::Ref));  // level mismatch
}

TEST(InsertRow, NewSaleIsIncludedInTotals) {
  Workbook wb = fx::pet_shop();
  const RowId feb = fx::find_row(wb, "Sales", 1, {{"Month", "February"}});
  const RowId sale = wb.insert_row("Sales", feb);
  EXPECT_TRUE(wb.get_cell("Sales", sale, "Total").is_empty());
  wb.set_cell("Sales", sale, "Total", num("100"));
  EXPECT_EQ(wb.get_cell("Sales", feb, "Monthly Total"), num("13340.15"));
}

TEST(InsertRow, Validation) {
  Workbook wb = fx::pet_shop();
  const RowId jan = fx::find_row(wb, "Sales", 1, {{"Month", "January"}});
  const RowId sale = wb.table("Sales").children_of(jan).front();
  EXPECT_THROW(wb.insert_row("Sales", sale), EngineError);  // below the deepest level
  EXPECT_THROW(wb.insert_row("Sales", RowId{424242}), EngineError);
  const RowId at0 = wb.insert_row("Sales", jan, 0);
  EXPECT_EQ(wb.table("Sales").children_of(jan).front(), at0);
  EXPECT_THROW(wb.insert_row("Sales", jan, 99), EngineError);

  fx::add_sales_summary(wb);
  EXPECT_THROW(wb.insert_row("Sales Summary", kRoot), EngineError);
  EXPECT_EQ(oracle::actual_borrow_paths(wb, "Sales Summary"),
            oracle::expected_borrow_paths(wb, "Sales Summary"));
}

TEST(DeleteRow, SaleYearAndLeaf) {
  Workbook wb = fx::pet_shop();
  const RowId jan = fx::find_row(wb, "Sales", 1, {{"Month", "January"}});
  const RowId goldfish = fx::find_row(wb, "Sales", 2, {{"Month", "January"}, {"Sales Code", "Goldfish"}});
  EXPECT_EQ(wb.delete_row("Sales", goldfish), 1u);
  EXPECT_EQ(wb.get_cell("Sales", jan, "Monthly Total"), num("4497.39"));

  const RowId year = fx::find_row(wb, "Sales", 0, {{"Year", Number(2009)}});
  const std::size_t expected = oracle::subtree_size(wb.table("Sales"), year);
  EXPECT_EQ(wb.delete_row("Sales", year), expected);
  EXPECT_EQ(wb.table("Sales").row_count(), 0u);
  EXPECT_THROW(wb.delete_row("Sales", year), EngineError);
}

TEST(DeleteRow, BorrowedLevelRejected) {
  Workbook wb = fx::pet_shop();
  fx::add_sales_summary(wb);
  const RowId code = wb.table("Sales Summary").children_of(kRoot).front();
  EXPECT_THROW(wb.delete_row("Sales Summary", code), EngineError);
}

TEST(SetCell, MachineOwnedCellsAreNeverWritable) {
  Workbook wb = fx::pet_shop();
  fx::add_sales_summary(wb);
  std::size_t attempts = 0;
  for (const auto& t : wb.tables()) {
    t.walk([&](const RowNode& n) {
      for (const Field* f : t.fields_at(n.level)) {
        if (f->kind == FieldKind::Data) continue;
        const Value before = wb.peek_cell(t.name(), n.id, f->name);
        const auto version = wb.version();
        EXPECT_THROW(wb.set_cell(t.name(), n.id, f->name, Value(Number(1))), EngineError);
        EXPECT_EQ(wb.peek_cell(t.name(), n.id, f->name), before);
        EXPECT_EQ(wb.version(), version);
        ++attempts;
      }
    });
  }
  EXPECT_GT(attempts, 10u);
}

TEST(SetCell, LevelMismatchAndErrorsRejected) {
  Workbook wb = fx::pet_shop();
  const RowId jan = fx::find_row(wb, "Sales", 1, {{"Month", "January"}});
  EXPECT_THROW(wb.set_cell("Sales", jan, "Total", num("1")), EngineError);
  EXPECT_THROW(wb.set_cell("Sales", jan, "Month", Value(ErrorCode::Div0)), EngineError);
  EXPECT_THROW(wb.set_cell("Sales", jan, "Nope", num("1")), EngineError);
}

TEST(SetCell, EmptyIsExcludedFromAggregates) {
  Workbook wb = fx::pet_shop();
  const RowId jan = fx::find_row(wb, "Sales", 1, {{"Month", "January"}});
  const RowId goldfish = fx::find_row(wb, "Sales", 2, {{"Month", "January"}, {"Sales Code", "Goldfish"}});
  wb.set_cell("Sales", goldfish, "Total", Empty{});
  EXPECT_EQ(wb.get_cell("Sales", jan, "Monthly Total"), num("4497.39"));
  EXPECT_TRUE(wb.table("Sales").row(goldfish).cells.count("Total") == 0);
}

TEST(SetCell, UnmatchedLinkValueIsStoredAndFlagged) {
  Workbook wb = fx::invoices();
  const RowId line = fx::find_row(wb, "Invoices", 1, {{"Invoice No", Number(10001)}, {"Item", "Goldfish"}});
  EXPECT_EQ(wb.set_cell("Invoices", line, "Item", "Unicorn"), SetCellOutcome::Unmatched);
  EXPECT_EQ(wb.peek_cell("Invoices", line, "Item"), Value("Unicorn"));
  EXPECT_TRUE(is_unmatched(wb, "Invoices", line, "Item"));
  EXPECT_EQ(wb.get_cell("Invoices", line, "Net"), Value(ErrorCode::NoMatch));
  // Oracle: no Animals row carries the value.
  for (RowId r : wb.table("Animals").rows_at_level(0)) {
    EXPECT_NE(wb.table("Animals").cell(r, "Animal"), Value("Unicorn"));
  }
  EXPECT_EQ(wb.set_cell("Invoices", line, "Item", "Rodents"), SetCellOutcome::Accepted);
  EXPECT_FALSE(is_unmatched(wb, "Invoices", line, "Item"));
}

TEST(Version, StrictlyIncreasesOnEverySuccessfulMutation) {
  Workbook wb;
  auto last = wb.version();
  auto bumped = [&] {
    EXPECT_GT(wb.version(), last);
    last = wb.version();
  };
  wb.add_table("T", {"A", "B"});
  bumped();
  wb.add_field("T", {"a", 0, FieldKind::Data, {}, {}, {}});
  bumped();
  wb.add_field("T", {"b", 1, FieldKind::Data, {}, {}, {}});
  bumped();
  wb.add_field("T", {"s", 0, FieldKind::Formula, "=SUM(b)", {}, {}});
  bumped();
  const RowId r = wb.insert_row("T", kRoot);
  bumped();
  const RowId c = wb.insert_row("T", r);
  bumped();
  wb.set_cell("T", c, "b", num("2"));
  bumped();
  wb.set_formula("T", "s", "=SUM(b)*2");
  bumped();
  wb.delete_row("T", c);
  bumped();
  EXPECT_THROW(wb.delete_row("T", c), EngineError);
  EXPECT_EQ(wb.version(), last);
}

TEST(TreeIntegrity, HoldsAfterRandomEdits) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    Workbook wb = oracle::random_workbook(rng);
    for (int step = 0; step < 25; ++step) {
      oracle::random_edit(wb, rng);
      recalculate(wb);
      for (const auto& t : wb.tables()) {
        const std::string problem = oracle::check_tree(t);
        ASSERT_TRUE(problem.empty()) << t.name() << ": " << problem;
      }
    }
  }
}

TEST(Table, AncestorsAndDescendants) {
  Workbook wb = fx::pet_shop();
  const Table& t = wb.table("Sales");
  const RowId jan = fx::find_row(wb, "Sales", 1, {{"Month", "January"}});
  const auto sales = t.descendants_at(jan, 2);
  ASSERT_EQ(sales.size(), 2u);
  EXPECT_EQ(t.ancestor_at(sales[0], 1), jan);
  EXPECT_EQ(t.inherited_cell(sales[1], "Month"), Value("January"));
  EXPECT_EQ(t.inherited_cell(sales[1], "Year"), Value(Number(2009)));
  EXPECT_TRUE(t.inherited_cell(jan, "Total").is_empty());
  EXPECT_EQ(t.descendants_at(kRoot, 2).size(), fx::sales_2009().size());
  EXPECT_EQ(t.level_of(kRoot), -1);
}
