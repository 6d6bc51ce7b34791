#include "fixtures.hpp"

#include "strata/io.hpp"
#include "strata/relations.hpp"

#include <stdexcept>

namespace strata::fixtures {

const std::vector<Sale>& sales_2009() {
  static const std::vector<Sale> rows = {
      {2009, "January", "Goldfish", "9445.04"},
      {2009, "January", "Rodents", "4497.39"},
      {2009, "February", "Goldfish", "530.79"},
      {2009, "February", "Rodents", "9152.93"},
      {2009, "February", "Wide mouthed frogs", "3556.43"},
      {2009, "March", "Goldfish", "2190.53"},
      {2009, "March", "Rodents", "4321.37"},
      {2009, "March", "Wide mouthed frogs", "9724.86"},
      {2009, "April", "Goldfish", "2155.37"},
      {2009, "April", "Rodents", "7569.59"},
      {2009, "April", "Wide mouthed frogs", "5523.38"},
      {2009, "May", "Goldfish", "988.73"},
      {2009, "May", "Rodents", "6513.58"},
      {2009, "June", "Goldfish", "1848.78"},
      {2009, "June", "Rodents", "6416.97"},
      {2009, "July", "Goldfish", "9306.08"},
      {2009, "July", "Rodents", "3483.43"},
      {2009, "July", "Wide mouthed frogs", "6200.95"},
      {2009, "August", "Goldfish", "446.73"},
      {2009, "August", "Rodents", "11186.05"},
  };
  return rows;
}

const std::vector<Sale>& sales_2010_2011() {
  static const std::vector<Sale> rows = [] {
    std::vector<Sale> all = sales_2009();
    const std::vector<Sale> extra = {
        {2010, "January", "Goldfish", "1200.00"},
        {2010, "January", "Wide mouthed frogs", "310.50"},
        {2010, "March", "Rodents", "845.25"},
        {2011, "February", "Goldfish", "99.99"},
        {2011, "February", "Rodents", "150.01"},
    };
    all.insert(all.end(), extra.begin(), extra.end());
    return all;
  }();
  return rows;
}

std::string sales_csv(const std::vector<Sale>& sales) {
  std::vector<CsvRecord> records{{"Year", "Month", "Sales Code", "Total"}};
  for (const auto& s : sales) records.push_back({std::to_string(s.year), s.month, s.code, s.total});
  return format_csv(records);
}

Workbook pet_shop(const std::vector<Sale>& sales) {
  Workbook wb("Pet shop");
  wb.add_table("Sales", {"Year", "Month", "Sale"});
  wb.add_field("Sales", {"Year", 0, FieldKind::Data, {}, {}, {}});
  wb.add_field("Sales", {"Yearly Total", 0, FieldKind::Formula, "=SUM(Total)", {}, "currency-2dp"});
  wb.add_field("Sales", {"Month", 1, FieldKind::Data, {}, {}, {}});
  wb.add_field("Sales", {"Monthly Total", 1, FieldKind::Formula, "=SUM(Total)", {}, "currency-2dp"});
  wb.add_field("Sales", {"Sales Code", 2, FieldKind::Data, {}, {}, {}});
  wb.add_field("Sales", {"Total", 2, FieldKind::Data, {}, {}, "currency-2dp"});
  import_csv(wb, "Sales", sales_csv(sales), CsvImportOptions{true});
  recalculate(wb);
  return wb;
}

void add_sales_summary(Workbook& wb) {
  wb.add_table("Sales Summary", {"Sales Code", "Year"});
  wb.add_field("Sales Summary",
               {"Sales Code", 0, FieldKind::Borrowed, {}, FieldRef{"Sales", "Sales Code"}, {}});
  wb.add_field("Sales Summary", {"Year", 1, FieldKind::Borrowed, {}, FieldRef{"Sales", "Year"}, {}});
  wb.add_field("Sales Summary",
               {"Total", 1, FieldKind::Formula, "=SUM(Sales!Total)", {}, "currency-2dp"});
  recalculate(wb);
}

Workbook invoices() {
  Workbook wb("Invoicing");
  wb.add_table("Animals", {"Animal"});
  wb.add_field("Animals", {"Animal", 0, FieldKind::Data, {}, {}, {}});
  wb.add_field("Animals", {"Price", 0, FieldKind::Data, {}, {}, "currency-2dp"});
  wb.add_field("Animals", {"VAT Rate", 0, FieldKind::Data, {}, {}, "percent-0dp"});
  import_csv(wb, "Animals",
             "Animal,Price,VAT Rate\n"
             "Goldfish,1,0.1\n"
             "Rodents,3,0.1\n"
             "Wide mouthed frog,5,0.2\n");

  wb.add_table("Invoices", {"Invoice", "Line"});
  wb.add_field("Invoices", {"Invoice No", 0, FieldKind::Data, {}, {}, {}});
  wb.add_field("Invoices", {"Customer", 0, FieldKind::Data, {}, {}, {}});
  wb.add_field("Invoices", {"Total", 0, FieldKind::Formula, "=SUM([Net + VAT])", {}, "currency-2dp"});
  wb.add_field("Invoices", {"Item", 1, FieldKind::Data, {}, {}, {}});
  wb.add_field("Invoices", {"Quantity", 1, FieldKind::Data, {}, {}, {}});
  wb.add_field("Invoices", {"Net", 1, FieldKind::Formula, "=Quantity*Animals!Price", {}, {}});
  wb.add_field("Invoices", {"VAT", 1, FieldKind::Formula, "=Net*Animals![VAT Rate]", {}, {}});
  wb.add_field("Invoices", {"Net + VAT", 1, FieldKind::Formula, "=Net+VAT", {}, "currency-2dp"});
  declare_link(wb, {"Invoices", "Item"}, {"Animals", "Animal"});
  import_csv(wb, "Invoices",
             "Invoice No,Customer,Item,Quantity\n"
             "10001,Ted Hawkins,Goldfish,1\n"
             "10001,Ted Hawkins,Rodents,4\n"
             "10002,Andrew Lemon,Wide mouthed frog,3\n"
             "10002,Andrew Lemon,Goldfish,2\n"
             "10002,Andrew Lemon,Rodents,5\n");
  recalculate(wb);
  return wb;
}

RowId find_row(const Workbook& wb, const std::string& table, int level,
               const std::vector<std::pair<std::string, Value>>& where) {
  const Table& t = wb.table(table);
  for (RowId r : t.rows_at_level(level)) {
    bool ok = true;
    for (const auto& [field, value] : where) {
      if (!(t.inherited_cell(r, field) == value)) {
        ok = false;
        break;
      }
    }
    if (ok) return r;
  }
  throw std::runtime_error("fixture row not found in " + table);
}

}  // namespace strata::fixtures
