#pragma once

// Workbooks built from the pet-shop and invoice examples.

#include "strata/eval.hpp"
#include "strata/model.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace strata {

// Readable gtest failure messages.
inline void PrintTo(const Value& v, std::ostream* os) { *os << v.type_name() << " " << v.to_string(); }
inline void PrintTo(const RowId& r, std::ostream* os) { *os << "row " << r.value; }

}  // namespace strata

namespace strata::fixtures {

struct Sale {
  int year;
  std::string month;
  std::string code;
  std::string total;
};

/// 2009 sales, January through August. Months are grouped so that each
/// month's rows add up to the monthly total printed beside it.
///
/// January   9445.04 + 4497.39             = 13942.43
/// February  530.79 + 9152.93 + 3556.43    = 13240.15 (printed 13240.16)
/// March     2190.53 + 4321.37 + 9724.86   = 16236.76
/// April     2155.37 + 7569.59 + 5523.38   = 15248.34
/// May       988.73 + 6513.58              = 7502.31
/// June      1848.78 + 6416.97             = 8265.75
/// July      9306.08 + 3483.43 + 6200.95   = 18990.46
/// August    446.73 + 11186.05             = 11632.78
const std::vector<Sale>& sales_2009();

/// Extra years for borrow tests; no wide mouthed frogs in 2011.
const std::vector<Sale>& sales_2010_2011();

/// CSV text with header Year,Month,Sales Code,Total.
std::string sales_csv(const std::vector<Sale>& sales);

/// "Sales": Year > Month > Sale, with Total (data, currency-2dp),
/// Monthly Total and Yearly Total (both =SUM(Total)).
Workbook pet_shop(const std::vector<Sale>& sales = sales_2009());

/// Adds "Sales Summary": Sales Code > Year, both borrowed from Sales, with
/// Total =SUM(Sales!Total) at the Year level.
void add_sales_summary(Workbook& wb);

/// Animals price list and two invoices linked through Item -> Animal.
///
/// Prices are back-solved from the invoice lines: Net = Quantity * Price
/// and VAT = Net * VAT Rate.
///   Goldfish           1 x 1 = 1,   1 * 0.1 = 0.1   -> price 1, rate 0.1
///   Rodents            4 x 3 = 12,  12 * 0.1 = 1.2  -> price 3, rate 0.1
///   Wide mouthed frog  3 x 5 = 15,  15 * 0.2 = 3    -> price 5, rate 0.2
/// Invoice 10001: Goldfish x1 (1.10) + Rodents x4 (13.20)              = 14.30
/// Invoice 10002: Wide mouthed frog x3 (18.00) + Goldfish x2 (2.20)
///                + Rodents x5 (16.50)                                  = 36.70
Workbook invoices();

/// First row at `level` whose inherited values match all (field, value) pairs.
RowId find_row(const Workbook& wb, const std::string& table, int level,
               const std::vector<std::pair<std::string, Value>>& where);

}  // namespace strata::fixtures
