#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>

#include "hympi/bench.hpp"

namespace hympi::chart {

struct ChartOptions {
  int width = 720;
  int height = 440;
  std::string title;
};

// SVG line chart of y against x, one polyline per distinct value of the
// series column (in order of first appearance). `series` may join several
// columns with '+', e.g. "scheme+ppn_list". The x axis turns log2 when
// every x is positive and the values span at least a factor of 16. Rows with
// non-numeric or non-finite x/y are skipped. Throws UsageError for an unknown
// column. Output depends only on the inputs.
void emit_chart(const bench::Table& table, std::string_view x, std::string_view y,
                std::string_view series, std::ostream& out, const ChartOptions& opts = {});
void emit_chart(const bench::Table& table, std::string_view x, std::string_view y,
                std::string_view series, const std::filesystem::path& path,
                const ChartOptions& opts = {});

}  // namespace hympi::chart
