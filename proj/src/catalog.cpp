// Copyright 2026 The epochwatt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "epochwatt/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "csv.hpp"
#include "epochwatt/error.hpp"

namespace epochwatt {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::not_found, "cannot open file", path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void expect_header(const std::vector<std::string>& got,
                   const std::vector<std::string_view>& want,
                   std::size_t line_no) {
  bool ok = got.size() == want.size();
  for (std::size_t i = 0; ok && i < want.size(); ++i) {
    ok = lower(got[i]) == want[i];
  }
  if (!ok) {
    std::string expected;
    for (auto w : want) expected += (expected.empty() ? "" : ",") + std::string(w);
    throw Error(ErrorCode::validation_error, "unexpected header row",
                "line " + std::to_string(line_no) + ": expected " + expected);
  }
}

[[noreturn]] void row_error(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::validation_error, "invalid row",
              "line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::string canonical_name(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : detail::trim(name)) {
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

const HardwareCatalogEntry* HardwareCatalog::find(
    std::string_view name) const noexcept {
  const auto it = entries_.find(canonical_name(name));
  return it == entries_.end() ? nullptr : &it->second;
}

const HardwareCatalogEntry& HardwareCatalog::lookup(
    std::string_view name) const {
  if (const auto* entry = find(name)) return *entry;
  throw Error(ErrorCode::unknown_hardware, "unknown hardware",
              std::string(name), suggestions(name));
}

std::vector<std::string> HardwareCatalog::suggestions(
    std::string_view name, std::size_t limit) const {
  const std::string query = canonical_name(name);
  if (query.empty()) return {};
  std::vector<std::pair<std::size_t, const HardwareCatalogEntry*>> hits;
  for (const auto& [key, entry] : entries_) {
    if (key.find(query) != std::string::npos ||
        query.find(key) != std::string::npos) {
      const auto distance = key.size() > query.size()
                                ? key.size() - query.size()
                                : query.size() - key.size();
      hits.emplace_back(distance, &entry);
    }
  }
  std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return a.first < b.first;
  });
  std::vector<std::string> out;
  for (const auto& [distance, entry] : hits) {
    if (out.size() == limit) break;
    out.push_back(entry->name);
  }
  return out;
}

std::vector<HardwareCatalogEntry> HardwareCatalog::entries() const {
  std::vector<HardwareCatalogEntry> out;
  out.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) out.push_back(entry);
  return out;
}

HardwareCatalog load_hardware_catalog(std::string_view csv) {
  HardwareCatalog catalog;
  const auto lines = detail::csv_lines(csv);
  if (lines.empty()) return catalog;
  expect_header(detail::split_csv_line(lines.front().second),
                {"name", "kind", "power_draw_w", "flops"}, lines.front().first);

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line_no, line] = lines[i];
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 4) {
      row_error(line_no, "expected 4 fields, found " +
                             std::to_string(fields.size()));
    }
    HardwareCatalogEntry entry;
    entry.name = canonical_name(fields[0]).empty() ? "" : fields[0];
    if (entry.name.empty()) row_error(line_no, "empty device name");
    const auto kind = lower(fields[1]);
    if (kind == "cpu") {
      entry.kind = DeviceKind::cpu;
    } else if (kind == "gpu") {
      entry.kind = DeviceKind::gpu;
    } else {
      row_error(line_no, "kind must be cpu or gpu, got '" + fields[1] + "'");
    }
    const auto power = detail::parse_double(fields[2]);
    if (!power || *power <= 0.0) {
      row_error(line_no, "power_draw_w must be a positive number, got '" +
                             fields[2] + "'");
    }
    const auto flops = detail::parse_double(fields[3]);
    if (!flops || *flops <= 0.0) {
      row_error(line_no,
                "flops must be a positive number, got '" + fields[3] + "'");
    }
    entry.power_draw = *power;
    entry.flops = *flops;

    auto key = canonical_name(entry.name);
    if (catalog.entries_.count(key)) {
      catalog.warnings_.push_back("line " + std::to_string(line_no) +
                                  ": duplicate device '" + entry.name +
                                  "' replaces earlier row");
    }
    catalog.entries_[std::move(key)] = std::move(entry);
  }
  return catalog;
}

HardwareCatalog load_hardware_catalog_file(const std::filesystem::path& path) {
  return load_hardware_catalog(read_file(path));
}

std::string to_csv(const HardwareCatalog& catalog) {
  std::string out = "name,kind,power_draw_w,flops\n";
  for (const auto& e : catalog.entries()) {
    out += detail::quote_csv_field(e.name) + ',' + std::string(to_string(e.kind)) +
           ',' + detail::format_double(e.power_draw) + ',' +
           detail::format_double(e.flops) + '\n';
  }
  return out;
}

const std::vector<std::string>& us_region_codes() {
  static const std::vector<std::string> codes = {
      "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DC", "DE", "FL", "GA",
      "HI", "IA", "ID", "IL", "IN", "KS", "KY", "LA", "MA", "MD", "ME",
      "MI", "MN", "MO", "MS", "MT", "NC", "ND", "NE", "NH", "NJ", "NM",
      "NV", "NY", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX",
      "UT", "VA", "VT", "WA", "WI", "WV", "WY"};
  return codes;
}

bool IntensityTable::contains(std::string_view region_code) const noexcept {
  std::string key(detail::trim(region_code));
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return rows_.count(key) != 0;
}

double IntensityTable::intensity(std::string_view region_code) const {
  std::string key(detail::trim(region_code));
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (const auto it = rows_.find(key); it != rows_.end()) return it->second;

  std::vector<std::string> near;
  for (const auto& [code, value] : rows_) {
    if (near.size() == 5) break;
    if (!key.empty() && code.front() == key.front()) near.push_back(code);
  }
  throw Error(ErrorCode::unknown_region, "unknown region",
              std::string(region_code), std::move(near));
}

std::vector<RegionIntensity> IntensityTable::rows() const {
  std::vector<RegionIntensity> out;
  out.reserve(rows_.size());
  for (const auto& [code, value] : rows_) out.push_back({code, value});
  return out;
}

IntensityTable load_intensity_table(std::string_view csv, std::string vintage) {
  IntensityTable table;
  table.vintage_ = std::move(vintage);
  const auto lines = detail::csv_lines(csv);
  if (!lines.empty()) {
    expect_header(detail::split_csv_line(lines.front().second),
                  {"region_code", "intensity_lbs_per_kwh"},
                  lines.front().first);
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line_no, line] = lines[i];
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 2) {
      row_error(line_no, "expected 2 fields, found " +
                             std::to_string(fields.size()));
    }
    std::string code = fields[0];
    std::transform(code.begin(), code.end(), code.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    const bool code_ok =
        code.size() >= 2 && code.size() <= 16 &&
        std::all_of(code.begin(), code.end(), [](unsigned char c) {
          return std::isalnum(c) || c == '-';
        });
    if (!code_ok) row_error(line_no, "invalid region code '" + fields[0] + "'");
    const auto value = detail::parse_double(fields[1]);
    if (!value || *value < 0.0) {
      row_error(line_no, "intensity must be a non-negative number, got '" +
                             fields[1] + "'");
    }
    if (!table.rows_.emplace(code, *value).second) {
      row_error(line_no, "duplicate region '" + code + "'");
    }
  }
  for (const auto& code : us_region_codes()) {
    if (!table.rows_.count(code)) table.gaps_.push_back(code);
  }
  return table;
}

IntensityTable load_intensity_table_file(const std::filesystem::path& path,
                                         std::string vintage) {
  if (vintage.empty()) vintage = path.filename().string();
  return load_intensity_table(read_file(path), std::move(vintage));
}

std::string to_csv(const IntensityTable& table) {
  std::string out = "region_code,intensity_lbs_per_kwh\n";
  for (const auto& row : table.rows()) {
    out += row.region_code + ',' + detail::format_double(row.intensity) + '\n';
  }
  return out;
}

}  // namespace epochwatt
