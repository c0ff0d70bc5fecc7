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

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "epochwatt/types.hpp"

namespace epochwatt {

/// Lowercase + whitespace collapse + trim. The only normalization applied
/// to device names.
std::string canonical_name(std::string_view name);

/// Hardware power/FLOPS table, keyed by canonical name. Immutable once
/// loaded.
class HardwareCatalog {
 public:
  HardwareCatalog() = default;

  /// Throws Error{unknown_hardware} carrying up to five suggestions.
  const HardwareCatalogEntry& lookup(std::string_view name) const;
  const HardwareCatalogEntry* find(std::string_view name) const noexcept;

  /// Up to `limit` entry names whose canonical form contains the canonical
  /// query (or is contained in it), closest length first.
  std::vector<std::string> suggestions(std::string_view name,
                                       std::size_t limit = 5) const;

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  /// Entries in canonical-name order.
  std::vector<HardwareCatalogEntry> entries() const;
  /// Duplicate-name notices produced while loading.
  const std::vector<std::string>& warnings() const noexcept {
    return warnings_;
  }

  bool operator==(const HardwareCatalog& other) const {
    return entries_ == other.entries_;
  }

 private:
  friend HardwareCatalog load_hardware_catalog(std::string_view);
  std::map<std::string, HardwareCatalogEntry> entries_;
  std::vector<std::string> warnings_;
};

/// Parses `name,kind,power_draw_w,flops` CSV with one header row. Later
/// duplicates replace earlier ones and add a warning. Invalid rows throw
/// Error{validation_error} naming the 1-based line.
HardwareCatalog load_hardware_catalog(std::string_view csv);
HardwareCatalog load_hardware_catalog_file(const std::filesystem::path& path);
std::string to_csv(const HardwareCatalog& catalog);

/// Region code -> lbs CO2/kWh, with the data vintage label.
class IntensityTable {
 public:
  IntensityTable() = default;

  /// Throws Error{unknown_region} with suggestions.
  double intensity(std::string_view region_code) const;
  bool contains(std::string_view region_code) const noexcept;
  std::vector<RegionIntensity> rows() const;
  /// Expected US codes (50 states + DC) absent from the table.
  const std::vector<std::string>& gaps() const noexcept { return gaps_; }
  const std::string& vintage() const noexcept { return vintage_; }
  std::size_t size() const noexcept { return rows_.size(); }

  bool operator==(const IntensityTable& other) const {
    return rows_ == other.rows_ && vintage_ == other.vintage_;
  }

 private:
  friend IntensityTable load_intensity_table(std::string_view,
                                             std::string vintage);
  std::map<std::string, double> rows_;
  std::vector<std::string> gaps_;
  std::string vintage_;
};

/// Parses `region_code,intensity_lbs_per_kwh` CSV with one header row.
/// Region codes are upper-cased. Negative intensity or a repeated region
/// throws Error{validation_error}.
IntensityTable load_intensity_table(std::string_view csv,
                                    std::string vintage = {});
IntensityTable load_intensity_table_file(const std::filesystem::path& path,
                                         std::string vintage = {});
std::string to_csv(const IntensityTable& table);

/// The 50 US state postal codes plus DC.
const std::vector<std::string>& us_region_codes();

}  // namespace epochwatt
