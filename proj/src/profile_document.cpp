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

#include "epochwatt/profile_document.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <regex>
#include <set>

#include "epochwatt/error.hpp"

namespace epochwatt {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& path, const std::string& reason) {
  throw Error(ErrorCode::validation_error, path + ": " + reason, path);
}

const json& require(const json& obj, const std::string& key,
                    const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) invalid(path + key, "missing required field");
  return *it;
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& path, bool allow_empty = true) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) invalid(path + key, "expected a string");
  auto s = v.get<std::string>();
  if (!allow_empty && s.empty()) invalid(path + key, "must not be empty");
  return s;
}

double get_number(const json& obj, const std::string& key,
                  const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number()) invalid(path + key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) invalid(path + key, "expected a finite number");
  return d;
}

long long get_integer(const json& obj, const std::string& key,
                      const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number_integer()) invalid(path + key, "expected an integer");
  return v.get<long long>();
}

bool get_bool(const json& obj, const std::string& key, const std::string& path,
              std::optional<bool> fallback = std::nullopt) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    invalid(path + key, "missing required field");
  }
  if (!it->is_boolean()) invalid(path + key, "expected a boolean");
  return it->get<bool>();
}

json leftover(const json& obj, const std::set<std::string>& known) {
  json extra = json::object();
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) extra[key] = value;
  }
  return extra;
}

const std::set<std::string> kProfileKeys = {
    "schema_version", "model_name", "region_code", "pue",
    "hardware",       "epochs",     "created_at",  "live"};
const std::set<std::string> kEpochKeys = {"index", "duration_s", "energy_kwh",
                                          "degraded", "paused"};

}  // namespace

json to_json(const HardwareSpec& spec) {
  return {{"catalog_key", spec.catalog_key}, {"quantity", spec.quantity}};
}

HardwareSpec hardware_spec_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) invalid(path, "expected an object");
  HardwareSpec spec;
  spec.catalog_key = get_string(j, "catalog_key", path + ".", false);
  const auto quantity = get_integer(j, "quantity", path + ".");
  if (quantity < 1 || quantity > 1'000'000) {
    invalid(path + ".quantity", "must be an integer >= 1");
  }
  spec.quantity = static_cast<int>(quantity);
  return spec;
}

json to_document(const EnergyProfile& profile) {
  json doc = profile.extra.is_object() ? profile.extra : json::object();
  doc["schema_version"] = profile.schema_version;
  doc["model_name"] = profile.model_name;
  doc["region_code"] = profile.region_code;
  doc["pue"] = profile.pue;
  doc["hardware"] = json::array();
  for (const auto& h : profile.hardware) doc["hardware"].push_back(to_json(h));
  doc["epochs"] = json::array();
  for (const auto& e : profile.epochs) {
    json epoch = e.extra.is_object() ? e.extra : json::object();
    epoch["index"] = e.index;
    epoch["duration_s"] = e.duration_s;
    epoch["energy_kwh"] = e.energy_kwh;
    if (e.degraded) epoch["degraded"] = true;
    if (e.paused) epoch["paused"] = true;
    doc["epochs"].push_back(std::move(epoch));
  }
  doc["created_at"] = profile.created_at;
  doc["live"] = profile.live;
  return doc;
}

EnergyProfile from_document(const json& doc) {
  if (!doc.is_object()) invalid("$", "profile document must be an object");
  EnergyProfile p;

  const auto version = get_integer(doc, "schema_version", "");
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::unsupported_version,
                "unsupported schema_version " + std::to_string(version),
                "schema_version");
  }
  p.schema_version = static_cast<int>(version);
  p.model_name = get_string(doc, "model_name", "");
  p.region_code = get_string(doc, "region_code", "", false);
  p.pue = get_number(doc, "pue", "");
  if (p.pue < 1.0) invalid("pue", "must be >= 1");
  p.created_at = get_string(doc, "created_at", "");
  if (!is_rfc3339(p.created_at)) invalid("created_at", "expected RFC 3339");
  p.live = get_bool(doc, "live", "");

  const auto& hardware = require(doc, "hardware", "");
  if (!hardware.is_array()) invalid("hardware", "expected an array");
  for (std::size_t i = 0; i < hardware.size(); ++i) {
    p.hardware.push_back(hardware_spec_from_json(
        hardware[i], "hardware[" + std::to_string(i) + "]"));
  }
  if (p.live && p.hardware.empty()) {
    invalid("hardware", "live profiles must name their hardware");
  }

  const auto& epochs = require(doc, "epochs", "");
  if (!epochs.is_array()) invalid("epochs", "expected an array");
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto path = "epochs[" + std::to_string(i) + "]";
    const auto& e = epochs[i];
    if (!e.is_object()) invalid(path, "expected an object");
    EpochRecord rec;
    const auto index = get_integer(e, "index", path + ".");
    if (index != static_cast<long long>(i)) {
      invalid(path + ".index", "expected " + std::to_string(i) +
                                   " (indices are consecutive from 0)");
    }
    rec.index = static_cast<int>(index);
    rec.degraded = get_bool(e, "degraded", path + ".", false);
    rec.paused = get_bool(e, "paused", path + ".", false);
    rec.duration_s = get_number(e, "duration_s", path + ".");
    // A degraded epoch may be empty (two marks with no time between them).
    if (rec.duration_s < 0.0 || (!rec.degraded && rec.duration_s == 0.0)) {
      invalid(path + ".duration_s", "must be > 0");
    }
    rec.energy_kwh = get_number(e, "energy_kwh", path + ".");
    if (rec.energy_kwh < 0.0) invalid(path + ".energy_kwh", "must be >= 0");
    rec.extra = leftover(e, kEpochKeys);
    p.epochs.push_back(std::move(rec));
  }
  p.extra = leftover(doc, kProfileKeys);
  return p;
}

EnergyProfile parse_profile(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::validation_error, "profile is not valid JSON",
                e.what());
  }
  return from_document(doc);
}

std::string serialize_profile(const EnergyProfile& profile, int indent) {
  return to_document(profile).dump(indent);
}

json to_json(const Counterfactual& cf) {
  json j = json::object();
  if (cf.alt_region) j["alt_region"] = *cf.alt_region;
  if (cf.alt_hardware) {
    j["alt_hardware"] = json::array();
    for (const auto& h : *cf.alt_hardware) j["alt_hardware"].push_back(to_json(h));
  }
  if (cf.alt_pue) j["alt_pue"] = *cf.alt_pue;
  return j;
}

Counterfactual counterfactual_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) invalid(path, "expected an object");
  Counterfactual cf;
  const std::string prefix = path + ".";
  if (j.contains("alt_region") && !j["alt_region"].is_null()) {
    cf.alt_region = get_string(j, "alt_region", prefix, false);
  }
  if (j.contains("alt_hardware") && !j["alt_hardware"].is_null()) {
    const auto& list = j["alt_hardware"];
    if (!list.is_array() || list.empty()) {
      invalid(prefix + "alt_hardware", "expected a non-empty array");
    }
    std::vector<HardwareSpec> specs;
    for (std::size_t i = 0; i < list.size(); ++i) {
      specs.push_back(hardware_spec_from_json(
          list[i], prefix + "alt_hardware[" + std::to_string(i) + "]"));
    }
    cf.alt_hardware = std::move(specs);
  }
  if (j.contains("alt_pue") && !j["alt_pue"].is_null()) {
    cf.alt_pue = get_number(j, "alt_pue", prefix);
    if (*cf.alt_pue < 1.0) invalid(prefix + "alt_pue", "must be >= 1");
  }
  return cf;
}

bool is_rfc3339(std::string_view text) {
  static const std::regex pattern(
      R"(^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])[Tt ]([01]\d|2[0-3]):[0-5]\d:([0-5]\d|60)(\.\d+)?([Zz]|[+-]([01]\d|2[0-3]):[0-5]\d)$)");
  return std::regex_match(text.begin(), text.end(), pattern);
}

std::string now_rfc3339() {
  const auto now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

}  // namespace epochwatt
