#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace pondstat {

// JSON Schema (draft 2020-12) documents for every JSON body the service emits.
// Names: stats, table, corr, regression, plot (stream emissions), end (terminal
// stream event), session, describe, command, task, cancel, error.
std::vector<std::string> schema_names();

// Throws UsageError for an unknown name.
const nlohmann::json& json_schema(std::string_view name);

// Checks `value` against the keywords used by json_schema: type, enum,
// required, properties, items and anyOf. Returns an empty string on success,
// otherwise the JSON pointer of the first offending node and the reason.
std::string schema_violation(const nlohmann::json& schema, const nlohmann::json& value);

} // namespace pondstat
