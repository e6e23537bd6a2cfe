#include "pondstat/schemas.hpp"

#include "pondstat/error.hpp"

#include <algorithm>
#include <map>

namespace pondstat {

namespace {

using nlohmann::json;

json type(std::string_view t) { return {{"type", t}}; }

// Non-finite doubles serialize as null.
json num() { return {{"type", {"number", "null"}}}; }

json array_of(json items) { return {{"type", "array"}, {"items", std::move(items)}}; }

json object(json properties, std::vector<std::string> required) {
    return {{"type", "object"}, {"properties", std::move(properties)}, {"required", std::move(required)}};
}

json state() {
    return {{"type", "string"}, {"enum", {"running", "stopped_by_se", "stopped_by_k", "cancelled", "failed"}}};
}

json role() { return {{"type", "string"}, {"enum", {"quantitative", "qualitative", "dropped"}}}; }

json document(std::string_view title, json body) {
    body["$schema"] = "https://json-schema.org/draft/2020-12/schema";
    body["title"] = title;
    return body;
}

// Every stream emission carries the task id, the replicate count and the state.
json emission(std::string_view title, json properties, std::vector<std::string> required) {
    properties["task_id"] = type("integer");
    properties["k"] = type("integer");
    properties["state"] = state();
    properties["elapsed_s"] = type("number");
    for (const char* r : {"task_id", "k", "state"}) required.emplace_back(r);
    return document(title, object(std::move(properties), std::move(required)));
}

json stats_schema() {
    json row = object({{"column", type("string")}}, {"column"});
    for (const char* f : {"mu", "se", "std", "min", "med", "max", "skew", "kurt", "mp"}) {
        row["properties"][f] = num();
        row["required"].push_back(f);
    }
    return emission("stats emission", {{"stats", array_of(std::move(row))}, {"n", num()}}, {"stats", "n"});
}

json table_schema() {
    const json level = object({{"level", type("string")}, {"count", type("number")}, {"percent", num()}},
                              {"level", "count", "percent"});
    const json table = object({{"variable", type("string")},
                               {"levels_discovered", type("integer")},
                               {"total", type("number")},
                               {"capped", type("boolean")},
                               {"levels", array_of(level)}},
                              {"variable", "levels_discovered", "total", "capped", "levels"});
    return emission("frequency table emission", {{"tables", array_of(table)}, {"n", num()}}, {"tables", "n"});
}

json corr_schema() {
    return emission("correlation emission",
                    {{"columns", array_of(type("string"))}, {"matrix", array_of(array_of(num()))}, {"n", num()}},
                    {"columns", "matrix", "n"});
}

json regression_schema() {
    const json coef = object({{"name", type("string")},
                              {"estimate", num()},
                              {"stand_err", num()},
                              {"t_stat", num()},
                              {"p_value", num()}},
                             {"name", "estimate", "stand_err", "t_stat", "p_value"});
    const json rep = object({{"k", type("integer")},
                             {"rows_used", type("number")},
                             {"goodness", num()},
                             {"discarded", type("boolean")},
                             {"warnings", array_of(type("string"))}},
                            {"k", "rows_used", "goodness", "discarded", "warnings"});
    return emission("regression emission",
                    {{"model", {{"type", "string"}, {"enum", {"ols", "logit"}}}},
                     {"coefficients", array_of(coef)},
                     {"r2", num()},
                     {"auc", num()},
                     {"fits", type("integer")},
                     {"replicates", array_of(rep)},
                     {"n", num()}},
                    {"model", "coefficients", "fits", "replicates", "n"});
}

json plot_body() {
    const json hist = object({{"edges", array_of(num())}, {"counts", array_of(type("number"))}}, {"edges", "counts"});
    const json bars = object({{"groups", array_of(type("string"))}, {"values", array_of(num())}}, {"groups", "values"});
    const json box = object({{"label", type("string")},
                             {"count", type("number")},
                             {"whisker_low", num()},
                             {"q1", num()},
                             {"med", num()},
                             {"q3", num()},
                             {"whisker_high", num()},
                             {"outliers", array_of(num())},
                             {"x_low", num()},
                             {"x_high", num()}},
                            {"label", "count", "whisker_low", "q1", "med", "q3", "whisker_high", "outliers"});
    const json boxes = object({{"boxes", array_of(box)}}, {"boxes"});
    const json matrix =
        object({{"labels", array_of(type("string"))}, {"matrix", array_of(array_of(num()))}}, {"labels", "matrix"});
    const json tstat = object({{"names", array_of(type("string"))},
                               {"t_stats", array_of(num())},
                               {"p_values", array_of(num())},
                               {"significant", array_of(type("boolean"))}},
                              {"names", "t_stats", "p_values", "significant"});
    return {{"kind",
             {{"type", "string"}, {"enum", {"hist", "mu", "std", "size", "corr", "box", "gbox", "tstat_bars"}}}},
            {"title", type("string")},
            {"x_label", type("string")},
            {"y_label", type("string")},
            {"series", {{"anyOf", {hist, bars, boxes, matrix, tstat}}}},
            {"warnings", array_of(type("string"))}};
}

json plot_schema() { return emission("plot emission", plot_body(), {"kind", "series"}); }

json end_schema() { return emission("terminal stream event", {{"error", type("string")}}, {}); }

json describe_body() {
    const json column = object({{"name", type("string")}, {"role", role()}, {"levels", array_of(type("string"))}},
                               {"name", "role", "levels"});
    const json output = object({{"name", type("string")}, {"role", role()}}, {"name", "role"});
    const json settings = object({{"subsize", type("integer")},
                                  {"niter", type("integer")},
                                  {"seq", type("boolean")},
                                  {"seed", type("integer")},
                                  {"se", num()},
                                  {"threads", type("integer")},
                                  {"index", type("boolean")},
                                  {"timing", type("boolean")}},
                                 {"subsize", "niter", "seq", "seed", "se", "threads", "index", "timing"});
    const json task = object(
        {{"id", type("integer")}, {"kind", type("string")}, {"command", type("string")}, {"state", state()}},
        {"id", "kind", "command", "state"});
    return object({{"path", type("string")},
                   {"columns", array_of(column)},
                   {"output_columns", array_of(output)},
                   {"n_estimate", type("number")},
                   {"shuffled", type("boolean")},
                   {"program", array_of(type("string"))},
                   {"settings", settings},
                   {"tasks", array_of(task)}},
                  {"path", "columns", "output_columns", "n_estimate", "shuffled", "program", "settings", "tasks"});
}

std::map<std::string, json, std::less<>> build() {
    std::map<std::string, json, std::less<>> m;
    m["stats"] = stats_schema();
    m["table"] = table_schema();
    m["corr"] = corr_schema();
    m["regression"] = regression_schema();
    m["plot"] = plot_schema();
    m["end"] = end_schema();
    m["describe"] = document("session description", describe_body());
    m["session"] = document("created session",
                            object({{"session_id", type("string")}, {"schema", describe_body()}}, {"session_id", "schema"}));
    m["command"] = document("command response",
                            object({{"message", type("string")}, {"task_id", type("integer")}}, {"message"}));
    m["task"] = document("task summary", object({{"task_id", type("integer")},
                                                 {"kind", type("string")},
                                                 {"command", type("string")},
                                                 {"state", state()},
                                                 {"emissions", type("integer")},
                                                 {"latest", {{"type", {"object", "null"}}}},
                                                 {"error", type("string")}},
                                                {"task_id", "kind", "command", "state", "emissions", "latest"}));
    m["cancel"] = document("cancel response", object({{"task_id", type("integer")}, {"state", state()}}, {"task_id", "state"}));
    m["error"] = document("error response", object({{"error", type("string")}}, {"error"}));
    return m;
}

const std::map<std::string, json, std::less<>>& registry() {
    static const auto m = build();
    return m;
}

bool has_type(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    return false;
}

std::string check(const json& schema, const json& v, const std::string& at) {
    if (auto it = schema.find("type"); it != schema.end()) {
        const auto types = it->is_array() ? it->get<std::vector<std::string>>() : std::vector{it->get<std::string>()};
        if (std::none_of(types.begin(), types.end(), [&](const auto& t) { return has_type(v, t); })) {
            return at + ": expected " + it->dump() + ", got " + v.type_name();
        }
    }
    if (auto it = schema.find("enum"); it != schema.end()) {
        if (std::find(it->begin(), it->end(), v) == it->end()) return at + ": " + v.dump() + " not in " + it->dump();
    }
    if (auto it = schema.find("anyOf"); it != schema.end()) {
        std::string first;
        for (const auto& alt : *it) {
            auto why = check(alt, v, at);
            if (why.empty()) {
                first.clear();
                break;
            }
            if (first.empty()) first = std::move(why);
        }
        if (!first.empty()) return at + ": matches no alternative (" + first + ")";
    }
    if (v.is_object()) {
        if (auto it = schema.find("required"); it != schema.end()) {
            for (const auto& r : *it) {
                if (!v.contains(r.get<std::string>())) return at + ": missing '" + r.get<std::string>() + "'";
            }
        }
        if (auto it = schema.find("properties"); it != schema.end()) {
            for (const auto& [key, sub] : it->items()) {
                if (auto f = v.find(key); f != v.end()) {
                    if (auto why = check(sub, *f, at + "/" + key); !why.empty()) return why;
                }
            }
        }
    }
    if (v.is_array()) {
        if (auto it = schema.find("items"); it != schema.end()) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (auto why = check(*it, v[i], at + "/" + std::to_string(i)); !why.empty()) return why;
            }
        }
    }
    return {};
}

} // namespace

std::vector<std::string> schema_names() {
    std::vector<std::string> out;
    for (const auto& [name, s] : registry()) out.push_back(name);
    return out;
}

const nlohmann::json& json_schema(std::string_view name) {
    const auto& m = registry();
    auto it = m.find(name);
    if (it == m.end()) throw UsageError("unknown schema '" + std::string(name) + "'");
    return it->second;
}

std::string schema_violation(const nlohmann::json& schema, const nlohmann::json& value) {
    auto why = check(schema, value, "");
    if (!why.empty() && why.front() == ':') why.insert(0, "/");
    return why;
}

} // namespace pondstat
