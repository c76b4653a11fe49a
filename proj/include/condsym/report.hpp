// JSON reports (schema condsym-report/1).
#pragma once

#include <string>

#include "json.hpp"

#include "condsym/catalog.hpp"
#include "condsym/condsym.hpp"
#include "condsym/numoracle.hpp"

namespace condsym {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "condsym-report/1";

Json to_json(const CheckReport& r);
Json to_json(const VerifyResult& r);
Json to_json(const CompareReport& r);
Json to_json(const DeterminingSystem& ds);
Json to_json(const Classification& c);

/// Envelope {schema, command, ok, ...payload}.
Json report(const std::string& command, bool ok, const Json& payload);

/// Serialization used for every emitted report (2-space indent, trailing newline).
std::string dump(const Json& j);

}  // namespace condsym
