#pragma once

// Internal: tool semantics shared by Environment::execute_tool. Not
// installed; external callers always go through Environment.

#include <cstdint>
#include <string>

#include "duet/env/domain.hpp"
#include "duet/env/tools.hpp"

namespace duet::env::detail {

// Executes one schema-validated call against the entity database.
// Mutates `entities` in place for successful state-changing tools; throws
// PolicyRejection for rule violations and SchemaViolation for ill-shaped
// nested arguments; business-level failures come back as status "error".
ToolResult airline_execute(const Domain& domain, json& entities,
                           const std::string& now, const ToolCall& call);

// Seconds since the civil epoch for "YYYY-MM-DDTHH:MM:SS" strings.
// Malformed input yields 0 rather than throwing; fixture data is validated
// at load time, so this only matters for adversarial tool arguments.
int64_t parse_timestamp(const std::string& iso);

// True when `later` is within `hours` hours after `earlier`.
bool within_hours(const std::string& earlier, const std::string& later,
                  int hours);

}  // namespace duet::env::detail
