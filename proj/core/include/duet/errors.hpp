#pragma once

#include <stdexcept>
#include <string>

namespace duet {

// Base for everything thrown by this library, so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DUET_DEFINE_ERROR(Name)        \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

// --- environment ---
DUET_DEFINE_ERROR(BadFixture);        // domain fixture fails validation
DUET_DEFINE_ERROR(BadTask);          // task JSON missing/ill-typed fields
DUET_DEFINE_ERROR(UnknownTool);      // tool name not in the domain registry
DUET_DEFINE_ERROR(SchemaViolation);  // arguments violate the tool schema
DUET_DEFINE_ERROR(PermissionDenied); // role may not call this tool
DUET_DEFINE_ERROR(ProtocolViolation); // joint action malformed or out of turn

// Rejected by a domain policy rule; carries the machine-readable rule id.
class PolicyRejection : public Error {
 public:
  PolicyRejection(std::string rule_id, const std::string& what)
      : Error(what), rule_id_(std::move(rule_id)) {}
  const std::string& rule_id() const { return rule_id_; }

 private:
  std::string rule_id_;
};

// --- policies ---
DUET_DEFINE_ERROR(ScriptExhausted);   // scripted policy ran out of lines
DUET_DEFINE_ERROR(RemoteUnavailable); // chat endpoint failed after retries

// --- verification ---
DUET_DEFINE_ERROR(BadSpec);     // checker spec fails validation
DUET_DEFINE_ERROR(UnknownRule); // rule id absent from the domain rule table

// --- learning signal ---
DUET_DEFINE_ERROR(DegenerateGroup); // group too small or rewards all equal

// --- synthesis ---
DUET_DEFINE_ERROR(BadPlan);            // planner produced an unusable workflow
DUET_DEFINE_ERROR(BackendError);       // backend reply unusable after retries
DUET_DEFINE_ERROR(PilotDiverged);      // pilot hit the iteration cap unconverged
DUET_DEFINE_ERROR(DriftUnrecoverable); // scaled generation paused and could not recover

// --- general ---
DUET_DEFINE_ERROR(BadConfig); // invalid configuration value
DUET_DEFINE_ERROR(IoError);   // file could not be read or written

#undef DUET_DEFINE_ERROR

}  // namespace duet
