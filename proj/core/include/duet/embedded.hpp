#pragma once

#include <string_view>

namespace duet::embedded {

// Fixture data baked into the library at build time (see
// cmake/EmbedFixtures.cmake), so binaries work from any directory.
std::string_view airline_domain_json();
std::string_view toy_domain_json();
std::string_view toy_cancel_task_json();
std::string_view greeting_script_json();

}  // namespace duet::embedded
