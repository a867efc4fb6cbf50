#pragma once

#include <map>
#include <string>

#include "duet/synth/types.hpp"

namespace duet::synth {

// Hand-tuned default prompt for one worker; these ship as version 1 of
// prompt set 0 and as the base text every generated set varies.
const std::string& default_worker_prompt(Worker worker);

// worker name -> default prompt, for every execution worker.
std::map<std::string, std::string> default_prompt_map();

}  // namespace duet::synth
