#pragma once

#include <string>
#include <vector>

#include "sbl/updates.hpp"

namespace sbl {

/// Rule mini-grammar:
///   em | mu | psbl:<p> | convex:[<rule>:<w>,...] | convmaj:<alpha1> | dnn:<weights-path>
/// Inside `convex:[...]` each item is a basic rule (em, mu, psbl:<p>)
/// followed by ':' and its weight. `dnn:` loads the weight file.
UpdateRuleSpec parse_rule(const std::string& text);

/// Comma- or semicolon-separated list of rules; commas inside [...] do not split.
std::vector<UpdateRuleSpec> parse_rule_list(const std::string& text);

BasicRule parse_basic_rule(const std::string& text);

/// Canonical text form; parse_rule(format_rule(r)) reproduces r.
std::string format_rule(const UpdateRuleSpec& rule);

/// Shortest round-trip decimal representation.
std::string format_number(double v);

}  // namespace sbl
