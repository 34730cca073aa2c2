#include "sbl/rule_spec.hpp"

#include <charconv>
#include <string_view>

#include "sbl/dnn.hpp"
#include "sbl/error.hpp"

namespace sbl {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s, const std::string& context) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("bad number '" + std::string(s) + "' in rule '" + context + "'");
  }
  return v;
}

std::vector<std::string_view> split_top_level(std::string_view s, bool allow_semicolon) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (depth < 0) throw ConfigError("unbalanced ']' in '" + std::string(s) + "'");
    if (depth == 0 && (c == ',' || (allow_semicolon && c == ';'))) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (depth != 0) throw ConfigError("unbalanced '[' in '" + std::string(s) + "'");
  out.push_back(trim(s.substr(start)));
  return out;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

BasicRule parse_basic_rule(const std::string& text) {
  const std::string_view s = trim(text);
  if (s == "em") return Em{};
  if (s == "mu") return Mu{};
  if (s.starts_with("psbl:")) {
    const double p = parse_number(s.substr(5), text);
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p must lie in (0, 1] in rule '" + text + "'");
    return Psbl{p};
  }
  throw ConfigError("unknown rule '" + text + "' (expected em, mu or psbl:<p>)");
}

UpdateRuleSpec parse_rule(const std::string& text) {
  const std::string_view s = trim(text);
  if (s.empty()) throw ConfigError("empty rule spec");
  if (s == "em" || s == "mu" || s.starts_with("psbl:")) {
    return std::visit([](auto r) -> UpdateRuleSpec { return r; }, parse_basic_rule(std::string(s)));
  }
  if (s.starts_with("convmaj:")) {
    const double a = parse_number(s.substr(8), text);
    ConvexMajorizers r{{a}};
    validate_rule(r);
    return r;
  }
  if (s.starts_with("convex:")) {
    std::string_view body = trim(s.substr(7));
    if (body.size() < 2 || body.front() != '[' || body.back() != ']') {
      throw ConfigError("convex rule must look like convex:[rule:w,...], got '" + text + "'");
    }
    body = body.substr(1, body.size() - 2);
    ConvexUpdates r;
    std::vector<double> w;
    for (std::string_view item : split_top_level(body, false)) {
      const auto colon = item.rfind(':');
      if (colon == std::string_view::npos) throw ConfigError("convex item '" + std::string(item) + "' lacks a weight");
      r.rules.push_back(parse_basic_rule(std::string(item.substr(0, colon))));
      w.push_back(parse_number(item.substr(colon + 1), text));
    }
    r.schedule.push_back(Eigen::Map<const RVector>(w.data(), static_cast<Eigen::Index>(w.size())));
    validate_rule(r);
    return r;
  }
  if (s.starts_with("dnn:")) {
    const std::string path(trim(s.substr(4)));
    if (path.empty()) throw ConfigError("dnn rule needs a weights path");
    return Dnn{std::make_shared<DnnSblModel>(load_weights(path)), path};
  }
  throw ConfigError("unknown rule spec '" + text + "'");
}

std::vector<UpdateRuleSpec> parse_rule_list(const std::string& text) {
  std::vector<UpdateRuleSpec> out;
  for (std::string_view item : split_top_level(text, true)) {
    if (item.empty()) continue;
    out.push_back(parse_rule(std::string(item)));
  }
  if (out.empty()) throw ConfigError("empty rule list");
  return out;
}

std::string rule_name(const BasicRule& rule) {
  if (std::holds_alternative<Em>(rule)) return "em";
  if (std::holds_alternative<Mu>(rule)) return "mu";
  return "psbl:" + format_number(std::get<Psbl>(rule).p);
}

std::string format_rule(const UpdateRuleSpec& rule) {
  if (const auto* r = std::get_if<ConvexUpdates>(&rule)) {
    std::string out = "convex:[";
    const RVector& w = r->schedule.front();
    for (std::size_t q = 0; q < r->rules.size(); ++q) {
      if (q) out += ',';
      out += rule_name(r->rules[q]) + ":" + format_number(w[static_cast<Eigen::Index>(q)]);
    }
    if (r->schedule.size() > 1) out += ",...";
    return out + "]";
  }
  if (const auto* r = std::get_if<ConvexMajorizers>(&rule)) {
    return "convmaj:" + format_number(r->alpha1.front()) + (r->alpha1.size() > 1 ? ",..." : "");
  }
  if (const auto* r = std::get_if<Dnn>(&rule)) return "dnn:" + r->source;
  if (std::holds_alternative<Em>(rule)) return "em";
  if (std::holds_alternative<Mu>(rule)) return "mu";
  return "psbl:" + format_number(std::get<Psbl>(rule).p);
}

std::string rule_name(const UpdateRuleSpec& rule) { return format_rule(rule); }

}  // namespace sbl
