#include "lta/plan.hpp"

#include <cctype>
#include <cstdlib>
#include <regex>
#include <sstream>

#include "lta/error.hpp"

namespace lta {
namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

class StepParser {
 public:
  StepParser(std::string_view text, int line, int step) : s_(text), line_(line), step_(step) {}

  PlanStep parse() {
    PlanStep out;
    skip_ws();
    if (!ident_start(peek())) fail("expected a tool name");
    while (ident_char(peek())) out.tool += s_[pos_++];
    skip_ws();
    expect('(');
    skip_ws();
    if (peek() != ')') {
      for (;;) {
        skip_ws();
        std::string name;
        if (!ident_start(peek())) fail("expected an argument name");
        while (ident_char(peek())) name += s_[pos_++];
        skip_ws();
        expect('=');
        skip_ws();
        for (const auto& [k, v] : out.args)
          if (k == name) fail("argument '" + name + "' given twice");
        out.args.emplace_back(name, value());
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        break;
      }
    }
    expect(')');
    skip_ws();
    if (peek() == '#') {
      ++pos_;
      out.note = trim(s_.substr(pos_));
      pos_ = s_.size();
    }
    if (pos_ != s_.size()) fail("unexpected text after the call");
    return out;
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::PlanParseError, "line " + std::to_string(line_) + ", column " + std::to_string(pos_ + 1) + ": " + what,
                line_);
  }

  Json value() {
    const char c = peek();
    if (c == '"') return json_string();
    if (c == '\'') return single_quoted();
    if (c == '[') return list();
    if (c == '{') return object();
    if (c == '$') return placeholder();
    if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c))) {
      if (auto n = number()) return *n;
    }
    return bareword();
  }

  Json json_string() {
    const std::size_t start = pos_++;
    while (pos_ < s_.size() && s_[pos_] != '"') pos_ += s_[pos_] == '\\' ? 2 : 1;
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    try {
      return Json::parse(s_.substr(start, pos_ - start));
    } catch (const Json::exception&) {
      fail("bad string literal");
    }
  }

  Json single_quoted() {
    std::string out;
    ++pos_;
    while (pos_ < s_.size() && s_[pos_] != '\'') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
      out += s_[pos_++];
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  Json list() {
    Json out = Json::array();
    ++pos_;
    skip_ws();
    if (peek() == ']') {
      ++pos_;
      return out;
    }
    for (;;) {
      skip_ws();
      out.push_back(value());
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(']');
      return out;
    }
  }

  Json object() {
    const std::size_t start = pos_;
    int depth = 0;
    bool in_string = false;
    for (; pos_ < s_.size(); ++pos_) {
      const char c = s_[pos_];
      if (in_string) {
        if (c == '\\') ++pos_;
        else if (c == '"') in_string = false;
      } else if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        ++pos_;
        try {
          return Json::parse(s_.substr(start, pos_ - start));
        } catch (const Json::exception&) {
          fail("bad object literal");
        }
      }
    }
    fail("unterminated object");
  }

  Json placeholder() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (ident_char(s_[pos_]) || s_[pos_] == '$' || s_[pos_] == '.' || s_[pos_] == '[' ||
                                s_[pos_] == ']'))
      ++pos_;
    // A trailing ']' may close an enclosing list rather than an index.
    while (pos_ > start && s_[pos_ - 1] == ']') {
      const std::string_view cand = s_.substr(start, pos_ - start);
      if (Placeholder::parse(cand)) break;
      --pos_;
    }
    const std::string_view text = s_.substr(start, pos_ - start);
    const auto ph = Placeholder::parse(text);
    if (!ph) fail("malformed placeholder '" + std::string(text) + "'");
    if (ph->step >= step_)
      fail("step " + std::to_string(step_) + " refers to step " + std::to_string(ph->step) +
           "; placeholders may only refer to earlier steps");
    return std::string(text);
  }

  std::optional<Json> number() {
    const std::string rest(s_.substr(pos_));
    char* end = nullptr;
    const double d = std::strtod(rest.c_str(), &end);
    const std::size_t used = std::size_t(end - rest.c_str());
    if (used == 0) return std::nullopt;
    const char next = used < rest.size() ? rest[used] : '\0';
    if (!(next == '\0' || next == ',' || next == ')' || next == ']' || next == '#' ||
          std::isspace(static_cast<unsigned char>(next))))
      return std::nullopt;
    const std::string lit = rest.substr(0, used);
    pos_ += used;
    if (lit.find_first_of(".eE") == std::string::npos) {
      try {
        return Json(std::stoll(lit));
      } catch (const std::exception&) {
      }
    }
    return Json(d);
  }

  Json bareword() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::string_view(",)]#([{\"").find(s_[pos_]) == std::string_view::npos) ++pos_;
    const std::string word = trim(s_.substr(start, pos_ - start));
    if (word.empty()) fail("expected a value");
    if (word == "true") return true;
    if (word == "false") return false;
    if (word == "null" || word == "None") return nullptr;
    return word;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
  int step_;
};

bool is_bare_safe(const std::string& s) {
  if (s.empty() || !ident_start(s[0])) return false;
  for (char c : s)
    if (!ident_char(c)) return false;
  return s != "true" && s != "false" && s != "null" && s != "None";
}

}  // namespace

std::optional<Placeholder> Placeholder::parse(std::string_view text) {
  static const std::regex head(R"(^\$step([0-9]+)\.out)");
  const std::string t(text);
  std::smatch m;
  if (!std::regex_search(t, m, head)) return std::nullopt;
  Placeholder ph;
  ph.step = std::stoi(m[1].str());
  if (ph.step < 1) return std::nullopt;
  std::size_t pos = std::size_t(m.length(0));
  while (pos < t.size()) {
    if (t[pos] == '.') {
      std::size_t end = pos + 1;
      while (end < t.size() && ident_char(t[end])) ++end;
      if (end == pos + 1) return std::nullopt;
      ph.path.emplace_back(t.substr(pos + 1, end - pos - 1));
      pos = end;
    } else if (t[pos] == '[') {
      std::size_t end = pos + 1;
      while (end < t.size() && std::isdigit(static_cast<unsigned char>(t[end]))) ++end;
      if (end == pos + 1 || end >= t.size() || t[end] != ']') return std::nullopt;
      ph.path.emplace_back(std::stoll(t.substr(pos + 1, end - pos - 1)));
      pos = end + 1;
    } else {
      return std::nullopt;
    }
  }
  return ph;
}

std::string Placeholder::to_string() const {
  std::string out = "$step" + std::to_string(step) + ".out";
  for (const auto& p : path) out += p.is_string() ? "." + p.get<std::string>() : "[" + p.dump() + "]";
  return out;
}

const Json* PlanStep::arg(std::string_view name) const {
  for (const auto& [k, v] : args)
    if (k == name) return &v;
  return nullptr;
}

Plan parse_plan(std::string_view text) {
  static const std::regex step_line(R"(^\s*([0-9]+)\.(?![0-9])\s*(.*)$)");
  Plan plan;
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> prose;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, step_line)) {
      const int number = std::stoi(m[1].str());
      const int expected = int(plan.steps.size()) + 1;
      if (number != expected)
        throw Error(Errc::PlanParseError,
                    "line " + std::to_string(line_no) + ": step " + std::to_string(number) + " where " +
                        std::to_string(expected) + " was expected",
                    line_no);
      plan.steps.push_back(StepParser(m[2].str(), line_no, number).parse());
    } else if (!trim(line).empty()) {
      prose.push_back(trim(line));
    }
  }
  if (plan.steps.empty()) throw Error(Errc::PlanParseError, "line " + std::to_string(line_no) + ": no steps", line_no);
  for (std::size_t i = 0; i < prose.size(); ++i) plan.rationale += (i ? "\n" : "") + prose[i];
  return plan;
}

std::string format_value(const Json& v) {
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    if (Placeholder::parse(s) || is_bare_safe(s)) return s;
    return v.dump();
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_value(v[i]);
    return out + "]";
  }
  if (v.is_null()) return "None";
  return v.dump();
}

std::string format_plan(const Plan& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const PlanStep& s = plan.steps[i];
    out += std::to_string(i + 1) + ". " + s.tool + "(";
    for (std::size_t a = 0; a < s.args.size(); ++a)
      out += (a ? ", " : "") + s.args[a].first + "=" + format_value(s.args[a].second);
    out += ")";
    if (!s.note.empty()) out += "  # " + s.note;
    out += "\n";
  }
  if (!plan.rationale.empty()) out += "\n" + plan.rationale + "\n";
  return out;
}

std::vector<Placeholder> placeholders_in(const Json& value) {
  std::vector<Placeholder> out;
  if (value.is_string()) {
    if (auto ph = Placeholder::parse(value.get_ref<const std::string&>())) out.push_back(*ph);
  } else if (value.is_structured()) {
    for (const auto& item : value) {
      auto inner = placeholders_in(item);
      out.insert(out.end(), inner.begin(), inner.end());
    }
  }
  return out;
}

Json resolve_placeholders(const Json& value, const std::vector<std::optional<Json>>& payloads) {
  if (value.is_string()) {
    const auto ph = Placeholder::parse(value.get_ref<const std::string&>());
    if (!ph) return value;
    if (ph->step > int(payloads.size()) || !payloads[std::size_t(ph->step - 1)])
      throw Error(Errc::UnresolvedPlaceholder, ph->to_string() + ": step " + std::to_string(ph->step) + " has no result");
    const Json* cur = &*payloads[std::size_t(ph->step - 1)];
    for (const auto& key : ph->path) {
      if (key.is_string() && cur->is_object() && cur->contains(key.get<std::string>())) {
        cur = &(*cur)[key.get<std::string>()];
      } else if (key.is_number_integer() && cur->is_array() && key.get<std::size_t>() < cur->size()) {
        cur = &(*cur)[key.get<std::size_t>()];
      } else {
        throw Error(Errc::UnresolvedPlaceholder, ph->to_string() + ": no field " + key.dump());
      }
    }
    return *cur;
  }
  if (value.is_array()) {
    Json out = Json::array();
    for (const auto& item : value) out.push_back(resolve_placeholders(item, payloads));
    return out;
  }
  if (value.is_object()) {
    Json out = Json::object();
    for (const auto& [k, item] : value.items()) out[k] = resolve_placeholders(item, payloads);
    return out;
  }
  return value;
}

}  // namespace lta
