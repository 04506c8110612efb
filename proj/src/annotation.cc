#include "hail/annotation.h"

#include <algorithm>
#include <cctype>
#include <limits>

#include "hail/error.h"

namespace hail {

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void SyntaxError(const std::string& what, std::string_view near) {
  Throw(ErrorCode::kSyntaxError, what + " near `" + std::string(near.substr(0, 40)) + "`");
}

bool StartsWith(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

int ParsePositionRef(std::string_view tok) {
  tok = Trim(tok);
  if (tok.size() < 2 || tok[0] != '@' ||
      !std::all_of(tok.begin() + 1, tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
      tok.size() > 10) {
    SyntaxError("expected an attribute reference @<position>", tok);
  }
  return std::stoi(std::string(tok.substr(1)));
}

// Splits on commas that are not inside single or double quotes.
std::vector<std::string_view> SplitArgs(std::string_view s) {
  std::vector<std::string_view> out;
  char quote = 0;
  size_t start = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote != 0) {
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == ',') {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  if (quote != 0) SyntaxError("unterminated quote", s);
  out.push_back(s.substr(start));
  return out;
}

std::string Unquote(std::string_view s) {
  s = Trim(s);
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

// Splits a filter on the keyword `and` surrounded by whitespace, outside quotes.
std::vector<std::string_view> SplitConjuncts(std::string_view s) {
  std::vector<std::string_view> out;
  char quote = 0;
  int depth = 0;
  size_t start = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote != 0) {
      if (c == quote) quote = 0;
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '(') {
      ++depth;
    } else if (c == ')') {
      --depth;
    } else if (depth == 0 && i > 0 && std::isspace(static_cast<unsigned char>(s[i - 1])) && i + 3 < s.size() &&
               (s.substr(i, 3) == "and" || s.substr(i, 3) == "AND") &&
               std::isspace(static_cast<unsigned char>(s[i + 3]))) {
      out.push_back(s.substr(start, i - start));
      start = i + 3;
    }
  }
  out.push_back(s.substr(start));
  return out;
}

FilterTerm ParseTerm(std::string_view text) {
  std::string_view s = Trim(text);
  if (s.empty()) SyntaxError("empty filter term", text);
  size_t i = 1;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  FilterTerm t;
  t.position = ParsePositionRef(s.substr(0, i));
  s = Trim(s.substr(i));
  if (StartsWith(s, "between")) {
    t.op = FilterOp::kBetween;
    s.remove_prefix(7);
  } else if (StartsWith(s, ">=")) {
    t.op = FilterOp::kGe;
    s.remove_prefix(2);
  } else if (StartsWith(s, "<=")) {
    t.op = FilterOp::kLe;
    s.remove_prefix(2);
  } else if (StartsWith(s, "=")) {
    t.op = FilterOp::kEq;
    s.remove_prefix(1);
  } else {
    SyntaxError("expected one of =, between, >=, <=", s);
  }
  s = Trim(s);
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') SyntaxError("operator arguments must be in parentheses", s);
  for (std::string_view a : SplitArgs(s.substr(1, s.size() - 2))) t.args.push_back(Unquote(a));
  const size_t want = t.op == FilterOp::kBetween ? 2 : 1;
  if (t.args.size() != want) SyntaxError("wrong number of operator arguments", text);
  return t;
}

std::vector<FilterTerm> ParseFilterText(std::string_view s) {
  std::vector<FilterTerm> out;
  if (Trim(s).empty()) return out;
  for (std::string_view part : SplitConjuncts(s)) out.push_back(ParseTerm(part));
  return out;
}

std::vector<int> ParseProjectionText(std::string_view s) {
  std::vector<int> out;
  s = Trim(s);
  if (!s.empty() && s.front() == '{') {
    if (s.back() != '}') SyntaxError("unterminated projection", s);
    s = Trim(s.substr(1, s.size() - 2));
  }
  if (s.empty()) return out;
  for (std::string_view tok : SplitArgs(s)) out.push_back(ParsePositionRef(tok));
  return out;
}

}  // namespace

QueryAnnotation ParseAnnotation(std::string_view text) {
  std::string_view s = Trim(text);
  if (StartsWith(s, "@HailQuery")) {
    s = Trim(s.substr(10));
    if (s.size() < 2 || s.front() != '(' || s.back() != ')') SyntaxError("malformed @HailQuery(...)", s);
    s = Trim(s.substr(1, s.size() - 2));
  }
  QueryAnnotation q;
  bool seen_filter = false;
  bool seen_projection = false;
  while (true) {
    s = Trim(s);
    if (!s.empty() && s.front() == ',') s = Trim(s.substr(1));
    if (s.empty()) break;
    size_t i = 0;
    while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
    const std::string_view key = s.substr(0, i);
    s = Trim(s.substr(i));
    if (s.empty() || s.front() != '=') SyntaxError("expected `=` after " + std::string(key), s);
    s = Trim(s.substr(1));
    if (key == "filter" && !seen_filter) {
      if (s.empty() || s.front() != '"') SyntaxError("filter must be a double-quoted string", s);
      const size_t end = s.find('"', 1);
      if (end == std::string_view::npos) SyntaxError("unterminated filter string", s);
      q.filter = ParseFilterText(s.substr(1, end - 1));
      s = s.substr(end + 1);
      seen_filter = true;
    } else if (key == "projection" && !seen_projection) {
      if (s.empty() || s.front() != '{') SyntaxError("projection must be a {...} list", s);
      const size_t end = s.find('}');
      if (end == std::string_view::npos) SyntaxError("unterminated projection", s);
      q.projection = ParseProjectionText(s.substr(0, end + 1));
      s = s.substr(end + 1);
      seen_projection = true;
    } else {
      SyntaxError("unexpected key `" + std::string(key) + "`", s);
    }
  }
  return q;
}

QueryAnnotation AnnotationFromFlags(std::string_view filter, std::string_view projection) {
  QueryAnnotation q;
  filter = Trim(filter);
  if (filter.size() >= 2 && filter.front() == '"' && filter.back() == '"') filter = filter.substr(1, filter.size() - 2);
  q.filter = ParseFilterText(filter);
  q.projection = ParseProjectionText(projection);
  return q;
}

std::string FormatAnnotation(const QueryAnnotation& q) {
  std::string out;
  if (!q.filter.empty()) {
    out += "filter=\"";
    for (size_t i = 0; i < q.filter.size(); ++i) {
      const FilterTerm& t = q.filter[i];
      if (i > 0) out += " and ";
      out += "@" + std::to_string(t.position) + " ";
      switch (t.op) {
        case FilterOp::kEq: out += "="; break;
        case FilterOp::kBetween: out += "between"; break;
        case FilterOp::kGe: out += ">="; break;
        case FilterOp::kLe: out += "<="; break;
      }
      out += "(";
      for (size_t a = 0; a < t.args.size(); ++a) out += (a > 0 ? "," : "") + t.args[a];
      out += ")";
    }
    out += "\"";
  }
  if (!q.projection.empty()) {
    if (!out.empty()) out += ", ";
    out += "projection={";
    for (size_t i = 0; i < q.projection.size(); ++i) out += (i > 0 ? ",@" : "@") + std::to_string(q.projection[i]);
    out += "}";
  }
  return out;
}

namespace {

bool Less(AttrType type, const Value& a, const Value& b) {
  if (type == AttrType::kVarchar) return std::get<std::string>(a) < std::get<std::string>(b);
  return OrderedKey(a) < OrderedKey(b);
}

}  // namespace

bool Conjunct::Matches(const Value& v) const {
  if (lo && Less(type, v, *lo)) return false;
  if (hi && Less(type, *hi, v)) return false;
  return true;
}

uint64_t Conjunct::key_lo() const { return lo ? OrderedKey(*lo) : 0; }

uint64_t Conjunct::key_hi() const { return hi ? OrderedKey(*hi) : std::numeric_limits<uint64_t>::max(); }

const Conjunct* BoundQuery::ConjunctOn(int position) const {
  for (const Conjunct& c : conjuncts) {
    if (c.position == position) return &c;
  }
  return nullptr;
}

bool BoundQuery::MatchesAll(const Record& row) const {
  for (const Conjunct& c : conjuncts) {
    if (!c.Matches(row.values[c.position - 1])) return false;
  }
  return true;
}

BoundQuery Bind(const QueryAnnotation& q, const Schema& schema) {
  BoundQuery b;
  b.schema = schema;
  auto check = [&](int pos) {
    if (!schema.HasPosition(pos)) {
      Throw(ErrorCode::kUnknownAttribute, "@" + std::to_string(pos) + " is not in a schema of " +
                                              std::to_string(schema.size()) + " attributes");
    }
  };
  for (const FilterTerm& t : q.filter) {
    check(t.position);
    const Attribute& a = schema.at(t.position);
    std::vector<Value> args;
    for (const std::string& s : t.args) {
      std::optional<Value> v = ParseValue(a.type, s);
      if (!v) {
        Throw(ErrorCode::kSyntaxError, "`" + s + "` is not a valid " + std::string(TypeName(a.type)) + " for " + a.name);
      }
      args.push_back(std::move(*v));
    }
    Conjunct c{t.position, a.type, std::nullopt, std::nullopt};
    switch (t.op) {
      case FilterOp::kEq: c.lo = args[0]; c.hi = args[0]; break;
      case FilterOp::kBetween:
        if (Less(a.type, args[1], args[0])) Throw(ErrorCode::kSyntaxError, "between needs lo <= hi on " + a.name);
        c.lo = args[0];
        c.hi = args[1];
        break;
      case FilterOp::kGe: c.lo = args[0]; break;
      case FilterOp::kLe: c.hi = args[0]; break;
    }
    // Conjuncts on one attribute intersect into a single range.
    auto same = std::find_if(b.conjuncts.begin(), b.conjuncts.end(), [&](const Conjunct& o) { return o.position == c.position; });
    if (same == b.conjuncts.end()) {
      b.conjuncts.push_back(std::move(c));
      continue;
    }
    if (c.lo && (!same->lo || Less(a.type, *same->lo, *c.lo))) same->lo = c.lo;
    if (c.hi && (!same->hi || Less(a.type, *c.hi, *same->hi))) same->hi = c.hi;
  }
  for (int p : q.projection) check(p);
  b.projection = q.projection;
  if (b.projection.empty()) {
    for (const Attribute& a : schema.attributes()) b.projection.push_back(a.position);
  }
  return b;
}

}  // namespace hail
