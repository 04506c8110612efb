#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hail/schema.h"

namespace hail {

enum class FilterOp { kEq, kBetween, kGe, kLe };

struct FilterTerm {
  int position = 0;
  FilterOp op = FilterOp::kEq;
  std::vector<std::string> args;

  bool operator==(const FilterTerm&) const = default;
};

// `filter="@3 between(1999-01-01,2000-01-01) and @1 =(x)", projection={@1}`,
// optionally wrapped in `@HailQuery(...)`. Either part may be omitted.
struct QueryAnnotation {
  std::vector<FilterTerm> filter;  // conjunction
  std::vector<int> projection;     // empty = every attribute

  bool operator==(const QueryAnnotation&) const = default;
};

QueryAnnotation ParseAnnotation(std::string_view text);
// Same grammar split over two flags: `@3 between(a,b) and ...` and `@1,@2`.
QueryAnnotation AnnotationFromFlags(std::string_view filter, std::string_view projection);
std::string FormatAnnotation(const QueryAnnotation& q);

// Inclusive range over one attribute; an absent bound is open.
struct Conjunct {
  int position = 0;
  AttrType type = AttrType::kInt32;
  std::optional<Value> lo;
  std::optional<Value> hi;

  bool Matches(const Value& v) const;
  // Bounds in OrderedKey space; fixed-size attributes only.
  uint64_t key_lo() const;
  uint64_t key_hi() const;
};

// An annotation checked against a schema, literals parsed to typed values.
struct BoundQuery {
  Schema schema;
  std::vector<Conjunct> conjuncts;
  std::vector<int> projection;  // resolved: never empty

  bool has_filter() const { return !conjuncts.empty(); }
  const Conjunct* ConjunctOn(int position) const;
  bool MatchesAll(const Record& full_row) const;
};

BoundQuery Bind(const QueryAnnotation& q, const Schema& schema);

}  // namespace hail
