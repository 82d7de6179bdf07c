// Record-type algebra: subtyping, witnessing, meet, decomposition into atomic
// types, and question answering against a visual context.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gwl::ttr {

class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MeetConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Label = std::string;

class RecordType;

struct BaseType {
  std::string name;
  bool operator==(const BaseType&) const = default;
};

// Manifest field l=a:T. The witness is an entity id of the base type.
struct SingletonType {
  std::string base;
  std::string witness;
  bool operator==(const SingletonType&) const = default;
};

// Dependent field p(l1, ..., ln); every arg names an earlier entity field.
struct PredicateType {
  std::string pred;
  std::vector<Label> args;
  bool operator==(const PredicateType&) const = default;
};

// Underspecified predicate ?category(args), the hole of a wh-question.
struct HoleType {
  std::string category;
  std::vector<Label> args;
  bool operator==(const HoleType&) const = default;
};

struct NestedType {
  std::shared_ptr<const RecordType> record;
  bool operator==(const NestedType& other) const;
};

using Ty = std::variant<BaseType, SingletonType, PredicateType, HoleType, NestedType>;

struct Field {
  Label label;
  Ty type;
  bool operator==(const Field&) const = default;
};

bool is_dependent(const Ty& t);

// Fields are kept in canonical order: entity fields first, then dependent
// fields, each group in first-seen order. Equality is therefore syntactic.
class RecordType {
 public:
  RecordType() = default;
  explicit RecordType(std::vector<Field> fields);

  const std::vector<Field>& fields() const { return fields_; }
  bool empty() const { return fields_.empty(); }
  std::size_t size() const { return fields_.size(); }
  const Field* find(std::string_view label) const;

  bool operator==(const RecordType&) const = default;

 private:
  std::vector<Field> fields_;
};

struct Entity {
  std::string id;
  std::string type;
  bool operator==(const Entity&) const = default;
};

// Opaque proof that pred holds of the given entity ids.
struct Proof {
  std::string pred;
  std::vector<std::string> args;
  bool operator==(const Proof&) const = default;
};

class Record;

struct NestedRecord {
  std::shared_ptr<const Record> record;
};

using Value = std::variant<Entity, Proof, NestedRecord>;

struct RecordEntry {
  Label label;
  Value value;
};

class Record {
 public:
  Record() = default;
  explicit Record(std::vector<RecordEntry> entries);

  const std::vector<RecordEntry>& entries() const { return entries_; }
  const Value* find(std::string_view label) const;

 private:
  std::vector<RecordEntry> entries_;
};

enum class Polarity { Positive, Negative };

struct AtomicJudgement {
  std::string object_id;
  RecordType rtype;
  Polarity polarity = Polarity::Positive;
};

bool is_subtype(const Ty& t1, const Ty& t2);
bool is_subtype(const RecordType& r1, const RecordType& r2);

bool witnesses(const Record& rec, const RecordType& rt);

RecordType meet(const RecordType& t1, const RecordType& t2);

// Atomic constituents: one dependent field each, plus the entity fields it
// references. Entity-only types decompose to nothing.
std::vector<RecordType> decompose(const RecordType& t);

bool is_atomic(const RecordType& t);

// Predicate name -> category (e.g. red -> colour).
using Ontology = std::map<std::string, std::string>;

// All maximal predicate types that fill `hole` so that the context becomes a
// subtype of the filled question. Empty means no answer.
std::vector<PredicateType> answer_query(const RecordType& question, const Label& hole,
                                        const RecordType& context, const Ontology& ontology);

// Hole-free polar question.
bool answer_polar(const RecordType& question, const RecordType& context);

std::string to_string(const Ty& t);
std::string to_string(const RecordType& rt);
RecordType parse_record_type(std::string_view text);

}  // namespace gwl::ttr
