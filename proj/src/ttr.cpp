#include "gwl/ttr.hpp"

#include <algorithm>
#include <set>

namespace gwl::ttr {

bool NestedType::operator==(const NestedType& other) const {
  if (record == other.record) return true;
  if (!record || !other.record) return false;
  return *record == *other.record;
}

bool is_dependent(const Ty& t) {
  return std::holds_alternative<PredicateType>(t) || std::holds_alternative<HoleType>(t);
}

namespace {

const std::vector<Label>* dependent_args(const Ty& t) {
  if (const auto* p = std::get_if<PredicateType>(&t)) return &p->args;
  if (const auto* h = std::get_if<HoleType>(&t)) return &h->args;
  return nullptr;
}

}  // namespace

RecordType::RecordType(std::vector<Field> fields) {
  std::set<std::string_view> entity_labels;
  std::set<std::string_view> seen;
  for (const auto& f : fields) {
    if (f.label.empty()) throw StructuralError("empty field label");
    if (!seen.insert(f.label).second) {
      throw StructuralError("duplicate label '" + f.label + "'");
    }
    if (const auto* args = dependent_args(f.type)) {
      for (const auto& a : *args) {
        if (!entity_labels.count(a)) {
          throw StructuralError("field '" + f.label + "' depends on '" + a +
                                "', which is not an earlier entity field");
        }
      }
    } else {
      entity_labels.insert(f.label);
    }
    if (const auto* s = std::get_if<SingletonType>(&f.type); s && s->witness.empty()) {
      throw StructuralError("singleton field '" + f.label + "' has no witness");
    }
    if (const auto* n = std::get_if<NestedType>(&f.type); n && !n->record) {
      throw StructuralError("nested field '" + f.label + "' has no record type");
    }
  }
  std::stable_partition(fields.begin(), fields.end(),
                        [](const Field& f) { return !is_dependent(f.type); });
  fields_ = std::move(fields);
}

const Field* RecordType::find(std::string_view label) const {
  for (const auto& f : fields_) {
    if (f.label == label) return &f;
  }
  return nullptr;
}

Record::Record(std::vector<RecordEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string_view> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.label).second) {
      throw StructuralError("duplicate record label '" + e.label + "'");
    }
  }
}

const Value* Record::find(std::string_view label) const {
  for (const auto& e : entries_) {
    if (e.label == label) return &e.value;
  }
  return nullptr;
}

bool is_subtype(const Ty& t1, const Ty& t2) {
  if (t1 == t2) return true;
  if (const auto* s = std::get_if<SingletonType>(&t1)) {
    if (const auto* b = std::get_if<BaseType>(&t2)) return s->base == b->name;
    return false;
  }
  const auto* n1 = std::get_if<NestedType>(&t1);
  const auto* n2 = std::get_if<NestedType>(&t2);
  if (n1 && n2) return is_subtype(*n1->record, *n2->record);
  return false;
}

bool is_subtype(const RecordType& r1, const RecordType& r2) {
  for (const auto& f2 : r2.fields()) {
    const Field* f1 = r1.find(f2.label);
    if (f1 == nullptr || !is_subtype(f1->type, f2.type)) return false;
  }
  return true;
}

namespace {

bool value_of_type(const Value& v, const Ty& t, const Record& rec) {
  if (const auto* b = std::get_if<BaseType>(&t)) {
    const auto* e = std::get_if<Entity>(&v);
    return e != nullptr && e->type == b->name;
  }
  if (const auto* s = std::get_if<SingletonType>(&t)) {
    const auto* e = std::get_if<Entity>(&v);
    return e != nullptr && e->type == s->base && e->id == s->witness;
  }
  if (const auto* n = std::get_if<NestedType>(&t)) {
    const auto* nr = std::get_if<NestedRecord>(&v);
    return nr != nullptr && nr->record && witnesses(*nr->record, *n->record);
  }
  const auto* proof = std::get_if<Proof>(&v);
  if (proof == nullptr) return false;
  const auto* args = dependent_args(t);
  if (args->size() != proof->args.size()) return false;
  for (std::size_t i = 0; i < args->size(); ++i) {
    const Value* arg = rec.find((*args)[i]);
    const auto* e = arg ? std::get_if<Entity>(arg) : nullptr;
    if (e == nullptr || e->id != proof->args[i]) return false;
  }
  if (const auto* p = std::get_if<PredicateType>(&t)) return proof->pred == p->pred;
  return true;
}

}  // namespace

bool witnesses(const Record& rec, const RecordType& rt) {
  for (const auto& f : rt.fields()) {
    const Value* v = rec.find(f.label);
    if (v == nullptr || !value_of_type(*v, f.type, rec)) return false;
  }
  return true;
}

namespace {

Ty meet_types(const Field& a, const Field& b) {
  if (is_subtype(a.type, b.type)) return a.type;
  if (is_subtype(b.type, a.type)) return b.type;
  const auto* na = std::get_if<NestedType>(&a.type);
  const auto* nb = std::get_if<NestedType>(&b.type);
  if (na && nb) {
    return NestedType{std::make_shared<const RecordType>(meet(*na->record, *nb->record))};
  }
  throw MeetConflict("label '" + a.label + "' has incompatible types " + to_string(a.type) +
                     " and " + to_string(b.type));
}

}  // namespace

RecordType meet(const RecordType& t1, const RecordType& t2) {
  std::vector<Field> entities;
  std::vector<Field> dependents;
  auto add = [&](const Field& f) {
    auto& group = is_dependent(f.type) ? dependents : entities;
    auto& other = is_dependent(f.type) ? entities : dependents;
    for (auto& g : group) {
      if (g.label == f.label) {
        g.type = meet_types(g, f);
        return;
      }
    }
    for (const auto& g : other) {
      if (g.label == f.label) {
        throw MeetConflict("label '" + f.label + "' is an entity field on one side only");
      }
    }
    group.push_back(f);
  };
  for (const auto& f : t1.fields()) add(f);
  for (const auto& f : t2.fields()) add(f);
  entities.insert(entities.end(), dependents.begin(), dependents.end());
  return RecordType(std::move(entities));
}

std::vector<RecordType> decompose(const RecordType& t) {
  std::vector<RecordType> out;
  for (const auto& f : t.fields()) {
    const auto* args = dependent_args(f.type);
    if (args == nullptr) continue;
    std::vector<Field> fields;
    for (const auto& e : t.fields()) {
      if (is_dependent(e.type)) break;
      if (std::find(args->begin(), args->end(), e.label) != args->end()) fields.push_back(e);
    }
    fields.push_back(f);
    RecordType atom(std::move(fields));
    if (std::find(out.begin(), out.end(), atom) == out.end()) out.push_back(std::move(atom));
  }
  return out;
}

bool is_atomic(const RecordType& t) {
  return std::count_if(t.fields().begin(), t.fields().end(),
                       [](const Field& f) { return is_dependent(f.type); }) == 1;
}

std::vector<PredicateType> answer_query(const RecordType& question, const Label& hole,
                                        const RecordType& context, const Ontology& ontology) {
  const Field* hole_field = question.find(hole);
  if (hole_field == nullptr) {
    throw StructuralError("hole label '" + hole + "' is not a field of the question");
  }
  const auto* h = std::get_if<HoleType>(&hole_field->type);
  if (h == nullptr) throw StructuralError("field '" + hole + "' is not a question hole");

  std::vector<PredicateType> answers;
  for (const auto& f : context.fields()) {
    const auto* p = std::get_if<PredicateType>(&f.type);
    if (p == nullptr || p->args != h->args) continue;
    auto cat = ontology.find(p->pred);
    if (cat == ontology.end() || cat->second != h->category) continue;
    std::vector<Field> filled = question.fields();
    for (auto& q : filled) {
      if (q.label == hole) q.type = *p;
    }
    if (is_subtype(context, RecordType(std::move(filled))) &&
        std::find(answers.begin(), answers.end(), *p) == answers.end()) {
      answers.push_back(*p);
    }
  }
  return answers;
}

bool answer_polar(const RecordType& question, const RecordType& context) {
  return is_subtype(context, question);
}

}  // namespace gwl::ttr
