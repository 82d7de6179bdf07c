// Text form: [x:Ind, y=o1:Ind, c:red(x), q:?colour(x), r:[z:Ind]]
#include <cctype>

#include "gwl/ttr.hpp"

namespace gwl::ttr {

namespace {

std::string join_args(const std::vector<Label>& args) {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ',';
    out += args[i];
  }
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  RecordType parse_all() {
    RecordType rt = record_type();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return rt;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw StructuralError("record type parse error at " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  std::string ident() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const auto ch = static_cast<unsigned char>(text_[pos_]);
      if (!(std::isalnum(ch) || ch == '_' || ch == '-' || ch == '.')) break;
      ++pos_;
    }
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::vector<Label> args() {
    std::vector<Label> out;
    expect('(');
    if (accept(')')) return out;
    do {
      out.push_back(ident());
    } while (accept(','));
    expect(')');
    return out;
  }

  RecordType record_type() {
    std::vector<Field> fields;
    expect('[');
    if (accept(']')) return RecordType{};
    do {
      fields.push_back(field());
    } while (accept(','));
    expect(']');
    return RecordType(std::move(fields));
  }

  Field field() {
    Field f;
    f.label = ident();
    std::string witness;
    if (accept('=')) witness = ident();
    expect(':');
    if (!witness.empty()) {
      f.type = SingletonType{ident(), witness};
      return f;
    }
    if (peek('[')) {
      f.type = NestedType{std::make_shared<const RecordType>(record_type())};
    } else if (accept('?')) {
      std::string cat = ident();
      f.type = HoleType{std::move(cat), args()};
    } else {
      std::string name = ident();
      if (peek('(')) {
        f.type = PredicateType{std::move(name), args()};
      } else {
        f.type = BaseType{std::move(name)};
      }
    }
    return f;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(const Ty& t) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, BaseType>) {
          return v.name;
        } else if constexpr (std::is_same_v<T, SingletonType>) {
          return "=" + v.witness + ":" + v.base;
        } else if constexpr (std::is_same_v<T, PredicateType>) {
          return v.pred + "(" + join_args(v.args) + ")";
        } else if constexpr (std::is_same_v<T, HoleType>) {
          return "?" + v.category + "(" + join_args(v.args) + ")";
        } else {
          return to_string(*v.record);
        }
      },
      t);
}

std::string to_string(const RecordType& rt) {
  std::string out = "[";
  bool first = true;
  for (const auto& f : rt.fields()) {
    if (!first) out += ", ";
    first = false;
    out += f.label;
    if (std::holds_alternative<SingletonType>(f.type)) {
      out += to_string(f.type);
    } else {
      out += ':';
      out += to_string(f.type);
    }
  }
  out += ']';
  return out;
}

RecordType parse_record_type(std::string_view text) { return Parser(text).parse_all(); }

}  // namespace gwl::ttr
