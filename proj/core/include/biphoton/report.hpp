#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace biphoton {

/// Small ordered JSON document: fields serialize in insertion order and
/// doubles are written with %.17g, so identical runs yield byte-identical
/// reports. Rejects non-finite numbers (reports must stay self-contained).
class JsonValue {
public:
  JsonValue() : v_(nullptr) {}

  static JsonValue object();
  static JsonValue array();
  static JsonValue str(std::string s);
  static JsonValue num(double d);       // throws ValidationError on NaN/Inf
  static JsonValue integer(std::int64_t i);
  static JsonValue uinteger(std::uint64_t u);
  static JsonValue boolean(bool b);
  static JsonValue null();

  /// Object field access; inserts on first use. Only valid on objects.
  JsonValue& operator[](const std::string& key);

  /// Array append. Only valid on arrays.
  void push_back(JsonValue v);

  std::string dump(int indent = 2) const;

private:
  struct ObjectRep {
    std::vector<std::pair<std::string, JsonValue>> fields;
  };
  struct ArrayRep {
    std::vector<JsonValue> items;
  };
  using Rep = std::variant<std::nullptr_t, bool, std::int64_t, std::uint64_t, double,
                           std::string, std::shared_ptr<ObjectRep>,
                           std::shared_ptr<ArrayRep>>;

  void dump_to(std::string& out, int indent, int depth) const;

  Rep v_;
};

/// Writes dump() plus a trailing newline.
void write_json(const std::filesystem::path& p, const JsonValue& v);

} // namespace biphoton
