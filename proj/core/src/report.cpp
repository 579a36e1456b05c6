#include <biphoton/report.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include <biphoton/errors.hpp>
#include <biphoton/io.hpp>

namespace biphoton {

JsonValue JsonValue::object() {
  JsonValue v;
  v.v_ = std::make_shared<ObjectRep>();
  return v;
}

JsonValue JsonValue::array() {
  JsonValue v;
  v.v_ = std::make_shared<ArrayRep>();
  return v;
}

JsonValue JsonValue::str(std::string s) {
  JsonValue v;
  v.v_ = std::move(s);
  return v;
}

JsonValue JsonValue::num(double d) {
  if (!std::isfinite(d))
    throw ValidationError("report: refusing to serialize a non-finite number");
  JsonValue v;
  v.v_ = d;
  return v;
}

JsonValue JsonValue::integer(std::int64_t i) {
  JsonValue v;
  v.v_ = i;
  return v;
}

JsonValue JsonValue::uinteger(std::uint64_t u) {
  JsonValue v;
  v.v_ = u;
  return v;
}

JsonValue JsonValue::boolean(bool b) {
  JsonValue v;
  v.v_ = b;
  return v;
}

JsonValue JsonValue::null() { return JsonValue(); }

JsonValue& JsonValue::operator[](const std::string& key) {
  auto* obj = std::get_if<std::shared_ptr<ObjectRep>>(&v_);
  if (!obj) throw ValidationError("JsonValue: operator[] on a non-object");
  for (auto& [k, val] : (*obj)->fields)
    if (k == key) return val;
  (*obj)->fields.emplace_back(key, JsonValue());
  return (*obj)->fields.back().second;
}

void JsonValue::push_back(JsonValue v) {
  auto* arr = std::get_if<std::shared_ptr<ArrayRep>>(&v_);
  if (!arr) throw ValidationError("JsonValue: push_back on a non-array");
  (*arr)->items.push_back(std::move(v));
}

namespace {

void append_escaped(std::string& out, const std::string& s) {
  out += '"';
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void indent_to(std::string& out, int indent, int depth) {
  if (indent > 0) {
    out += '\n';
    out.append(static_cast<std::size_t>(indent * depth), ' ');
  }
}

} // namespace

void JsonValue::dump_to(std::string& out, int indent, int depth) const {
  if (std::holds_alternative<std::nullptr_t>(v_)) {
    out += "null";
  } else if (const auto* b = std::get_if<bool>(&v_)) {
    out += *b ? "true" : "false";
  } else if (const auto* i = std::get_if<std::int64_t>(&v_)) {
    out += std::to_string(*i);
  } else if (const auto* u = std::get_if<std::uint64_t>(&v_)) {
    out += std::to_string(*u);
  } else if (const auto* d = std::get_if<double>(&v_)) {
    out += format_g17(*d);
  } else if (const auto* s = std::get_if<std::string>(&v_)) {
    append_escaped(out, *s);
  } else if (const auto* obj = std::get_if<std::shared_ptr<ObjectRep>>(&v_)) {
    const auto& fields = (*obj)->fields;
    if (fields.empty()) {
      out += "{}";
      return;
    }
    out += '{';
    for (std::size_t i = 0; i < fields.size(); ++i) {
      indent_to(out, indent, depth + 1);
      append_escaped(out, fields[i].first);
      out += indent > 0 ? ": " : ":";
      fields[i].second.dump_to(out, indent, depth + 1);
      if (i + 1 < fields.size()) out += ',';
    }
    indent_to(out, indent, depth);
    out += '}';
  } else if (const auto* arr = std::get_if<std::shared_ptr<ArrayRep>>(&v_)) {
    const auto& items = (*arr)->items;
    if (items.empty()) {
      out += "[]";
      return;
    }
    out += '[';
    for (std::size_t i = 0; i < items.size(); ++i) {
      indent_to(out, indent, depth + 1);
      items[i].dump_to(out, indent, depth + 1);
      if (i + 1 < items.size()) out += ',';
    }
    indent_to(out, indent, depth);
    out += ']';
  }
}

std::string JsonValue::dump(int indent) const {
  std::string out;
  dump_to(out, indent, 0);
  return out;
}

void write_json(const std::filesystem::path& p, const JsonValue& v) {
  std::ofstream f(p, std::ios::out | std::ios::trunc);
  if (!f) throw ValidationError("cannot open for writing: " + p.string());
  f << v.dump(2) << '\n';
  if (!f) throw ValidationError("write failed: " + p.string());
}

} // namespace biphoton
