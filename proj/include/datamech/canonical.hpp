#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

#include "datamech/digest.hpp"
#include "datamech/errors.hpp"

namespace datamech {

using json = nlohmann::json;

namespace detail {

// Fixed float formatting: 12 significant digits, shortest form, no locale.
inline void append_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    throw DataError("canonical json: non-finite number");
  }
  if (v == 0.0) {
    out += "0";  // normalizes -0
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out += buf;
}

inline void append_canonical(std::string& out, const json& value) {
  switch (value.type()) {
    case json::value_t::null:
      out += "null";
      break;
    case json::value_t::boolean:
      out += value.get<bool>() ? "true" : "false";
      break;
    case json::value_t::number_integer:
      out += std::to_string(value.get<std::int64_t>());
      break;
    case json::value_t::number_unsigned:
      out += std::to_string(value.get<std::uint64_t>());
      break;
    case json::value_t::number_float:
      append_number(out, value.get<double>());
      break;
    case json::value_t::string:
      out += json(value.get<std::string>()).dump();
      break;
    case json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& item : value) {
        if (!first) out += ',';
        first = false;
        append_canonical(out, item);
      }
      out += ']';
      break;
    }
    case json::value_t::object: {
      // nlohmann::json objects are std::map-backed: iteration is already
      // sorted by key, which is exactly the canonical order.
      out += '{';
      bool first = true;
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        append_canonical(out, it.value());
      }
      out += '}';
      break;
    }
    default:
      throw DataError("canonical json: unsupported value type");
  }
}

}  // namespace detail

// Canonical serialization: sorted keys, 12-significant-digit floats, UTF-8,
// no insignificant whitespace. Equal values always produce equal bytes.
inline std::string canonical_dump(const json& value) {
  std::string out;
  detail::append_canonical(out, value);
  return out;
}

inline std::string canonical_digest(const json& value) { return sha256_hex(canonical_dump(value)); }

}  // namespace datamech
