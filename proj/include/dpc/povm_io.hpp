#pragma once

// POVM documents:
//   {"dim": 2, "labels": ["+", "-"], "complete": true,
//    "elements": [[[[re, im], ...], ...], ...], "metadata": {...}}
// Doubles are written in shortest round-trip form, so read(write(p)) == p
// bit for bit.

#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "dpc/errors.hpp"
#include "dpc/povm.hpp"

namespace dpc {

using Json = nlohmann::json;

struct PovmDocument {
    PovmSet povm;
    Json metadata = Json::object();
};

inline Json povm_to_json(const PovmSet& povm, const Json& metadata = Json::object()) {
    check_shape(povm);
    Json elements = Json::array();
    for (const auto& e : povm.elements) {
        if (!e.allFinite()) throw InvalidInput("povm_to_json: non-finite matrix entry");
        Json rows = Json::array();
        for (long i = 0; i < e.rows(); ++i) {
            Json row = Json::array();
            for (long j = 0; j < e.cols(); ++j) row.push_back({e(i, j).real(), e(i, j).imag()});
            rows.push_back(std::move(row));
        }
        elements.push_back(std::move(rows));
    }
    return {{"dim", povm.dim},
            {"labels", povm.labels},
            {"complete", povm.complete},
            {"elements", std::move(elements)},
            {"metadata", metadata}};
}

namespace detail {

inline const Json& require_field(const Json& doc, const char* key, bool (Json::*kind)() const noexcept,
                                 const char* kind_name) {
    const auto it = doc.find(key);
    if (it == doc.end()) throw SchemaError(std::string("povm document: missing '") + key + "'");
    if (!((*it).*kind)()) throw SchemaError(std::string("povm document: '") + key + "' must be " + kind_name);
    return *it;
}

inline double json_number(const Json& v, const std::string& where) {
    if (!v.is_number()) throw SchemaError("povm document: " + where + " must be a number");
    return v.get<double>();
}

}  // namespace detail

inline PovmDocument povm_from_json(const Json& doc) {
    if (!doc.is_object()) throw SchemaError("povm document: top level must be an object");
    const Json& dim = detail::require_field(doc, "dim", &Json::is_number_integer, "an integer");
    const Json& labels = detail::require_field(doc, "labels", &Json::is_array, "an array");
    const Json& elements = detail::require_field(doc, "elements", &Json::is_array, "an array");

    PovmDocument out;
    out.povm.dim = dim.get<long>();
    if (out.povm.dim < 1) throw SchemaError("povm document: 'dim' must be >= 1");
    for (const auto& l : labels) {
        if (!l.is_string()) throw SchemaError("povm document: labels must be strings");
        out.povm.labels.push_back(l.get<std::string>());
    }
    if (labels.size() != elements.size()) throw SchemaError("povm document: labels and elements differ in length");
    const auto n = static_cast<std::size_t>(out.povm.dim);
    for (std::size_t k = 0; k < elements.size(); ++k) {
        const Json& rows = elements[k];
        const std::string where = "element " + std::to_string(k);
        if (!rows.is_array() || rows.size() != n) throw SchemaError("povm document: " + where + " must have dim rows");
        CMatrix e(out.povm.dim, out.povm.dim);
        for (std::size_t i = 0; i < n; ++i) {
            if (!rows[i].is_array() || rows[i].size() != n) {
                throw SchemaError("povm document: " + where + " row " + std::to_string(i) + " must have dim entries");
            }
            for (std::size_t j = 0; j < n; ++j) {
                const Json& z = rows[i][j];
                if (!z.is_array() || z.size() != 2) throw SchemaError("povm document: " + where + " entries must be [re, im]");
                e(static_cast<long>(i), static_cast<long>(j)) = Complex(detail::json_number(z[0], where),
                                                                        detail::json_number(z[1], where));
            }
        }
        out.povm.elements.push_back(std::move(e));
    }
    if (const auto it = doc.find("complete"); it != doc.end()) {
        if (!it->is_boolean()) throw SchemaError("povm document: 'complete' must be a boolean");
        out.povm.complete = it->get<bool>();
    }
    if (const auto it = doc.find("metadata"); it != doc.end()) out.metadata = *it;
    return out;
}

inline void write_povm_json(std::ostream& os, const PovmSet& povm, const Json& metadata = Json::object()) {
    os << povm_to_json(povm, metadata).dump(2) << '\n';
}

/// Parses a whole stream as JSON; syntax errors carry line and column.
inline Json read_json(std::istream& is) {
    const std::string text{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ParseError("invalid JSON", line, column);
    }
}

inline PovmDocument read_povm_json(std::istream& is) { return povm_from_json(read_json(is)); }

}  // namespace dpc
