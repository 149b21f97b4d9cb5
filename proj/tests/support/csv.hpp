#pragma once

// Strict RFC 4180 reader for checking emitted files: CRLF record separators,
// quoted fields may hold commas, quotes and line breaks, bare fields may not
// hold quotes or CR/LF, and every record has the header's field count.

#include <stdexcept>
#include <string>
#include <vector>

namespace strict_csv {

using Table = std::vector<std::vector<std::string>>;

inline Table parse(const std::string& text) {
    Table out;
    std::vector<std::string> record;
    std::string field;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto end_record = [&] {
        record.push_back(field);
        field.clear();
        if (!out.empty() && record.size() != out.front().size()) {
            throw std::runtime_error("record " + std::to_string(out.size() + 1) +
                                     " has a different field count");
        }
        out.push_back(std::move(record));
        record.clear();
    };
    while (i < n) {
        if (text[i] == '"') {
            if (!field.empty()) throw std::runtime_error("quote inside bare field");
            ++i;
            while (true) {
                if (i >= n) throw std::runtime_error("unterminated quoted field");
                if (text[i] == '"') {
                    if (i + 1 < n && text[i + 1] == '"') {
                        field += '"';
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                field += text[i++];
            }
            if (i < n && text[i] != ',' && text[i] != '\r') {
                throw std::runtime_error("garbage after quoted field");
            }
            continue;
        }
        const char c = text[i];
        if (c == ',') {
            record.push_back(field);
            field.clear();
            ++i;
        } else if (c == '\r') {
            if (i + 1 >= n || text[i + 1] != '\n') throw std::runtime_error("bare CR");
            end_record();
            i += 2;
        } else if (c == '\n') {
            throw std::runtime_error("bare LF line break");
        } else {
            field += c;
            ++i;
        }
    }
    if (!field.empty() || !record.empty()) end_record();
    return out;
}

}  // namespace strict_csv
