#include "shb/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

#include <openssl/evp.h>

#include <json.hpp>

#include "shb/error.hpp"

namespace shb {

namespace {

namespace fs = std::filesystem;

constexpr std::string_view kBundleFormat = "shb-problem-bundle";
constexpr int kBundleVersion = 1;

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        const std::size_t start = i;
        while (i < line.size() && !is_space(line[i])) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::size_t> parse_index(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

[[noreturn]] void malformed(std::size_t line_no, std::string_view token, std::string_view why) {
    throw Error(Errc::MalformedLine,
                "line " + std::to_string(line_no) + ": " + std::string(why) + " '" +
                    std::string(token) + "'",
                line_no);
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        fn(line_no, text.substr(pos, end - pos));
        pos = end + 1;
    }
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(), is_space);
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        auto field = line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos);
        while (!field.empty() && is_space(field.front())) field.remove_prefix(1);
        while (!field.empty() && is_space(field.back())) field.remove_suffix(1);
        if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
            field = field.substr(1, field.size() - 2);
        }
        out.push_back(field);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

void append_le(std::vector<unsigned char>& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<unsigned char>(bits & 0xFFu));
        bits >>= 8;
    }
}

double read_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
    return std::bit_cast<double>(bits);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const fs::path& path) {
    const std::string text = read_text(path);
    CsvTable table;
    bool have_header = false;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (is_blank(line)) return;
        const auto fields = split_csv(line);
        if (!have_header) {
            for (auto f : fields) table.header.emplace_back(f);
            have_header = true;
            return;
        }
        if (fields.size() != table.header.size()) {
            malformed(line_no, line, "expected " + std::to_string(table.header.size()) + " fields in");
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (auto f : fields) {
            const auto v = parse_double(f);
            if (!v || !std::isfinite(*v)) malformed(line_no, f, "not a finite number");
            row.push_back(*v);
        }
        table.rows.push_back(std::move(row));
    });
    if (!have_header || table.rows.empty()) throw Error(Errc::EmptyFile, path.string() + " has no data");
    return table;
}

}  // namespace

std::string format_number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Matrix parse_libsvm_text(const std::string& text) {
    struct Entry {
        std::size_t row, col;
        double value;
    };
    std::vector<Entry> entries;
    std::size_t rows = 0;
    std::size_t cols = 0;

    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        if (is_blank(line)) return;
        const auto tokens = split_whitespace(line);
        if (!parse_double(tokens.front())) malformed(line_no, tokens.front(), "bad label");
        std::size_t last_index = 0;
        for (std::size_t t = 1; t < tokens.size(); ++t) {
            const auto tok = tokens[t];
            const auto colon = tok.find(':');
            if (colon == std::string_view::npos) malformed(line_no, tok, "expected index:value, got");
            const auto index = parse_index(tok.substr(0, colon));
            if (!index || *index == 0) malformed(line_no, tok, "bad 1-based index in");
            const auto value = parse_double(tok.substr(colon + 1));
            if (!value || !std::isfinite(*value)) malformed(line_no, tok, "bad value in");
            if (*index <= last_index) {
                throw Error(Errc::NonMonotoneIndices,
                            "line " + std::to_string(line_no) + ": index " +
                                std::to_string(*index) + " does not increase",
                            line_no);
            }
            last_index = *index;
            cols = std::max(cols, *index);
            entries.push_back({rows, *index - 1, *value});
        }
        ++rows;
    });
    if (rows == 0) throw Error(Errc::EmptyFile, "no data lines");

    Matrix a(rows, cols);
    for (const auto& e : entries) a(e.row, e.col) = e.value;
    return a;
}

Matrix parse_libsvm(const fs::path& path) {
    try {
        return parse_libsvm_text(read_text(path));
    } catch (const Error& e) {
        if (e.code() == Errc::Io) throw;
        throw Error(e.code(), path.string() + ": " + e.what(), e.position());
    }
}

Matrix read_csv_matrix(const fs::path& path) {
    const CsvTable t = read_csv(path);
    Matrix a(t.rows.size(), t.header.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        std::copy(t.rows[i].begin(), t.rows[i].end(), a.row(i).begin());
    return a;
}

void write_csv_matrix(const fs::path& path, const Matrix& a) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    for (std::size_t j = 0; j < a.cols(); ++j) out << (j ? "," : "") << 'c' << (j + 1);
    out << "\r\n";
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out << (j ? "," : "") << format_number(a(i, j));
        out << "\r\n";
    }
    if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

Vector read_vector(const fs::path& path) {
    std::string text = read_text(path);
    std::replace(text.begin(), text.end(), ',', ' ');
    std::replace(text.begin(), text.end(), '\n', ' ');
    Vector out;
    for (auto tok : split_whitespace(text)) {
        const auto v = parse_double(tok);
        if (!v || !std::isfinite(*v)) malformed(0, tok, "not a finite number");
        out.push_back(*v);
    }
    return out;
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::Io, "SHA-256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

void write_bundle(const fs::path& manifest, const Problem& problem, std::uint64_t seed) {
    problem.validate();
    std::vector<unsigned char> payload;
    payload.reserve(8 * (problem.a.entries().size() + problem.b.size() + problem.cols()));
    for (double v : problem.a.entries()) append_le(payload, v);
    for (double v : problem.b) append_le(payload, v);
    if (problem.planted_solution) {
        for (double v : *problem.planted_solution) append_le(payload, v);
    }

    fs::path payload_path = manifest;
    payload_path.replace_extension(".bin");
    {
        std::ofstream out(payload_path, std::ios::binary);
        if (!out) throw Error(Errc::Io, "cannot write " + payload_path.string());
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
        if (!out) throw Error(Errc::Io, "write failed for " + payload_path.string());
    }

    nlohmann::ordered_json j;
    j["format"] = kBundleFormat;
    j["version"] = kBundleVersion;
    j["rows"] = problem.rows();
    j["cols"] = problem.cols();
    j["has_planted_solution"] = problem.planted_solution.has_value();
    j["seed"] = seed;
    j["source"] = problem.source;
    j["payload"] = payload_path.filename().string();
    j["payload_bytes"] = payload.size();
    j["dtype"] = "float64";
    j["byte_order"] = "little";
    j["layout"] = {"A row-major rows*cols", "b rows", "planted_solution cols (optional)"};
    j["sha256"] = sha256_hex(payload);

    std::ofstream out(manifest, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + manifest.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(Errc::Io, "write failed for " + manifest.string());
}

Problem read_bundle(const fs::path& manifest) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(manifest));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedLine, manifest.string() + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kBundleFormat ||
            j.at("version").get<int>() != kBundleVersion) {
            throw Error(Errc::InvalidArgument, manifest.string() + " is not a version-1 bundle");
        }
        const auto rows = j.at("rows").get<std::size_t>();
        const auto cols = j.at("cols").get<std::size_t>();
        const bool planted = j.at("has_planted_solution").get<bool>();

        const fs::path payload_path = manifest.parent_path() / j.at("payload").get<std::string>();
        const std::string raw = read_text(payload_path);
        const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
        if (sha256_hex({bytes, raw.size()}) != j.at("sha256").get<std::string>()) {
            throw Error(Errc::ChecksumMismatch, payload_path.string() + " fails its checksum");
        }
        const std::size_t expected = 8 * (rows * cols + rows + (planted ? cols : 0));
        if (raw.size() != expected) {
            throw Error(Errc::DimensionMismatch, payload_path.string() + " has " +
                                                     std::to_string(raw.size()) +
                                                     " bytes, expected " +
                                                     std::to_string(expected));
        }

        std::size_t offset = 0;
        auto next = [&] {
            const double v = read_le(bytes + offset);
            offset += 8;
            return v;
        };
        Problem p;
        p.a = Matrix(rows, cols);
        for (double& v : p.a.entries()) v = next();
        p.b.resize(rows);
        for (double& v : p.b) v = next();
        if (planted) {
            Vector x(cols);
            for (double& v : x) v = next();
            p.planted_solution = std::move(x);
        }
        p.source = j.value("source", manifest.string());
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedLine, manifest.string() + ": " + e.what());
    }
}

InputFormat parse_input_format(const std::string& text) {
    if (text == "libsvm") return InputFormat::Libsvm;
    if (text == "csv") return InputFormat::Csv;
    if (text == "bundle") return InputFormat::Bundle;
    throw Error(Errc::InvalidArgument, "unknown input format '" + text + "'");
}

InputFormat infer_input_format(const fs::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".json") return InputFormat::Bundle;
    if (ext == ".csv") return InputFormat::Csv;
    return InputFormat::Libsvm;
}

Problem load_problem(const fs::path& path, InputFormat format, std::uint64_t seed) {
    switch (format) {
    case InputFormat::Bundle: return read_bundle(path);
    case InputFormat::Libsvm: return plant_solution(parse_libsvm(path), seed, path.string());
    case InputFormat::Csv: {
        const CsvTable t = read_csv(path);
        const auto b_col = std::find(t.header.begin(), t.header.end(), "b");
        if (b_col == t.header.end()) {
            return plant_solution(read_csv_matrix(path), seed, path.string());
        }
        const auto bj = static_cast<std::size_t>(b_col - t.header.begin());
        Problem p;
        p.a = Matrix(t.rows.size(), t.header.size() - 1);
        p.b.resize(t.rows.size());
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            std::size_t c = 0;
            for (std::size_t j = 0; j < t.header.size(); ++j) {
                if (j == bj) {
                    p.b[i] = t.rows[i][j];
                } else {
                    p.a(i, c++) = t.rows[i][j];
                }
            }
        }
        p.source = path.string();
        p.validate();
        return p;
    }
    }
    throw Error(Errc::InvalidArgument, "unknown input format");
}

}  // namespace shb
