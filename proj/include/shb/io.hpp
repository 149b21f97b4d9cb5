#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "shb/linalg.hpp"
#include "shb/problem.hpp"

namespace shb {

/// Reads a LIBSVM text file: "<label> <index>:<value> ..." with 1-based,
/// strictly increasing indices. Labels are discarded; missing entries are zero.
/// Errors: MalformedLine, NonMonotoneIndices (position = line), EmptyFile, Io.
Matrix parse_libsvm(const std::filesystem::path& path);
Matrix parse_libsvm_text(const std::string& text);

/// Dense CSV with a header row; one data row per matrix row.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& a);

/// Whitespace- or comma-separated list of numbers.
Vector read_vector(const std::filesystem::path& path);

/// Problem bundle: JSON manifest at `manifest` plus `<stem>.bin` alongside it
/// holding A (row-major), b and the planted solution as little-endian float64.
/// The manifest carries the payload's SHA-256.
void write_bundle(const std::filesystem::path& manifest, const Problem& problem,
                  std::uint64_t seed = 0);
Problem read_bundle(const std::filesystem::path& manifest);

std::string sha256_hex(std::span<const unsigned char> bytes);

/// Shortest decimal text that reads back to exactly `v`.
std::string format_number(double v);

enum class InputFormat { Libsvm, Csv, Bundle };

InputFormat parse_input_format(const std::string& text);
InputFormat infer_input_format(const std::filesystem::path& path);

/// Loads a Problem. LIBSVM and CSV inputs get a planted solution drawn with
/// `seed`; a CSV column named "b" is used as the right-hand side instead.
Problem load_problem(const std::filesystem::path& path, InputFormat format,
                     std::uint64_t seed);

}  // namespace shb
