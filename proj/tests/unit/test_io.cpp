#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <cstring>
#include <random>

#include <unistd.h>

#include "shb/error.hpp"
#include "shb/io.hpp"
#include "shb/problem.hpp"
#include "support/corpus.hpp"

using namespace shb;
namespace fs = std::filesystem;

namespace {

template <class F>
Errc code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no shb::Error thrown";
    return Errc::Io;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("shb_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

const fs::path kCorpus = fs::path(SHB_TEST_DATA_DIR) / "libsvm";

}  // namespace

TEST(Libsvm, MinimalFile) {
    EXPECT_EQ(parse_libsvm_text("1 1:1.0\n0 2:2.0\n"), (Matrix{{1, 0}, {0, 2}}));
}

TEST(Libsvm, ErrorTaxonomyWithLinePositions) {
    try {
        parse_libsvm_text("1 1:1\n1 2:x\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MalformedLine);
        EXPECT_EQ(e.position(), 2u);
        EXPECT_NE(std::string(e.what()).find("2:x"), std::string::npos);
    }
    EXPECT_EQ(code_of([] { parse_libsvm_text("1 3:1 3:2\n"); }), Errc::NonMonotoneIndices);
    EXPECT_EQ(code_of([] { parse_libsvm_text(""); }), Errc::EmptyFile);
    EXPECT_EQ(code_of([] { parse_libsvm_text("1 1:nan\n"); }), Errc::MalformedLine);
    EXPECT_EQ(code_of([] { parse_libsvm_text("1 -1:2\n"); }), Errc::MalformedLine);
    EXPECT_EQ(code_of([] { parse_libsvm_text("1 1:\n"); }), Errc::MalformedLine);
    EXPECT_EQ(code_of([] { parse_libsvm(fs::path("/nonexistent/file.svm")); }), Errc::Io);
}

TEST(Libsvm, CorpusMatchesExpectations) {
    const auto outcomes = corpus::check(kCorpus);
    EXPECT_EQ(outcomes.size(), 20u);
    for (const auto& o : outcomes) EXPECT_TRUE(o.pass) << o.file << ": " << o.detail;
}

TEST(Libsvm, ShuffledLinesGiveRowPermutation) {
    const Matrix a = parse_libsvm(kCorpus / "11_shuffled_a.svm");
    const Matrix b = parse_libsvm(kCorpus / "12_shuffled_b.svm");
    auto rows_of = [](const Matrix& m) {
        std::vector<std::vector<double>> r;
        for (std::size_t i = 0; i < m.rows(); ++i) r.emplace_back(m.row(i).begin(), m.row(i).end());
        std::sort(r.begin(), r.end());
        return r;
    };
    EXPECT_EQ(rows_of(a), rows_of(b));

    // Same property on a larger random file.
    std::mt19937_64 gen(1);
    std::vector<std::string> lines;
    for (int i = 0; i < 200; ++i) {
        std::string line = std::to_string(i % 2);
        for (int j = 1; j <= 30; ++j) {
            if (gen() % 3 == 0) line += " " + std::to_string(j) + ":" + std::to_string(gen() % 1000);
        }
        lines.push_back(line + "\n");
    }
    // Pin the column count in both orders.
    lines.push_back("0 30:1\n");
    std::string original, shuffled;
    for (const auto& l : lines) original += l;
    std::shuffle(lines.begin(), lines.end(), gen);
    for (const auto& l : lines) shuffled += l;
    EXPECT_EQ(rows_of(parse_libsvm_text(original)), rows_of(parse_libsvm_text(shuffled)));
}

TEST(Csv, MatrixRoundTrip) {
    TempDir dir;
    const Problem p = gen_problem(7, 3, 5);
    write_csv_matrix(dir.path() / "a.csv", p.a);
    EXPECT_EQ(read_csv_matrix(dir.path() / "a.csv"), p.a);
    const std::string text = slurp(dir.path() / "a.csv");
    EXPECT_EQ(text.substr(0, 10), "c1,c2,c3\r\n");
}

TEST(Csv, LoadProblemUsesBColumn) {
    TempDir dir;
    write(dir.path() / "sys.csv", "x1,x2,b\n1,0,3\n0,2,4\n");
    const Problem p = load_problem(dir.path() / "sys.csv", InputFormat::Csv, 0);
    EXPECT_EQ(p.a, (Matrix{{1, 0}, {0, 2}}));
    EXPECT_EQ(p.b, (Vector{3, 4}));
    EXPECT_FALSE(p.planted_solution);

    write(dir.path() / "plain.csv", "c1,c2\n1,2\n3,4\n5,6\n");
    const Problem q = load_problem(dir.path() / "plain.csv", InputFormat::Csv, 9);
    ASSERT_TRUE(q.planted_solution);
    EXPECT_NO_THROW(q.validate());

    write(dir.path() / "ragged.csv", "c1,c2\n1\n");
    EXPECT_EQ(code_of([&] { read_csv_matrix(dir.path() / "ragged.csv"); }), Errc::MalformedLine);
    write(dir.path() / "empty.csv", "");
    EXPECT_EQ(code_of([&] { read_csv_matrix(dir.path() / "empty.csv"); }), Errc::EmptyFile);
}

TEST(Bundle, RoundTripIsBitExact) {
    TempDir dir;
    Problem p = gen_problem(13, 6, 21);
    p.a(0, 0) = 0.1 + 0.2;  // not representable in short decimal
    p.a(1, 1) = -0.0;
    p.a(2, 2) = 5e-324;
    p.b = multiply(p.a, *p.planted_solution);
    write_bundle(dir.path() / "p.json", p, 21);
    const Problem q = read_bundle(dir.path() / "p.json");
    ASSERT_EQ(q.a.rows(), p.a.rows());
    EXPECT_EQ(std::memcmp(q.a.entries().data(), p.a.entries().data(),
                          p.a.entries().size() * sizeof(double)),
              0);
    EXPECT_EQ(std::memcmp(q.b.data(), p.b.data(), p.b.size() * sizeof(double)), 0);
    ASSERT_TRUE(q.planted_solution);
    EXPECT_EQ(*q.planted_solution, *p.planted_solution);
    EXPECT_EQ(q.source, p.source);

    const auto manifest = nlohmann::json::parse(slurp(dir.path() / "p.json"));
    EXPECT_EQ(manifest["rows"], 13);
    EXPECT_EQ(manifest["cols"], 6);
    EXPECT_EQ(manifest["seed"], 21);
    EXPECT_EQ(manifest["payload_bytes"], (13 * 6 + 13 + 6) * 8);
    EXPECT_EQ(manifest["sha256"].get<std::string>().size(), 64u);
}

TEST(Bundle, WithoutPlantedSolution) {
    TempDir dir;
    Problem p;
    p.a = Matrix{{1, 2}, {3, 4}};
    p.b = {5, 6};
    p.source = "hand";
    write_bundle(dir.path() / "q.json", p);
    const Problem q = read_bundle(dir.path() / "q.json");
    EXPECT_EQ(q.a, p.a);
    EXPECT_EQ(q.b, p.b);
    EXPECT_FALSE(q.planted_solution);
}

TEST(Bundle, DetectsCorruption) {
    TempDir dir;
    write_bundle(dir.path() / "p.json", gen_problem(4, 3, 1), 1);
    {
        std::fstream f(dir.path() / "p.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(17);
        f.put('\x42');
    }
    EXPECT_EQ(code_of([&] { read_bundle(dir.path() / "p.json"); }), Errc::ChecksumMismatch);
    write(dir.path() / "bad.json", "{not json");
    EXPECT_EQ(code_of([&] { read_bundle(dir.path() / "bad.json"); }), Errc::MalformedLine);
    EXPECT_EQ(code_of([&] { read_bundle(dir.path() / "missing.json"); }), Errc::Io);
}

TEST(Sha256, KnownVector) {
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex({reinterpret_cast<const unsigned char*>(abc.data()), abc.size()}),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(FormatNumber, ShortestRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 1.7976931348623157e308}) {
        EXPECT_EQ(std::stod(format_number(v)), v);
    }
    EXPECT_EQ(format_number(0.5), "0.5");
}

TEST(InputFormat, Inference) {
    EXPECT_EQ(infer_input_format("x.json"), InputFormat::Bundle);
    EXPECT_EQ(infer_input_format("x.csv"), InputFormat::Csv);
    EXPECT_EQ(infer_input_format("mushrooms"), InputFormat::Libsvm);
    EXPECT_EQ(parse_input_format("bundle"), InputFormat::Bundle);
    EXPECT_EQ(code_of([] { parse_input_format("xml"); }), Errc::InvalidArgument);
}

TEST(Problem, GenerationIsDeterministicAndConsistent) {
    const Problem a = gen_problem(100, 50, 7);
    const Problem b = gen_problem(100, 50, 7);
    EXPECT_EQ(a.a, b.a);
    EXPECT_EQ(a.b, b.b);
    EXPECT_EQ(*a.planted_solution, *b.planted_solution);
    EXPECT_NO_THROW(a.validate());
    EXPECT_NE(gen_problem(100, 50, 8).a, a.a);
    // Full column rank, via the Gram spectrum.
    const SymEig e = sym_eig(gram_of_columns(a.a));
    EXPECT_GT(e.eigenvalues.back(), 1e-6 * e.eigenvalues.front());
}

TEST(Problem, ValidationErrors) {
    Problem p;
    p.a = Matrix(2, 2);
    p.b = {0, 0};
    EXPECT_EQ(code_of([&] { p.validate(); }), Errc::AllZero);
    p.a = Matrix{{1, NAN}, {0, 1}};
    EXPECT_EQ(code_of([&] { p.validate(); }), Errc::NonFinite);
    p.a = Matrix::identity(2);
    p.b = {1};
    EXPECT_EQ(code_of([&] { p.validate(); }), Errc::DimensionMismatch);
    p.b = {1, 1};
    p.planted_solution = Vector{1, 2};
    EXPECT_EQ(code_of([&] { p.validate(); }), Errc::Inconsistent);
}
