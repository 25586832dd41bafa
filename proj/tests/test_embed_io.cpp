#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "xalign/embed_io.hpp"
#include "xalign/error.hpp"

using namespace xalign;
using testing::TempDir;
using testing::write_file;

namespace {

const char* kFixture =
    "3 4\n"
    "the 0.1 0.2 0.3 0.4\n"
    "cat 1 0 0 0\n"
    "dog 0 1 0 0.5\n";

template <class F>
std::size_t format_error_line(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("load keeps header order and values") {
  TempDir dir;
  write_file(dir / "a.vec", kFixture);
  const EmbeddingSpace s = load_embeddings(dir / "a.vec", {.max_vocab = 10});
  CHECK(s.size() == 3);
  CHECK(s.dim() == 4);
  CHECK(s.word(0) == "the");
  CHECK(s.word(2) == "dog");
  CHECK(s.find("cat") == 1);
  CHECK_FALSE(s.find("bird"));
  CHECK(s.vectors()(2, 3) == 0.5f);
  CHECK(s.vectors()(0, 0) == 0.1f);
}

TEST_CASE("max_vocab truncates to the most frequent words") {
  TempDir dir;
  write_file(dir / "a.vec", kFixture);
  const EmbeddingSpace s = load_embeddings(dir / "a.vec", {.max_vocab = 2});
  REQUIRE(s.size() == 2);
  CHECK(s.word(0) == "the");
  CHECK(s.word(1) == "cat");
}

TEST_CASE("lowercasing keeps the first occurrence of a folded duplicate") {
  TempDir dir;
  write_file(dir / "a.vec",
             "4 2\n"
             "Cat 1 2\n"
             "dog 3 4\n"
             "cat 5 6\n"
             "EMU 7 8\n");
  const EmbeddingSpace plain = load_embeddings(dir / "a.vec");
  const EmbeddingSpace low = load_embeddings(dir / "a.vec", {.lowercase = true});
  CHECK(plain.size() == 4);
  REQUIRE(low.size() == 3);
  // Hand parse: rows kept are Cat->cat (1,2), dog (3,4), EMU->emu (7,8).
  CHECK(low.words() == std::vector<std::string>{"cat", "dog", "emu"});
  CHECK(low.vectors()(0, 0) == 1.0f);
  CHECK(low.vectors()(0, 1) == 2.0f);
  CHECK(low.vectors()(2, 1) == 8.0f);
}

TEST_CASE("exact duplicate tokens keep the first row") {
  TempDir dir;
  write_file(dir / "a.vec", "3 1\na 1\nb 2\na 3\n");
  const EmbeddingSpace s = load_embeddings(dir / "a.vec");
  REQUIRE(s.size() == 2);
  CHECK(s.vectors()(0, 0) == 1.0f);
}

TEST_CASE("malformed input is reported with its line number") {
  TempDir dir;
  write_file(dir / "hdr.vec", "3\nthe 1 2 3\n");
  CHECK(format_error_line([&] { load_embeddings(dir / "hdr.vec"); }) == 1);

  write_file(dir / "cols.vec", "2 3\nthe 1 2 3\ncat 1 2\n");
  CHECK(format_error_line([&] { load_embeddings(dir / "cols.vec"); }) == 3);

  write_file(dir / "nan.vec", "2 2\nthe 1 2\ncat nan 2\n");
  CHECK(format_error_line([&] { load_embeddings(dir / "nan.vec"); }) == 3);

  write_file(dir / "inf.vec", "1 2\nthe 1 1e999\n");
  CHECK(format_error_line([&] { load_embeddings(dir / "inf.vec"); }) == 2);

  write_file(dir / "empty.vec", "");
  CHECK(format_error_line([&] { load_embeddings(dir / "empty.vec"); }) == 1);

  write_file(dir / "short.vec", "3 2\nthe 1 2\n");
  CHECK(format_error_line([&] { load_embeddings(dir / "short.vec"); }) == 3);

  write_file(dir / "junk.vec", "1 2\nthe 1 x\n");
  CHECK(format_error_line([&] { load_embeddings(dir / "junk.vec"); }) == 2);
}

TEST_CASE("missing file is an I/O error naming the path") {
  TempDir dir;
  const auto p = dir / "nope.vec";
  try {
    load_embeddings(p);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("nope.vec") != std::string::npos);
  }
}

TEST_CASE("text and binary round trips") {
  TempDir dir;
  Rng rng(3);
  const EmbeddingSpace s = testing::make_space(testing::random_matrix(20, 7, rng));
  save_embeddings(s, dir / "s.vec");
  const EmbeddingSpace back = load_embeddings(dir / "s.vec");
  CHECK(back == s);
  CHECK(load_embeddings(dir / "s.vec") == back);

  save_embeddings_binary(s, dir / "s.bin");
  CHECK(load_embeddings_binary(dir / "s.bin") == s);

  write_file(dir / "bad.bin", "XEMB");
  CHECK_THROWS_AS(load_embeddings_binary(dir / "bad.bin"), IoError);
  write_file(dir / "wrong.bin", "ABCD\x01");
  CHECK_THROWS_AS(load_embeddings_binary(dir / "wrong.bin"), IoError);
}

TEST_CASE("normalization modes") {
  const EmbeddingSpace s({"a", "b"}, MatrixF{{3, 4}, {0, 2}});
  const EmbeddingSpace u = normalize(s, Normalization::unit);
  CHECK(u.vectors()(0, 0) == doctest::Approx(0.6));
  CHECK(u.vectors()(0, 1) == doctest::Approx(0.8));
  CHECK(u.vectors()(1, 1) == doctest::Approx(1.0));

  CHECK(normalize(s, Normalization::none) == s);

  const EmbeddingSpace c = normalize(EmbeddingSpace({"a", "b"}, MatrixF{{1, 0}, {3, 0}}),
                                     Normalization::center_then_unit);
  CHECK(c.vectors()(0, 0) == doctest::Approx(-1.0));
  CHECK(c.vectors()(1, 0) == doctest::Approx(1.0));
  CHECK(c.vectors()(0, 1) == 0.0f);

  CHECK(parse_normalization("center_then_unit") == Normalization::center_then_unit);
  CHECK_THROWS_AS(parse_normalization("l2"), UsageError);
}

TEST_CASE("unit normalization is idempotent and gives unit rows") {
  Rng rng(11);
  const EmbeddingSpace s = testing::make_space(testing::random_matrix(50, 9, rng));
  const EmbeddingSpace once = normalize(s, Normalization::unit);
  const EmbeddingSpace twice = normalize(once, Normalization::unit);
  for (Index i = 0; i < once.size(); ++i) {
    CHECK(std::abs(once.vectors().row(i).cast<double>().norm() - 1.0) <= 1e-6);
    for (Index j = 0; j < once.dim(); ++j)
      CHECK(std::abs(double(once.vectors()(i, j)) - double(twice.vectors()(i, j))) <= 1e-12);
  }
}

TEST_CASE("zero rows cannot be normalized") {
  const EmbeddingSpace s({"ok", "void"}, MatrixF{{1, 1}, {0, 0}});
  try {
    normalize(s, Normalization::unit);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("void") != std::string::npos);
  }
}

TEST_CASE("space construction validates its input") {
  CHECK_THROWS_AS(EmbeddingSpace({"a", "a"}, MatrixF::Zero(2, 2)), UsageError);
  CHECK_THROWS_AS(EmbeddingSpace({"a"}, MatrixF::Zero(2, 2)), UsageError);
  MatrixF bad = MatrixF::Zero(1, 2);
  bad(0, 1) = std::numeric_limits<float>::infinity();
  CHECK_THROWS(EmbeddingSpace({"a"}, bad));
}

TEST_CASE("dictionary loading") {
  TempDir dir;
  const EmbeddingSpace src({"a", "b", "c", "d", "e"}, MatrixF::Identity(5, 5));
  const EmbeddingSpace tgt({"A", "B", "C", "D", "E"}, MatrixF::Identity(5, 5));

  SUBCASE("all in vocabulary") {
    write_file(dir / "d.txt", "a A\nb B\nc C\nd D\ne E\n");
    const DictionaryLoad dl = load_dictionary(dir / "d.txt", src, tgt);
    CHECK(dl.dictionary.size() == 5);
    CHECK(dl.dropped_pairs == 0);
    CHECK(dl.dictionary.pairs[3] == WordPair{3, 3});
  }
  SUBCASE("out-of-vocabulary targets are dropped and counted") {
    write_file(dir / "d.txt", "a A\nb X\nc C\nd Y\ne E\n");
    const DictionaryLoad dl = load_dictionary(dir / "d.txt", src, tgt);
    CHECK(dl.dictionary.size() == 3);
    CHECK(dl.dropped_pairs == 2);
    CHECK(dl.dictionary.pairs[1] == WordPair{2, 2});
    CHECK(dl.oov_sources == std::vector<std::string>{"b", "d"});
  }
  SUBCASE("duplicates removed, multiple targets kept") {
    write_file(dir / "d.txt", "# comment\na A\n\na B\na A\nb\tB\n");
    const DictionaryLoad dl = load_dictionary(dir / "d.txt", src, tgt);
    CHECK(dl.dictionary.size() == 3);
    CHECK(dl.duplicate_pairs == 1);
    CHECK(dl.dictionary.unique_sources() == std::vector<Index>{0, 1});
  }
  SUBCASE("a single-token line is a format error") {
    write_file(dir / "d.txt", "a A\nb\n");
    CHECK(format_error_line([&] { load_dictionary(dir / "d.txt", src, tgt); }) == 2);
  }
  SUBCASE("save and reload") {
    const Dictionary d = Dictionary::from_pairs({{0, 1}, {2, 2}, {0, 1}});
    CHECK(d.size() == 2);
    save_dictionary(d, src, tgt, dir / "out.txt", {"hello"});
    const DictionaryLoad dl = load_dictionary(dir / "out.txt", src, tgt);
    CHECK(dl.dictionary.pairs == d.pairs);
  }
}
