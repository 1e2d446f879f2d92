#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "../src/rng.hpp"
#include "../src/embedding.hpp"
#include "../src/util.hpp"

using namespace rankvocab;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path((std::filesystem::temp_directory_path() / name).string()) {
    write_text_file(path, content);
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("three-line file loads in order") {
  TempFile f("rv_emb3.txt", "the 0.1 0.2\ncat 1 0\nsat -1 2.5\n");
  EmbeddingTable t = load_embeddings(f.path, 2);
  REQUIRE(t.size() == 3);
  CHECK(t.dim() == 2);
  CHECK(t.words() == std::vector<std::string>{"the", "cat", "sat"});
  CHECK(t.row(2)[1] == 2.5);
  CHECK(t.find("cat") == 1);
  CHECK_FALSE(t.contains("dog"));
}

TEST_CASE("duplicate words keep the first occurrence") {
  TempFile f("rv_embdup.txt", "the 0.1 0.2\nthe 0.3 0.4\n");
  EmbeddingLoadStats stats;
  EmbeddingTable t = load_embeddings(f.path, 2, &stats);
  REQUIRE(t.size() == 1);
  CHECK(t.row(0)[0] == 0.1);
  CHECK(t.row(0)[1] == 0.2);
  CHECK(stats.duplicate_lines == 1);
}

TEST_CASE("count/dim header line is detected and skipped") {
  TempFile f("rv_embhdr.txt", "2 3\na 1 2 3\nb 4 5 6\n");
  EmbeddingLoadStats stats;
  EmbeddingTable t = load_embeddings(f.path, 3, &stats);
  CHECK(t.size() == 2);
  CHECK(stats.header_skipped);
}

TEST_CASE("malformed lines fail with the line number") {
  TempFile wrong("rv_embbad1.txt", "a 1 2\nb 3\n");
  CHECK_THROWS_WITH_AS(load_embeddings(wrong.path, 2), doctest::Contains(":2:"), ParseError);
  TempFile nan_file("rv_embbad2.txt", "a 1 nan\n");
  CHECK_THROWS_AS(load_embeddings(nan_file.path, 2), ParseError);
  TempFile alpha("rv_embbad3.txt", "a 1 x\n");
  CHECK_THROWS_WITH_AS(load_embeddings(alpha.path, 2), doctest::Contains(":1:"), ParseError);
  TempFile empty("rv_embempty.txt", "\n\n");
  CHECK_THROWS_AS(load_embeddings(empty.path, 2), ParseError);
  CHECK_THROWS_AS(load_embeddings("/nonexistent/emb.txt", 2), IoError);
}

TEST_CASE("save and reload reproduces the table exactly") {
  EmbeddingTable t(3);
  CounterRng rng = CounterRng::keyed(1, {streams::kSynth, 9});
  for (int i = 0; i < 20; i++) {
    t.add("w" + std::to_string(i),
          {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)});
  }
  std::string path = (std::filesystem::temp_directory_path() / "rv_embrt.txt").string();
  save_embeddings(t, path);
  EmbeddingTable back = load_embeddings(path, 3);
  CHECK(back == t);
  std::remove(path.c_str());
}

TEST_CASE("cosine similarity definition and clipping") {
  std::vector<double> u = {1, 0}, v = {0, 1}, w = {-1, 0}, z = {0, 0};
  std::vector<double> any = {0.3, -2.5};
  CHECK(similarity(any, any, Metric::kCosine) == doctest::Approx(1.0));
  CHECK(similarity(u, v, Metric::kCosine) == 0.0);
  CHECK(similarity(u, w, Metric::kCosine) == 0.0);  // clipped negative
  CHECK_THROWS_AS(similarity(u, z, Metric::kCosine), InvalidArgument);
  std::vector<double> three = {1, 2, 3};
  CHECK_THROWS_AS(similarity(u, three, Metric::kCosine), InvalidArgument);
}

TEST_CASE("distance kernel: self is 1, 3-4-5 triangle gives 1/6") {
  std::vector<double> o = {0, 0}, p = {3, 4};
  CHECK(similarity(o, o, Metric::kDistanceKernel) == 1.0);
  CHECK(similarity(o, p, Metric::kDistanceKernel) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("both metrics are symmetric and bounded") {
  CounterRng rng = CounterRng::keyed(8, {streams::kSynth, 10});
  for (int trial = 0; trial < 50; trial++) {
    std::vector<double> u(4), v(4);
    for (int i = 0; i < 4; i++) {
      u[static_cast<size_t>(i)] = rng.uniform(-3, 3);
      v[static_cast<size_t>(i)] = rng.uniform(-3, 3);
    }
    for (Metric m : {Metric::kCosine, Metric::kDistanceKernel}) {
      double a = similarity(u, v, m);
      double b = similarity(v, u, m);
      CHECK(a == b);
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }
}

TEST_CASE("metric names parse both ways") {
  CHECK(metric_from_string("cosine") == Metric::kCosine);
  CHECK(metric_from_string("wmd") == Metric::kDistanceKernel);
  CHECK(metric_from_string("distance_kernel") == Metric::kDistanceKernel);
  CHECK_THROWS_AS(metric_from_string("euclid"), InvalidArgument);
  CHECK(std::string(metric_name(Metric::kCosine)) == "cosine");
  CHECK(std::string(metric_name(Metric::kDistanceKernel)) == "wmd");
}

TEST_CASE("sub_table keeps vocab order and reports misses") {
  EmbeddingTable t(2);
  t.add("a", {1, 2});
  t.add("b", {3, 4});
  t.add("c", {5, 6});

  SUBCASE("identity") {
    SubTableResult r = sub_table(t, {"a", "b", "c"});
    CHECK(r.table == t);
    CHECK(r.missing.empty());
  }
  SUBCASE("empty vocab") {
    SubTableResult r = sub_table(t, {});
    CHECK(r.table.size() == 0);
    CHECK(r.missing.empty());
  }
  SUBCASE("reorder with a miss") {
    SubTableResult r = sub_table(t, {"c", "z", "a"});
    CHECK(r.table.words() == std::vector<std::string>{"c", "a"});
    CHECK(r.table.row(0)[0] == 5);
    CHECK(r.missing == std::vector<std::string>{"z"});
  }
}
