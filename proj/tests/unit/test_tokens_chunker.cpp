#include <doctest.h>

#include <random>

#include "nbsearch/chunker.hpp"
#include "nbsearch/code_units.hpp"
#include "nbsearch/errors.hpp"
#include "nbsearch/model_gateway.hpp"
#include "nbsearch/tokens.hpp"
#include "test_support.hpp"

using namespace nbsearch;

namespace {

std::string two_sum() { return nbsearch::testing::read_file(nbsearch::testing::fixtures_dir() / "two_sum.py"); }

std::vector<Chunk> plan(const Cell& cell, std::size_t budget, const SummarizeFn& summarize = offline_summary) {
  return plan_chunks("nb.ipynb", cell, clean_cell(cell), TokenBudget{budget, "heuristic-v1"}, summarize);
}

// Stand-in for a chatty provider: long enough to need truncation.
std::string verbose_summary(std::string_view code) {
  std::string out = "This code";
  for (std::size_t i = 0; i < count_tokens(code); ++i) out += " does thing " + std::to_string(i) + ";";
  return out;
}

}  // namespace

TEST_CASE("count_tokens examples") {
  CHECK(count_tokens("") == 0);
  CHECK(count_tokens("def foo():") == 5);
  CHECK(count_tokens("x=1\ny=2") == 6);
  CHECK(count_tokens("héllo") == 3);  // h, é, llo
  CHECK(count_tokens("∑∑ a_b") == 3);
}

TEST_CASE("truncate_to_tokens cuts right after the last kept token") {
  CHECK(truncate_to_tokens("x=(1", 3) == "x=(");
  CHECK(truncate_to_tokens("alpha beta gamma", 2) == "alpha beta");
  CHECK(truncate_to_tokens("alpha beta", 5) == "alpha beta");
  CHECK(truncate_to_tokens("alpha", 0).empty());
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const std::string s = nbsearch::testing::random_code(rng);
    const std::size_t n = rng() % 40;
    const std::string t = truncate_to_tokens(s, n);
    CHECK(count_tokens(t) == std::min(n, count_tokens(s)));
    CHECK(s.compare(0, t.size(), t) == 0);
  }
}

TEST_CASE("estimator registry") {
  CHECK(estimator_for("heuristic-v1")->id() == "heuristic-v1");
  CHECK_THROWS_AS(estimator_for("tiktoken-cl100k"), ConfigError);
}

TEST_CASE("chunk kind names round-trip") {
  for (auto k : {ChunkKind::WholeCell, ChunkKind::ClassUnit, ChunkKind::FunctionUnit, ChunkKind::Residue,
                 ChunkKind::Summary, ChunkKind::Truncated}) {
    CHECK(chunk_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(chunk_kind_from_string("Cell"), std::invalid_argument);
  CHECK(cell_type_name(CellKind::Markdown) == "text");
  CHECK(cell_type_name(CellKind::Code) == "code");
}

TEST_CASE("plan_chunks examples") {
  SUBCASE("small code cell is one WholeCell") {
    const Cell cell{0, CellKind::Code, "import os\nx = os.getcwd()"};
    const auto chunks = plan(cell, 8191);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].kind == ChunkKind::WholeCell);
    CHECK(chunks[0].contents == chunks[0].embed_text);
    CHECK(chunks[0].token_count == 9);
  }
  SUBCASE("two-sum class over a budget of 6 is summarized") {
    const Cell cell{4, CellKind::Code, two_sum()};
    const auto chunks = plan(cell, 6, [](std::string_view) { return std::string("sum idx map"); });
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].kind == ChunkKind::Summary);
    CHECK(chunks[0].embed_text == "sum idx map");
    CHECK(chunks[0].contents == extract_units(clean_code(two_sum()).text).at(0).source);
    CHECK(chunks[0].cell_index == 4);
    CHECK(chunks[0].unit_index == 0);
  }
  SUBCASE("syntax error falls back to truncation") {
    const auto chunks = plan(Cell{0, CellKind::Code, "x=(1"}, 3);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].kind == ChunkKind::Truncated);
    CHECK(chunks[0].contents == "x=(");
  }
  SUBCASE("units that fit keep their own kinds") {
    const Cell cell{0, CellKind::Code, "import m\n\ndef f():\n    pass\n\nclass C:\n    pass\n\nprint(1)"};
    const auto chunks = plan(cell, 8);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].kind == ChunkKind::FunctionUnit);
    CHECK(chunks[1].kind == ChunkKind::ClassUnit);
    CHECK(chunks[2].kind == ChunkKind::Residue);
    CHECK(chunks[2].contents == "import m\nprint(1)");
    CHECK(chunks[2].unit_index == 2);
  }
  SUBCASE("over-long summaries are head-truncated") {
    const auto chunks = plan(Cell{0, CellKind::Code, two_sum()}, 6, verbose_summary);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].kind == ChunkKind::Summary);
    CHECK(chunks[0].embed_text == "This code does thing 0;");
  }
  SUBCASE("blank summaries fall back to truncating the unit") {
    const auto chunks = plan(Cell{0, CellKind::Code, two_sum()}, 6, [](std::string_view) { return std::string(" "); });
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].kind == ChunkKind::Truncated);
    CHECK(chunks[0].contents == "class Solution:\n   def twoSum(");
  }
  SUBCASE("summarizer failures surface as SummarizerUnavailable") {
    auto failing = [](std::string_view) -> std::string { throw ProviderError("down", 503); };
    CHECK_THROWS_AS(plan(Cell{0, CellKind::Code, two_sum()}, 6, failing), SummarizerUnavailable);
  }
  SUBCASE("markdown is packed by paragraph") {
    const Cell cell{1, CellKind::Markdown, "# One two\n\nthree four five\n\nsix\n\nseven eight nine ten eleven"};
    const auto chunks = plan(cell, 4);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].contents == "One two");
    CHECK(chunks[0].kind == ChunkKind::WholeCell);
    CHECK(chunks[1].contents == "three four five six");
    CHECK(chunks[2].contents == "seven eight nine ten");
    CHECK(chunks[2].kind == ChunkKind::Truncated);
  }
  SUBCASE("empty cells produce nothing") {
    CHECK(plan(Cell{0, CellKind::Code, "%matplotlib inline\n\n"}, 10).empty());
    CHECK(plan(Cell{0, CellKind::Markdown, "  "}, 10).empty());
  }
  SUBCASE("zero budget is a configuration error") {
    CHECK_THROWS_AS(plan(Cell{0, CellKind::Code, "x"}, 0), ConfigError);
  }
}

TEST_CASE("every chunk fits its budget") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 3000; ++i) {
    const Cell cell = nbsearch::testing::random_cell(rng, i % 7);
    const std::size_t budget = 1 + rng() % 64;
    const auto chunks = plan(cell, budget, i % 2 ? SummarizeFn(offline_summary) : SummarizeFn(verbose_summary));
    for (std::size_t u = 0; u < chunks.size(); ++u) {
      const Chunk& c = chunks[u];
      CHECK(count_tokens(c.embed_text) <= budget);
      CHECK(c.token_count == count_tokens(c.embed_text));
      CHECK(c.unit_index == static_cast<int>(u));
      CHECK(c.cell_index == cell.cell_index);
      CHECK_FALSE(c.contents.empty());
      if (c.kind != ChunkKind::Summary) CHECK(c.contents == c.embed_text);
      if (cell.kind == CellKind::Markdown) {
        CHECK((c.kind == ChunkKind::WholeCell || c.kind == ChunkKind::Truncated));
      }
    }
  }
}

TEST_CASE("lowering the budget never yields fewer chunks") {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 400; ++i) {
    const Cell cell = nbsearch::testing::random_cell(rng);
    std::size_t previous = 0;
    for (std::size_t budget = 200; budget >= 1; budget = budget > 20 ? budget - 20 : budget - 1) {
      const std::size_t n = plan(cell, budget).size();
      CHECK(n >= previous);
      previous = n;
    }
  }
}

TEST_CASE("split code cells account for every top-level statement once") {
  std::mt19937_64 rng(23);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const Cell cell{0, CellKind::Code, nbsearch::testing::random_code(rng)};
    const std::string cleaned = clean_code(cell.source).text;
    std::vector<CodeUnit> units;
    try {
      units = extract_units(cleaned);
    } catch (const SyntaxErrorInCell&) {
      continue;
    }
    const std::size_t budget = 1 + rng() % 40;
    if (count_tokens(cleaned) <= budget || units.empty()) continue;
    const auto chunks = plan(cell, budget);
    std::vector<std::string> contents;
    for (const auto& c : chunks) {
      if (c.kind != ChunkKind::Truncated) contents.push_back(c.contents);
    }
    std::vector<std::string> expected;
    for (const auto& u : units) expected.push_back(u.source);
    CHECK(contents == expected);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("planning is deterministic") {
  std::mt19937_64 rng(24);
  for (int i = 0; i < 300; ++i) {
    const Cell cell = nbsearch::testing::random_cell(rng);
    const std::size_t budget = 1 + rng() % 30;
    CHECK(plan(cell, budget) == plan(cell, budget));
  }
}
