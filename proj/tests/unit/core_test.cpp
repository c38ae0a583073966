#include <gtest/gtest.h>

#include <sstream>

#include "sekg/csv.hpp"
#include "sekg/error.hpp"
#include "sekg/log.hpp"
#include "sekg/text.hpp"
#include "test_util.hpp"

namespace sekg {
namespace {

TEST(Csv, ReadsQuotedFieldsAndEmbeddedNewlines) {
  std::istringstream in("a,b,c\r\n\"x, y\",\"say \"\"hi\"\"\",\"two\nlines\"\n\n1,,3\n");
  const auto rows = csv::read(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"x, y", "say \"hi\"", "two\nlines"}));
  EXPECT_EQ(rows[1].line, 2u);
  EXPECT_EQ(rows[2].fields, (std::vector<std::string>{"1", "", "3"}));
  EXPECT_EQ(rows[2].line, 5u);
}

TEST(Csv, UnterminatedQuoteIsParseError) {
  std::istringstream in("a,b\n\"open,2\n");
  EXPECT_THROW(csv::read(in), ParseError);
}

TEST(Csv, EscapeRoundTrips) {
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  std::ostringstream out;
  csv::write_row(out, fields);
  EXPECT_EQ(csv::escape("plain"), "plain");
  std::istringstream in(out.str());
  const auto rows = csv::read(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].fields, fields);
}

TEST(Csv, HeaderStripsBomAndReportsMissingColumn) {
  csv::Record r{{"\xEF\xBB\xBFid", "rule"}, 1};
  csv::Header h(r, {"id", "rule"});
  EXPECT_EQ(h["id"], 0u);
  EXPECT_EQ(h["rule"], 1u);
  EXPECT_FALSE(h.has("other"));
  EXPECT_THROW(csv::Header(r, {"id", "missing"}), ParseError);
}

TEST(Text, TrimLowerSplit) {
  EXPECT_EQ(trim("  a b \t\n"), "a b");
  EXPECT_EQ(trim("   "), "");
  EXPECT_EQ(to_lower("AbC"), "abc");
  EXPECT_TRUE(iequals("OzEmPiC", "ozempic"));
  EXPECT_TRUE(ends_with_icase("HelperBOT", "bot"));
  EXPECT_FALSE(ends_with_icase("ot", "bot"));
  EXPECT_EQ(split_whitespace(" a  b\tc\n"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
}

TEST(Text, RenderTemplateIsSinglePass) {
  EXPECT_EQ(render_template("x={a} y={b} z={c}", {{"a", "{b}"}, {"b", "2"}}), "x={b} y=2 z={c}");
  EXPECT_EQ(render_template("{unterminated", {{"unterminated", "no"}}), "{unterminated");
}

TEST(Text, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Text, AtomicWriteCreatesDirectoriesAndReplaces) {
  testing::TempDir dir;
  const auto path = (dir / "nested/deeper/file.txt").string();
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  EXPECT_EQ(read_file(path), "second");
  EXPECT_THROW(read_file((dir / "absent").string()), ParseError);
}

TEST(Errors, ExitCodesByKind) {
  EXPECT_EQ(exit_code(ErrorKind::Config), 2);
  EXPECT_EQ(exit_code(ErrorKind::Argument), 2);
  EXPECT_EQ(exit_code(ErrorKind::Provider), 3);
  EXPECT_EQ(exit_code(ErrorKind::Parse), 4);
  EXPECT_EQ(exit_code(ErrorKind::Structural), 4);
  EXPECT_EQ(exit_code(ErrorKind::Domain), 4);
}

TEST(Errors, ParseErrorCarriesLine) {
  ParseError e("bad value", 7, "xyz");
  EXPECT_EQ(e.line(), 7u);
  EXPECT_EQ(e.offending_text(), "xyz");
  EXPECT_NE(std::string(e.what()).find("(line 7)"), std::string::npos);
}

TEST(Log, FormatEventQuotesAwkwardValues) {
  EXPECT_EQ(log::format_event("ingest", "removed", {{"id", "t1"}, {"rule", "bot"}}),
            "stage=ingest event=removed id=t1 rule=bot");
  EXPECT_EQ(log::format_event("x", "y", {{"msg", "two words"}, {"eq", "a=b"}}),
            "stage=x event=y msg=\"two words\" eq=\"a=b\"");
}

TEST(Log, UnknownLevelIsConfigError) {
  EXPECT_THROW(log::configure("loud"), ConfigError);
  EXPECT_NO_THROW(log::configure("warn"));
}

}  // namespace
}  // namespace sekg
