#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "mf/error.hpp"
#include "mf/io/csv.hpp"
#include "mf/io/ini.hpp"
#include "mf/io/pnm.hpp"
#include "mf/io/svg.hpp"

using namespace mf;
using namespace mf::io;

TEST(Csv, ParsesQuotedFieldsAndChecksWidth) {
  const auto t = parse_csv("name,value\n\"a,b\",1\nc,2.5\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"name", "value"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "a,b");
  EXPECT_EQ(t.column("value"), 1u);
  EXPECT_FALSE(t.has_column("nope"));
  EXPECT_THROW(t.column("nope"), DataError);
  EXPECT_THROW(parse_csv("a,b\n1,2,3\n"), DataError);
  EXPECT_EQ(parse_csv("a,b\r\n1,2\r\n").rows[0][1], "2");
}

TEST(Csv, NumberParsing) {
  EXPECT_EQ(parse_double("0.125", "x"), 0.125);
  EXPECT_EQ(parse_int("-42", "x"), -42);
  EXPECT_THROW(parse_double("1.5abc", "x"), DataError);
  EXPECT_THROW(parse_int("4.0", "x"), DataError);
  EXPECT_THROW(parse_double("", "x"), DataError);
}

TEST(Csv, FormatExactRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.691, 11407306.0}) {
    EXPECT_EQ(parse_double(format_exact(v), "x"), v);
  }
  EXPECT_EQ(format_exact(0.5), "0.5");
}

TEST(Pnm, BinaryRoundTrip) {
  Image8 g{3, 2, 1, {0, 10, 20, 30, 40, 255}};
  const auto g2 = parse_pnm(encode_pnm(g));
  EXPECT_EQ(g2.pixels, g.pixels);
  EXPECT_EQ(g2.width, 3);
  Image8 c{2, 1, 3, {1, 2, 3, 4, 5, 6}};
  const auto c2 = parse_pnm(encode_pnm(c));
  EXPECT_EQ(c2.channels, 3);
  EXPECT_EQ(c2.at(0, 1, 2), 6);
  EXPECT_EQ(encode_pnm(g).substr(0, 2), "P5");
  EXPECT_EQ(encode_pnm(c).substr(0, 2), "P6");
}

TEST(Pnm, AsciiFormatsAndComments) {
  const auto g = parse_pnm("P2\n# comment\n2 2\n255\n0 1\n2 3\n");
  EXPECT_EQ(g.pixels, (std::vector<std::uint8_t>{0, 1, 2, 3}));
  const auto c = parse_pnm("P3 1 1 255 7 8 9");
  EXPECT_EQ(c.pixels, (std::vector<std::uint8_t>{7, 8, 9}));
  // Samples are kept as stored so mask files can carry class ids.
  EXPECT_EQ(parse_pnm("P2 1 1 15 15").pixels[0], 15);
  EXPECT_THROW(parse_pnm("P2 1 1 15 16"), DataError);
}

TEST(Pnm, RejectsMalformed) {
  EXPECT_THROW(parse_pnm("P7 1 1 255 0"), DataError);
  EXPECT_THROW(parse_pnm("P2 1 1 65535 0"), DataError);
  EXPECT_THROW(parse_pnm("P5 2 2 255 ab"), DataError);
  EXPECT_THROW(read_pnm("/nonexistent/file.pgm"), DataError);
}

TEST(Pnm, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "mf_test_img.ppm").string();
  Image8 c{2, 2, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}};
  write_pnm(path, c);
  EXPECT_EQ(read_pnm(path).pixels, c.pixels);
  std::filesystem::remove(path);
}

TEST(Svg, GroupedBarChart) {
  BarChart chart{"FLOPs <per stage>", "FLOPs", {"s0", "s1"}, {"a", "b", "c"}, {{1e3, 1e6, 0}, {10, 100, 1e9}}};
  const std::string svg = grouped_bar_chart_svg(chart);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("FLOPs &lt;per stage&gt;"), std::string::npos);
  std::size_t rects = 0;
  for (auto p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++rects;
  EXPECT_GE(rects, 5u);
  EXPECT_EQ(xml_escape("a&\"b'<>"), "a&amp;&quot;b&apos;&lt;&gt;");
}

TEST(Ini, ParseAndTypedAccess) {
  const auto doc = IniDocument::parse("[a]\nx = 3\ny = 1.5\nz = true\nl = 1, 2,3\n\n[b]\n");
  // A section without keys is accepted and behaves like an absent one.
  EXPECT_FALSE(doc.has_section("b") && !doc.section("b").empty());
  EXPECT_TRUE(doc.has_section("a"));
  SectionReader r(doc, "a");
  EXPECT_EQ(r.get_int("x", 0), 3);
  EXPECT_EQ(r.get_double("y", 0), 1.5);
  EXPECT_TRUE(r.get_bool("z", false));
  EXPECT_EQ(r.get_int_list("l", {}), (std::vector<std::int64_t>{1, 2, 3}));
  EXPECT_EQ(r.get_int("missing", 7), 7);
  EXPECT_NO_THROW(r.finish());
  SectionReader absent(doc, "c");
  EXPECT_FALSE(absent.present());
}

TEST(Ini, Errors) {
  const auto doc = IniDocument::parse("[a]\nx = abc\nextra = 1\n");
  SectionReader r(doc, "a");
  EXPECT_THROW(r.get_int("x", 0), ConfigError);
  EXPECT_THROW(r.finish(), ConfigError);
  EXPECT_THROW(IniDocument::parse("x = 1\n[a]\n"), ConfigError);
  EXPECT_THROW(IniDocument::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
  EXPECT_THROW(IniDocument::load("/nonexistent.ini"), ConfigError);
}

TEST(Ini, TextRoundTrip) {
  IniDocument doc;
  doc.set("s", "k", "v");
  doc.set("s", "n", format_double(0.1));
  doc.set("t", "k", "2");
  EXPECT_EQ(IniDocument::parse(doc.to_text()), doc);
  EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
}
