#include <doctest.h>

#include <cmath>

#include "turboshape/errors.hpp"
#include "turboshape/io.hpp"

using namespace turboshape;

TEST_CASE("numbers round trip exactly") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_number(v)) == v);
  CHECK(format_number(NAN) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
  CHECK(format_number(1000.0) == "1000");
}

TEST_CASE("csv quoting follows RFC 4180") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  CsvTable t({"name", "value"});
  t.row({"a,b", "1"}).row({"q\"uote", "line\r\nbreak"}).row({"", "3"});
  CHECK(t.str().substr(0, 12) == "name,value\r\n");
  auto back = parse_csv(t.str());
  CHECK(back.header() == t.header());
  CHECK(back.rows() == t.rows());
  CHECK_THROWS_AS(t.row({"only one"}), InvalidArgument);
  CHECK_THROWS_AS(parse_csv("a,b\r\n\"open,1\r\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_csv(""), InvalidArgument);
}

TEST_CASE("legacy vtk layout") {
  auto g = build_grid(4, 4, {0, 0}, {4, 4});
  auto m = adapt_to_boundary(g, BoundaryCurve({{1, 1}, {3, 1}, {3, 3}, {1, 3}},
                                              std::vector<BoundaryTag>(4, BoundaryTag::NeumannFree)));
  VtkFields f;
  f.point_vectors["v"] = Eigen::VectorXd::Ones(2 * g.node_count());
  f.cell_scalars["c"] = std::vector<double>(g.triangle_count(), 0.5);
  const auto s = vtk_string(m, "test", f);
  CHECK(s.rfind("# vtk DataFile Version 3.0\ntest\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 25 double\n", 0) == 0);
  CHECK(s.find("CELLS 32 128\n") != std::string::npos);
  std::string types = "CELL_TYPES 32\n", status = "CELL_DATA 32\nSCALARS status int 1\nLOOKUP_TABLE default\n";
  for (int t = 0; t < 32; ++t) {
    types += "5\n";
    status += m.inside(t) ? "1\n" : "0\n";
  }
  CHECK(m.inside_count() == 8);
  CHECK(s.find(types) != std::string::npos);
  CHECK(s.find(status) != std::string::npos);
  CHECK(s.find("SCALARS c double 1\nLOOKUP_TABLE default\n0.5\n") != std::string::npos);
  CHECK(s.find("POINT_DATA 25\nVECTORS v double\n1 1 0\n") != std::string::npos);
  f.cell_scalars["c"].pop_back();
  CHECK_THROWS_AS(vtk_string(m, "test", f), InvalidArgument);
  CHECK_THROWS_AS(vtk_string(m, "two\nlines"), InvalidArgument);
}

TEST_CASE("sha256 digests") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
