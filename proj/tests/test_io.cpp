#include <doctest.h>

#include "renyi_ot/io.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

using namespace renyi_ot;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("marginal CSV") {
  std::istringstream in("index,r,c\n0,0.5,0.3\n1,0.5,0.7\n");
  MarginalData d = parse_marginals(in);
  CHECK(d.r.size() == 2);
  CHECK(d.c[1] == doctest::Approx(0.7));
  CHECK(d.warnings.empty());
}

TEST_CASE("marginal CSV in percent with extra columns") {
  std::istringstream in("party,c,index,r\nA,40,1,30\nB,60,2,69\n");
  MarginalData d = parse_marginals(in);
  CHECK(d.r[0] == doctest::Approx(30.0 / 99.0));
  CHECK(d.c[0] == doctest::Approx(0.4));
  CHECK(d.warnings.size() == 2);  // percent note + r renormalized
}

TEST_CASE("marginal CSV errors") {
  auto parse = [](const char* text) {
    return [text] {
      std::istringstream in(text);
      parse_marginals(in);
    };
  };
  CHECK(code_of(parse("index,r\n0,1\n")) == ErrorCode::ParseError);
  CHECK(code_of(parse("index,r,c\n0,0.5\n")) == ErrorCode::ParseError);
  CHECK(code_of(parse("index,r,c\n0,0.5,x\n")) == ErrorCode::ParseError);
  CHECK(code_of(parse("index,r,c\n1,0.5,0.5\n3,0.5,0.5\n")) == ErrorCode::ParseError);
  CHECK(code_of(parse("index,r,c\n0,-0.5,0.5\n1,0.5,0.5\n")) == ErrorCode::NegativeMass);
  CHECK(code_of(parse("")) == ErrorCode::ParseError);
  CHECK(code_of([] { ingest_marginals("/nonexistent/m.csv"); }) == ErrorCode::IoError);
}

TEST_CASE("similarity table") {
  std::istringstream in(
      "party,A,B,C\n"
      "A,100,50,20\n"
      "B,50,100,40\n"
      "C,20,40,100\n");
  SimilarityData s = parse_similarity(in);
  REQUIRE(s.names.size() == 5);
  CHECK(s.names[3] == "Others");
  CHECK(s.names[4] == "NV");
  REQUIRE(s.vectors.size() == 5);
  for (const auto& v : s.vectors) CHECK(v.size() == 5);
  CHECK(s.vectors[0][3] == doctest::Approx(0.35));  // mean of 0.5 and 0.2
  CHECK(s.vectors[0][4] == 1.0);
  CHECK(s.vectors[3][0] == doctest::Approx(0.35));
  CHECK(s.vectors[4] == std::vector<double>(5, 1.0));
}

TEST_CASE("six parties become eight") {
  std::ostringstream os;
  os << "p";
  for (int j = 0; j < 6; ++j) os << ",P" << j;
  os << "\n";
  for (int i = 0; i < 6; ++i) {
    os << "P" << i;
    for (int j = 0; j < 6; ++j) os << "," << (i == j ? 1.0 : 0.3);
    os << "\n";
  }
  std::istringstream in(os.str());
  CHECK(parse_similarity(in).vectors.size() == 8);
}

TEST_CASE("identical parties give a zero voter cost") {
  std::istringstream in("p,A,B\nA,1,1\nB,1,1\n");
  SimilarityData s = parse_similarity(in);
  CostMatrix m = build_cost_matrix(VoterCost{VoterPhi::Eucl, 1.0, s.vectors}, 0);
  CHECK(m.entries().isZero());
}

TEST_CASE("similarity errors") {
  auto parse = [](const char* text) {
    return [text] {
      std::istringstream in(text);
      parse_similarity(in);
    };
  };
  CHECK(code_of(parse("p,A,B\nA,1,0.5\n")) == ErrorCode::NonSquare);
  CHECK(code_of(parse("p,A,B\nA,100,120\nB,50,100\n")) == ErrorCode::OutOfRangeScore);
  CHECK(code_of(parse("p,A,B\nA,1,-0.5\nB,0.5,1\n")) == ErrorCode::OutOfRangeScore);
}

TEST_CASE("format_double round-trips") {
  std::mt19937_64 rng(127);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int k = 0; k < 1000; ++k) {
    const double x = u(rng) * std::pow(10.0, static_cast<double>(k % 40 - 20));
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0 / 0.0) == "inf");
}

TEST_CASE("plan CSV round trip") {
  Histogram r = histogram_from_samples(std::vector<double>{1, 2});
  Histogram c = histogram_from_samples(std::vector<double>{2, 1});
  TransportPlan p = validate_plan(outer_product(r, c), r, c, 1e-12);
  std::ostringstream os;
  write_plan_csv(os, p);
  const std::string text = os.str();
  CHECK(text.rfind("i,j,mass\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  std::istringstream in(text);
  CHECK(read_plan_csv(in, 2) == p.entries());
}

TEST_CASE("marginal round trip through CSV") {
  Histogram r = histogram_from_samples(std::vector<double>{1, 2, 4});
  Histogram c = histogram_from_samples(std::vector<double>{3, 3, 1});
  std::ostringstream os;
  os << "index,r,c\n";
  for (int i = 0; i < 3; ++i) os << i << ',' << format_double(r[i]) << ',' << format_double(c[i]) << '\n';
  std::istringstream in(os.str());
  MarginalData d = parse_marginals(in);
  CHECK(d.r.weights() == r.weights());
  CHECK(d.c.weights() == c.weights());
}

TEST_CASE("json report is deterministic and complete") {
  Histogram u = Histogram::uniform(2);
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  SolveReport rep = exact_ot(CostMatrix(m), u, u);
  rep.wall_time = 1.25;
  auto j = to_json(rep);
  CHECK_FALSE(j.contains("wall_time"));
  CHECK(to_json(rep, true)["wall_time"] == 1.25);
  for (const char* key : {"regularizer", "objective_value", "transport_cost", "divergence_value",
                          "iterations", "termination", "marginal_residual", "plan", "trace"})
    CHECK(j.contains(key));
  CHECK(j.dump() == to_json(rep).dump());
  CHECK(json_number(1.0 / 0.0) == "inf");
}

TEST_CASE("grid json has one record per cell") {
  SweepGrid g;
  g.alphas = {0.1, 0.5, 0.9};
  g.epsilons = {0.1, 1, 10, 100};
  for (double a : g.alphas)
    for (double e : g.epsilons) {
      SweepCell cell;
      cell.alpha = a;
      cell.epsilon = e;
      cell.ok = e < 50;
      cell.error = "failed";
      g.cells.push_back(cell);
    }
  auto j = to_json(g);
  CHECK(j["cells"].size() == 12);
  CHECK(j["cells"][3]["error"] == "failed");
  std::ostringstream os;
  write_grid_csv(os, g);
  const std::string text = os.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 13);
}

TEST_CASE("cost matrix file with header") {
  const std::string path = "test_io_cost.csv";
  {
    std::ofstream f(path);
    f << "a,b\n0,1\n2,0\n";
  }
  CostMatrix m = ingest_cost_matrix(path);
  CHECK(m.entries()(1, 0) == 2.0);
  {
    std::ofstream f(path);
    f << "0,1,2\n2,0\n";
  }
  CHECK(code_of([&] { ingest_cost_matrix(path); }) == ErrorCode::NonSquare);
  std::remove(path.c_str());
}

TEST_CASE("write_output failure") {
  CHECK(code_of([] { write_output("/nonexistent/dir/out.json", "x"); }) == ErrorCode::IoError);
}
