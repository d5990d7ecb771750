#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "mvlab/errors.hpp"
#include "mvlab/experiment.hpp"
#include "mvlab/io.hpp"

using namespace mvlab;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& row) {
  std::vector<std::string> out;
  std::istringstream in(row);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  if (!row.empty() && row.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

TEST_CASE("prior JSON documents") {
  std::vector<std::string> warnings;
  const Prior p = prior_from_json(Json::parse(R"({"theta": 0.3, "atoms": {"a": 2, "b": 2}})"), &warnings);
  CHECK(p.theta() == doctest::Approx(0.3));
  CHECK(p.atoms()[0].weight == doctest::Approx(0.5));
  CHECK(warnings.size() == 1);

  warnings.clear();
  const Prior q = prior_from_json(Json::parse(R"({"atoms": {"x": 0.25, "y": 0.75}})"), &warnings);
  CHECK(warnings.empty());
  CHECK(q.atoms()[1].label == "y");

  const Prior t = prior_from_json(Json::parse(R"({"tail": {"family": "power-log", "c": 1.2, "head_terms": 50}})"));
  REQUIRE(t.has_tail());
  CHECK(t.tail()->head_terms() == 50);
  CHECK(prior_from_json(prior_to_json(t)).tail()->parameter() == doctest::Approx(1.2));

  CHECK_THROWS_AS(prior_from_json(Json::parse(R"({"tail": {"family": "zipf", "c": 2}})")), UnsupportedFamily);
  CHECK_THROWS_AS(prior_from_json(Json::parse(R"({"theta": 0.5})")), InvalidPrior);
}

TEST_CASE("prior sources") {
  CHECK(parse_prior_source("bernoulli:0.25").prior.atoms()[1].weight == doctest::Approx(0.25));
  CHECK(parse_prior_source("uniform:3").prior.support_size() == 3);
  CHECK(parse_prior_source("mixed:0.5:1,1").prior.theta() == doctest::Approx(0.5));
  CHECK(parse_prior_source(R"({"theta": 1})").id == "inline");
  CHECK_THROWS_AS(parse_prior_source("no-such-file.json"), InvalidArgument);

  const std::string path = (std::filesystem::temp_directory_path() / "mvlab_prior_test.json").string();
  std::ofstream(path) << R"({"atoms": {"a": 0.5, "b": 0.5}})";
  const PriorSource s = parse_prior_source(path);
  CHECK(s.id == "mvlab_prior_test");
  CHECK(s.prior.support_size() == 2);
  std::filesystem::remove(path);
}

TEST_CASE("format_number") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("bounds table for Bernoulli(1/2)") {
  ExperimentConfig cfg;
  cfg.command = Command::kBounds;
  cfg.N_list = {1, 2, 3, 4};
  const ExperimentOutput out = run_experiment(cfg);
  CHECK(out.all_pass);
  const auto ls = lines(out.text);
  REQUIRE(ls.size() == 6);
  CHECK(ls[0] == "#schema=1");
  CHECK(ls[1] == "prior_id,N,D,method,xi_value,gap_bound,bound_sqrt,bound_neyman,bound_z_beta,construct_lb,pass");
  for (int i = 2; i < 6; ++i) {
    const auto f = fields(ls[i]);
    REQUIRE(f.size() == 11);
    CHECK(f[0] == "bernoulli:0.5");
    CHECK(f[1] == std::to_string(i - 1));
    CHECK(f[2] == "2");
    CHECK(f[10] == "true");
    const double xi = std::stod(f[4]);
    for (int b = 6; b <= 8; ++b) CHECK(xi <= std::stod(f[b]) + 1e-9);
    CHECK(std::stod(f[9]) <= xi + std::stod(f[5]) + 1e-9);
  }
}

TEST_CASE("maxvar on a continuous prior") {
  ExperimentConfig cfg;
  cfg.prior = R"({"theta": 1})";
  cfg.N = 7;
  cfg.D = BranchCap(3);
  const auto ls = lines(run_experiment(cfg).text);
  REQUIRE(ls.size() == 3);
  const auto f = fields(ls[2]);
  CHECK(std::stod(f[4]) == doctest::Approx(28.0 / 3.0));
  CHECK(f[6].empty());
}

TEST_CASE("nr-check emits 101 passing rows") {
  ExperimentConfig cfg;
  cfg.command = Command::kNrCheck;
  const ExperimentOutput out = run_experiment(cfg);
  const auto ls = lines(out.text);
  CHECK(ls.size() == 103);
  CHECK(out.all_pass);
  for (std::size_t i = 2; i < ls.size(); ++i) CHECK(fields(ls[i])[2] == "true");
}

TEST_CASE("certify-game record") {
  ExperimentConfig cfg;
  cfg.command = Command::kCertifyGame;
  cfg.prior = "bernoulli:0.25";
  cfg.N = 2;
  const ExperimentOutput out = run_experiment(cfg);
  const Json j = Json::parse(out.text);
  CHECK(j.at("pass").get<bool>());
  CHECK(j.at("guaranteed").get<double>() >= j.at("xi_half_lb").get<double>() - 1e-6);
  CHECK(j.at("value").is_number());
  CHECK(j.contains("prior"));
}

TEST_CASE("growth output carries the fit") {
  ExperimentConfig cfg;
  cfg.command = Command::kGrowth;
  cfg.prior = "continuous";
  cfg.D = BranchCap(2);
  cfg.N_list = {2, 4, 8};
  const auto ls = lines(run_experiment(cfg).text);
  REQUIRE(ls.size() == 6);
  CHECK(ls.back().rfind("#fit exponent=0.5", 0) == 0);

  cfg.format = OutputFormat::kJson;
  const Json j = Json::parse(run_experiment(cfg).text);
  CHECK(j.at("rows").size() == 3);
  CHECK(j.at("fit").at("exponent").get<double>() == doctest::Approx(0.5));
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  cfg.N = 0;
  CHECK_THROWS_AS(run_experiment(cfg), InvalidArgument);
  cfg.N = 2;
  cfg.grid = 1;
  CHECK_THROWS_AS(run_experiment(cfg), InvalidArgument);
  cfg.grid = 64;
  cfg.betas = {0.7};
  CHECK_THROWS_AS(run_experiment(cfg), InvalidDelta);
  cfg.betas = default_beta_grid();
  cfg.N_list = {3, 2};
  CHECK_THROWS_AS(run_experiment(cfg), InvalidArgument);
  CHECK_THROWS_AS(command_from_string("simulate"), InvalidArgument);
}

TEST_CASE("witness dump and atomic write") {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string w = (dir / "mvlab_witness_test.json").string();
  ExperimentConfig cfg;
  cfg.prior = "uniform:3";
  cfg.N = 2;
  cfg.witness_out = w;
  run_experiment(cfg);
  std::ifstream in(w);
  const MartingaleTree t = tree_from_json(Json::parse(in));
  CHECK(validate(t, BranchCap(2)).ok());
  CHECK(t.depth() == 3);
  std::filesystem::remove(w);

  const std::string out = (dir / "mvlab_atomic_test.txt").string();
  write_atomically(out, "abc\n");
  std::ifstream back(out);
  std::string s;
  std::getline(back, s);
  CHECK(s == "abc");
  std::filesystem::remove(out);
}
