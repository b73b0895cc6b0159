#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "oulab/runner.hpp"

using namespace oulab;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("oulab-test-" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ScenarioConfig small(const std::string& name) {
  ScenarioConfig c = preset(name);
  c.set_t_max(1e3);
  c.ensemble.n_paths = 4;
  return c;
}

Errc code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::invalid_argument;
}

}  // namespace

TEST(Presets, AllNamesResolveAndRoundTrip) {
  for (const auto& name : preset_names()) {
    const ScenarioConfig c = preset(name);
    EXPECT_NO_THROW(c.validate()) << name;
    const json j = to_json(c);
    EXPECT_EQ(to_json(scenario_from_json(j)), j) << name;
    EXPECT_EQ(config_hash(scenario_from_json(j)), config_hash(c)) << name;
  }
}

TEST(Presets, Contents) {
  const auto s = preset("scalar-sqrt2");
  EXPECT_EQ(s.system->A(0, 0), 1.0);
  EXPECT_EQ(s.system->D(0, 0), std::sqrt(2.0));
  EXPECT_EQ(s.ensemble.n_paths, 64);
  EXPECT_NEAR(s.t_max(), 1e6, 1e-6);
  const auto j = preset("jordan");
  EXPECT_EQ(j.system->A(0, 1), 1.0);
  EXPECT_EQ(j.system->A(1, 0), 0.0);
  const auto t = preset("tanh-perturbed");
  EXPECT_EQ(t.system->drift.kind, DriftKind::tanh_bounded);
  EXPECT_EQ(t.system->A, s.system->A);
  EXPECT_EQ(t.system->D, s.system->D);
  EXPECT_EQ(preset("kernel-suite").kernels.size(), 4u);
}

TEST(Presets, UnknownNameListsValidOnes) {
  try {
    preset("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config_error);
    EXPECT_NE(std::string(e.what()).find("scalar-sqrt2"), std::string::npos);
  }
}

TEST(Config, StrictParsing) {
  json j = to_json(preset("rotation"));
  json typo = j;
  typo["ensemble"]["n_path"] = 3;
  EXPECT_EQ(code_of([&] { scenario_from_json(typo); }), Errc::config_error);
  json top = j;
  top["extra"] = true;
  EXPECT_EQ(code_of([&] { scenario_from_json(top); }), Errc::config_error);
  json wrong_type = j;
  wrong_type["grid"]["t0"] = "ten";
  EXPECT_EQ(code_of([&] { scenario_from_json(wrong_type); }), Errc::config_error);
  json missing = j;
  missing.erase("name");
  EXPECT_EQ(code_of([&] { scenario_from_json(missing); }), Errc::config_error);
  json version = j;
  version["format_version"] = 99;
  EXPECT_EQ(code_of([&] { scenario_from_json(version); }), Errc::config_error);
}

TEST(Config, LoadFromFile) {
  const auto dir = scratch("load");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "c.json") << to_json(preset("jordan")).dump(2);
  EXPECT_EQ(to_json(load_scenario((dir / "c.json").string())), to_json(preset("jordan")));
  EXPECT_EQ(code_of([&] { load_scenario((dir / "missing.json").string()); }), Errc::io_error);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(code_of([&] { load_scenario((dir / "bad.json").string()); }), Errc::config_error);
}

TEST(Config, SetTmax) {
  ScenarioConfig c = preset("diagonal");
  c.set_t_max(1e5);
  EXPECT_EQ(c.grid.n_checkpoints, 41);
  EXPECT_NEAR(c.t_max(), 1e5, 1e-6);
}

TEST(Run, ArtifactsAndConstants) {
  const auto dir = scratch("run");
  const RunResult r = run_scenario(small("scalar-sqrt2"), dir);
  EXPECT_NEAR(r.summary.at("model").at("c_pred").get<double>(), 1.4142136, 1e-6);
  EXPECT_EQ(r.summary.at("schema"), std::string(kSummarySchema));
  EXPECT_EQ(r.summary.at("config"), to_json(small("scalar-sqrt2")));

  const std::string csv = slurp(dir / "ratios.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), std::string(kRatiosHeader));
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(lines, 1 + 4 * 21);

  const json manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("config_hash"), config_hash(small("scalar-sqrt2")));
  EXPECT_EQ(manifest.at("paths").size(), 4u);
  for (const auto& a : manifest.at("artifacts"))
    EXPECT_EQ(a.at("fnv1a64"), fnv1a_hex(slurp(dir / a.at("file").get<std::string>())));

  const RunResult rot = run_scenario(small("rotation"), scratch("run-rot"));
  EXPECT_NEAR(rot.summary.at("model").at("c_pred").get<double>(), 1.0, 1e-6);
}

TEST(Run, SameSeedSameChecksums) {
  const auto a = scratch("det-a"), b = scratch("det-b");
  auto c = small("jordan");
  const RunResult ra = run_scenario(c, a);
  c.ensemble.workers = 3;  // parallelism must not change results
  const RunResult rb = run_scenario(c, b);
  EXPECT_EQ(slurp(a / "ratios.csv"), slurp(b / "ratios.csv"));
  c.ensemble.seed = 43;
  run_scenario(c, b);
  EXPECT_NE(slurp(a / "ratios.csv"), slurp(b / "ratios.csv"));
}

TEST(Run, PerturbedWithTwinAndGronwall) {
  const RunResult r = run_scenario(small("tanh-perturbed"), scratch("tanh"));
  EXPECT_TRUE(r.summary.contains("linear_twin"));
  EXPECT_TRUE(r.summary.at("gronwall").at("pass").get<bool>());
  EXPECT_EQ(r.twin_paths.size(), 4u);
}

TEST(Run, KernelAndGumbelKinds) {
  auto k = preset("kernel-suite");
  k.set_t_max(1e5);
  k.ensemble.n_paths = 2;
  const RunResult rk = run_scenario(k, scratch("kernel"));
  EXPECT_EQ(rk.summary.at("kernels").size(), 4u);
  EXPECT_EQ(rk.manifest.at("paths").back().at("stream").get<int>(), 7);

  auto g = preset("gumbel");
  g.gumbel->n_values = {1000, 10000};
  g.gumbel->reps = 4;
  const RunResult rg = run_scenario(g, scratch("gumbel"));
  EXPECT_EQ(rg.summary.at("gumbel").at("batches").size(), 2u);
}

TEST(Run, PathDumpIsCapped) {
  auto c = small("diagonal");
  c.output.dump_path_steps = 10;
  const auto dir = scratch("dump");
  run_scenario(c, dir);
  const std::string dump = slurp(dir / "path_dump.csv");
  EXPECT_EQ(std::count(dump.begin(), dump.end(), '\n'), 11);
}

TEST(Run, ErrorCategories) {
  ScenarioConfig bad = preset("diagonal");
  bad.system->A = -bad.system->A;
  EXPECT_EQ(code_of([&] { run_scenario(bad, scratch("bad")); }), Errc::not_hurwitz);
  EXPECT_EQ(exit_code_for(Errc::not_hurwitz), 2);
  EXPECT_EQ(exit_code_for(Errc::model_error), 3);
  EXPECT_EQ(exit_code_for(Errc::io_error), 4);
  EXPECT_EQ(exit_code_for(Errc::config_error), 5);
}
