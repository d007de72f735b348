#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mcpar/config.hpp"
#include "mcpar/io.hpp"

using namespace mcpar;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mcpar_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, DefaultsFromEmptyObject) {
  const auto c = parse_config(json::object());
  EXPECT_EQ(c.run.n_mc, 16u);
  EXPECT_EQ(c.run.n_serial, 1u);
  EXPECT_TRUE(std::holds_alternative<ToyConfig>(c.run.problem));
  EXPECT_EQ(c.tolerance, 0.05);
  EXPECT_EQ(c.samples_format, SamplesFormat::bin);
}

TEST(Config, FullToy) {
  const auto c = parse_config(json::parse(R"({
    "n_mc": 4096, "n_serial": 16, "n_workers": 3, "base_seed": "0xff",
    "lease_duration_ms": 250, "output_dir": "out/x",
    "histogram": {"lower_edge": -4, "upper_edge": 4, "n_bins": 80},
    "tolerance": 0.1, "samples_format": "csv",
    "prices": {"vm_hour_price": 0.2, "storage_price": 0.01, "egress_price": 0.05, "billing": "fractional"},
    "problem": {"type": "toy", "busy_work": 100}
  })"));
  EXPECT_EQ(c.run.n_mc, 4096u);
  EXPECT_EQ(c.run.n_tasks(), 256u);
  EXPECT_EQ(c.run.n_workers, 3u);
  EXPECT_EQ(c.run.base_seed, 255u);
  EXPECT_EQ(c.run.lease_duration.count(), 250);
  EXPECT_EQ(c.run.output_dir, fs::path("out/x"));
  EXPECT_EQ(c.run.histogram_spec.n_bins, 80u);
  EXPECT_EQ(c.run.histogram_spec.lower_edge, -4.0);
  EXPECT_EQ(c.samples_format, SamplesFormat::csv);
  EXPECT_EQ(c.prices.billing, Billing::fractional);
  EXPECT_EQ(c.prices.vm_hour_price, 0.2);
  EXPECT_EQ(std::get<ToyConfig>(c.run.problem).busy_work, 100u);
}

TEST(Config, Bar) {
  const auto c = parse_config(json::parse(R"({
    "n_mc": 64, "n_serial": 4,
    "problem": {"type": "bar", "e_delta": 0.2, "n_elements": 20, "t_final": 0.004, "n_steps": 512,
                "u0": {"profile": "sine", "amplitude": 1e-5}, "v0": "zero", "force_profile": "uniform",
                "force_amplitude": 10}
  })"));
  const auto& b = std::get<BarConfig>(c.run.problem);
  EXPECT_EQ(b.e_delta, 0.2);
  EXPECT_EQ(b.n_elements, 20u);
  EXPECT_EQ(b.n_steps(), 512u);
  EXPECT_EQ(b.u0.kind, NodalProfile::Kind::sine);
  EXPECT_EQ(b.u0.amplitude, 1e-5);
  EXPECT_EQ(b.force_profile.kind, ForceProfile::Kind::uniform);
  EXPECT_EQ(b.force_amplitude, 10.0);
  // Unspecified constants keep their defaults.
  EXPECT_EQ(b.rho, 7850.0);
}

TEST(Config, BarDefaultStep) {
  const auto c = parse_config(json::parse(R"({"problem": {"type": "bar", "t_final": 0.002}})"));
  EXPECT_EQ(std::get<BarConfig>(c.run.problem).n_steps(), 1024u);
}

TEST(Config, Rejections) {
  auto bad = [](const char* text) { EXPECT_THROW(parse_config(json::parse(text)), ConfigError) << text; };
  bad(R"({"n_mc": 10, "n_serial": 3})");
  bad(R"({"n_mc": 0})");
  bad(R"({"n_mc": -4})");
  bad(R"({"n_mc": 2.5})");
  bad(R"({"n_workers": 0})");
  bad(R"({"lease_duration_ms": 0})");
  bad(R"({"nmc": 16})");
  bad(R"({"base_seed": "twelve"})");
  bad(R"({"histogram": {"lower_edge": 1, "upper_edge": 0}})");
  bad(R"({"histogram": {"n_bins": 0}})");
  bad(R"({"histogram": {"bins": 10}})");
  bad(R"({"samples_format": "parquet"})");
  bad(R"({"tolerance": 0})");
  bad(R"({"prices": {"vm_hour_price": -1}})");
  bad(R"({"prices": {"billing": "monthly"}})");
  bad(R"({"problem": {"type": "plate"}})");
  bad(R"({"problem": {"type": "toy", "rho": 1}})");
  bad(R"({"problem": {"type": "bar", "dt": 1e-5, "n_steps": 10}})");
  bad(R"({"problem": {"type": "bar", "rho": -1}})");
  bad(R"({"problem": {"type": "bar", "u0": {"profile": "parabola"}}})");
  bad(R"({"problem": {"type": "bar", "n_elements": 2, "u0": {"values": [0, 1]}}})");
  bad(R"({"problem": {"type": "bar", "force_profile": {"weights": [1]}}})");
  bad(R"([1, 2])");
}

TEST(Config, LoadReportsPath) {
  try {
    load_config("/nonexistent/dir/run.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/run.json"), std::string::npos);
  }
  const auto dir = scratch("load");
  {
    std::ofstream(dir / "broken.json") << "{ \"n_mc\": ";
  }
  EXPECT_THROW(load_config(dir / "broken.json"), ConfigError);
  {
    std::ofstream(dir / "ok.json") << "// comment\n{ \"n_mc\": 32 }\n";
  }
  EXPECT_EQ(load_config(dir / "ok.json").run.n_mc, 32u);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 6.02214076e23, -1e-300, 28.5}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Io, AtomicWriteReplacesWholeFile) {
  const auto dir = scratch("atomic");
  const auto p = dir / "sub" / "f.txt";
  atomic_write(p, "first version, fairly long\n");
  atomic_write(p, "second\n");
  EXPECT_EQ(slurp(p), "second\n");
  EXPECT_FALSE(fs::exists(dir / "sub" / "f.txt.tmp"));
}

TEST(Io, MomentsCsvFormat) {
  MergedResult m;
  m.channel_moments = {accumulate(std::vector<double>{1.0, 2.0, 3.0}), accumulate(std::vector<double>{5.0})};
  m.channel_times = {0.0, 0.5};
  EXPECT_EQ(moments_csv(m), "channel_index,time,mean,std\n0,0,2,1\n1,0.5,5,nan\n");
}

TEST(Io, SamplesBinAndCsv) {
  const auto dir = scratch("samples");
  const std::vector<double> xs{1.5, -2.25, 1e-310};
  const auto bin = write_samples(dir, xs, SamplesFormat::bin);
  EXPECT_EQ(read_samples_bin(bin), xs);
  const auto csv = write_samples(dir, xs, SamplesFormat::csv);
  EXPECT_EQ(slurp(csv).substr(0, 31), "sample_index,value\n0,1.5\n1,-2.2");
}

TEST(Io, RunOutputs) {
  const auto dir = scratch("outputs");
  RunConfig c;
  c.n_mc = 64;
  c.n_serial = 8;
  c.base_seed = 11;
  const auto merged = run(c);
  write_run_outputs(dir, merged, c, PriceSheet{1.0, 0.0, 0.0, Billing::hourly}, SamplesFormat::bin);
  EXPECT_TRUE(fs::exists(dir / "moments.csv"));
  EXPECT_EQ(read_samples_bin(dir / "samples.bin"), merged.tracked_samples);
  const auto report = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["base_seed"], 11u);
  EXPECT_EQ(report["n_tasks"], 8u);
  EXPECT_EQ(report["storage"]["intermediate_bytes"], 8 * encoded_size(1, 8));
  EXPECT_EQ(report["storage"]["merged_bytes"], encoded_size(1, 64));
  EXPECT_EQ(report["cost"]["estimated"], 1.0);  // one worker, one started hour
  EXPECT_EQ(report["moments_checksum"], moments_checksum(merged));
  for (const char* key : {"split_ms", "process_ms", "merge_ms", "total_ms"}) {
    EXPECT_TRUE(report["timing"].contains(key)) << key;
  }
}

TEST(Io, HistogramAndResidueCsv) {
  const HistogramSpec spec{0.0, 1.0, 2};
  const auto h = build_histogram(std::vector<double>{0.25, 0.75, 0.8, 0.9}, spec);
  EXPECT_EQ(histogram_csv(h), "bin_center,density\n0.25,0.5\n0.75,1.5\n");
  const auto r = series_residue_report(ResidueQuantity::mean, std::vector<double>{1.0, 2.0},
                                       std::vector<double>{1.5, 2.0}, 4, 16, 0.05);
  EXPECT_EQ(series_residue_csv(std::vector<double>{0.0, 0.1}, r), "time,residue\n0,0.5\n0.1,0\n");
  const auto j = residue_json(r);
  EXPECT_EQ(j["quantity"], "mean");
  EXPECT_EQ(j["residue"], 0.5);
  EXPECT_EQ(j["converged"], false);
}

TEST(Config, ShippedConfigsParse) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(MCPAR_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 2u);
}
