#include <cmath>
#include <filesystem>
#include <numbers>

#include <gtest/gtest.h>

#include "parity_bell/io.hpp"

using namespace parity_bell;

namespace
{
std::string error_of(const std::string& text)
{
    try
    {
        parse_config(text);
    }
    catch (const ValidationError& e)
    {
        return e.what();
    }
    return {};
}

std::string first_line(const std::string& text)
{
    return text.substr(0, text.find('\n'));
}
}  // namespace

TEST(ParseConfig, Defaults)
{
    const auto cfg = parse_config("");
    EXPECT_EQ(cfg.grid_size, 2048u);
    EXPECT_EQ(cfg.x_max, 4.0);
    EXPECT_EQ(cfg.pump.w, 1.0);
    EXPECT_FALSE(cfg.pump.blocked());
    EXPECT_EQ(std::get<PumpRotation>(cfg.pump.mode).phi, 0.0);
    EXPECT_EQ(cfg.kernel_width, 0.005);
    EXPECT_TRUE(std::holds_alternative<IdealAnalyzer>(cfg.analyzer));
    EXPECT_EQ(cfg.run.seed, 0u);
    EXPECT_EQ(cfg.run.pairs_per_setting, 1e4);
    EXPECT_FALSE(cfg.run.double_blocked_counts);
    EXPECT_TRUE(cfg.output_path.empty());
    EXPECT_FALSE(cfg.output_format.has_value());
}

TEST(ParseConfig, KeyValueAndComments)
{
    const auto cfg = parse_config(R"(
# grid
grid.M = 4096
grid.x_max=5   # wider
pump.phi=1.5707963
analyzer.visibility=0.845
run.seed=7
run.pairs_per_setting=2.5e4
run.double_blocked_counts=true
output.path=out.json
output.format=json
)");
    EXPECT_EQ(cfg.grid_size, 4096u);
    EXPECT_EQ(cfg.x_max, 5.0);
    EXPECT_NEAR(std::get<PumpRotation>(cfg.pump.mode).phi, 1.5707963, 1e-15);
    EXPECT_EQ(std::get<VisibilityAnalyzer>(cfg.analyzer).visibility, 0.845);
    EXPECT_EQ(std::get<VisibilityAnalyzer>(cfg.run.model).visibility, 0.845);
    EXPECT_EQ(cfg.run.seed, 7u);
    EXPECT_EQ(cfg.run.pairs_per_setting, 2.5e4);
    EXPECT_TRUE(cfg.run.double_blocked_counts);
    EXPECT_EQ(cfg.output_path, "out.json");
    EXPECT_EQ(cfg.output_format, OutputFormat::json);
}

TEST(ParseConfig, NestedJson)
{
    const auto cfg = parse_config(R"({"grid": {"M": 1024}, "pump": {"blocked": "negative"},
        "analyzer": {"a1": 0.01, "d1": 0.2}, "kernel": {"b": 0.01}})");
    EXPECT_EQ(cfg.grid_size, 1024u);
    EXPECT_EQ(std::get<PumpBlocked>(cfg.pump.mode).side, HalfPlane::negative);
    const auto& m = std::get<MisalignedAnalyzer>(cfg.analyzer);
    EXPECT_EQ(m.a1, 0.01);
    EXPECT_EQ(m.d1, 0.2);
    EXPECT_EQ(m.a2, 0.0);
    EXPECT_EQ(cfg.kernel_width, 0.01);
}

TEST(ParseConfig, PhysicalKernel)
{
    const auto cfg = parse_config("kernel.lambda_p=405e-9\nkernel.ell=1.5e-3\npump.w=1.1e-3\n");
    EXPECT_NEAR(cfg.kernel_width, 8.71e-6, 0.01e-6);
    EXPECT_NEAR(cfg.relative_kernel_width(), 7.9e-3, 0.05e-3);
    ASSERT_TRUE(cfg.physical_kernel.has_value());
    EXPECT_EQ(cfg.simulation_pump().w, 1.0);
}

TEST(ParseConfig, Errors)
{
    EXPECT_NE(error_of("pump.phi=3.14159\npump.blocked=positive").find("mutually exclusive"),
              std::string::npos);
    EXPECT_NE(error_of("pump.colour=red").find("pump.colour"), std::string::npos);
    EXPECT_NE(error_of("pump.colour=red").find("unknown key"), std::string::npos);
    EXPECT_NE(error_of("grid.M=3").find("grid.M"), std::string::npos);
    EXPECT_NE(error_of("grid.M=abc").find("grid.M"), std::string::npos);
    EXPECT_NE(error_of("grid.x_max=-1").find("grid.x_max"), std::string::npos);
    EXPECT_NE(error_of("kernel.b=0").find("kernel.b"), std::string::npos);
    EXPECT_NE(error_of("kernel.b=0.01\nkernel.lambda_p=4e-7\nkernel.ell=1e-3").find("mutually exclusive"),
              std::string::npos);
    EXPECT_NE(error_of("kernel.lambda_p=4e-7").find("kernel.ell"), std::string::npos);
    EXPECT_NE(error_of("analyzer.visibility=1.5").find("analyzer.visibility"), std::string::npos);
    EXPECT_NE(error_of("analyzer.visibility=0.9\nanalyzer.a1=0.1").find("mutually exclusive"),
              std::string::npos);
    EXPECT_NE(error_of("analyzer.a2=3").find("analyzer.a2"), std::string::npos);
    EXPECT_NE(error_of("run.pairs_per_setting=0").find("run.pairs_per_setting"), std::string::npos);
    EXPECT_NE(error_of("run.seed=-4").find("run.seed"), std::string::npos);
    EXPECT_NE(error_of("run.double_blocked_counts=maybe").find("run.double_blocked_counts"),
              std::string::npos);
    EXPECT_NE(error_of("output.format=xml").find("output.format"), std::string::npos);
    EXPECT_NE(error_of("grid.M=8\ngrid.M=16").find("more than once"), std::string::npos);
    EXPECT_NE(error_of("just some text").find("line 1"), std::string::npos);
    EXPECT_NE(error_of("{\"grid\": ").find("malformed"), std::string::npos);
    EXPECT_NE(error_of("pump.phi=nan").find("pump.phi"), std::string::npos);
}

TEST(Csv, Headers)
{
    const auto grid = make_grid(8, 1);
    const auto f = SampledField(grid, std::vector<Complex>(8, Complex{0.5, -0.25}));
    EXPECT_EQ(first_line(field_csv(f)), "x,re,im");
    EXPECT_EQ(first_line(schmidt_csv(schmidt_from_singular_values({0.8, 0.6}))),
              "n,lambda_n,lambda_n_squared,cumulative");
    Landscape map{AngleGrid{2, 0, 1}, AngleGrid{2, 0, 1}, {1, 2, 3, 4}};
    EXPECT_EQ(landscape_csv(map), "theta1,theta2,E\n0,0,1\n0,0.5,2\n0.5,0,3\n0.5,0.5,4\n");
    EXPECT_EQ(first_line(counts_csv({})), "theta1,theta2,n_pp,n_pm,n_mp,n_mm");
    EXPECT_EQ(first_line(slice_csv({})), "theta1,n_pp,sigma");
}

TEST(Csv, NineSignificantDigits)
{
    EXPECT_EQ(format_real(std::numbers::pi), "3.14159265");
    EXPECT_EQ(format_real(1e-12), "1e-12");
    EXPECT_EQ(format_real(2500), "2500");
    const auto text = schmidt_csv(schmidt_from_singular_values({0.8, 0.6}));
    EXPECT_EQ(text, "n,lambda_n,lambda_n_squared,cumulative\n0,0.8,0.64,0.64\n1,0.6,0.36,1\n");
    EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST(Report, RoundTrip)
{
    ExperimentReport report;
    report.state_label = "Phi+";
    report.settings = optimal_settings(0);
    const auto pairs = report.settings.pairs();
    for (std::size_t i = 0; i < 4; ++i)
    {
        report.records[i] = CountRecord{pairs[i].first, pairs[i].second,
                                        {4000 + i, 1000, 1000 - i, 4000}, 1e4};
    }
    report.estimate = estimate_chsh(report.records);
    const auto text = write_report(report);
    const auto back = parse_report(text);
    EXPECT_EQ(back.state_label, report.state_label);
    EXPECT_EQ(back.records, report.records);
    EXPECT_EQ(back.estimate.b, report.estimate.b);
    EXPECT_EQ(back.estimate.sigma_b, report.estimate.sigma_b);
    EXPECT_EQ(back.estimate.n_sigma, report.estimate.n_sigma);
    EXPECT_EQ(back.estimate.e, report.estimate.e);
    EXPECT_EQ(back.estimate.sigma_e, report.estimate.sigma_e);
    EXPECT_EQ(back.settings.theta1p, report.settings.theta1p);
    EXPECT_EQ(write_report(back), text);

    const auto doc = nlohmann::json::parse(text);
    for (const char* key : {"state_label", "B", "sigma_B", "n_sigma", "settings", "per_setting_counts"})
    {
        EXPECT_TRUE(doc.contains(key)) << key;
    }
    EXPECT_THROW(parse_report("{}"), ValidationError);
}

TEST(Report, ExactPathHasNullSignificance)
{
    ExperimentReport report;
    report.estimate = chsh_from_exact({0.7, 0.7, 0.7, -0.7});
    const auto doc = report_to_json(report);
    EXPECT_TRUE(doc.at("n_sigma").is_null());
    EXPECT_TRUE(std::isinf(parse_report(doc.dump()).estimate.n_sigma));
}

TEST(Files, WriteReadAndErrors)
{
    const auto path = (std::filesystem::temp_directory_path() / "parity_bell_io_test.txt").string();
    write_text_file(path, "a,b\n1,2\n");
    EXPECT_EQ(read_text_file(path), "a,b\n1,2\n");
    std::filesystem::remove(path);
    try
    {
        write_text_file("/nonexistent-dir/x.csv", "x");
        FAIL();
    }
    catch (const IoError& e)
    {
        EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/x.csv"), std::string::npos);
    }
    EXPECT_THROW(read_text_file("/nonexistent-dir/y.csv"), IoError);
}
