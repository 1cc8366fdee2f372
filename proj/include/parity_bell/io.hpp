#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "parity_bell/bell.hpp"
#include "parity_bell/biphoton.hpp"
#include "parity_bell/counting.hpp"
#include "parity_bell/errors.hpp"
#include "parity_bell/field.hpp"

namespace parity_bell
{

class IoError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//

enum class OutputFormat
{
    csv,
    json
};

/*!
 * Validated run configuration.
 *
 * Grid lengths are in units of the pump width. The pump and kernel widths
 * may be given in any common unit (dimensionless or SI); only b / w enters
 * the simulation.
 */
struct Config
{
    std::size_t grid_size = 2048;
    double x_max = 4;
    PumpSpec pump;
    // Kernel width in the units of pump.w
    double kernel_width = 0.005;
    // Set when the kernel was derived from lambda_p and ell
    std::optional<std::pair<double, double>> physical_kernel;
    AnalyzerModel analyzer = IdealAnalyzer{};
    RunConfig run;
    std::string output_path;
    // Unset means the subcommand's natural format
    std::optional<OutputFormat> output_format;

    // b / w
    double relative_kernel_width() const { return kernel_width / pump.w; }

    Grid grid() const { return Grid(grid_size, x_max); }

    // Pump in simulation units (w = 1)
    PumpSpec simulation_pump() const
    {
        PumpSpec spec = pump;
        spec.w = 1;
        return spec;
    }
};

namespace detail
{
inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
    {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

inline double parse_real(const std::string& key, const std::string& text)
{
    const char* begin = text.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (text.empty() || end != begin + text.size() || !std::isfinite(value))
    {
        throw ValidationError(key + ": expected a finite number, got '" + text + "'");
    }
    return value;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& text)
{
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    {
        throw ValidationError(key + ": expected a non-negative integer, got '" + text + "'");
    }
    try
    {
        return std::stoull(text);
    }
    catch (const std::exception&)
    {
        throw ValidationError(key + ": integer out of range: '" + text + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& text)
{
    if (text == "true" || text == "1" || text == "yes")
    {
        return true;
    }
    if (text == "false" || text == "0" || text == "no")
    {
        return false;
    }
    throw ValidationError(key + ": expected true or false, got '" + text + "'");
}

inline void flatten_json(const nlohmann::json& node,
                         const std::string& prefix,
                         std::vector<std::pair<std::string, std::string>>& out)
{
    if (node.is_object())
    {
        for (const auto& [name, child] : node.items())
        {
            flatten_json(child, prefix.empty() ? name : prefix + "." + name, out);
        }
    }
    else if (node.is_string())
    {
        out.emplace_back(prefix, node.get<std::string>());
    }
    else if (node.is_boolean() || node.is_number())
    {
        out.emplace_back(prefix, node.dump());
    }
    else
    {
        throw ValidationError(prefix + ": unsupported value " + node.dump());
    }
}

// key=value lines ('#' starts a comment) or a nested JSON object
inline std::vector<std::pair<std::string, std::string>> config_entries(std::string_view text)
{
    std::vector<std::pair<std::string, std::string>> entries;
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{')
    {
        nlohmann::json doc;
        try
        {
            doc = nlohmann::json::parse(body);
        }
        catch (const nlohmann::json::parse_error& e)
        {
            throw ValidationError(std::string("malformed JSON config: ") + e.what());
        }
        flatten_json(doc, "", entries);
        return entries;
    }
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        const auto hash = line.find('#');
        const std::string content = trim(line.substr(0, hash));
        if (content.empty())
        {
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos)
        {
            throw ValidationError("line " + std::to_string(line_no) + ": expected key=value");
        }
        entries.emplace_back(trim(content.substr(0, eq)), trim(content.substr(eq + 1)));
    }
    return entries;
}
}  // namespace detail

/*!
 * Parse and validate a configuration.
 *
 * Every error names the offending key. Defaults: M = 2048, x_max = 4,
 * w = 1, b = 0.005, phi = 0, ideal analyzer, seed 0, 1e4 pairs per setting.
 */
inline Config parse_config(std::string_view text)
{
    using detail::parse_real;
    Config cfg;
    std::optional<double> phi;
    std::optional<HalfPlane> blocked;
    std::optional<double> b, lambda_p, ell, visibility;
    MisalignedAnalyzer misaligned;
    bool any_misaligned = false;
    std::map<std::string, int> seen;

    for (const auto& [key, value] : detail::config_entries(text))
    {
        if (seen[key]++ > 0)
        {
            throw ValidationError(key + ": specified more than once");
        }
        if (key == "grid.M")
        {
            const auto m = detail::parse_unsigned(key, value);
            if (m < 4 || m % 2 != 0)
            {
                throw ValidationError(key + ": M must be an even integer >= 4");
            }
            cfg.grid_size = static_cast<std::size_t>(m);
        }
        else if (key == "grid.x_max")
        {
            cfg.x_max = parse_real(key, value);
            if (!(cfg.x_max > 0))
            {
                throw ValidationError(key + ": must be positive");
            }
        }
        else if (key == "pump.w")
        {
            cfg.pump.w = parse_real(key, value);
            if (!(cfg.pump.w > 0))
            {
                throw ValidationError(key + ": must be positive");
            }
        }
        else if (key == "pump.phi")
        {
            phi = parse_real(key, value);
        }
        else if (key == "pump.blocked")
        {
            if (value == "positive")
            {
                blocked = HalfPlane::positive;
            }
            else if (value == "negative")
            {
                blocked = HalfPlane::negative;
            }
            else
            {
                throw ValidationError(key + ": expected positive or negative");
            }
        }
        else if (key == "kernel.b")
        {
            b = parse_real(key, value);
            if (!(*b > 0))
            {
                throw ValidationError(key + ": must be positive");
            }
        }
        else if (key == "kernel.lambda_p" || key == "kernel.ell")
        {
            const double v = parse_real(key, value);
            if (!(v > 0))
            {
                throw ValidationError(key + ": must be positive");
            }
            (key == "kernel.ell" ? ell : lambda_p) = v;
        }
        else if (key == "analyzer.visibility")
        {
            visibility = parse_real(key, value);
            if (*visibility < 0 || *visibility > 1)
            {
                throw ValidationError(key + ": must lie in [0, 1]");
            }
        }
        else if (key == "analyzer.a1" || key == "analyzer.d1" || key == "analyzer.a2"
                 || key == "analyzer.d2")
        {
            const double v = parse_real(key, value);
            any_misaligned = true;
            if (key == "analyzer.a1")
            {
                misaligned.a1 = v;
            }
            else if (key == "analyzer.d1")
            {
                misaligned.d1 = v;
            }
            else if (key == "analyzer.a2")
            {
                misaligned.a2 = v;
            }
            else
            {
                misaligned.d2 = v;
            }
        }
        else if (key == "run.seed")
        {
            cfg.run.seed = detail::parse_unsigned(key, value);
        }
        else if (key == "run.pairs_per_setting")
        {
            cfg.run.pairs_per_setting = parse_real(key, value);
            if (!(cfg.run.pairs_per_setting > 0))
            {
                throw ValidationError(key + ": must be positive");
            }
        }
        else if (key == "run.double_blocked_counts")
        {
            cfg.run.double_blocked_counts = detail::parse_bool(key, value);
        }
        else if (key == "output.path")
        {
            cfg.output_path = value;
        }
        else if (key == "output.format")
        {
            if (value == "csv")
            {
                cfg.output_format = OutputFormat::csv;
            }
            else if (value == "json")
            {
                cfg.output_format = OutputFormat::json;
            }
            else
            {
                throw ValidationError(key + ": expected csv or json");
            }
        }
        else
        {
            throw ValidationError(key + ": unknown key");
        }
    }

    if (phi && blocked)
    {
        throw ValidationError("pump.phi, pump.blocked: mutually exclusive");
    }
    if (blocked)
    {
        cfg.pump.mode = PumpBlocked{*blocked};
    }
    else
    {
        cfg.pump.mode = PumpRotation{phi.value_or(0.0)};
    }

    if (b && (lambda_p || ell))
    {
        throw ValidationError("kernel.b, kernel.lambda_p/kernel.ell: mutually exclusive");
    }
    if (lambda_p.has_value() != ell.has_value())
    {
        throw ValidationError(std::string(lambda_p ? "kernel.ell" : "kernel.lambda_p")
                              + ": required with the physical kernel");
    }
    if (lambda_p)
    {
        cfg.kernel_width = schmidt_number_analytic(cfg.pump.w, *lambda_p, *ell).kernel_width;
        cfg.physical_kernel = std::make_pair(*lambda_p, *ell);
    }
    else if (b)
    {
        cfg.kernel_width = *b;
    }

    if (visibility && any_misaligned)
    {
        throw ValidationError("analyzer.visibility, analyzer.a*/d*: mutually exclusive");
    }
    if (visibility)
    {
        cfg.analyzer = VisibilityAnalyzer{*visibility};
    }
    else if (any_misaligned)
    {
        for (auto [name, a] : {std::pair{"analyzer.a1", misaligned.a1},
                               std::pair{"analyzer.a2", misaligned.a2}})
        {
            if (std::abs(a) > 0.5 * cfg.x_max)
            {
                throw ValidationError(std::string(name) + ": flip axis outside trusted region");
            }
        }
        cfg.analyzer = misaligned;
    }
    cfg.run.model = cfg.analyzer;
    return cfg;
}

//---------------------------------------------------------------------------//
// CSV emitters
//---------------------------------------------------------------------------//

// 9 significant digits
inline std::string format_real(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

inline std::string csv_table(const std::string& header,
                             const std::vector<std::vector<double>>& rows)
{
    std::string out = header + "\n";
    for (const auto& row : rows)
    {
        for (std::size_t i = 0; i < row.size(); ++i)
        {
            if (i > 0)
            {
                out += ',';
            }
            out += format_real(row[i]);
        }
        out += '\n';
    }
    return out;
}

inline std::string field_csv(const SampledField& f)
{
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < f.size(); ++k)
    {
        rows.push_back({f.grid().x(k), f[k].real(), f[k].imag()});
    }
    return csv_table("x,re,im", rows);
}

inline std::string schmidt_csv(const SchmidtSpectrum& spectrum)
{
    std::vector<std::vector<double>> rows;
    double cumulative = 0;
    for (std::size_t n = 0; n < spectrum.lambda.size(); ++n)
    {
        const double l = spectrum.lambda[n];
        cumulative += l * l;
        rows.push_back({static_cast<double>(n), l, l * l, cumulative});
    }
    return csv_table("n,lambda_n,lambda_n_squared,cumulative", rows);
}

inline std::string landscape_csv(const Landscape& map)
{
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < map.theta1.count; ++i)
    {
        for (std::size_t j = 0; j < map.theta2.count; ++j)
        {
            rows.push_back({map.theta1[i], map.theta2[j], map.at(i, j)});
        }
    }
    return csv_table("theta1,theta2,E", rows);
}

inline std::string counts_csv(const std::array<CountRecord, 4>& records)
{
    std::vector<std::vector<double>> rows;
    for (const auto& r : records)
    {
        rows.push_back({r.theta1, r.theta2, static_cast<double>(r.counts[0]),
                        static_cast<double>(r.counts[1]), static_cast<double>(r.counts[2]),
                        static_cast<double>(r.counts[3])});
    }
    return csv_table("theta1,theta2,n_pp,n_pm,n_mp,n_mm", rows);
}

inline std::string slice_csv(const std::vector<SlicePoint>& points)
{
    std::vector<std::vector<double>> rows;
    for (const auto& p : points)
    {
        rows.push_back({p.theta1, p.n_pp, p.sigma});
    }
    return csv_table("theta1,n_pp,sigma", rows);
}

//---------------------------------------------------------------------------//
// JSON report
//---------------------------------------------------------------------------//

inline nlohmann::json report_to_json(const ExperimentReport& report)
{
    using nlohmann::json;
    auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json counts = json::array();
    for (std::size_t i = 0; i < 4; ++i)
    {
        const auto& r = report.records[i];
        counts.push_back({{"theta1", r.theta1},
                          {"theta2", r.theta2},
                          {"n_pp", r.counts[0]},
                          {"n_pm", r.counts[1]},
                          {"n_mp", r.counts[2]},
                          {"n_mm", r.counts[3]},
                          {"flux", r.flux},
                          {"E", report.estimate.e[i]},
                          {"sigma_E", report.estimate.sigma_e[i]}});
    }
    return {{"state_label", report.state_label},
            {"B", report.estimate.b},
            {"sigma_B", report.estimate.sigma_b},
            {"n_sigma", finite_or_null(report.estimate.n_sigma)},
            {"settings",
             {{"theta1", report.settings.theta1},
              {"theta1p", report.settings.theta1p},
              {"theta2", report.settings.theta2},
              {"theta2p", report.settings.theta2p}}},
            {"per_setting_counts", counts}};
}

inline std::string write_report(const ExperimentReport& report)
{
    return report_to_json(report).dump(2) + "\n";
}

inline ExperimentReport parse_report(std::string_view text)
{
    using nlohmann::json;
    try
    {
        const json doc = json::parse(text);
        ExperimentReport report;
        report.state_label = doc.at("state_label").get<std::string>();
        report.estimate.b = doc.at("B").get<double>();
        report.estimate.sigma_b = doc.at("sigma_B").get<double>();
        if (doc.at("n_sigma").is_null())
        {
            report.estimate.n_sigma = report.estimate.b > 2
                                          ? std::numeric_limits<double>::infinity()
                                          : -std::numeric_limits<double>::infinity();
        }
        else
        {
            report.estimate.n_sigma = doc.at("n_sigma").get<double>();
        }
        const auto& s = doc.at("settings");
        report.settings = {s.at("theta1").get<double>(), s.at("theta1p").get<double>(),
                           s.at("theta2").get<double>(), s.at("theta2p").get<double>()};
        const auto& counts = doc.at("per_setting_counts");
        require(counts.is_array() && counts.size() == 4,
                "per_setting_counts: expected 4 records");
        for (std::size_t i = 0; i < 4; ++i)
        {
            const auto& c = counts.at(i);
            auto& r = report.records[i];
            r.theta1 = c.at("theta1").get<double>();
            r.theta2 = c.at("theta2").get<double>();
            r.counts = {c.at("n_pp").get<std::uint64_t>(), c.at("n_pm").get<std::uint64_t>(),
                        c.at("n_mp").get<std::uint64_t>(), c.at("n_mm").get<std::uint64_t>()};
            r.flux = c.at("flux").get<double>();
            report.estimate.e[i] = c.at("E").get<double>();
            report.estimate.sigma_e[i] = c.at("sigma_E").get<double>();
        }
        return report;
    }
    catch (const json::exception& e)
    {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << text;
    out.flush();
    if (!out)
    {
        throw IoError("failed writing '" + path + "'");
    }
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw IoError("cannot open '" + path + "' for reading");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace parity_bell
