#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "parity_bell/bell.hpp"
#include "parity_bell/biphoton.hpp"
#include "parity_bell/counting.hpp"
#include "parity_bell/errors.hpp"
#include "parity_bell/io.hpp"

namespace parity_bell
{

namespace cli
{
enum ExitCode : int
{
    success = 0,
    validation_failure = 1,
    numerical_failure = 2
};

// Flags shared by every subcommand; each set flag overrides a config key
struct CommonFlags
{
    std::string config_path;
    std::map<std::string, std::string> overrides;
    std::optional<double> phi;
    bool degrees = false;
    std::optional<std::size_t> threads;
    std::string representation = "lazy";
};

inline void add_common(CLI::App& cmd, CommonFlags& flags)
{
    auto key = [&](const char* name, const char* config_key, const char* help) {
        cmd.add_option_function<std::string>(
            name, [&flags, config_key](const std::string& v) { flags.overrides[config_key] = v; },
            help);
    };
    cmd.add_option("--config", flags.config_path, "Configuration file (key=value or JSON)");
    key("--M", "grid.M", "Grid sample count (even)");
    key("--x-max", "grid.x_max", "Grid half-extent in pump widths");
    key("--w", "pump.w", "Pump width");
    cmd.add_option("--phi", flags.phi, "Pump parity-rotation angle");
    key("--blocked", "pump.blocked", "Block the pump's positive or negative half plane");
    key("--b", "kernel.b", "Correlation kernel width (units of pump.w)");
    key("--lambda-p", "kernel.lambda_p", "Pump wavelength (physical kernel)");
    key("--ell", "kernel.ell", "Crystal thickness (physical kernel)");
    key("--visibility", "analyzer.visibility", "Analyzer fringe visibility");
    cmd.add_option_function<std::vector<double>>(
           "--misaligned",
           [&flags](const std::vector<double>& v) {
               const char* names[] = {"analyzer.a1", "analyzer.d1", "analyzer.a2", "analyzer.d2"};
               for (std::size_t i = 0; i < 4; ++i)
               {
                   flags.overrides[names[i]] = format_real(v[i]);
               }
           },
           "Analyzer misalignment a1,d1,a2,d2")
        ->expected(4)
        ->delimiter(',');
    key("--seed", "run.seed", "RNG seed");
    key("--pairs", "run.pairs_per_setting", "Mean detected pairs per setting");
    cmd.add_flag_callback(
        "--double-blocked",
        [&flags] { flags.overrides["run.double_blocked_counts"] = "true"; },
        "Report doubled counts for a blocked pump");
    key("--output,-o", "output.path", "Output file (default: stdout)");
    key("--format", "output.format", "csv or json");
    cmd.add_flag("--degrees", flags.degrees, "Angles on the command line are in degrees");
    cmd.add_option("--threads", flags.threads, "Worker cap (default PARITY_BELL_THREADS)");
    cmd.add_option("--representation", flags.representation, "lazy or dense biphoton")
        ->check(CLI::IsMember({"lazy", "dense"}));
}

inline double angle(double value, const CommonFlags& flags)
{
    return flags.degrees ? value * std::numbers::pi / 180.0 : value;
}

inline Config resolve_config(const CommonFlags& flags)
{
    std::vector<std::pair<std::string, std::string>> entries;
    if (!flags.config_path.empty())
    {
        entries = detail::config_entries(read_text_file(flags.config_path));
    }
    std::map<std::string, std::string> overrides = flags.overrides;
    if (flags.phi)
    {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", angle(*flags.phi, flags));
        overrides["pump.phi"] = buf;
    }
    std::string text;
    for (const auto& [k, v] : entries)
    {
        if (!overrides.count(k))
        {
            text += k + "=" + v + "\n";
        }
    }
    for (const auto& [k, v] : overrides)
    {
        text += k + "=" + v + "\n";
    }
    return parse_config(text);
}

inline BiphotonAmplitude make_biphoton(const Config& cfg, const CommonFlags& flags, std::ostream& err)
{
    const auto pump = prepare_pump(cfg.grid(), cfg.simulation_pump());
    const auto rep = flags.representation == "dense" ? Representation::dense : Representation::lazy;
    auto bp = build_biphoton(pump, cfg.relative_kernel_width(), rep);
    for (const auto& w : bp.warnings())
    {
        err << "warning: " << w << "\n";
    }
    return bp;
}

inline std::size_t threads_of(const CommonFlags& flags)
{
    return flags.threads.value_or(default_thread_count());
}

inline void emit(const Config& cfg, const std::string& text, std::ostream& out)
{
    if (cfg.output_path.empty())
    {
        out << text;
    }
    else
    {
        write_text_file(cfg.output_path, text);
    }
}
}  // namespace cli

/*!
 * Command-line entry point.
 *
 * Subcommands: prepare, schmidt, correlation, landscape, chsh, slice,
 * experiment. Exit codes: 0 success, 1 invalid input, 2 numerical failure.
 */
inline int cmd_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    using namespace cli;
    CLI::App app{"Spatial-parity Bell test simulator"};
    app.require_subcommand(1);

    CommonFlags flags;
    double theta1 = 0;
    double theta2 = std::numbers::pi / 8;
    std::size_t points = 32;
    bool exact = false;
    std::vector<double> settings_list;

    auto* prepare = app.add_subcommand("prepare", "Write the prepared pump field as CSV");
    auto* schmidt = app.add_subcommand("schmidt", "Schmidt spectrum of the biphoton");
    auto* corr = app.add_subcommand("correlation", "Outcome probabilities and E at one setting");
    auto* land = app.add_subcommand("landscape", "E(theta1, theta2) over [0, 2 pi)^2 as CSV");
    auto* chsh_cmd = app.add_subcommand("chsh", "Bell operator at the optimal (or given) settings");
    auto* slice = app.add_subcommand("slice", "(+,+) coincidences versus theta1 as CSV");
    auto* experiment = app.add_subcommand("experiment", "Simulated CHSH run with counting noise");
    for (auto* cmd : {prepare, schmidt, corr, land, chsh_cmd, slice, experiment})
    {
        add_common(*cmd, flags);
    }
    corr->add_option("--theta1", theta1, "First rotator angle");
    corr->add_option("--theta2", theta2, "Second rotator angle");
    slice->add_option("--theta2", theta2, "Fixed second rotator angle (default pi/8)");
    land->add_option("--points", points, "Points per axis")->check(CLI::Range(2, 100000));
    slice->add_option("--points", points, "Points in theta1")->check(CLI::Range(4, 100000));
    chsh_cmd->add_flag("--exact", exact, "Exact probabilities (no counting noise)");
    for (auto* cmd : {chsh_cmd, experiment})
    {
        cmd->add_option("--settings", settings_list, "theta1,theta1',theta2,theta2'")
            ->expected(4)
            ->delimiter(',');
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try
    {
        app.parse(reversed);
    }
    catch (const CLI::CallForHelp&)
    {
        out << app.help();
        return success;
    }
    catch (const CLI::CallForAllHelp&)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return success;
    }
    catch (const CLI::ParseError& e)
    {
        err << "error: " << e.what() << "\n" << app.help();
        return validation_failure;
    }

    try
    {
        const Config cfg = resolve_config(flags);
        const std::size_t threads = threads_of(flags);
        const double phi = cfg.pump.blocked() ? 0.0 : std::get<PumpRotation>(cfg.pump.mode).phi;
        auto chosen_settings = [&] {
            if (settings_list.empty())
            {
                return optimal_settings(phi);
            }
            return MeasurementSettings::make(
                angle(settings_list[0], flags), angle(settings_list[1], flags),
                angle(settings_list[2], flags), angle(settings_list[3], flags));
        };

        if (*prepare)
        {
            const auto pump = prepare_pump(cfg.grid(), cfg.simulation_pump());
            emit(cfg, field_csv(pump.field), out);
            err << "flux_factor=" << format_real(pump.flux_factor) << "\n";
        }
        else if (*schmidt)
        {
            const auto bp = make_biphoton(cfg, flags, err);
            const auto spectrum = schmidt_decompose(bp);
            const double r = 1.0 / cfg.relative_kernel_width();
            err << "K=" << format_real(spectrum.participation) << "\n"
                << "K_2d=" << format_real(spectrum.transverse_2d_participation()) << "\n"
                << "threshold_count=" << spectrum.threshold_count << "\n"
                << "threshold_count_amplitude="
                << spectrum.count_above(0.01, ThresholdBasis::amplitude) << "\n"
                << "analytic_N=" << format_real(0.25 * (r + 1 / r) * (r + 1 / r)) << "\n";
            emit(cfg, schmidt_csv(spectrum), out);
        }
        else if (*corr)
        {
            const auto bp = make_biphoton(cfg, flags, err);
            const double t1 = angle(theta1, flags);
            const double t2 = angle(theta2, flags);
            const auto p = outcome_probabilities(bp, t1, t2, cfg.analyzer, threads);
            std::ostringstream text;
            text << "p_pp=" << format_real(p.pp) << "\n"
                 << "p_pm=" << format_real(p.pm) << "\n"
                 << "p_mp=" << format_real(p.mp) << "\n"
                 << "p_mm=" << format_real(p.mm) << "\n"
                 << "lost_fraction=" << format_real(p.lost_fraction) << "\n"
                 << "E=" << format_real(p.correlation()) << "\n";
            if (!cfg.pump.blocked())
            {
                text << "predicted=" << format_real(predicted_correlation(t1, t2, phi)) << "\n";
            }
            emit(cfg, text.str(), out);
        }
        else if (*land)
        {
            const auto bp = make_biphoton(cfg, flags, err);
            const auto map = landscape(bp, AngleGrid{points, 0, two_pi}, cfg.analyzer, threads);
            emit(cfg, landscape_csv(map), out);
        }
        else if (*chsh_cmd)
        {
            const auto bp = make_biphoton(cfg, flags, err);
            const auto settings = chosen_settings();
            std::ostringstream text;
            ChshEstimate est;
            if (exact)
            {
                est = chsh_from_exact(chsh_correlations(bp, settings, cfg.analyzer, threads));
            }
            else
            {
                est = run_experiment(bp, settings, cfg.run, state_label(cfg.pump), threads).estimate;
            }
            const char* names[] = {"E(a,b)", "E(a,b')", "E(a',b)", "E(a',b')"};
            for (std::size_t i = 0; i < 4; ++i)
            {
                text << names[i] << "=" << format_real(est.e[i]);
                if (!exact)
                {
                    text << " +- " << format_real(est.sigma_e[i]);
                }
                text << "\n";
            }
            text << "B=" << format_real(est.b) << "\n";
            if (!exact)
            {
                text << "sigma_B=" << format_real(est.sigma_b) << "\n"
                     << "n_sigma=" << format_real(est.n_sigma) << "\n";
            }
            text << "tsirelson=" << format_real(2 * std::numbers::sqrt2) << "\n";
            emit(cfg, text.str(), out);
        }
        else if (*slice)
        {
            const auto bp = make_biphoton(cfg, flags, err);
            const auto scan
                = slice_scan(bp, angle(theta2, flags), AngleGrid{points, 0, two_pi}, cfg.run, threads);
            const auto fit = fit_sinusoid(scan);
            err << "visibility=" << format_real(fit.visibility) << " +- "
                << format_real(fit.sigma_visibility) << "\n"
                << "phase=" << format_real(fit.phase) << " +- " << format_real(fit.sigma_phase)
                << "\n";
            emit(cfg, slice_csv(scan), out);
        }
        else if (*experiment)
        {
            const auto bp = make_biphoton(cfg, flags, err);
            const auto report
                = run_experiment(bp, chosen_settings(), cfg.run, state_label(cfg.pump), threads);
            const auto format = cfg.output_format.value_or(OutputFormat::json);
            emit(cfg, format == OutputFormat::json ? write_report(report) : counts_csv(report.records),
                 out);
        }
        return success;
    }
    catch (const ValidationError& e)
    {
        err << "error: " << e.what() << "\n";
        return validation_failure;
    }
    catch (const IoError& e)
    {
        err << "error: " << e.what() << "\n";
        return validation_failure;
    }
    catch (const NumericalError& e)
    {
        err << "numerical failure: " << e.what() << "\n";
        return numerical_failure;
    }
    catch (const std::exception& e)
    {
        err << "numerical failure: " << e.what() << "\n";
        return numerical_failure;
    }
}

}  // namespace parity_bell
