#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "runner.hpp"

namespace {

using opdyn::cli::StageError;
using nlohmann::json;

int fail(const std::string& stage, const std::string& message, const std::string& hint, int code) {
    std::cerr << opdyn::io::error_json(stage, message, hint).dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"opdyn: opinion dynamics simulator"};
    app.require_subcommand(1);

    std::optional<std::string> config, preset, out, format;
    std::optional<std::uint64_t> seed;
    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON scenario file");
        sub->add_option("--preset", preset, "built-in scenario name");
        sub->add_option("--seed", seed, "RNG seed (overrides the config)");
        sub->add_option("--out", out, "output directory (default .)");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    };

    auto* simulate = app.add_subcommand("simulate", "run one model and write the requested outputs");
    add_run_flags(simulate);
    auto* experiment = app.add_subcommand("experiment", "run a Monte Carlo experiment and write its table");
    add_run_flags(experiment);

    opdyn::cli::AnalyzeRequest req;
    auto* analyze = app.add_subcommand("analyze", "classify a stored trajectory or check a signed graph for balance");
    analyze->add_option("--trajectory", req.trajectory, "trajectory CSV (step,time,agent,dim,value)");
    analyze->add_option("--balance", req.balance, "signed adjacency matrix (CSV or JSON)");
    analyze->add_option("--tol", req.tol, "convergence / consensus tolerance");
    analyze->add_option("--gap-tol", req.gap_tol, "cluster linkage distance");
    analyze->add_option("--out", out, "write the report here instead of stdout");

    auto* list = app.add_subcommand("presets", "list built-in scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail("config", e.what(), "see --help", 2);
    }

    try {
        if (*list) {
            for (const auto& p : opdyn::cli::presets()) std::cout << p.name << "\t" << p.description << '\n';
            return 0;
        }
        if (*analyze) {
            const json report = opdyn::cli::analyze(req);
            if (out) opdyn::io::atomic_write(*out, report.dump(1) + "\n");
            else std::cout << report.dump(1) << '\n';
            return 0;
        }
        const auto ctx = opdyn::cli::make_context(preset, config, seed, format, out);
        std::vector<std::filesystem::path> files;
        if (*simulate) {
            if (ctx.config.contains("experiment"))
                throw StageError("config", "this scenario is an experiment", "use the experiment subcommand");
            files = opdyn::cli::write_outputs(ctx, opdyn::cli::simulate(ctx));
        } else {
            if (!ctx.config.contains("experiment"))
                throw StageError("config", "this scenario is a single simulation", "use the simulate subcommand");
            files = opdyn::cli::run_experiment(ctx);
        }
        for (const auto& f : files) std::cout << f.string() << '\n';
        return 0;
    } catch (const StageError& e) {
        return fail(e.stage(), e.what(), e.hint(), 2);
    } catch (const json::exception& e) {
        return fail("config", e.what(), "check field types against the config schema in the README", 2);
    } catch (const opdyn::InvalidArgument& e) {
        return fail("validation", e.what(), "model parameters violate the model's requirements", 3);
    } catch (const opdyn::MaxStepsExceeded& e) {
        return fail("run", e.what(), "raise horizon or set require_termination to false", 4);
    } catch (const opdyn::NonConvergent& e) {
        return fail("run", e.what(), "raise the iteration budget or relax the tolerance", 4);
    } catch (const opdyn::Unstable& e) {
        return fail("run", e.what(), "the iteration matrix has spectral radius >= 1", 4);
    } catch (const opdyn::Error& e) {
        return fail("run", e.what(), "", 4);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("output", e.what(), "check that --out is writable", 5);
    } catch (const std::exception& e) {
        return fail("run", e.what(), "", 1);
    }
}
