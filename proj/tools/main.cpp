#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kgu/config.hpp"
#include "kgu/error.hpp"
#include "kgu/io.hpp"
#include "kgu/pipeline.hpp"
#include "kgu/version.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::string run_dir;
    bool force = false;
    int workers = 0;
    bool workers_set = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool post = false;
    std::string human_ratings;
};

void add_common_options(CLI::App* sub, CliArgs& args) {
    sub->add_option("--config", args.config_path, "run configuration file")->required();
    sub->add_option("--run-dir", args.run_dir, "override the configured output directory");
    sub->add_flag("--force", args.force, "re-run the stage even if it is up to date");
    sub->add_option("--workers", args.workers, "override extraction worker count")
        ->check(CLI::PositiveNumber)
        ->each([&args](const std::string&) { args.workers_set = true; });
    sub->add_option("--seed", args.seed, "override the configured seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
}

int run(kgu::Stage stage, const CliArgs& args) {
    kgu::RunConfig cfg = kgu::RunConfig::load(args.config_path);
    if (!args.run_dir.empty()) cfg.output_dir = args.run_dir;
    if (args.workers_set) cfg.extraction.workers = args.workers;
    if (args.seed_set) cfg.seed = args.seed;

    kgu::PipelineRunner runner(std::move(cfg));
    if (!args.human_ratings.empty()) {
        if (!std::filesystem::exists(args.human_ratings))
            throw kgu::ConfigError("human ratings file not found: " + args.human_ratings);
        runner.set_human_ratings(args.human_ratings);
    }

    bool ran = runner.run_stage(stage, args.force);
    std::cout << kgu::to_string(stage) << (ran ? ": done\n" : ": up-to-date\n");
    if (stage == kgu::Stage::Report) {
        std::filesystem::path summary = runner.run_dir() / "summary.txt";
        if (std::filesystem::exists(summary)) std::cout << kgu::read_file(summary);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph unlearning evaluation pipeline"};
    app.set_version_flag("--version", std::string(kgu::kToolVersion));
    app.require_subcommand(1);

    CliArgs args;
    const std::array<std::string, 9> names = {"ingest",     "validate-template", "calibrate",
                                              "sample-targets", "extract",       "simulate",
                                              "judge",      "evaluate",          "report"};
    for (const std::string& name : names) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " stage");
        add_common_options(sub, args);
        if (name == "extract")
            sub->add_flag("--post", args.post, "extract against the post-unlearning beliefs");
        if (name == "judge")
            sub->add_option("--human-ratings", args.human_ratings,
                            "CSV of item_id,rater_id,score to score judge agreement");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    kgu::Stage stage;
    if (sub->get_name() == "extract")
        stage = args.post ? kgu::Stage::ExtractPost : kgu::Stage::ExtractPre;
    else
        stage = kgu::stage_from_string(sub->get_name());

    try {
        return run(stage, args);
    } catch (const kgu::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 4;
    } catch (const kgu::ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 4;
    } catch (const kgu::DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return 3;
    } catch (const kgu::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
