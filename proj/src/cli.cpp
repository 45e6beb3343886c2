#include "vulninstruct/pipeline.hpp"

#include <CLI11.hpp>

namespace vulninstruct {

namespace fs = std::filesystem;

int run_subcommand(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Vulnerability instruction-data pipeline"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path, out_dir, endpoint, mock;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "Pipeline config (JSON)")->required();
    app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
    app.add_option("--seed", seed, "Use this seed for every stage");
    app.add_option("--endpoint", endpoint, "Chat-completions base URL (overrides endpoint.base_url)");
    app.add_option("--mock", mock, "Scripted endpoint fixture; runs offline");

    bool emit_pdg = false, emit_density = false, emit_rendered = false, review_list = false;
    std::string kind, review_apply;
    auto* ingest = app.add_subcommand("ingest", "Read, deduplicate, balance and split the corpus");
    auto* features = app.add_subcommand("features", "Vulnerability lines and k-hop context");
    features->add_flag("--emit-pdg", emit_pdg, "Also write features/pdg.jsonl");
    auto* interpret = app.add_subcommand("interpret", "Run CoT self-verification against the endpoint");
    auto* review = app.add_subcommand("review", "List or apply manual review decisions");
    review->add_flag("--list", review_list, "Print the review queue");
    review->add_option("--apply", review_apply, "Apply a review file with edited decisions");
    auto* augment = app.add_subcommand("augment", "Identifier-substitution augmentation of training records");
    auto* build = app.add_subcommand("build-dataset", "Emit the three-task instruction dataset");
    build->add_flag("--emit-rendered", emit_rendered, "Also write prompt-rendered JSON-lines");
    auto* attack = app.add_subcommand("attack", "Adversarial attacks on the test split");
    attack->add_option("--kind", kind, "mhm, wir or dci")->check(CLI::IsMember({"mhm", "wir", "dci"}, CLI::ignore_case));
    auto* evaluate = app.add_subcommand("evaluate", "Score the endpoint on the evaluation split");
    evaluate->add_flag("--emit-density-csv", emit_density, "Write eval/density.csv");
    auto* demo = app.add_subcommand("demo", "Run every stage offline against the scripted endpoint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        RunOptions o;
        o.config = load_config(config_path);
        if (seed) o.config.seeds = {*seed, *seed, *seed, *seed, *seed};
        if (!endpoint.empty()) o.config.endpoint.base_url = endpoint;
        o.out = out_dir.empty() ? fs::path(o.config.output_dir) : fs::path(out_dir);
        if (!mock.empty()) o.mock_fixture = mock;
        else if (demo->parsed() && !o.config.mock_fixture.empty()) o.mock_fixture = resolve(o.config, o.config.mock_fixture).string();
        o.emit_pdg = emit_pdg;
        o.emit_density_csv = emit_density;
        o.emit_rendered = emit_rendered;
        o.attack_kind = kind;
        o.log = &out;

        OutputLock lock(o.out);
        if (ingest->parsed()) stage_ingest(o);
        else if (features->parsed()) stage_features(o);
        else if (interpret->parsed()) stage_interpret(o);
        else if (review->parsed()) {
            if (!review_apply.empty()) stage_review_apply(o, review_apply);
            else stage_review_list(o, out);
        } else if (augment->parsed()) stage_augment(o);
        else if (build->parsed()) stage_build_dataset(o);
        else if (attack->parsed()) stage_attack(o);
        else if (evaluate->parsed()) stage_evaluate(o);
        else if (demo->parsed()) stage_demo(o);
        (void)review_list;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace vulninstruct
