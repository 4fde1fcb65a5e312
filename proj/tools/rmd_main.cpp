// Command-line front end: every pipeline stage as a subcommand, chained
// through the documented file formats. Exit codes: 0 ok, 2 usage/input,
// 3 provider failure, 4 internal error.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rmd/engine.hpp"
#include "rmd/errors.hpp"

namespace {

struct CliError {
    int code;
    std::string type;
    std::string message;
};

void emit_json(const rmd::json& j, const std::string& out_path) {
    if (out_path.empty())
        std::cout << j.dump(1) << "\n";
    else
        rmd::write_json_file(out_path, j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"retrieval-augmented text-to-motion engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_flag = 0;
    bool json_errors = false;
    app.add_option("--config", config_path, "engine config JSON");
    auto* seed_opt = app.add_option("--seed", seed_flag, "override the engine seed");
    app.add_flag("--json-errors", json_errors, "machine-readable errors on stderr");

    // db build
    auto* db_cmd = app.add_subcommand("db", "database maintenance");
    db_cmd->require_subcommand(1);
    auto* build = db_cmd->add_subcommand("build", "ingest a corpus into an index");
    std::string motions_dir, annotations, build_out;
    build->add_option("--motions", motions_dir, "motion file directory")->required();
    build->add_option("--annotations", annotations, "annotations JSONL")->required();
    build->add_option("--out", build_out, "index output path")->required();

    // decompose
    auto* decompose = app.add_subcommand("decompose", "sample k decompositions of a prompt");
    std::string dec_prompt, dec_out;
    decompose->add_option("--prompt", dec_prompt, "motion description")->required();
    decompose->add_option("--out", dec_out, "write JSON here instead of stdout");

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "plan a hierarchical retrieval");
    std::string ret_prompt, ret_out;
    int ret_length = 0;
    retrieve->add_option("--prompt", ret_prompt, "motion description")->required();
    retrieve->add_option("--length", ret_length, "target length in frames")->required();
    retrieve->add_option("--out", ret_out, "write plan JSON here instead of stdout");

    // compose
    auto* compose = app.add_subcommand("compose", "assemble the guided motion from a plan");
    std::string comp_plan, comp_out, comp_features;
    int comp_length = 0;
    compose->add_option("--plan", comp_plan, "retrieval plan JSON")->required();
    compose->add_option("--length", comp_length, "target length in frames")->required();
    compose->add_option("--out", comp_out, "guided motion output path")->required();
    compose->add_option("--features", comp_features, "also write pose features here");

    // refine
    auto* refine = app.add_subcommand("refine", "diffusion-refine a feature sequence");
    std::string ref_in, ref_out, ref_model, ref_mode, ref_condition;
    double ref_t0 = -1.0;
    int ref_steps = 0;
    refine->add_option("--features", ref_in, "input feature file")->required();
    refine->add_option("--out", ref_out, "output feature file")->required();
    refine->add_option("--t0", ref_t0, "noising depth in [0,1]");
    refine->add_option("--steps", ref_steps, "reverse step count");
    refine->add_option("--mode", ref_mode, "stochastic | deterministic");
    refine->add_option("--score-model", ref_model, "score model JSON");
    refine->add_option("--condition", ref_condition, "conditioning text");

    // generate
    auto* generate = app.add_subcommand("generate", "full prompt-to-motion pipeline");
    std::string gen_prompt, gen_motion, gen_features, gen_sidecar;
    int gen_length = 0;
    bool gen_dry = false;
    generate->add_option("--prompt", gen_prompt, "motion description")->required();
    generate->add_option("--length", gen_length, "target length in frames")->required();
    generate->add_option("--out-motion", gen_motion, "motion output path");
    generate->add_option("--out-features", gen_features, "feature output path");
    generate->add_option("--sidecar", gen_sidecar, "provenance JSON output path");
    generate->add_flag("--dry-run", gen_dry, "print the plan, skip refinement");

    // eval
    auto* eval = app.add_subcommand("eval", "compute metrics over feature files");
    std::string ev_gen, ev_ref, ev_out;
    rmd::MetricsConfig mconfig;
    eval->add_option("--features", ev_gen, "generated feature file")->required();
    eval->add_option("--reference", ev_ref, "reference feature file (enables fid)");
    eval->add_option("--out", ev_out, "write report JSON here instead of stdout");
    eval->add_option("--batch-size", mconfig.batch_size, "r-precision batch size");
    eval->add_option("--pairs", mconfig.n_pairs, "diversity pair count");
    eval->add_option("--per-group", mconfig.n_per_group, "multimodality samples per group");
    eval->add_option("--reps", mconfig.reps, "repetitions behind confidence intervals");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        rmd::EngineConfig config;
        if (!config_path.empty())
            config = rmd::EngineConfig::load(config_path);
        else
            config.apply_env();
        if (seed_opt->count() > 0) config.seed = seed_flag;

        // Stage-specific flags override the config file.
        if (*refine) {
            if (ref_t0 >= 0.0) config.refine.t0 = ref_t0;
            if (ref_steps > 0) config.refine.steps = ref_steps;
            if (!ref_mode.empty()) config.refine.mode = rmd::sdedit_mode_from_string(ref_mode);
            if (!ref_model.empty()) config.score_model_path = ref_model;
        }

        rmd::Engine engine(std::move(config));

        if (*build) {
            int count = run_db_build(engine, motions_dir, annotations, build_out);
            std::cout << "indexed " << count << " entries -> " << build_out << "\n";
        } else if (*decompose) {
            emit_json(run_decompose(engine, dec_prompt), dec_out);
        } else if (*retrieve) {
            std::vector<std::string> warnings;
            rmd::RetrievalPlan plan = run_retrieve(engine, ret_prompt, ret_length, &warnings);
            for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
            emit_json(plan.to_json(), ret_out);
        } else if (*compose) {
            rmd::RetrievalPlan plan =
                rmd::RetrievalPlan::from_json(rmd::read_json_file(comp_plan));
            rmd::MotionClip guided = run_compose(engine, plan, comp_length);
            rmd::save_motion(comp_out, guided, engine.skeleton());
            if (!comp_features.empty())
                rmd::save_features(comp_features,
                                   rmd::to_pose_features(guided, engine.skeleton()));
        } else if (*refine) {
            rmd::PoseFeatureSequence features = rmd::load_features(ref_in);
            rmd::save_features(ref_out, run_refine(engine, features, ref_condition));
        } else if (*generate) {
            rmd::GenerateResult result = run_generate(engine, gen_prompt, gen_length, gen_dry);
            for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
            if (gen_dry || (gen_motion.empty() && gen_features.empty() && gen_sidecar.empty()))
                std::cout << result.sidecar.dump(1) << "\n";
            if (!gen_sidecar.empty()) rmd::write_json_file(gen_sidecar, result.sidecar);
            if (!gen_dry) {
                if (!gen_motion.empty())
                    rmd::save_motion(gen_motion, result.motion, engine.skeleton());
                if (!gen_features.empty()) rmd::save_features(gen_features, result.features);
            }
        } else if (*eval) {
            mconfig.seed = engine.config().seed;
            emit_json(run_eval(ev_gen, ev_ref, mconfig).to_json(), ev_out);
        }
        return 0;
    } catch (const std::exception& e) {
        CliError err;
        if (dynamic_cast<const rmd::ProviderError*>(&e)) {
            err = {3, "provider_error", e.what()};
        } else if (dynamic_cast<const rmd::InputError*>(&e) ||
                   dynamic_cast<const std::invalid_argument*>(&e) ||
                   dynamic_cast<const rmd::json::exception*>(&e)) {
            err = {2, "input_error", e.what()};
        } else {
            err = {4, "internal_error", e.what()};
        }
        if (json_errors)
            std::cerr << rmd::json{{"error", {{"type", err.type}, {"message", err.message}}},
                                   {"exit_code", err.code}}
                             .dump()
                      << "\n";
        else
            std::cerr << "error: " << err.message << "\n";
        return err.code;
    }
}
