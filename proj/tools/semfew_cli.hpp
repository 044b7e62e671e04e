#pragma once

// Command-line front end shared by the `semfew` and `semevo` executables.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semfew/semfew.hpp"

namespace semfew::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_runtime = 2;

struct Overrides {
    std::string config;
    std::string data;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> tasks;
    std::optional<double> k;
    std::optional<std::string> classifier;
    std::optional<std::string> source;
    std::optional<std::string> align;
    std::optional<std::string> target;
    std::optional<std::size_t> ways;
    std::optional<std::size_t> shots;
    std::optional<double> periphery;
    std::optional<int> epochs;
    std::optional<std::size_t> hidden;
    std::optional<unsigned> workers;
    std::optional<double> step;
    bool best_k = false;
    bool baseline = false;
};

struct SemevoOptions {
    std::string classes;
    std::string definitions;
    std::string cache_dir;
    std::string template_text;
    std::optional<std::string> endpoint;
    std::optional<std::string> model;
    std::optional<int> retries;
    bool offline = false;
};

enum class Command { None, Synth, Train, Eval, Sweep, Ablate, Fig5, Semevo };

class Runner {
  public:
    Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int run(int argc, const char* const* argv) {
        CLI::App app{"Few-shot classification with semantic prototype alignment", "semfew"};
        app.require_subcommand(1);
        build(app);
        ExperimentConfig cfg;
        try {
            app.parse(argc, argv);
            cfg = resolve();
        } catch (const CLI::CallForHelp&) {
            out_ << app.help();
            return exit_ok;
        } catch (const CLI::CallForAllHelp&) {
            out_ << app.help("", CLI::AppFormatMode::All);
            return exit_ok;
        } catch (const CLI::ParseError& e) {
            err_ << "usage error: " << e.what() << '\n';
            return exit_usage;
        } catch (const ConfigError& e) {
            err_ << "usage error: " << e.what() << '\n';
            return exit_usage;
        } catch (const ArgumentError& e) {
            err_ << "usage error: " << e.what() << '\n';
            return exit_usage;
        }
        try {
            dispatch(cfg);
        } catch (const std::exception& e) {
            err_ << "error: " << e.what() << '\n';
            return exit_runtime;
        }
        return exit_ok;
    }

  private:
    void common(CLI::App* sub, bool with_eval) {
        sub->add_option("--config", o_.config, "TOML experiment config")->check(CLI::ExistingFile);
        sub->add_option("--data", o_.data, "data directory (cache.sfew, semantics.json, centers.json, net.ckpt)");
        sub->add_option("--out", o_.out, "output file or directory");
        sub->add_option("--seed", o_.seed, "seed of this stage");
        sub->add_option("--source", o_.source, "semantic source: name_template, definition, paraphrase");
        sub->add_option("--workers", o_.workers, "evaluation threads")->check(CLI::PositiveNumber);
        if (with_eval) {
            sub->add_option("--tasks", o_.tasks, "number of episodes")->check(CLI::PositiveNumber);
            sub->add_option("--k", o_.k, "fusion factor in [0, 1]")->check(CLI::Range(0.0, 1.0));
            sub->add_option("--classifier", o_.classifier, "cosine, euclidean or lr");
            sub->add_option("--ways", o_.ways, "classes per episode");
            sub->add_option("--shots", o_.shots, "support samples per class");
            sub->add_option("--periphery", o_.periphery, "probability of periphery support sets")
                ->check(CLI::Range(0.0, 1.0));
        }
    }

    void training_flags(CLI::App* sub) {
        sub->add_option("--align", o_.align, "alignment input: vs, v or s");
        sub->add_option("--target", o_.target, "prototype target: mean or cluster");
        sub->add_option("--epochs", o_.epochs, "training epochs")->check(CLI::PositiveNumber);
        sub->add_option("--hidden", o_.hidden, "hidden layer width")->check(CLI::PositiveNumber);
    }

    void build(CLI::App& app) {
        auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
        common(synth, false);
        synth->callback([this] { cmd_ = Command::Synth; });

        auto* train = app.add_subcommand("train", "train the alignment network");
        common(train, false);
        training_flags(train);
        train->callback([this] { cmd_ = Command::Train; });

        auto* eval = app.add_subcommand("eval", "evaluate on sampled episodes");
        common(eval, true);
        eval->add_flag("--baseline", o_.baseline, "support-mean prototypes only, no network");
        eval->add_flag("--best-k", o_.best_k, "report the best point of the k sweep");
        eval->callback([this] { cmd_ = Command::Eval; });

        auto* sweep = app.add_subcommand("sweep", "fusion-factor sweep");
        common(sweep, true);
        sweep->add_option("--step", o_.step, "k grid step");
        sweep->callback([this] { cmd_ = Command::Sweep; });

        auto* ablate = app.add_subcommand("ablate", "ablation studies");
        ablate->add_option("study", study_, "sources, targets, classifiers or semantics")
            ->required()
            ->check(CLI::IsMember({"sources", "targets", "classifiers", "semantics"}));
        common(ablate, true);
        training_flags(ablate);
        ablate->add_flag("--best-k", o_.best_k, "score each arm at its best k");
        ablate->callback([this] { cmd_ = Command::Ablate; });

        auto* fig5 = app.add_subcommand("fig5", "prototype proximity to class centers");
        common(fig5, true);
        fig5->callback([this] { cmd_ = Command::Fig5; });

        auto* semevo = app.add_subcommand("semevo", "paraphrase class definitions with an LLM");
        add_semevo_flags(semevo);
        semevo->callback([this] { cmd_ = Command::Semevo; });
    }

    void add_semevo_flags(CLI::App* sub) {
        sub->add_option("--config", o_.config, "TOML experiment config")->check(CLI::ExistingFile);
        sub->add_option("--data", o_.data, "data directory");
        sub->add_option("--definitions", s_.definitions, "definitions.json (class id -> definition)");
        sub->add_option("--classes", s_.classes, "classes.json (class id -> {name, wordnet_key})");
        sub->add_option("--out", o_.out, "corpus.json to write");
        sub->add_option("--cache-dir", s_.cache_dir, "paraphrase cache directory");
        sub->add_option("--template", s_.template_text, "name template containing {class_name}");
        sub->add_option("--endpoint", s_.endpoint, "chat completions URL");
        sub->add_option("--model", s_.model, "model name");
        sub->add_option("--retries", s_.retries, "maximum retries")->check(CLI::NonNegativeNumber);
        sub->add_option("--workers", o_.workers, "concurrent requests")->check(CLI::PositiveNumber);
        sub->add_flag("--offline", s_.offline, "never contact the network; fail on cache misses");
    }

    ExperimentConfig resolve() {
        ExperimentConfig c = o_.config.empty() ? ExperimentConfig{} : load_config(o_.config);
        if (!o_.data.empty()) {
            c.paths.data_dir = o_.data;
        }
        if (o_.seed) {
            switch (cmd_) {
            case Command::Synth:
                c.synthetic.seed = *o_.seed;
                break;
            case Command::Train:
                c.train.seed = *o_.seed;
                break;
            default:
                c.episode.seed = *o_.seed;
            }
        }
        if (o_.tasks) {
            c.episode.task_count = *o_.tasks;
        }
        if (o_.k) {
            c.k = *o_.k;
        }
        if (o_.classifier) {
            c.classifier = parse_classifier(*o_.classifier);
        }
        if (o_.source) {
            c.source = parse_semantic_source(*o_.source);
        }
        if (o_.align) {
            c.train.alignment_source = parse_alignment_source(*o_.align);
        }
        if (o_.target) {
            c.target = parse_target_kind(*o_.target);
        }
        if (o_.ways) {
            c.episode.n_way = *o_.ways;
        }
        if (o_.shots) {
            c.episode.k_shot = *o_.shots;
        }
        if (o_.periphery) {
            c.episode.periphery_bias = *o_.periphery;
        }
        if (o_.epochs) {
            c.train.epochs = *o_.epochs;
        }
        if (o_.hidden) {
            c.train.hidden_dim = *o_.hidden;
        }
        if (o_.workers) {
            c.workers = *o_.workers;
        }
        if (o_.step) {
            c.sweep_step = *o_.step;
        }
        if (o_.best_k) {
            c.select_best_k = true;
        }
        if (s_.endpoint) {
            c.llm.endpoint_url = *s_.endpoint;
        }
        if (s_.model) {
            c.llm.model_name = *s_.model;
        }
        if (s_.retries) {
            c.llm.max_retries = *s_.retries;
        }
        if (!s_.template_text.empty()) {
            c.name_template = s_.template_text;
        }
        c.validate();
        return c;
    }

    std::filesystem::path out_or(const std::filesystem::path& fallback) const {
        return o_.out.empty() ? fallback : std::filesystem::path(o_.out);
    }

    void dispatch(const ExperimentConfig& c) {
        switch (cmd_) {
        case Command::Synth:
            return synth(c);
        case Command::Train:
            return train_cmd(c);
        case Command::Eval:
            return eval_cmd(c);
        case Command::Sweep:
            return sweep_cmd(c);
        case Command::Ablate:
            return ablate_cmd(c);
        case Command::Fig5:
            return fig5_cmd(c);
        case Command::Semevo:
            return semevo_cmd(c);
        case Command::None:
            break;
        }
        throw Error("no command selected");
    }

    void synth(const ExperimentConfig& c) {
        const std::filesystem::path dir = out_or(c.paths.data_dir);
        const SyntheticData d = gen_synthetic(c.synthetic);
        write_cache(d.cache, dir / "cache.sfew");
        store_semantic_embeddings(d.semantics, dir / "semantics.json");
        save_centers(d.centers, dir / "centers.json");
        save_class_table(synthetic_class_table(d.cache), dir / "classes.json");
        out_ << "wrote " << d.cache.size() << " records (" << d.cache.dim() << "-d) to " << dir.string() << '\n';
    }

    void train_cmd(const ExperimentConfig& c) {
        const ExperimentData d = load_experiment_data(c);
        const auto result = train_arm(d, c, {c.train.alignment_source, c.target, c.source, 0});
        const auto path = out_or(c.paths.checkpoint_file());
        const nlohmann::json extra{{"semantic_source", to_string(c.source)},
                                   {"target", to_string(c.target)},
                                   {"loss_curve", result.loss_curve}};
        save_checkpoint(result.network, c.train, path, extra);
        out_ << "trained " << to_string(c.train.alignment_source) << " network: loss "
             << detail::fixed(result.loss_curve.front(), 4) << " -> " << detail::fixed(result.loss_curve.back(), 4)
             << ", saved " << path.string() << '\n';
    }

    AlignmentNetwork load_net(const ExperimentConfig& c) const {
        return load_checkpoint(c.paths.checkpoint_file()).network;
    }

    void eval_cmd(const ExperimentConfig& c) {
        const ExperimentData d = load_experiment_data(c);
        std::optional<AlignmentNetwork> net;
        if (!o_.baseline) {
            net = load_net(c);
        }
        const auto sem = select_semantics(d, c.source);
        EvalReport report = score(d, c, net ? &*net : nullptr, sem, c.classifier);
        report.config["experiment"] = c.snapshot();
        const auto path = out_or(c.paths.output() / "report.json");
        write_text(path, report.to_json().dump(2) + "\n");
        out_ << "mean_accuracy " << detail::fixed(report.mean_accuracy, 4) << " ci95 "
             << detail::fixed(report.ci95, 4) << " k " << detail::fixed(report.config.value("k", 0.0), 2) << '\n';
    }

    void sweep_cmd(const ExperimentConfig& c) {
        const ExperimentData d = load_experiment_data(c);
        const auto curve = run_sweep(d, c, load_net(c));
        const auto path = out_or(c.paths.output() / "sweep.csv");
        write_text(path, sweep_to_csv(curve));
        const auto& best = curve[best_point(curve)];
        out_ << curve.size() << " points, best k " << detail::fixed(best.k, 2) << " accuracy "
             << detail::fixed(best.report.mean_accuracy, 4) << '\n';
    }

    void ablate_cmd(const ExperimentConfig& c) {
        const ExperimentData d = load_experiment_data(c);
        std::vector<ReportRow> rows;
        if (study_ == "sources") {
            rows = run_ablation_sources(d, c);
        } else if (study_ == "targets") {
            rows = run_ablation_targets(d, c);
        } else if (study_ == "classifiers") {
            rows = run_ablation_classifiers(d, c);
        } else {
            rows = run_semantic_grid(d, c);
        }
        const std::string csv = rows_to_csv(rows);
        write_text(out_or(c.paths.output() / ("ablate_" + study_ + ".csv")), csv);
        out_ << csv;
    }

    void fig5_cmd(const ExperimentConfig& c) {
        const ExperimentData d = load_experiment_data(c);
        const auto rep = run_fig5_check(d, c, load_net(c));
        write_text(out_or(c.paths.output() / "fig5.json"), rep.to_json().dump(2) + "\n");
        out_ << "fraction_closer " << detail::fixed(rep.fraction_closer, 4) << " over " << rep.pairs << " pairs\n";
    }

    void semevo_cmd(const ExperimentConfig& c) {
        const auto classes = load_class_table(s_.classes.empty() ? c.paths.classes_file() : std::filesystem::path(s_.classes));
        const auto defs = load_definitions(s_.definitions.empty() ? c.paths.definitions_file() : std::filesystem::path(s_.definitions));
        LlmClient client(c.llm);
        const ParaphraseCache cache(s_.cache_dir.empty() ? c.paths.llm_cache_dir() : std::filesystem::path(s_.cache_dir));
        const auto corpus = build_corpus(classes, defs, client, cache, {c.name_template, s_.offline, c.workers});
        const auto path = out_or(c.paths.corpus_file());
        save_corpus(corpus, path);
        out_ << "wrote " << corpus.size() << " classes to " << path.string() << " (" << client.request_count()
             << " LLM requests)\n";
    }

    std::ostream& out_;
    std::ostream& err_;
    Overrides o_;
    SemevoOptions s_;
    std::string study_;
    Command cmd_ = Command::None;
};

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return Runner(out, err).run(static_cast<int>(argv.size()), argv.data());
}

} // namespace semfew::cli
