// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <chrono>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <CLI11.hpp>
#include <json.hpp>

#include "hbrb/hbrb.hpp"
#include "hbrb/report_io.hpp"

namespace hbrb::cli {
namespace {

using nlohmann::json;

std::optional<VocabFormat> parse_format(const std::string& name) {
    if (name.empty()) return std::nullopt;
    if (name == "text") return VocabFormat::Text;
    if (name == "native") return VocabFormat::Native;
    throw ConfigError("unknown vocabulary format '" + name + "' (expected text or native)");
}

void emit(const std::string& path, const std::string& data, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << data;
    } else {
        write_file_atomic(path, data);
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> items;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

std::vector<RevisitPair> read_ground_truth(const std::string& path) {
    json gt;
    try {
        gt = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    std::vector<RevisitPair> pairs;
    try {
        for (const auto& p : gt.at("pairs")) pairs.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
    } catch (const json::exception& e) {
        throw ParseError(path + ": bad ground truth: " + e.what());
    }
    return pairs;
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
    const DescriptorSet corpus = read_descriptors(o.input);
    TrainConfig cfg;
    cfg.k = o.k;
    cfg.levels = o.levels;
    cfg.strategy = parse_strategy(o.strategy);
    cfg.seed = o.seed;
    cfg.cluster.max_iters = o.max_iters;
    const auto format = parse_format(o.format);

    const auto start = std::chrono::steady_clock::now();
    const Vocabulary vocab = train(corpus, cfg);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    write_vocab(o.out, vocab, format);

    const auto quant = quantization_report(vocab, corpus);
    out << json{{"word_count", vocab.word_count()},
                {"train_seconds", elapsed.count()},
                {"mean_qe", quant.mean_qe}}
               .dump()
        << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical binary vocabulary training and evaluation"};
    app.name("hbrb_bow");
    app.require_subcommand(1);

    TrainOptions train_opts;
    auto* train_cmd = app.add_subcommand("train", "Train a vocabulary tree from a descriptor file");
    train_cmd->add_option("--input", train_opts.input, "Descriptor file (HBDC)")->required();
    train_cmd->add_option("--strategy", train_opts.strategy, "kmajority | local-brb | hbrb")
        ->check(CLI::IsMember({"kmajority", "local-brb", "hbrb"}))
        ->capture_default_str();
    train_cmd->add_option("--k", train_opts.k, "Branching factor")
        ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()))
        ->capture_default_str();
    train_cmd->add_option("-L,--L", train_opts.levels, "Tree depth")
        ->check(CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max()))
        ->capture_default_str();
    train_cmd->add_option("--seed", train_opts.seed, "RNG seed")->capture_default_str();
    train_cmd->add_option("--max-iters", train_opts.max_iters, "Lloyd iterations per node")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    train_cmd->add_option("--format", train_opts.format, "text | native (default: from the extension)");
    train_cmd->add_option("--out", train_opts.out, "Output vocabulary")->required();

    std::string tf_vocab, tf_input, tf_out;
    auto* transform_cmd = app.add_subcommand("transform", "Convert each descriptor group into a BoW vector");
    transform_cmd->add_option("--vocab", tf_vocab, "Vocabulary file")->required();
    transform_cmd->add_option("--input", tf_input, "Descriptor file, one group per image")->required();
    transform_cmd->add_option("--out", tf_out, "Output JSON ('-' for stdout)")->capture_default_str();

    std::string q_vocab, q_db, q_queries;
    std::size_t q_top = 5;
    std::size_t q_window = 0;
    auto* query_cmd = app.add_subcommand("query", "Build a retrieval database and answer queries");
    query_cmd->add_option("--vocab", q_vocab, "Vocabulary file")->required();
    query_cmd->add_option("--db", q_db, "Descriptor file; each group becomes one entry")->required();
    query_cmd->add_option("--queries", q_queries, "Descriptor file; each group is one query")->required();
    query_cmd->add_option("--top", q_top, "Results per query")->check(CLI::PositiveNumber)->capture_default_str();
    query_cmd->add_option("--exclude-window", q_window,
                          "Skip entries e with |e - q| < n for query q (same-sequence queries)")
        ->capture_default_str();

    SynthConfig synth_cfg;
    std::string s_out, s_gt, s_train_out;
    auto add_synth_options = [&](CLI::App* cmd) {
        cmd->add_option("--places", synth_cfg.num_places, "Number of places")->capture_default_str();
        cmd->add_option("--per-place", synth_cfg.descriptors_per_place, "Descriptors per place")
            ->capture_default_str();
        cmd->add_option("--revisit", synth_cfg.revisit_fraction, "Fraction of frames that are revisits")
            ->capture_default_str();
        cmd->add_option("--flip", synth_cfg.bit_flip_prob, "Bit flip probability for revisits")->capture_default_str();
        cmd->add_option("--bits", synth_cfg.descriptor_bits, "Descriptor width")->capture_default_str();
    };
    auto* synth_cmd = app.add_subcommand("synth", "Emit a synthetic place-revisit sequence");
    add_synth_options(synth_cmd);
    synth_cmd->add_option("--seed", synth_cfg.seed, "RNG seed")->capture_default_str();
    synth_cmd->add_option("--out", s_out, "Frame sequence descriptor file")->required();
    synth_cmd->add_option("--gt", s_gt, "Ground-truth JSON")->required();
    synth_cmd->add_option("--train-out", s_train_out, "Optional descriptor file with one group per place prototype");

    std::string e_strategies = "kmajority,local-brb,hbrb";
    std::string e_seeds = "0";
    std::size_t e_k = 10;
    std::size_t e_levels = 3;
    std::size_t e_exclusion = 1;
    std::size_t e_max_iters = 100;
    std::string e_csv, e_json, e_sequence, e_gt, e_train_input;
    auto* eval_cmd = app.add_subcommand("eval", "Compare training strategies on quantization and retrieval");
    eval_cmd->add_option("--strategies", e_strategies, "Comma-separated strategies")->capture_default_str();
    eval_cmd->add_option("--seeds", e_seeds, "Comma-separated seeds")->capture_default_str();
    eval_cmd->add_option("--k", e_k, "Branching factor")
        ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()))
        ->capture_default_str();
    eval_cmd->add_option("-L,--L", e_levels, "Tree depth")
        ->check(CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max()))
        ->capture_default_str();
    eval_cmd->add_option("--max-iters", e_max_iters, "Lloyd iterations per node")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    eval_cmd->add_option("--exclusion", e_exclusion, "Most recent frames skipped by each query")
        ->capture_default_str();
    add_synth_options(eval_cmd);
    eval_cmd->add_option("--sequence", e_sequence, "Evaluate this frame sequence instead of synthesizing one");
    eval_cmd->add_option("--gt", e_gt, "Ground-truth JSON for --sequence");
    eval_cmd->add_option("--train-input", e_train_input, "Training corpus for --sequence (default: the sequence)");
    eval_cmd->add_option("--csv", e_csv, "CSV output ('-' or empty for stdout)");
    eval_cmd->add_option("--json", e_json, "JSON output");

    std::string c_in, c_out, c_format;
    auto* convert_cmd = app.add_subcommand("convert", "Convert between text and native vocabulary files");
    convert_cmd->add_option("--in", c_in, "Input vocabulary (either format)")->required();
    convert_cmd->add_option("--out", c_out, "Output vocabulary")->required();
    convert_cmd->add_option("--format", c_format, "text | native (default: from the extension)");

    std::vector<std::string> argv_storage;
    argv_storage.reserve(args.size() + 1);
    argv_storage.push_back("hbrb_bow");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*train_cmd) return cmd_train(train_opts, out);

        if (*transform_cmd) {
            const Vocabulary vocab = read_vocab(tf_vocab);
            const DescriptorSet set = read_descriptors(tf_input);
            json result = json::array();
            const auto groups = set.groups();
            for (std::size_t g = 0; g < groups.size(); ++g) {
                result.push_back({{"group", g}, {"bow", to_json(transform(vocab, set.group(groups[g])))}});
            }
            emit(tf_out, result.dump() + '\n', out);
            return kOk;
        }

        if (*query_cmd) {
            const Vocabulary vocab = read_vocab(q_vocab);
            const DescriptorSet db_set = read_descriptors(q_db);
            const DescriptorSet query_set = read_descriptors(q_queries);
            RetrievalDatabase db(vocab);
            for (const auto& g : db_set.groups()) db.add(transform(vocab, db_set.group(g)));
            json result = json::array();
            const auto groups = query_set.groups();
            for (std::size_t q = 0; q < groups.size(); ++q) {
                std::unordered_set<EntryId> exclude;
                for (std::size_t e = q >= q_window ? q - q_window + 1 : 0; q_window > 0 && e < q + q_window; ++e) {
                    exclude.insert(e);
                }
                const auto hits = db.query(transform(vocab, query_set.group(groups[q])), q_top, &exclude);
                result.push_back({{"query", q}, {"results", to_json(hits)}});
            }
            out << result.dump() << '\n';
            return kOk;
        }

        if (*synth_cmd) {
            const SynthSequence seq = synth_sequence(synth_cfg);
            write_descriptors(s_out, seq.frames);
            if (!s_train_out.empty()) write_descriptors(s_train_out, seq.training);
            json pairs = json::array();
            for (const auto& p : seq.ground_truth) pairs.push_back({p.query, p.earlier});
            const json gt = {{"frame_place", seq.frame_place}, {"pairs", pairs}};
            write_file_atomic(s_gt, gt.dump() + '\n');
            return kOk;
        }

        if (*eval_cmd) {
            std::vector<Strategy> strategies;
            for (const auto& s : split_list(e_strategies)) strategies.push_back(parse_strategy(s));
            std::vector<std::uint64_t> seeds;
            for (const auto& s : split_list(e_seeds)) {
                try {
                    seeds.push_back(std::stoull(s));
                } catch (const std::exception&) {
                    throw ConfigError("bad seed '" + s + "'");
                }
            }
            if (strategies.size() < 2) throw ConfigError("eval needs at least two strategies");
            if (seeds.empty()) throw ConfigError("eval needs at least one seed");
            if (!e_sequence.empty() && e_gt.empty()) throw ConfigError("--sequence requires --gt");

            std::optional<SynthSequence> loaded;
            if (!e_sequence.empty()) {
                SynthSequence seq;
                seq.frames = read_descriptors(e_sequence);
                seq.training = e_train_input.empty() ? seq.frames : read_descriptors(e_train_input);
                seq.ground_truth = read_ground_truth(e_gt);
                loaded = std::move(seq);
            }

            std::vector<ComparisonRow> rows;
            for (auto seed : seeds) {
                SynthSequence synthesized;
                if (!loaded) {
                    SynthConfig sc = synth_cfg;
                    sc.seed = seed;
                    synthesized = synth_sequence(sc);
                }
                const SynthSequence& seq = loaded ? *loaded : synthesized;
                std::vector<TrainConfig> configs;
                for (auto s : strategies) {
                    TrainConfig tc;
                    tc.k = e_k;
                    tc.levels = e_levels;
                    tc.strategy = s;
                    tc.seed = seed;
                    tc.cluster.max_iters = e_max_iters;
                    configs.push_back(tc);
                }
                auto part = compare_strategies(seq, configs, e_exclusion);
                rows.insert(rows.end(), part.begin(), part.end());
            }
            emit(e_csv, comparison_csv(rows), out);
            if (!e_json.empty()) write_file_atomic(e_json, comparison_json(rows).dump(2) + '\n');
            return kOk;
        }

        if (*convert_cmd) {
            const Vocabulary vocab = read_vocab(c_in);
            write_vocab(c_out, vocab, parse_format(c_format));
            return kOk;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const InternalError& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}

}  // namespace hbrb::cli
