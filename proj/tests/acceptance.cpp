// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance <path to hbrb_bow>

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hbrb/hbrb.hpp"
#include "oracles.hpp"

namespace {

using namespace hbrb;
namespace fs = std::filesystem;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << std::fixed << v;
    return s.str();
}

TrainConfig train_config(Strategy s, std::size_t k, std::size_t levels, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.strategy = s;
    cfg.k = k;
    cfg.levels = levels;
    cfg.seed = seed;
    return cfg;
}

Outcome round_trips() {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 10000; ++t) {
        const auto x = oracle::random_descriptor(256, rng);
        if (binarize(realize(x), 0.5) != x) return {false, "binarize(realize(x)) != x at sample " + std::to_string(t)};
    }
    for (int t = 0; t < 1000; ++t) {
        const auto x = oracle::random_descriptor(256, rng);
        const auto y = oracle::random_descriptor(256, rng);
        if (euclidean_sq(realize(x), realize(y)) != static_cast<double>(oracle::bitwise_hamming(x, y))) {
            return {false, "euclidean_sq(realize) != hamming at pair " + std::to_string(t)};
        }
    }
    return {true, "10000 round trips, 1000 distance pairs"};
}

Outcome majority_optimality() {
    std::mt19937_64 rng(2);
    std::size_t checked = 0;
    for (std::size_t n : {3, 5, 7}) {
        for (int t = 0; t < 100; ++t) {
            const auto descs = oracle::random_descriptors(n, 8, rng);
            const auto m = majority_centroid(descs);
            std::size_t total = 0;
            for (const auto& d : descs) total += oracle::bitwise_hamming(d, m);
            if (total != oracle::brute_force_min_total(descs, 8)) {
                return {false, "n=" + std::to_string(n) + " instance " + std::to_string(t) + " not optimal"};
            }
            ++checked;
        }
    }
    return {true, std::to_string(checked) + " instances optimal"};
}

bool non_increasing(const std::vector<double>& trace) {
    for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace[i] > trace[i - 1]) return false;
    }
    return true;
}

Outcome monotonicity() {
    std::mt19937_64 rng(3);
    std::size_t iters = 0;
    for (int c = 0; c < 20; ++c) {
        ClusterConfig cfg;
        cfg.k = 2 + rng() % 10;
        cfg.seed = rng();
        std::vector<BinaryDescriptor> descs;
        if (c % 2 == 0) {
            descs = oracle::random_descriptors(400 + rng() % 400, 256, rng);
        } else {
            std::vector<BinaryDescriptor> centers;
            oracle::separated_bundles(12, 1, 256, rng, &centers);
            for (int i = 0; i < 600; ++i) {
                auto d = centers[rng() % centers.size()];
                for (int f = 0; f < 30; ++f) d.flip_bit(rng() % 256);
                descs.push_back(d);
            }
        }
        const auto km = kmajority(descs, cfg);
        if (!non_increasing(km.objective_trace)) return {false, "kmajority objective increased on corpus " + std::to_string(c)};
        std::vector<RealDescriptor> reals;
        for (const auto& d : descs) reals.push_back(realize(d));
        const auto lr = lloyd_real(reals, cfg);
        if (!non_increasing(lr.objective_trace)) return {false, "lloyd_real objective increased on corpus " + std::to_string(c)};
        iters += km.iterations_run + lr.iterations_run;
    }
    return {true, "20 corpora, " + std::to_string(iters) + " iterations total"};
}

Outcome leaf_contract() {
    Rng rng(4);
    std::vector<BinaryDescriptor> descs;
    descs.reserve(100000);
    for (int i = 0; i < 100000; ++i) descs.push_back(random_descriptor(256, rng));
    TrainDiagnostics diag;
    const auto v = train(DescriptorSet(descs), train_config(Strategy::GlobalHBRB, 10, 3, 4), &diag);
    std::size_t covered = 0;
    for (WordId w = 0; w < v.word_count(); ++w) {
        const NodeId leaf = v.words[w];
        const auto& members = diag.leaf_members.at(leaf);
        std::vector<BinaryDescriptor> pts;
        pts.reserve(members.size());
        for (auto m : members) pts.push_back(descs[m]);
        if (pts.empty() || v.nodes[leaf].centroid != majority_centroid(pts)) {
            return {false, "leaf " + std::to_string(leaf) + " centroid is not the majority of its members"};
        }
        covered += pts.size();
    }
    if (covered != descs.size()) return {false, "leaf members do not cover the corpus"};
    return {true, std::to_string(v.word_count()) + " leaves checked"};
}

double partition_qe(const Vocabulary& v, const TrainDiagnostics& diag, const DescriptorSet& corpus) {
    std::size_t total = 0;
    for (NodeId n = 0; n < diag.leaf_members.size(); ++n) {
        for (auto m : diag.leaf_members[n]) total += oracle::bitwise_hamming(corpus.descriptors()[m], v.nodes[n].centroid);
    }
    return static_cast<double>(total) / static_cast<double>(corpus.size());
}

Outcome quantization_direction() {
    double hbrb_sum = 0.0;
    double km_sum = 0.0;
    double hbrb_partition = 0.0;
    double km_partition = 0.0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ClusteredConfig cc;
        cc.count = 50000;
        cc.seed = seed;
        const auto corpus = synth_clustered(cc);
        TrainDiagnostics hb_diag;
        TrainDiagnostics km_diag;
        const auto hb_vocab = train(corpus, train_config(Strategy::GlobalHBRB, 8, 3, seed), &hb_diag);
        const auto km_vocab = train(corpus, train_config(Strategy::KMajority, 8, 3, seed), &km_diag);
        const auto hb = quantization_report(hb_vocab, corpus);
        const auto km = quantization_report(km_vocab, corpus);
        hbrb_sum += hb.mean_qe;
        km_sum += km.mean_qe;
        hbrb_partition += partition_qe(hb_vocab, hb_diag, corpus);
        km_partition += partition_qe(km_vocab, km_diag, corpus);
        per_seed += " s" + std::to_string(seed) + "=" + fmt(hb.mean_qe, 2) + "/" + fmt(km.mean_qe, 2);
    }
    const double hb_mean = hbrb_sum / 5.0;
    const double km_mean = km_sum / 5.0;
    // Informational only: error against the training partition rather than greedy lookup.
    return {hb_mean <= km_mean * 1.02, "mean_qe hbrb " + fmt(hb_mean) + " vs kmajority " + fmt(km_mean) +
                                           " (hbrb/kmajority:" + per_seed + "); training-partition qe hbrb " +
                                           fmt(hbrb_partition / 5.0) + " vs kmajority " + fmt(km_partition / 5.0)};
}

Outcome retrieval_direction() {
    const Strategy all[] = {Strategy::KMajority, Strategy::LocalBRB, Strategy::GlobalHBRB};
    double hb = 0.0;
    double km = 0.0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SynthConfig sc;
        sc.seed = seed;
        const auto seq = synth_sequence(sc);
        const double h = retrieval_report(train(seq.training, train_config(Strategy::GlobalHBRB, 10, 3, seed)), seq).recall_at_1;
        const double m = retrieval_report(train(seq.training, train_config(Strategy::KMajority, 10, 3, seed)), seq).recall_at_1;
        hb += h;
        km += m;
        per_seed += " s" + std::to_string(seed) + "=" + fmt(h, 3) + "/" + fmt(m, 3);
    }
    hb /= 5.0;
    km /= 5.0;
    bool noiseless_ok = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SynthConfig sc;
        sc.seed = seed;
        sc.bit_flip_prob = 0.0;
        const auto seq = synth_sequence(sc);
        for (auto s : all) {
            const double r = retrieval_report(train(seq.training, train_config(s, 10, 3, seed)), seq).recall_at_1;
            if (r != 1.0) {
                noiseless_ok = false;
                per_seed += " noiseless " + std::string(to_string(s)) + " s" + std::to_string(seed) + "=" + fmt(r);
            }
        }
    }
    return {hb >= km - 0.02 && noiseless_ok, "recall@1 hbrb " + fmt(hb) + " vs kmajority " + fmt(km) +
                                                 (noiseless_ok ? ", noiseless 1.0 for all" : "") +
                                                 " (hbrb/kmajority:" + per_seed + ")"};
}

Outcome retrieval_oracle() {
    std::mt19937_64 rng(7);
    const auto corpus = oracle::random_descriptors(20000, 256, rng);
    std::vector<std::size_t> ends;
    for (std::size_t e = 100; e <= corpus.size(); e += 100) ends.push_back(e);
    const auto v = train(DescriptorSet(corpus, ends), train_config(Strategy::GlobalHBRB, 10, 3, 7));
    auto image = [&] {
        std::vector<BinaryDescriptor> img;
        const std::size_t n = 20 + rng() % 80;
        for (std::size_t i = 0; i < n; ++i) img.push_back(corpus[rng() % corpus.size()]);
        return transform(v, img);
    };
    RetrievalDatabase db(v);
    std::vector<BowVector> stored;
    for (int i = 0; i < 1000; ++i) {
        stored.push_back(image());
        db.add(stored.back());
    }
    if (!db.audit()) return {false, "inverted index audit failed"};
    for (int q = 0; q < 100; ++q) {
        const auto query = q % 4 == 0 ? stored[rng() % stored.size()] : image();
        const auto got = db.query(query, 10);
        const auto want = oracle::exhaustive_query(stored, query, 10);
        if (got.hits.size() != want.size()) return {false, "query " + std::to_string(q) + ": result count differs"};
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (got.hits[i].entry != want[i].entry || got.hits[i].score != want[i].score) {
                return {false, "query " + std::to_string(q) + ": rank " + std::to_string(i) + " differs"};
            }
        }
    }
    return {true, "1000 entries, 100 queries identical"};
}

Outcome format_round_trips() {
    std::mt19937_64 rng(8);
    const auto descs = oracle::random_descriptors(5000, 256, rng);
    std::vector<std::size_t> ends;
    for (std::size_t e = 250; e <= descs.size(); e += 250) ends.push_back(e);
    const DescriptorSet set(descs, ends);
    const auto bytes = encode_descriptors(set);
    const auto back = decode_descriptors(bytes);
    if (back != set || encode_descriptors(back) != bytes) return {false, "descriptor file round trip differs"};

    const auto v = train(set, train_config(Strategy::GlobalHBRB, 10, 3, 8));
    const auto text = encode_vocab_text(v);
    const auto loaded = decode_vocab_text(text);
    if (encode_vocab_text(loaded) != text) return {false, "vocabulary text re-serialization differs"};
    if (loaded.nodes.size() != v.nodes.size() || loaded.words != v.words) return {false, "vocabulary structure differs"};
    for (std::size_t i = 0; i < v.nodes.size(); ++i) {
        const auto& a = v.nodes[i];
        const auto& b = loaded.nodes[i];
        if (a.parent != b.parent || a.children != b.children || a.centroid != b.centroid || a.word_id != b.word_id ||
            a.weight != b.weight) {
            return {false, "node " + std::to_string(i) + " differs after load"};
        }
    }
    for (int t = 0; t < 10000; ++t) {
        const auto probe = oracle::random_descriptor(256, rng);
        const auto x = lookup_word(v, probe);
        const auto y = lookup_word(loaded, probe);
        if (x.word_id != y.word_id || x.weight != y.weight) return {false, "lookup differs on probe " + std::to_string(t)};
    }
    return {true, std::to_string(bytes.size()) + " descriptor bytes, " + std::to_string(v.nodes.size()) +
                      " nodes, 10000 probes"};
}

int shell(const std::string& cmd) { return std::system(cmd.c_str()); }

std::string shell_quote(const fs::path& p) { return "'" + p.string() + "'"; }

Outcome determinism(const std::string& cli) {
    const fs::path dir = fs::temp_directory_path() / ("hbrb_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    struct Cleanup {
        fs::path p;
        ~Cleanup() {
            std::error_code ec;
            fs::remove_all(p, ec);
        }
    } cleanup{dir};

    ClusteredConfig cc;
    cc.count = 20000;
    cc.seed = 9;
    write_descriptors(dir / "corpus.hbd", synth_clustered(cc));
    const std::string base = shell_quote(cli) + " train --input " + shell_quote(dir / "corpus.hbd") + " --seed 9 --out ";
    const std::array<std::string, 3> envs{"env HBRB_THREADS=1 ", "env -u HBRB_THREADS ", "env HBRB_THREADS=8 "};
    std::vector<std::string> files;
    for (std::size_t i = 0; i < envs.size(); ++i) {
        const auto out = dir / ("v" + std::to_string(i) + ".txt");
        if (shell(envs[i] + base + shell_quote(out) + " > /dev/null") != 0) return {false, "train run " + std::to_string(i) + " failed"};
        files.push_back(read_file(out));
    }
    for (std::size_t i = 1; i < files.size(); ++i) {
        if (files[i] != files[0]) return {false, "vocabulary file differs between thread settings"};
    }
    return {true, "3 runs byte-identical (" + std::to_string(files[0].size()) + " bytes; threads 1, unset, 8)"};
}

Outcome default_parameters(const std::string& cli) {
    const std::string cmd = "'" + cli + "' train --help";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) return {false, "cannot run " + cli};
    std::string help;
    std::array<char, 512> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) help += buf.data();
    const int status = ::pclose(pipe);
    if (status != 0) return {false, "train --help exited with " + std::to_string(status)};

    bool k_ok = false;
    bool l_ok = false;
    std::istringstream lines(help);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.find("--k") != std::string::npos && line.find("[10]") != std::string::npos) k_ok = true;
        if (line.find("--L") != std::string::npos && line.find("[6]") != std::string::npos) l_ok = true;
    }
    const TrainConfig defaults;
    const bool config_ok = defaults.k == 10 && defaults.levels == 6;
    return {k_ok && l_ok && config_ok, std::string("help k=10 ") + (k_ok ? "yes" : "no") + ", L=6 " +
                                           (l_ok ? "yes" : "no") + ", TrainConfig " + (config_ok ? "10/6" : "mismatch")};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path to hbrb_bow>\n";
        return 2;
    }
    const std::string cli = argv[1];

    struct Criterion {
        const char* name;
        double budget_seconds;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"round-trip identities", 1.0, round_trips},
        {"majority optimality", 5.0, majority_optimality},
        {"clustering monotonicity", 10.0, monotonicity},
        {"hbrb leaf contract", 30.0, leaf_contract},
        {"quantization direction", 300.0, quantization_direction},
        {"retrieval direction", 300.0, retrieval_direction},
        {"retrieval oracle", 30.0, retrieval_oracle},
        {"format round-trips", 30.0, format_round_trips},
        {"determinism", 120.0, [&] { return determinism(cli); }},
        {"default parameters", 10.0, [&] { return default_parameters(cli); }},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        const bool in_budget = elapsed.count() < c.budget_seconds;
        const bool pass = o.pass && in_budget;
        if (!pass) ++failed;
        std::cout << (pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << c.name << " (" << fmt(elapsed.count(), 2)
                  << " s, budget " << c.budget_seconds << " s" << (in_budget ? "" : ", OVER BUDGET") << "): " << o.detail
                  << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
