// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unistd.h>
#include <vector>

#include "hbrb/descriptor.hpp"
#include "hbrb/error.hpp"
#include "hbrb/vocabulary.hpp"

namespace hbrb {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

/// Little-endian cursor over a byte buffer; every read names its field.
class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    std::string_view bytes(std::size_t n, const char* field) {
        if (remaining() < n) throw ParseError(std::string("truncated ") + field);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::uint64_t uint(std::size_t width, const char* field) {
        const auto s = bytes(width, field);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(s[i])) << (8 * i);
        return v;
    }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("error reading '" + path.string() + "'");
    return data;
}

/// Writes to a temporary sibling file, then renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) throw IoError("error writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path.string() + "'");
    }
}

// --- descriptor corpus ("HBDC") ---------------------------------------------

inline constexpr std::string_view kDescriptorMagic = "HBDC";
inline constexpr std::uint32_t kDescriptorVersion = 1;

inline std::string encode_descriptors(const DescriptorSet& set) {
    std::string out;
    const std::size_t octets = set.bits() / 8;
    out.reserve(28 + set.size() * octets + set.group_ends().size() * 8);
    out.append(kDescriptorMagic);
    detail::put_u32(out, kDescriptorVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(set.bits()));
    detail::put_u64(out, set.size());
    detail::put_u64(out, set.group_ends().size());
    for (const auto& d : set.descriptors()) {
        out.append(reinterpret_cast<const char*>(d.octets().data()), d.num_octets());
    }
    for (auto end : set.group_ends()) detail::put_u64(out, end);
    return out;
}

inline DescriptorSet decode_descriptors(std::string_view data) {
    detail::ByteReader r(data);
    if (r.bytes(4, "magic") != kDescriptorMagic) throw ParseError("bad magic: not a descriptor file");
    const auto version = r.uint(4, "version");
    if (version != kDescriptorVersion) throw ParseError("unsupported version " + std::to_string(version));
    const auto bits = r.uint(4, "descriptor_bits");
    const auto count = r.uint(8, "descriptor_count");
    const auto group_count = r.uint(8, "group_count");
    if (bits % 8 != 0 || (bits == 0 && count > 0)) {
        throw ParseError("descriptor_bits must be a positive multiple of 8, got " + std::to_string(bits));
    }
    const std::size_t octets = bits / 8;
    if (count > 0 && r.remaining() / octets < count) throw ParseError("truncated payload");
    std::vector<BinaryDescriptor> descs;
    descs.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto raw = r.bytes(octets, "payload");
        descs.emplace_back(std::vector<std::uint8_t>(raw.begin(), raw.end()));
    }
    if (r.remaining() / 8 < group_count) throw ParseError("truncated group table");
    std::vector<std::size_t> ends;
    ends.reserve(group_count);
    std::uint64_t prev = 0;
    for (std::uint64_t g = 0; g < group_count; ++g) {
        const auto end = r.uint(8, "group table");
        if (end < prev || end > count) throw ParseError("inconsistent group table at entry " + std::to_string(g));
        ends.push_back(end);
        prev = end;
    }
    if (group_count > 0 && prev != count) throw ParseError("group table does not cover descriptor_count");
    if (r.remaining() != 0) throw ParseError("trailing bytes after group table");
    return DescriptorSet(std::move(descs), std::move(ends));
}

inline void write_descriptors(const std::filesystem::path& path, const DescriptorSet& set) {
    write_file_atomic(path, encode_descriptors(set));
}

inline DescriptorSet read_descriptors(const std::filesystem::path& path) {
    try {
        return decode_descriptors(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

// --- ORB-SLAM / DBoW2 text vocabulary ---------------------------------------

inline constexpr int kScoringL1 = 0;
inline constexpr int kWeightingTfIdf = 0;

/// Header "k L scoring weighting", then one line per non-root node in node
/// id order: "parent is_leaf octet... weight".
inline std::string encode_vocab_text(const Vocabulary& vocab) {
    std::string out;
    out.reserve(vocab.nodes.size() * (vocab.descriptor_bits / 8 * 4 + 24));
    out += std::to_string(vocab.k) + ' ' + std::to_string(vocab.levels) + ' ' + std::to_string(kScoringL1) + ' ' +
           std::to_string(kWeightingTfIdf) + '\n';
    for (std::size_t id = 1; id < vocab.nodes.size(); ++id) {
        const auto& node = vocab.nodes[id];
        out += std::to_string(node.parent);
        out += node.is_leaf() ? " 1" : " 0";
        for (auto o : node.centroid.octets()) {
            out += ' ';
            out += std::to_string(static_cast<unsigned>(o));
        }
        out += ' ';
        out += detail::format_double(node.weight);
        out += '\n';
    }
    return out;
}

namespace detail {

template <class T>
T parse_number(std::string_view tok, std::size_t line, const char* field) {
    T v{};
    const auto* end = tok.data() + tok.size();
    const auto res = std::from_chars(tok.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ParseError("bad " + std::string(field) + " '" + std::string(tok) + "'", line);
    }
    return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
        if (i > start) toks.push_back(s.substr(start, i - start));
    }
    return toks;
}

/// Structural checks shared by both vocabulary readers; word ids are
/// assigned depth-first, exactly as after training.
inline Vocabulary finish_loaded(Vocabulary vocab, const std::vector<char>& leaf_flag) {
    for (std::size_t id = 1; id < vocab.nodes.size(); ++id) {
        if (!leaf_flag[id] && vocab.nodes[id].children.empty()) {
            throw ParseError("internal node " + std::to_string(id) + " has no children");
        }
    }
    if (vocab.nodes.size() < 2) throw ParseError("vocabulary has no nodes");
    assign_word_ids(vocab);
    try {
        check_invariants(vocab);
    } catch (const InternalError& e) {
        throw ParseError(e.what());
    }
    return vocab;
}

inline void attach_node(Vocabulary& vocab, std::vector<char>& leaf_flag, std::uint64_t parent, bool is_leaf,
                        BinaryDescriptor centroid, double weight, std::size_t line) {
    const auto id = static_cast<NodeId>(vocab.nodes.size());
    if (parent >= id) throw ParseError("parent " + std::to_string(parent) + " is not defined yet", line);
    if (parent != 0 && leaf_flag[parent]) throw ParseError("parent " + std::to_string(parent) + " is a leaf", line);
    if (!(weight >= 0.0)) throw ParseError("negative weight", line);
    VocabNode node;
    node.id = id;
    node.parent = static_cast<NodeId>(parent);
    node.centroid = std::move(centroid);
    node.weight = is_leaf ? weight : 0.0;
    vocab.nodes.push_back(std::move(node));
    vocab.nodes[parent].children.push_back(id);
    leaf_flag.push_back(is_leaf ? 1 : 0);
}

}  // namespace detail

inline Vocabulary decode_vocab_text(std::string_view text) {
    Vocabulary vocab;
    vocab.strategy.reset();
    vocab.nodes.push_back(VocabNode{});
    std::vector<char> leaf_flag{0};
    std::size_t octets = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const auto line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        const auto toks = detail::split_ws(line);
        if (toks.empty()) {
            if (pos >= text.size()) break;
            throw ParseError("empty line", line_no);
        }
        if (!header_seen) {
            if (toks.size() != 4) throw ParseError("header must hold 4 integers", line_no);
            vocab.k = detail::parse_number<std::size_t>(toks[0], line_no, "k");
            vocab.levels = detail::parse_number<std::size_t>(toks[1], line_no, "L");
            const int scoring = detail::parse_number<int>(toks[2], line_no, "scoring id");
            const int weighting = detail::parse_number<int>(toks[3], line_no, "weighting id");
            if (vocab.k < 2 || vocab.levels < 1) throw ParseError("k must be >= 2 and L >= 1", line_no);
            if (scoring != kScoringL1 || weighting != kWeightingTfIdf) {
                throw ParseError("only L1 scoring (0) with TF-IDF weighting (0) is supported", line_no);
            }
            header_seen = true;
            continue;
        }
        if (octets == 0) {
            if (toks.size() < 4) throw ParseError("node line too short", line_no);
            octets = toks.size() - 3;
            vocab.descriptor_bits = octets * 8;
        }
        if (toks.size() != octets + 3) {
            throw ParseError("expected " + std::to_string(octets) + " centroid octets, got " +
                                 std::to_string(toks.size() < 3 ? 0 : toks.size() - 3),
                             line_no);
        }
        const auto parent = detail::parse_number<std::uint64_t>(toks[0], line_no, "parent id");
        const auto leaf = detail::parse_number<int>(toks[1], line_no, "leaf flag");
        if (leaf != 0 && leaf != 1) throw ParseError("leaf flag must be 0 or 1", line_no);
        std::vector<std::uint8_t> raw(octets);
        for (std::size_t o = 0; o < octets; ++o) {
            const auto v = detail::parse_number<unsigned>(toks[2 + o], line_no, "octet");
            if (v > 255) throw ParseError("octet " + std::to_string(v) + " out of range 0-255", line_no);
            raw[o] = static_cast<std::uint8_t>(v);
        }
        const double weight = detail::parse_number<double>(toks.back(), line_no, "weight");
        detail::attach_node(vocab, leaf_flag, parent, leaf == 1, BinaryDescriptor(std::move(raw)), weight, line_no);
    }
    if (!header_seen) throw ParseError("missing header line");
    return detail::finish_loaded(std::move(vocab), leaf_flag);
}

inline void write_vocab_text(const std::filesystem::path& path, const Vocabulary& vocab) {
    write_file_atomic(path, encode_vocab_text(vocab));
}

inline Vocabulary read_vocab_text(const std::filesystem::path& path) {
    try {
        return decode_vocab_text(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

// --- native binary vocabulary ("HBVC") -------------------------------------

inline constexpr std::string_view kVocabMagic = "HBVC";
inline constexpr std::uint32_t kVocabVersion = 1;
inline constexpr std::uint8_t kUnknownStrategy = 0xFF;

/// Same node order as the text format, with the training strategy kept and
/// weights stored as raw IEEE-754 bits.
inline std::string encode_vocab_native(const Vocabulary& vocab) {
    std::string out;
    out.append(kVocabMagic);
    detail::put_u32(out, kVocabVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(vocab.k));
    detail::put_u32(out, static_cast<std::uint32_t>(vocab.levels));
    out.push_back(static_cast<char>(vocab.strategy ? static_cast<std::uint8_t>(*vocab.strategy) : kUnknownStrategy));
    detail::put_u32(out, static_cast<std::uint32_t>(vocab.descriptor_bits));
    detail::put_u64(out, vocab.nodes.size() - 1);
    for (std::size_t id = 1; id < vocab.nodes.size(); ++id) {
        const auto& node = vocab.nodes[id];
        detail::put_u32(out, node.parent);
        out.push_back(node.is_leaf() ? 1 : 0);
        out.append(reinterpret_cast<const char*>(node.centroid.octets().data()), node.centroid.num_octets());
        std::uint64_t bits = 0;
        std::memcpy(&bits, &node.weight, sizeof bits);
        detail::put_u64(out, bits);
    }
    return out;
}

inline Vocabulary decode_vocab_native(std::string_view data) {
    detail::ByteReader r(data);
    if (r.bytes(4, "magic") != kVocabMagic) throw ParseError("bad magic: not a native vocabulary file");
    const auto version = r.uint(4, "version");
    if (version != kVocabVersion) throw ParseError("unsupported version " + std::to_string(version));
    Vocabulary vocab;
    vocab.k = r.uint(4, "k");
    vocab.levels = r.uint(4, "L");
    const auto strategy = r.uint(1, "strategy");
    if (strategy == kUnknownStrategy) {
        vocab.strategy.reset();
    } else if (strategy <= static_cast<std::uint8_t>(Strategy::GlobalHBRB)) {
        vocab.strategy = static_cast<Strategy>(strategy);
    } else {
        throw ParseError("unknown strategy code " + std::to_string(strategy));
    }
    vocab.descriptor_bits = r.uint(4, "descriptor_bits");
    if (vocab.descriptor_bits == 0 || vocab.descriptor_bits % 8 != 0) throw ParseError("bad descriptor_bits");
    const auto count = r.uint(8, "node_count");
    const std::size_t octets = vocab.descriptor_bits / 8;
    if (r.remaining() / (4 + 1 + octets + 8) < count) throw ParseError("truncated node table");
    vocab.nodes.push_back(VocabNode{});
    std::vector<char> leaf_flag{0};
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto parent = r.uint(4, "parent");
        const auto leaf = r.uint(1, "leaf flag");
        if (leaf > 1) throw ParseError("leaf flag must be 0 or 1");
        const auto raw = r.bytes(octets, "centroid");
        const auto wbits = r.uint(8, "weight");
        double weight = 0.0;
        std::memcpy(&weight, &wbits, sizeof weight);
        detail::attach_node(vocab, leaf_flag, parent, leaf == 1,
                            BinaryDescriptor(std::vector<std::uint8_t>(raw.begin(), raw.end())), weight, 0);
    }
    if (r.remaining() != 0) throw ParseError("trailing bytes after node table");
    return detail::finish_loaded(std::move(vocab), leaf_flag);
}

enum class VocabFormat { Text, Native };

/// `.txt` is text; anything else defaults to text unless it ends in `.hbv`.
inline VocabFormat format_for_path(const std::filesystem::path& path) {
    return path.extension() == ".hbv" ? VocabFormat::Native : VocabFormat::Text;
}

inline void write_vocab(const std::filesystem::path& path, const Vocabulary& vocab,
                        std::optional<VocabFormat> format = std::nullopt) {
    const auto f = format.value_or(format_for_path(path));
    write_file_atomic(path, f == VocabFormat::Native ? encode_vocab_native(vocab) : encode_vocab_text(vocab));
}

/// Reads either format, sniffing the native magic.
inline Vocabulary read_vocab(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    try {
        if (std::string_view(data).substr(0, 4) == kVocabMagic) return decode_vocab_native(data);
        return decode_vocab_text(data);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace hbrb
