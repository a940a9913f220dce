#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "bico/data_io.hpp"
#include "oracles.hpp"

using namespace bico;

namespace {

const std::vector<std::string> kCodes{"EP", "MF"};

std::vector<Sample> parse(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in, kCodes);
}

std::string bytes_of(const EmbeddingStore& s) {
    std::ostringstream out;
    write_embeddings(out, s);
    return out.str();
}

EmbeddingStore from_bytes(const std::string& b) {
    std::istringstream in(b);
    return parse_embeddings(in);
}

std::vector<Sample> topic_samples() {
    std::vector<Sample> out;
    const char* topics[] = {"CHR", "GF", "Tax", "CHR", "Gun", "GF", "Tax", "Gun", "CHR"};
    for (std::size_t i = 0; i < 9; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        s.topic = topics[i];
        s.relevance = {kUnrelated, kUnrelated};
        s.ideology = {std::nullopt, std::nullopt};
        out.push_back(s);
    }
    return out;
}

bool is_partition(const Split& s, std::size_t n) {
    std::vector<std::size_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    if (all.size() != n) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (all[i] != i) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("manifest parsing") {
    const auto ok = parse(
        R"({"id":"a","text":"t","topic":"T","relevance":{"EP":"Related","MF":"Unrelated"},"ideology":{"EP":"Left"}})"
        "\n\n"
        R"({"id":"b","topic":"T","relevance":{"EP":"Unrelated","MF":"Related"},"ideology":{}})"
        "\n");
    REQUIRE(ok.size() == 2);
    CHECK(ok[0].related(0));
    CHECK(ok[0].ideology[0] == Stance::Left);
    CHECK_FALSE(ok[0].ideology[1]);
    CHECK(ok[1].related(1));
    CHECK_FALSE(ok[1].ideology[1]);  // related without a label is allowed

    const std::string rel = R"("relevance":{"EP":"Related","MF":"Unrelated"})";
    CHECK_THROWS_AS(parse(R"({"id":"a","topic":"T","relevance":{"EP":"Unrelated","MF":"Unrelated"},"ideology":{"EP":"Left"}})"),
                    DataError);
    CHECK_THROWS_AS(parse(R"({"id":"a","topic":"T",)" + rel + R"(,"ideology":{"XX":"Left"}})"), DataError);
    CHECK_THROWS_AS(parse(R"({"id":"a","topic":"T",)" + rel + R"(,"ideology":{"EP":"left"}})"), DataError);
    CHECK_THROWS_AS(parse(R"({"id":"a","topic":"T","relevance":{"EP":"Related"}})"), DataError);
    CHECK_THROWS_AS(parse(R"({"id":"a","topic":"T","relevance":{"EP":"Maybe","MF":"Related"}})"), DataError);
    CHECK_THROWS_AS(parse(R"({"topic":"T",)" + rel + "}"), DataError);
    CHECK_THROWS_AS(parse("{not json"), DataError);
    CHECK_THROWS_AS(parse(R"({"id":"a","topic":"T",)" + rel + "}\n" + R"({"id":"a","topic":"T",)" + rel + "}"),
                    DataError);
}

TEST_CASE("manifest write/read round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "bico_manifest_rt";
    std::filesystem::create_directories(dir);
    auto samples = topic_samples();
    samples[2].relevance[1] = kRelated;
    samples[2].ideology[1] = Stance::Right;
    samples[2].text = "quoted \"text\"";
    write_manifest(dir / "m.jsonl", samples, kCodes);
    const auto back = read_manifest(dir / "m.jsonl", kCodes);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].id == samples[i].id);
        CHECK(back[i].topic == samples[i].topic);
        CHECK(back[i].text == samples[i].text);
        CHECK(back[i].relevance == samples[i].relevance);
        CHECK(back[i].ideology == samples[i].ideology);
    }
    CHECK_THROWS_AS(read_manifest(dir / "missing.jsonl", kCodes), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("embedding store") {
    EmbeddingStore s(4);
    s.insert("EP", Matrix(1, 4, {1, 2, 3, 4}));
    CHECK(s.size() == 1);
    CHECK_THROWS_AS(s.insert("EP", Matrix(1, 4)), DataError);
    CHECK_THROWS_AS(s.insert("x", Matrix(1, 3)), DataError);
    CHECK_THROWS_AS(s.insert("y", Matrix(0, 4)), DataError);
    CHECK(s.find("nope") == nullptr);
    CHECK_THROWS_AS(s.at("nope"), DataError);

    const auto one = from_bytes(bytes_of(s));
    CHECK(one.size() == 1);
    CHECK(one.dim() == 4);
    CHECK(one.at("EP").data == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("embedding binary round trip and layout") {
    std::mt19937_64 rng(1);
    EmbeddingStore s(6);
    for (int i = 0; i < 10; ++i) {
        const std::size_t rows = 1 + i % 3;
        std::vector<double> v = oracle::random_vec(rows * 6, rng);
        for (double& x : v) x = static_cast<float>(x);  // representable values
        s.insert("key-" + std::to_string(i), Matrix(rows, 6, v));
    }
    const std::string b = bytes_of(s);
    CHECK(b.substr(0, 8) == "BICOEMB1");
    std::uint32_t count = 0, dim = 0;
    std::memcpy(&count, b.data() + 8, 4);
    std::memcpy(&dim, b.data() + 12, 4);
    CHECK(count == 10);
    CHECK(dim == 6);
    const auto back = from_bytes(b);
    CHECK(back.keys() == s.keys());
    for (const auto& k : s.keys()) CHECK(back.at(k) == s.at(k));
    CHECK(bytes_of(back) == b);

    std::string bad = b;
    bad[3] = 'X';
    CHECK_THROWS_AS(from_bytes(bad), DataError);
    CHECK_THROWS_AS(from_bytes(b.substr(0, b.size() - 3)), DataError);
    CHECK_THROWS_AS(from_bytes(b + "z"), DataError);
    CHECK_THROWS_AS(read_embeddings("/nonexistent/file.bin"), DataError);
}

TEST_CASE("duplicate key in a file is an error") {
    // write two stores' records under one header by hand
    EmbeddingStore a(2);
    a.insert("EP", Matrix(1, 2, {1, 2}));
    std::string one = bytes_of(a);
    const std::string record = one.substr(16);
    std::string two = one.substr(0, 8);
    const std::uint32_t count = 2, dim = 2;
    two.append(reinterpret_cast<const char*>(&count), 4);
    two.append(reinterpret_cast<const char*>(&dim), 4);
    two += record + record;
    CHECK_THROWS_AS(from_bytes(two), DataError);
}

TEST_CASE("concept embeddings from the store") {
    EmbeddingStore s(2);
    s.insert("EP", Matrix(1, 2, {1, 0}));
    for (Stance st : kStances) s.insert(concept_key("EP", st), Matrix(1, 2, {0, 1}));
    const auto emb = s.concept_embeddings({"EP"});
    CHECK(emb.size() == 4);
    CHECK(emb.at("EP:Right") == std::vector<double>{0, 1});
    CHECK_THROWS_AS(s.concept_embeddings({"EP", "MF"}), DataError);
}

TEST_CASE("splits") {
    const auto samples = topic_samples();
    SplitSpec topic;
    topic.mode = SplitMode::Topic;
    topic.holdout = {"CHR", "GF"};
    topic.val_ratio = 0.25;
    const Split t = split_dataset(samples, topic);
    CHECK(t.test == std::vector<std::size_t>{0, 1, 3, 5, 8});
    CHECK(t.val.size() == 1);
    CHECK(is_partition(t, samples.size()));
    topic.holdout = {"Moon"};
    CHECK_THROWS_AS(split_dataset(samples, topic), DataError);

    SplitSpec all;
    all.ratios = {1.0, 0.0, 0.0};
    const Split a = split_dataset(samples, all);
    CHECK(a.train.size() == samples.size());
    CHECK(a.val.empty());
    CHECK(a.test.empty());

    SplitSpec r;
    r.seed = 42;
    std::vector<Sample> many;
    for (int i = 0; i < 100; ++i) many.push_back(samples[i % samples.size()]);
    const Split x = split_dataset(many, r), y = split_dataset(many, r);
    CHECK(x.train == y.train);
    CHECK(x.test == y.test);
    CHECK(x.train.size() == 80);
    CHECK(x.val.size() == 10);
    CHECK(is_partition(x, many.size()));
    r.seed = 43;
    CHECK(split_dataset(many, r).train != x.train);
}

TEST_CASE("synthetic generator") {
    const std::vector<std::string> codes{"AA", "BB", "CC"};
    SynthConfig cfg;
    cfg.n_per_class = 4;
    cfg.dim = 16;
    cfg.sigma = 0.0;
    const SynthData exact = synth_generate(codes, cfg);
    CHECK(exact.samples.size() == 3 * 3 * 4);
    for (const Sample& s : exact.samples) {
        std::size_t f = 0;
        while (!s.related(f)) ++f;
        const auto& center = exact.ideology_centers[f][static_cast<std::size_t>(*s.ideology[f])];
        CHECK(exact.store.at(ideology_key(s.id, codes[f])).data == center);
        CHECK(std::count(s.relevance.begin(), s.relevance.end(), kRelated) == 1);
    }
    // concepts are the centers
    CHECK(exact.store.at("BB:Center").data == exact.ideology_centers[1][1]);
    CHECK(exact.store.at("CC").data == exact.facet_centers[2]);

    cfg.sigma = 0.05;
    cfg.n_per_class = 50;
    cfg.dim = 32;
    const SynthData a = synth_generate(codes, cfg), b = synth_generate(codes, cfg);
    for (const auto& k : a.store.keys()) CHECK(a.store.at(k) == b.store.at(k));

    // nearest center recovers every ideology label
    std::size_t correct = 0;
    for (const Sample& s : a.samples) {
        std::size_t f = 0;
        while (!s.related(f)) ++f;
        const auto v = a.store.at(ideology_key(s.id, codes[f])).row(0);
        std::size_t best = 0;
        for (std::size_t c = 1; c < 3; ++c) {
            if (oracle::cosine(v, a.ideology_centers[f][c]) > oracle::cosine(v, a.ideology_centers[f][best])) best = c;
        }
        correct += best == static_cast<std::size_t>(*s.ideology[f]);
    }
    CHECK(correct == a.samples.size());
    CHECK_THROWS_AS(synth_generate(codes, SynthConfig{1, 7}), std::invalid_argument);
}

TEST_CASE("batch iteration") {
    const std::vector<std::string> codes{"AA", "BB"};
    SynthConfig cfg;
    cfg.n_per_class = 22;  // 2 * 3 * 22 = 132
    cfg.dim = 4;
    SynthData d = synth_generate(codes, cfg);
    std::vector<std::size_t> idx(130);
    for (std::size_t i = 0; i < 130; ++i) idx[i] = i;
    const BatchIterator it(d.samples, idx, d.store, codes, 64, 9, Subtask::Relevance);
    const auto e0 = it.epoch(0);
    REQUIRE(e0.size() == 3);
    CHECK(e0[0].size() == 64);
    CHECK(e0[1].size() == 64);
    CHECK(e0[2].size() == 2);
    std::set<std::size_t> seen;
    for (const auto& b : e0) {
        for (const auto& item : b) seen.insert(item.sample);
    }
    CHECK(seen.size() == 130);
    CHECK(it.epoch(0)[0][0].sample == e0[0][0].sample);
    const auto e1 = it.epoch(1);
    bool differs = false;
    for (std::size_t i = 0; i < 64; ++i) differs |= e1[0][i].sample != e0[0][i].sample;
    CHECK(differs);

    // a sample related to both facets expands to two ideology items
    d.samples[0].relevance = {kRelated, kRelated};
    d.samples[0].ideology = {Stance::Left, Stance::Right};
    d.store.insert(ideology_key(d.samples[0].id, "BB"), Matrix(1, 4, {1, 0, 0, 0}));
    const BatchIterator ideo(d.samples, {0, 1}, d.store, codes, 64, 9, Subtask::Ideology);
    CHECK(ideo.item_count() == 3);
    CHECK(eval_items(d.samples, {0, 1}, Subtask::Ideology).size() == 3);
    CHECK(eval_items(d.samples, {0, 1}, Subtask::Relevance).size() == 2);

    EmbeddingStore empty(4);
    CHECK_THROWS_AS(BatchIterator(d.samples, idx, empty, codes, 64, 9, Subtask::Relevance), DataError);
    CHECK_THROWS_AS(BatchIterator(d.samples, idx, empty, codes, 64, 9, Subtask::Ideology), DataError);
}
