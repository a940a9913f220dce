#include "bico/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace bico {

namespace {

std::optional<int> parse_relevance(const std::string& s) {
    if (s == "Related") return kRelated;
    if (s == "Unrelated") return kUnrelated;
    return std::nullopt;
}

std::string line_ref(std::size_t line) { return "manifest line " + std::to_string(line) + ": "; }

}  // namespace

std::vector<Sample> parse_manifest(std::istream& in, const std::vector<std::string>& facet_codes) {
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < facet_codes.size(); ++i) position[facet_codes[i]] = i;

    std::vector<Sample> out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(line_ref(lineno) + "invalid JSON: " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
            throw DataError(line_ref(lineno) + "missing string field \"id\"");
        }
        Sample s;
        s.id = j["id"].get<std::string>();
        if (!seen.insert(s.id).second) {
            throw DataError(line_ref(lineno) + "duplicate id '" + s.id + "'");
        }
        if (j.contains("text") && j["text"].is_string()) s.text = j["text"].get<std::string>();
        if (j.contains("topic") && j["topic"].is_string()) s.topic = j["topic"].get<std::string>();

        s.relevance.assign(facet_codes.size(), -1);
        s.ideology.assign(facet_codes.size(), std::nullopt);
        if (!j.contains("relevance") || !j["relevance"].is_object()) {
            throw DataError(line_ref(lineno) + "missing object \"relevance\"");
        }
        for (const auto& [code, label] : j["relevance"].items()) {
            const auto it = position.find(code);
            if (it == position.end()) throw DataError(line_ref(lineno) + "unknown facet code '" + code + "'");
            const auto r = label.is_string() ? parse_relevance(label.get<std::string>()) : std::nullopt;
            if (!r) throw DataError(line_ref(lineno) + "unknown relevance label for '" + code + "'");
            s.relevance[it->second] = *r;
        }
        for (std::size_t f = 0; f < facet_codes.size(); ++f) {
            if (s.relevance[f] < 0) {
                throw DataError(line_ref(lineno) + "no relevance label for facet '" + facet_codes[f] + "'");
            }
        }
        if (j.contains("ideology")) {
            if (!j["ideology"].is_object()) throw DataError(line_ref(lineno) + "\"ideology\" must be an object");
            for (const auto& [code, label] : j["ideology"].items()) {
                const auto it = position.find(code);
                if (it == position.end()) throw DataError(line_ref(lineno) + "unknown facet code '" + code + "'");
                const auto st = label.is_string() ? parse_stance(label.get<std::string>()) : std::nullopt;
                if (!st) throw DataError(line_ref(lineno) + "unknown ideology label for '" + code + "'");
                if (!s.related(it->second)) {
                    throw DataError(line_ref(lineno) + "ideology label on unrelated facet '" + code + "'");
                }
                s.ideology[it->second] = *st;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> read_manifest(const std::filesystem::path& path, const std::vector<std::string>& facet_codes) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path.string());
    return parse_manifest(in, facet_codes);
}

void write_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples,
                    const std::vector<std::string>& facet_codes) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest " + path.string());
    for (const Sample& s : samples) {
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["text"] = s.text;
        j["topic"] = s.topic;
        j["relevance"] = nlohmann::ordered_json::object();
        j["ideology"] = nlohmann::ordered_json::object();
        for (std::size_t f = 0; f < facet_codes.size(); ++f) {
            j["relevance"][facet_codes[f]] = s.related(f) ? "Related" : "Unrelated";
            if (s.ideology[f]) j["ideology"][facet_codes[f]] = std::string(stance_name(*s.ideology[f]));
        }
        out << j.dump() << '\n';
    }
}

std::string relevance_key(const std::string& id) { return id; }

std::string ideology_key(const std::string& id, const std::string& facet_code) { return id + "@" + facet_code; }

void EmbeddingStore::insert(std::string key, Matrix value) {
    if (value.rows == 0) throw DataError("embedding '" + key + "' has no rows");
    if (value.cols != dim_) {
        throw DataError("embedding '" + key + "' has width " + std::to_string(value.cols) + ", store dim is " +
                        std::to_string(dim_));
    }
    if (!index_.emplace(key, keys_.size()).second) {
        throw DataError("duplicate embedding key '" + key + "'");
    }
    keys_.push_back(std::move(key));
    values_.push_back(std::move(value));
}

const Matrix* EmbeddingStore::find(const std::string& key) const {
    const auto it = index_.find(key);
    return it == index_.end() ? nullptr : &values_[it->second];
}

const Matrix& EmbeddingStore::at(const std::string& key) const {
    const Matrix* m = find(key);
    if (!m) throw DataError("missing embedding key '" + key + "'");
    return *m;
}

ConceptEmbeddings EmbeddingStore::concept_embeddings(const std::vector<std::string>& facet_codes) const {
    ConceptEmbeddings out;
    auto take = [&](const std::string& key) {
        const Matrix& m = at(key);
        if (m.rows != 1) throw DataError("concept embedding '" + key + "' must have exactly one row");
        out[key] = m.data;
    };
    for (const auto& code : facet_codes) {
        take(concept_key(code));
        for (Stance s : kStances) take(concept_key(code, s));
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'B', 'I', 'C', 'O', 'E', 'M', 'B', '1'};

void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw DataError(std::string("embedding file truncated while reading ") + what);
    }
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    read_exact(in, reinterpret_cast<char*>(b), 4, what);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > 0xffffffffu) throw DataError(std::string("embedding file: ") + what + " exceeds 32 bits");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

EmbeddingStore parse_embeddings(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError("embedding file: bad magic (expected BICOEMB1)");
    }
    const std::uint32_t count = read_u32(in, "record count");
    const std::uint32_t dim = read_u32(in, "dimension");
    if (dim == 0) throw DataError("embedding file: dimension is zero");
    EmbeddingStore store(dim);
    std::vector<char> bytes;
    for (std::uint32_t r = 0; r < count; ++r) {
        const std::uint32_t key_len = read_u32(in, "key length");
        std::string key(key_len, '\0');
        read_exact(in, key.data(), key_len, "key");
        const std::uint32_t rows = read_u32(in, "row count");
        if (rows == 0) throw DataError("embedding file: record '" + key + "' has zero rows");
        const std::size_t n = static_cast<std::size_t>(rows) * dim;
        bytes.resize(n * 4);
        read_exact(in, bytes.data(), bytes.size(), "values");
        Matrix m(rows, dim);
        for (std::size_t i = 0; i < n; ++i) {
            const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + 4 * i);
            const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
                                    static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
            m.data[i] = static_cast<double>(std::bit_cast<float>(u));
        }
        store.insert(std::move(key), std::move(m));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError("embedding file: trailing bytes after the last record");
    }
    return store;
}

EmbeddingStore read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embedding file " + path.string());
    return parse_embeddings(in);
}

void write_embeddings(std::ostream& out, const EmbeddingStore& store) {
    out.write(kMagic, 8);
    write_u32(out, checked_u32(store.size(), "record count"));
    write_u32(out, checked_u32(store.dim(), "dimension"));
    for (const auto& key : store.keys()) {
        const Matrix& m = store.at(key);
        write_u32(out, checked_u32(key.size(), "key length"));
        out.write(key.data(), static_cast<std::streamsize>(key.size()));
        write_u32(out, checked_u32(m.rows, "row count"));
        for (double v : m.data) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write embedding file " + path.string());
    write_embeddings(out, store);
    if (!out) throw DataError("write failed for " + path.string());
}

Split split_dataset(const std::vector<Sample>& samples, const SplitSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    Split split;
    std::vector<std::size_t> pool;
    if (spec.mode == SplitMode::Topic) {
        if (spec.holdout.empty()) throw std::invalid_argument("split: topic mode needs at least one holdout topic");
        std::set<std::string> present;
        for (const Sample& s : samples) present.insert(s.topic);
        const std::set<std::string> holdout(spec.holdout.begin(), spec.holdout.end());
        for (const auto& t : holdout) {
            if (!present.count(t)) throw DataError("split: unknown holdout topic '" + t + "'");
        }
        for (std::size_t i = 0; i < samples.size(); ++i) {
            (holdout.count(samples[i].topic) ? split.test : pool).push_back(i);
        }
        if (!(spec.val_ratio >= 0.0 && spec.val_ratio <= 1.0)) {
            throw std::invalid_argument("split: validation ratio must lie in [0, 1]");
        }
        std::shuffle(pool.begin(), pool.end(), rng);
        const auto n_val = static_cast<std::size_t>(std::llround(spec.val_ratio * static_cast<double>(pool.size())));
        split.val.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val));
        split.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_val), pool.end());
    } else {
        double total = 0.0;
        for (double r : spec.ratios) {
            if (!(r >= 0.0)) throw std::invalid_argument("split: ratios must be non-negative");
            total += r;
        }
        if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split: ratios must sum to 1");
        pool.resize(samples.size());
        std::iota(pool.begin(), pool.end(), 0);
        std::shuffle(pool.begin(), pool.end(), rng);
        const double n = static_cast<double>(pool.size());
        const auto n_train = std::min(pool.size(), static_cast<std::size_t>(std::llround(spec.ratios[0] * n)));
        const auto n_val =
            std::min(pool.size() - n_train, static_cast<std::size_t>(std::llround(spec.ratios[1] * n)));
        const auto a = pool.begin() + static_cast<std::ptrdiff_t>(n_train);
        const auto b = a + static_cast<std::ptrdiff_t>(n_val);
        split.train.assign(pool.begin(), a);
        split.val.assign(a, b);
        split.test.assign(b, pool.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

namespace {

std::vector<double> gaussian(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    return v;
}

void normalize(std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
}

// Unit vectors, mutually orthogonal while count <= dim (Gram-Schmidt on
// Gaussian draws); beyond that only unit-norm.
std::vector<std::vector<double>> unit_vectors(std::size_t count, std::size_t dim, std::mt19937_64& rng) {
    std::vector<std::vector<double>> out;
    while (out.size() < count) {
        auto v = gaussian(dim, rng);
        if (out.size() < dim) {
            for (const auto& u : out) {
                double p = 0.0;
                for (std::size_t i = 0; i < dim; ++i) p += u[i] * v[i];
                for (std::size_t i = 0; i < dim; ++i) v[i] -= p * u[i];
            }
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm < 1e-12) continue;
        normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<double> jitter(const std::vector<double>& center, double sigma, std::mt19937_64& rng) {
    if (sigma == 0.0) return center;
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<double> v(center);
    for (double& x : v) x += n(rng);
    normalize(v);
    return v;
}

Matrix row_matrix(const std::vector<double>& v) { return Matrix(1, v.size(), v); }

}  // namespace

SynthData synth_generate(const std::vector<std::string>& facet_codes, const SynthConfig& config) {
    if (config.dim == 0 || config.dim % 2 != 0) throw std::invalid_argument("synth: dimension must be even");
    if (!(config.sigma >= 0.0)) throw std::invalid_argument("synth: sigma must be non-negative");
    if (config.token_rows == 0) throw std::invalid_argument("synth: token_rows must be positive");
    if (config.topics == 0) throw std::invalid_argument("synth: topics must be positive");

    std::mt19937_64 rng(config.seed);
    const std::size_t nf = facet_codes.size();
    SynthData data;
    data.store = EmbeddingStore(config.dim);

    auto shared = unit_vectors(nf + 1, config.dim, rng);
    data.background = shared.back();
    shared.pop_back();
    data.facet_centers = std::move(shared);
    for (std::size_t f = 0; f < nf; ++f) {
        const auto c = unit_vectors(3, config.dim, rng);
        data.ideology_centers.push_back({c[0], c[1], c[2]});
        data.store.insert(concept_key(facet_codes[f]), row_matrix(data.facet_centers[f]));
        for (Stance s : kStances) {
            data.store.insert(concept_key(facet_codes[f], s),
                              row_matrix(data.ideology_centers[f][static_cast<std::size_t>(s)]));
        }
    }

    const std::size_t near = (config.token_rows + 1) / 2;
    for (std::size_t f = 0; f < nf; ++f) {
        for (Stance s : kStances) {
            for (std::size_t i = 0; i < config.n_per_class; ++i) {
                Sample sample;
                sample.id = "syn-" + facet_codes[f] + "-" + std::string(stance_name(s)) + "-" + std::to_string(i);
                sample.topic = "T" + std::to_string(i % config.topics);
                sample.relevance.assign(nf, kUnrelated);
                sample.ideology.assign(nf, std::nullopt);
                sample.relevance[f] = kRelated;
                sample.ideology[f] = s;

                Matrix tokens(config.token_rows, config.dim);
                for (std::size_t r = 0; r < config.token_rows; ++r) {
                    const auto& c = r < near ? data.facet_centers[f] : data.background;
                    const auto v = jitter(c, config.sigma, rng);
                    std::copy(v.begin(), v.end(), tokens.row(r).begin());
                }
                data.store.insert(relevance_key(sample.id), std::move(tokens));
                data.store.insert(ideology_key(sample.id, facet_codes[f]),
                                  row_matrix(jitter(data.ideology_centers[f][static_cast<std::size_t>(s)],
                                                    config.sigma, rng)));
                data.samples.push_back(std::move(sample));
            }
        }
    }
    return data;
}

namespace {

std::vector<BatchItem> expand(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                              Subtask subtask) {
    std::vector<BatchItem> items;
    for (std::size_t i : indices) {
        const Sample& s = samples.at(i);
        if (subtask == Subtask::Relevance) {
            items.push_back({i, 0});
            continue;
        }
        for (std::size_t f = 0; f < s.ideology.size(); ++f) {
            if (s.ideology[f]) items.push_back({i, f});
        }
    }
    return items;
}

}  // namespace

std::vector<BatchItem> eval_items(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                                  Subtask subtask) {
    return expand(samples, indices, subtask);
}

BatchIterator::BatchIterator(const std::vector<Sample>& samples, std::vector<std::size_t> indices,
                             const EmbeddingStore& store, const std::vector<std::string>& facet_codes,
                             std::size_t batch_size, std::uint64_t seed, Subtask subtask)
    : items_(expand(samples, indices, subtask)), batch_size_(batch_size), seed_(seed) {
    if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
    for (const BatchItem& item : items_) {
        const std::string& id = samples[item.sample].id;
        store.at(subtask == Subtask::Relevance ? relevance_key(id) : ideology_key(id, facet_codes.at(item.facet)));
    }
}

std::vector<Batch> BatchIterator::epoch(std::size_t e) const {
    std::vector<BatchItem> order(items_);
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(e >> 32)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size_) {
        const std::size_t end = std::min(order.size(), start + batch_size_);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

}  // namespace bico
