#include "bico/mitweet_convert.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>

#include "bico/common.hpp"

namespace bico {

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (quoted) throw DataError("csv: unterminated quoted field");
    if (any) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header, std::initializer_list<const char*> names) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto h = lower(trim(header[i]));
        for (const char* n : names) {
            if (h == n) return i;
        }
    }
    return std::nullopt;
}

// "R3" or "R3-..." for tag 'R' and index 3.
std::optional<std::size_t> find_facet_column(const std::vector<std::string>& header, char tag, std::size_t index) {
    const std::string exact = std::string(1, tag) + std::to_string(index);
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto h = trim(header[i]);
        if (h == exact || h.rfind(exact + "-", 0) == 0) return i;
    }
    return std::nullopt;
}

long parse_int(const std::string& raw, std::size_t line, const std::string& column) {
    const auto s = trim(raw);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || v != static_cast<double>(static_cast<long>(v))) throw std::invalid_argument(s);
        return static_cast<long>(v);
    } catch (const std::exception&) {
        throw DataError("csv row " + std::to_string(line) + ": column " + column + " is not an integer: '" + s + "'");
    }
}

}  // namespace

std::vector<Sample> mitweet_samples(std::istream& csv, const std::vector<std::string>& facet_codes,
                                    const std::string& id_prefix) {
    const auto rows = parse_csv(csv);
    if (rows.empty()) throw DataError("csv: empty file");
    const auto& header = rows.front();
    const auto id_col = find_column(header, {"id", "tweet_id"});
    const auto topic_col = find_column(header, {"topic"});
    const auto text_col = find_column(header, {"tweet", "text"});
    if (!text_col) throw DataError("csv: no tweet/text column");
    std::vector<std::size_t> rel_cols, ide_cols;
    for (std::size_t f = 0; f < facet_codes.size(); ++f) {
        const auto r = find_facet_column(header, 'R', f + 1);
        const auto i = find_facet_column(header, 'I', f + 1);
        if (!r || !i) {
            throw DataError("csv: missing relevance/ideology column for facet " + std::to_string(f + 1) + " (" +
                            facet_codes[f] + ")");
        }
        rel_cols.push_back(*r);
        ide_cols.push_back(*i);
    }

    std::vector<Sample> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        if (row.size() < header.size()) {
            throw DataError("csv row " + std::to_string(r + 1) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(row.size()));
        }
        Sample s;
        s.id = id_col ? trim(row[*id_col]) : id_prefix + "-" + std::to_string(r);
        if (id_col && s.id.empty()) throw DataError("csv row " + std::to_string(r + 1) + ": empty id");
        if (topic_col) s.topic = trim(row[*topic_col]);
        s.text = row[*text_col];
        s.relevance.assign(facet_codes.size(), kUnrelated);
        s.ideology.assign(facet_codes.size(), std::nullopt);
        for (std::size_t f = 0; f < facet_codes.size(); ++f) {
            const long rel = parse_int(row[rel_cols[f]], r + 1, header[rel_cols[f]]);
            if (rel != 0 && rel != 1) {
                throw DataError("csv row " + std::to_string(r + 1) + ": relevance must be 0 or 1");
            }
            const auto raw = trim(row[ide_cols[f]]);
            const long ide = raw.empty() ? -1 : parse_int(raw, r + 1, header[ide_cols[f]]);
            if (ide < -1 || ide > 2) {
                throw DataError("csv row " + std::to_string(r + 1) + ": ideology must be -1, 0, 1 or 2");
            }
            if (rel == 1) {
                s.relevance[f] = kRelated;
                if (ide >= 0) s.ideology[f] = kStances[static_cast<std::size_t>(ide)];
            } else if (ide >= 0) {
                throw DataError("csv row " + std::to_string(r + 1) + ": ideology label on unrelated facet " +
                                facet_codes[f]);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

ConvertSummary convert_mitweet(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                               const std::vector<std::string>& facet_codes) {
    if (!std::filesystem::is_directory(in_dir)) throw DataError("not a directory: " + in_dir.string());
    std::optional<std::filesystem::path> files[3];
    const std::vector<std::string> tags[3] = {{"train"}, {"val", "dev"}, {"test"}};
    std::vector<std::filesystem::path> csvs;
    for (const auto& entry : std::filesystem::directory_iterator(in_dir)) {
        if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".csv") csvs.push_back(entry.path());
    }
    std::sort(csvs.begin(), csvs.end());
    for (const auto& p : csvs) {
        const auto name = lower(p.filename().string());
        for (std::size_t k = 0; k < 3; ++k) {
            const bool hit = std::any_of(tags[k].begin(), tags[k].end(),
                                         [&](const std::string& t) { return name.find(t) != std::string::npos; });
            if (!hit) continue;
            if (files[k]) throw DataError("ambiguous split files: " + files[k]->string() + " and " + p.string());
            files[k] = p;
        }
    }
    for (std::size_t k = 0; k < 3; ++k) {
        if (!files[k]) throw DataError("no " + tags[k].front() + " CSV found in " + in_dir.string());
    }

    std::filesystem::create_directories(out_dir);
    const char* names[3] = {"train", "val", "test"};
    std::vector<Sample> all;
    ConvertSummary summary;
    for (std::size_t k = 0; k < 3; ++k) {
        std::ifstream in(*files[k], std::ios::binary);
        if (!in) throw DataError("cannot open " + files[k]->string());
        auto samples = mitweet_samples(in, facet_codes, names[k]);
        write_manifest(out_dir / (std::string(names[k]) + ".jsonl"), samples, facet_codes);
        (k == 0 ? summary.train : k == 1 ? summary.val : summary.test) = samples.size();
        all.insert(all.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
    }
    write_manifest(out_dir / "manifest.jsonl", all, facet_codes);
    return summary;
}

}  // namespace bico
