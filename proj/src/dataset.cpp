#include "trafficbench/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace tb {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_commas(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.emplace_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

// strtod accepts "nan"/"inf"; those are rejected separately by the callers
bool parse_number(std::string_view tok, double& out) {
    std::string buf(tok);
    const char* begin = buf.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end != begin && *end == '\0';
}

std::string strip_quotes(std::string_view s) {
    if (s.size() >= 2 && ((s.front() == '\'' && s.back() == '\'') ||
                          (s.front() == '"' && s.back() == '"')))
        return std::string(s.substr(1, s.size() - 2));
    return std::string(s);
}

}  // namespace

void FeatureSchema::validate() const {
    if (feature_names.empty()) throw tb_error("schema: no features");
    if (class_names.empty()) throw tb_error("schema: no classes");
    if (feature_kinds.size() != feature_names.size())
        throw tb_error("schema: feature_kinds length does not match feature_names");
    std::set<std::string> names(feature_names.begin(), feature_names.end());
    if (names.size() != feature_names.size()) throw tb_error("schema: duplicate feature name");
    std::set<std::string> classes(class_names.begin(), class_names.end());
    if (classes.size() != class_names.size()) throw tb_error("schema: duplicate class name");
}

std::uint64_t FeatureSchema::fingerprint() const {
    std::uint64_t h = fnv1a("schema");
    for (const auto& n : feature_names) h = fnv1a(n, fnv1a("|", h));
    for (auto k : feature_kinds) {
        auto v = static_cast<std::uint32_t>(k);
        h = fnv1a_bytes(&v, sizeof v, h);
    }
    for (const auto& c : class_names) h = fnv1a(c, fnv1a("|", h));
    return h;
}

void Dataset::validate() const {
    schema.validate();
    if (features.rows == 0 || features.cols == 0) throw tb_error("dataset: empty");
    if (features.cols != schema.n_features())
        throw tb_error("dataset: feature count does not match schema");
    if (labels.size() != features.rows) throw tb_error("dataset: label count mismatch");
    for (double v : features.data)
        if (!std::isfinite(v)) throw tb_error("dataset: non-finite feature value");
    const int c = static_cast<int>(schema.n_classes());
    for (int y : labels)
        if (y < 0 || y >= c) throw tb_error("dataset: label index out of range");
}

std::uint64_t Dataset::fingerprint() const {
    std::uint64_t h = schema.fingerprint();
    h = fnv1a_bytes(features.data.data(), features.data.size() * sizeof(double), h);
    h = fnv1a_bytes(labels.data(), labels.size() * sizeof(int), h);
    return h;
}

Dataset parse_arff(std::istream& in, const std::optional<FeatureSchema>& schema_hint,
                   ParseStats* stats) {
    struct Attr {
        std::string name;
        bool nominal = false;
        std::vector<std::string> values;
    };
    std::vector<Attr> attrs;
    bool in_data = false;
    std::size_t line_no = 0;
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t dropped = 0;

    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '%') continue;

        if (!in_data) {
            std::string low = to_lower(line);
            if (low.rfind("@relation", 0) == 0) continue;
            if (low.rfind("@data", 0) == 0) {
                if (attrs.size() < 2)
                    throw parse_error(line_no, "@data before at least two @attribute lines");
                if (!attrs.back().nominal)
                    throw parse_error(line_no, "last attribute must be the nominal class");
                for (std::size_t i = 0; i + 1 < attrs.size(); ++i)
                    if (attrs[i].nominal)
                        throw parse_error(line_no, "nominal attribute '" + attrs[i].name +
                                                       "' is only supported in class position");
                in_data = true;
                continue;
            }
            if (low.rfind("@attribute", 0) == 0) {
                std::string_view rest = trim(line.substr(std::string("@attribute").size()));
                if (rest.empty()) throw parse_error(line_no, "@attribute without a name");
                Attr a;
                if (rest.front() == '\'' || rest.front() == '"') {
                    char q = rest.front();
                    auto close = rest.find(q, 1);
                    if (close == std::string_view::npos)
                        throw parse_error(line_no, "unterminated quoted attribute name");
                    a.name = std::string(rest.substr(1, close - 1));
                    rest = trim(rest.substr(close + 1));
                } else {
                    auto ws = rest.find_first_of(" \t");
                    if (ws == std::string_view::npos)
                        throw parse_error(line_no, "@attribute without a type");
                    a.name = std::string(rest.substr(0, ws));
                    rest = trim(rest.substr(ws));
                }
                if (rest.empty()) throw parse_error(line_no, "@attribute without a type");
                if (rest.front() == '{') {
                    if (rest.back() != '}')
                        throw parse_error(line_no, "unterminated nominal value list");
                    a.nominal = true;
                    for (auto& v : split_commas(rest.substr(1, rest.size() - 2)))
                        a.values.push_back(strip_quotes(v));
                    if (a.values.empty())
                        throw parse_error(line_no, "empty nominal value list");
                } else {
                    std::string type = to_lower(trim(rest));
                    if (type != "numeric" && type != "real" && type != "integer")
                        throw parse_error(line_no, "unsupported attribute type '" + type + "'");
                }
                attrs.push_back(std::move(a));
                continue;
            }
            throw parse_error(line_no, "unrecognized header line");
        }

        // data section
        auto fields = split_commas(line);
        if (fields.size() != attrs.size())
            throw parse_error(line_no, "row has " + std::to_string(fields.size()) +
                                           " values, expected " + std::to_string(attrs.size()));
        bool missing = false;
        for (const auto& f : fields)
            if (f == "?") {
                missing = true;
                break;
            }
        if (missing) {
            ++dropped;
            continue;
        }
        for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
            double v = 0;
            if (!parse_number(fields[i], v) || !std::isfinite(v))
                throw parse_error(line_no, "non-numeric value '" + fields[i] + "' in attribute '" +
                                               attrs[i].name + "'");
            values.push_back(v);
        }
        const auto& cls = attrs.back();
        std::string label = strip_quotes(fields.back());
        auto it = std::find(cls.values.begin(), cls.values.end(), label);
        if (it == cls.values.end())
            throw parse_error(line_no, "unknown nominal value '" + label + "'");
        labels.push_back(static_cast<int>(it - cls.values.begin()));
    }

    if (!in_data) throw parse_error(line_no, "missing @data section");
    if (labels.empty()) throw tb_error("empty dataset after dropping incomplete rows");

    Dataset ds;
    const std::size_t d = attrs.size() - 1;
    ds.schema.class_names = attrs.back().values;
    for (std::size_t i = 0; i < d; ++i) ds.schema.feature_names.push_back(attrs[i].name);
    ds.schema.feature_kinds.assign(d, FeatureKind::count);
    if (schema_hint) {
        if (schema_hint->feature_names != ds.schema.feature_names)
            throw tb_error("declared attributes do not match the schema hint");
        if (schema_hint->class_names != ds.schema.class_names)
            throw tb_error("declared classes do not match the schema hint");
        ds.schema.feature_kinds = schema_hint->feature_kinds;
    }
    ds.features.rows = labels.size();
    ds.features.cols = d;
    ds.features.data = std::move(values);
    ds.labels = std::move(labels);
    if (stats) stats->rows_dropped = dropped;
    ds.validate();
    return ds;
}

Dataset parse_csv(std::istream& in, const std::string& label_column, ParseStats* stats) {
    std::string raw;
    std::size_t line_no = 0;
    if (!std::getline(in, raw)) throw tb_error("missing header");
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    auto header = split_commas(raw);
    for (auto& h : header) h = strip_quotes(h);
    if (header.empty() || (header.size() == 1 && header[0].empty()))
        throw tb_error("missing header");

    auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end()) throw tb_error("unknown label column '" + label_column + "'");
    const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());

    std::vector<double> values;
    std::vector<int> labels;
    std::vector<std::string> class_names;  // first-appearance order
    std::unordered_map<std::string, int> class_index;
    std::size_t dropped = 0;

    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (trim(raw).empty()) continue;
        auto fields = split_commas(raw);
        if (fields.size() != header.size())
            throw parse_error(line_no, "row has " + std::to_string(fields.size()) +
                                           " values, expected " + std::to_string(header.size()));
        bool missing = false;
        for (const auto& f : fields)
            if (f == "?") {
                missing = true;
                break;
            }
        if (missing) {
            ++dropped;
            continue;
        }
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == label_idx) continue;
            double v = 0;
            if (!parse_number(fields[i], v) || !std::isfinite(v))
                throw parse_error(line_no, "non-numeric value '" + fields[i] + "' in column '" +
                                               header[i] + "'");
            values.push_back(v);
        }
        std::string label = strip_quotes(fields[label_idx]);
        auto [it, inserted] = class_index.try_emplace(label, static_cast<int>(class_names.size()));
        if (inserted) class_names.push_back(label);
        labels.push_back(it->second);
    }
    if (labels.empty()) throw tb_error("empty dataset");

    Dataset ds;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != label_idx) ds.schema.feature_names.push_back(header[i]);
    ds.schema.feature_kinds.assign(ds.schema.feature_names.size(), FeatureKind::count);
    ds.schema.class_names = std::move(class_names);
    ds.features.rows = labels.size();
    ds.features.cols = ds.schema.feature_names.size();
    ds.features.data = std::move(values);
    ds.labels = std::move(labels);
    if (stats) stats->rows_dropped = dropped;
    ds.validate();
    return ds;
}

void write_csv(const Dataset& ds, std::ostream& out) {
    for (const auto& name : ds.schema.feature_names) out << name << ',';
    out << "class\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        for (std::size_t j = 0; j < ds.n_features(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, j));
            out << buf << ',';
        }
        out << ds.schema.class_names[static_cast<std::size_t>(ds.labels[i])] << '\n';
    }
}

Dataset select_rows(const Dataset& ds, std::span<const std::size_t> indices) {
    Dataset out;
    out.schema = ds.schema;
    out.features = Matrix(indices.size(), ds.n_features());
    out.labels.resize(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        auto src = ds.features.row(indices[r]);
        std::copy(src.begin(), src.end(), out.features.row(r).begin());
        out.labels[r] = ds.labels[indices[r]];
    }
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw tb_error("train_fraction must be in (0, 1)");
    if (ds.n_rows() == 0) throw tb_error("cannot split an empty dataset");

    std::vector<std::size_t> train_idx, test_idx;
    if (spec.stratified) {
        std::vector<std::vector<std::size_t>> by_class(ds.n_classes());
        for (std::size_t i = 0; i < ds.n_rows(); ++i)
            by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            auto& rows = by_class[c];
            if (rows.empty()) continue;
            if (rows.size() < 2)
                throw tb_error("class '" + ds.schema.class_names[c] +
                               "' has fewer than 2 rows; cannot stratify");
            Rng rng(mix_seed(spec.seed, 0x517a17 + c));
            rng.shuffle(rows);
            const auto n_train = static_cast<std::size_t>(
                std::floor(static_cast<double>(rows.size()) * spec.train_fraction));
            train_idx.insert(train_idx.end(), rows.begin(), rows.begin() + n_train);
            test_idx.insert(test_idx.end(), rows.begin() + n_train, rows.end());
        }
    } else {
        std::vector<std::size_t> order(ds.n_rows());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(mix_seed(spec.seed, 0));
        rng.shuffle(order);
        const auto n_train = static_cast<std::size_t>(
            std::floor(static_cast<double>(order.size()) * spec.train_fraction));
        train_idx.assign(order.begin(), order.begin() + n_train);
        test_idx.assign(order.begin() + n_train, order.end());
    }
    // original row order within each side keeps downstream output stable
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    if (train_idx.empty() || test_idx.empty())
        throw tb_error("split produced an empty side; adjust train_fraction");
    return {select_rows(ds, train_idx), select_rows(ds, test_idx)};
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_informative + spec.n_noise < 1)
        throw tb_error("synthetic spec: need at least one feature");
    if (spec.n_informative < 1)
        throw tb_error("synthetic spec: n_informative must be >= 1");
    if (spec.n_classes < 2) throw tb_error("synthetic spec: need at least 2 classes");
    if (spec.n_per_class < 1) throw tb_error("synthetic spec: n_per_class must be >= 1");
    if (!(spec.class_separation > 0)) throw tb_error("synthetic spec: separation must be > 0");

    const std::size_t d = spec.n_informative + spec.n_noise;
    const std::size_t n = spec.n_per_class * spec.n_classes;
    Dataset ds;
    for (std::size_t j = 0; j < d; ++j) {
        ds.schema.feature_names.push_back((j < spec.n_informative ? "inf" : "noise") +
                                          std::to_string(j));
        ds.schema.feature_kinds.push_back(FeatureKind::count);
    }
    for (std::size_t c = 0; c < spec.n_classes; ++c)
        ds.schema.class_names.push_back("class_" + std::to_string(c));

    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    Rng rng(mix_seed(spec.seed, 0x5d47));
    std::size_t r = 0;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        for (std::size_t i = 0; i < spec.n_per_class; ++i, ++r) {
            ds.labels[r] = static_cast<int>(c);
            auto row = ds.features.row(r);
            for (std::size_t j = 0; j < d; ++j) {
                const double mean =
                    j < spec.n_informative ? static_cast<double>(c) * spec.class_separation : 0.0;
                row[j] = mean + rng.gaussian();
            }
        }
    }
    ds.validate();
    return ds;
}

Dataset filter_classes_by_prefix(const Dataset& ds, const std::string& prefix,
                                 bool keep_matching) {
    const std::string want = to_lower(prefix);
    std::vector<int> remap(ds.n_classes(), -1);
    FeatureSchema schema = ds.schema;
    schema.class_names.clear();
    for (std::size_t c = 0; c < ds.n_classes(); ++c) {
        const bool matches = to_lower(ds.schema.class_names[c]).rfind(want, 0) == 0;
        if (matches == keep_matching) {
            remap[c] = static_cast<int>(schema.class_names.size());
            schema.class_names.push_back(ds.schema.class_names[c]);
        }
    }
    if (schema.class_names.empty())
        throw tb_error("class filter '" + prefix + "' removed every class");

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        if (remap[static_cast<std::size_t>(ds.labels[i])] >= 0) keep.push_back(i);
    Dataset out = select_rows(ds, keep);
    out.schema = schema;
    for (auto& y : out.labels) y = remap[static_cast<std::size_t>(y)];
    out.validate();
    return out;
}

FeatureSchema iscx_schema() {
    FeatureSchema s;
    s.feature_names = {"duration",     "total-fiat",   "total-biat",  "min-fiat",
                       "min-biat",     "max-fiat",     "max-biat",    "mean-fiat",
                       "mean-biat",    "flowPktsPerSecond", "flowBytesPerSecond",
                       "min-flowiat",  "max-flowiat",  "mean-flowiat", "std-flowiat",
                       "min-active",   "mean-active",  "max-active",  "std-active",
                       "min-idle",     "mean-idle",    "max-idle",    "std-idle"};
    s.feature_kinds.assign(s.feature_names.size(), FeatureKind::time_micros);
    s.feature_kinds[9] = FeatureKind::rate;
    s.feature_kinds[10] = FeatureKind::rate;
    const char* apps[] = {"BROWSING", "CHAT", "STREAMING", "MAIL", "VOIP", "P2P", "FT"};
    for (const char* a : apps) s.class_names.emplace_back(a);
    for (const char* a : apps) s.class_names.emplace_back(std::string("VPN-") + a);
    return s;
}

FeatureSchema nims_schema() {
    FeatureSchema s;
    s.feature_names = {"min_fpktl",      "mean_fpktl",    "max_fpktl",      "std_fpktl",
                       "min_bpktl",      "mean_bpktl",    "max_bpktl",      "std_bpktl",
                       "min_fiat",       "mean_fiat",     "max_fiat",       "std_fiat",
                       "min_biat",       "mean_biat",     "max_biat",       "std_biat",
                       "duration",       "proto",         "total_fpackets", "total_fvolume",
                       "total_bpackets", "total_bvolume"};
    s.feature_kinds.assign(s.feature_names.size(), FeatureKind::count);
    for (std::size_t i = 8; i <= 16; ++i) s.feature_kinds[i] = FeatureKind::time_micros;
    s.class_names = {"LocalTunneling", "RemoteTunneling", "SCP", "SFTP", "X11", "Shell"};
    return s;
}

}  // namespace tb
