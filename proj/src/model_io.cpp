#include "trafficbench/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tb {

static_assert(std::endian::native == std::endian::little,
              "model container is defined little-endian");

namespace {

constexpr char kMagic[8] = {'T', 'B', 'M', 'D', 'L', '1', 0, 0};

struct Writer {
    std::string buf;
    void raw(const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void i64(std::int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void doubles(std::span<const double> v) { raw(v.data(), v.size() * sizeof(double)); }
};

struct Reader {
    std::string buf;
    std::size_t pos = 0;
    explicit Reader(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw tb_error("cannot open model file: " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        buf = ss.str();
    }
    void raw(void* p, std::size_t n) {
        if (n == 0) return;
        if (pos + n > buf.size()) throw tb_error("model file truncated");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, sizeof v);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, sizeof v);
        return v;
    }
    std::int64_t i64() {
        std::int64_t v;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        raw(&v, sizeof v);
        return v;
    }
    std::vector<double> doubles(std::size_t n) {
        std::vector<double> v(n);
        raw(v.data(), n * sizeof(double));
        return v;
    }
};

void write_header(Writer& w, ModelKind kind, std::uint64_t schema_fp, std::uint64_t n_features,
                  std::uint64_t n_classes) {
    w.raw(kMagic, sizeof kMagic);
    w.u32(static_cast<std::uint32_t>(kind));
    w.u32(0);
    w.u64(schema_fp);
    w.u64(n_features);
    w.u64(n_classes);
}

void write_dense(Writer& w, const DenseLayer& l) {
    w.u64(l.w.rows);
    w.u64(l.w.cols);
    w.doubles(l.w.data);
    w.doubles(l.b);
}

DenseLayer read_dense(Reader& r) {
    DenseLayer l;
    l.w.rows = r.u64();
    l.w.cols = r.u64();
    l.w.data = r.doubles(l.w.rows * l.w.cols);
    l.b = r.doubles(l.w.rows);
    return l;
}

}  // namespace

void save_model(const TreeModel& m, std::uint64_t schema_fp, const std::filesystem::path& path) {
    Writer w;
    write_header(w, ModelKind::c45, schema_fp, m.n_features_, m.n_classes_);
    w.u64(m.min_leaf);
    w.u64(m.nodes.size());
    for (const auto& nd : m.nodes) {
        w.i64(nd.feature);
        w.f64(nd.threshold);
        w.i64(nd.left);
        w.i64(nd.right);
        w.u64(nd.proba.size());
        w.doubles(nd.proba);
    }
    write_file_atomic(path, w.buf);
}

void save_model(const KnnModel& m, std::uint64_t schema_fp, const std::filesystem::path& path) {
    Writer w;
    write_header(w, ModelKind::knn, schema_fp, m.train_x.cols, m.n_classes_);
    w.u64(m.k);
    w.u64(m.train_x.rows);
    w.doubles(m.train_x.data);
    for (int y : m.train_y) w.i64(y);
    write_file_atomic(path, w.buf);
}

void save_model(const NeuralModel& m, std::uint64_t schema_fp, const std::filesystem::path& path) {
    ModelKind kind = ModelKind::mlp;
    if (m.kind == NeuralKind::cnn1d) kind = ModelKind::cnn1d;
    if (m.kind == NeuralKind::rnn) kind = ModelKind::rnn;
    Writer w;
    write_header(w, kind, schema_fp, m.input_dim, m.out_classes);
    w.u64(m.dense.size());
    for (const auto& l : m.dense) write_dense(w, l);
    w.u64(m.conv.size());
    for (const auto& l : m.conv) {
        w.u64(l.out_ch);
        w.u64(l.in_ch);
        w.u64(l.kernel);
        w.doubles(l.w);
        w.doubles(l.b);
    }
    w.u64(m.rec.size());
    for (const auto& l : m.rec) {
        w.u64(l.wx.rows);
        w.u64(l.wx.cols);
        w.doubles(l.wx.data);
        w.doubles(l.wh.data);
        w.doubles(l.b);
    }
    write_dense(w, m.head);
    write_file_atomic(path, w.buf);
}

LoadedModel load_model(const std::filesystem::path& path) {
    Reader r(path);
    char magic[8];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw tb_error("not a model file: " + path.string());
    const auto kind = static_cast<ModelKind>(r.u32());
    r.u32();  // reserved
    LoadedModel out;
    out.kind = kind;
    out.schema_fingerprint = r.u64();
    const std::uint64_t n_features = r.u64();
    const std::uint64_t n_classes = r.u64();

    switch (kind) {
        case ModelKind::c45: {
            auto m = std::make_unique<TreeModel>();
            m->n_features_ = n_features;
            m->n_classes_ = n_classes;
            m->min_leaf = r.u64();
            const std::uint64_t n = r.u64();
            m->nodes.resize(n);
            for (auto& nd : m->nodes) {
                nd.feature = static_cast<int>(r.i64());
                nd.threshold = r.f64();
                nd.left = static_cast<int>(r.i64());
                nd.right = static_cast<int>(r.i64());
                nd.proba = r.doubles(r.u64());
            }
            out.model = std::move(m);
            break;
        }
        case ModelKind::knn: {
            auto m = std::make_unique<KnnModel>();
            m->n_classes_ = n_classes;
            m->k = r.u64();
            m->train_x.rows = r.u64();
            m->train_x.cols = n_features;
            m->train_x.data = r.doubles(m->train_x.rows * n_features);
            m->train_y.resize(m->train_x.rows);
            for (auto& y : m->train_y) y = static_cast<int>(r.i64());
            out.model = std::move(m);
            break;
        }
        case ModelKind::mlp:
        case ModelKind::cnn1d:
        case ModelKind::rnn: {
            auto m = std::make_unique<NeuralModel>();
            m->kind = kind == ModelKind::mlp
                          ? NeuralKind::mlp
                          : (kind == ModelKind::cnn1d ? NeuralKind::cnn1d : NeuralKind::rnn);
            m->input_dim = n_features;
            m->out_classes = n_classes;
            m->dense.resize(r.u64());
            for (auto& l : m->dense) l = read_dense(r);
            m->conv.resize(r.u64());
            for (auto& l : m->conv) {
                l.out_ch = r.u64();
                l.in_ch = r.u64();
                l.kernel = r.u64();
                l.w = r.doubles(l.out_ch * l.in_ch * l.kernel);
                l.b = r.doubles(l.out_ch);
            }
            m->rec.resize(r.u64());
            for (auto& l : m->rec) {
                l.wx.rows = r.u64();
                l.wx.cols = r.u64();
                l.wx.data = r.doubles(l.wx.rows * l.wx.cols);
                l.wh.rows = l.wx.rows;
                l.wh.cols = l.wx.rows;
                l.wh.data = r.doubles(l.wx.rows * l.wx.rows);
                l.b = r.doubles(l.wx.rows);
            }
            m->head = read_dense(r);
            out.model = std::move(m);
            break;
        }
        default:
            throw tb_error("unknown model kind tag in " + path.string());
    }
    return out;
}

}  // namespace tb
